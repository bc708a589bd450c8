"""Run configuration: a flat key-value document mirrored by :class:`RunConfig`.

Config files are JSON or YAML mappings whose keys are ``RunConfig`` field
names.  Lists become tuples; sizes are ``[W, H]`` pairs or ``"WxH"`` strings.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from ..corruptions import KINDS
from ..maskgen import POSITIONS

SCHEMA_VERSION = 1
MASK_MODES = ("bernoulli", "exact", "static")
AGGREGATIONS = ("per-image", "pooled")
# keys that change where or how fast a run happens but never its results
_UNHASHED = ("out", "workers")


@dataclass(frozen=True)
class RunConfig:
    """Everything a benchmark run depends on.

    ``dataset`` is a directory in the ``images/`` + ``labels/`` layout, or one
    of the built-in names ``synthetic``, ``low-margin`` and ``conflict``.
    ``resize`` is ``"auto"`` (Cityscapes-shaped inputs go to 512x1024,
    anything else is kept), ``None`` to keep every size, or ``(H, W)``.
    Patch and mask sizes are ``(w, h)``.  ``mask_mode`` drives natural
    runs and ``attack_mask_mode`` adversarial runs.
    """

    dataset: str = "synthetic"
    synthetic_images: int = 8
    synthetic_size: int = 8
    synthetic_contrast: float = 0.2
    synthetic_noise: float = 0.01
    resize: Any = "auto"
    num_classes: int = 3
    models: tuple[str, ...] = ("toy-local", "toy-global")
    corruptions: tuple[str, ...] = ("gaussian_noise",)
    severities: tuple[int, ...] = (3,)
    ratios: tuple[float, ...] = (0.5,)
    patch_size: tuple[int, int] = (2, 2)
    mask_mode: str = "bernoulli"
    attack_mask_mode: str = "static"
    positions: tuple[Any, ...] = ("center",)
    mask_size: tuple[int, int] = (2, 2)
    epsilons: tuple[float, ...] = (16 / 255,)
    alpha: float | None = None
    iterations: int = 50
    n_att: int = 5
    random_start: bool = False
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    aggregation: str = "per-image"
    gammas: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    ensemble: tuple[str, str] = ("toy-global", "toy-local")
    ensemble_mode: str = "probabilities"
    out: str = "runs/latest"
    workers: int = 1

    def __post_init__(self):
        for key in ("models", "corruptions", "ensemble"):
            _set(self, key, tuple(str(v) for v in _as_seq(getattr(self, key))))
        _set(self, "severities", tuple(int(v) for v in _as_seq(self.severities)))
        _set(self, "seeds", tuple(int(v) for v in _as_seq(self.seeds)))
        _set(self, "ratios", tuple(float(v) for v in _as_seq(self.ratios)))
        _set(self, "epsilons", tuple(parse_number(v) for v in _as_seq(self.epsilons)))
        _set(self, "gammas", tuple(float(v) for v in _as_seq(self.gammas)))
        _set(self, "positions", tuple(_position(v) for v in _as_seq(self.positions)))
        _set(self, "patch_size", parse_size(self.patch_size))
        _set(self, "mask_size", parse_size(self.mask_size))
        if self.alpha is not None:
            _set(self, "alpha", parse_number(self.alpha))
        if self.resize not in ("auto", None):
            _set(self, "resize", tuple(int(v) for v in self.resize))
            if len(self.resize) != 2 or min(self.resize) < 1:
                raise ValueError(f"resize must be 'auto', null or [H, W], got {self.resize}")

        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.models:
            raise ValueError("at least one model is required")
        for kind in self.corruptions:
            if kind not in KINDS:
                raise ValueError(f"unknown corruption {kind!r}; expected one of {KINDS}")
        for s in self.severities:
            if not 1 <= s <= 5:
                raise ValueError(f"severity must be within 1..5, got {s}")
        for r in self.ratios:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"ratio must be within [0, 1], got {r}")
        for g in self.gammas:
            if not 0.0 <= g <= 1.0:
                raise ValueError(f"gamma must be within [0, 1], got {g}")
        for mode in (self.mask_mode, self.attack_mask_mode):
            if mode not in MASK_MODES:
                raise ValueError(f"unknown mask mode {mode!r}; expected one of {MASK_MODES}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}; expected one of {AGGREGATIONS}")
        if any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilon must be positive")
        if self.n_att < 1 or self.iterations < 0 or self.workers < 1:
            raise ValueError("n_att and workers must be >= 1 and iterations >= 0")
        if len(self.ensemble) != 2:
            raise ValueError("ensemble needs exactly two model names")

    def to_dict(self) -> dict[str, Any]:
        return {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}

    def config_hash(self) -> str:
        """Short digest of every result-relevant setting."""
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _set(obj, name, value):
    object.__setattr__(obj, name, value)


def _as_seq(v):
    if isinstance(v, (str, bytes)) or not hasattr(v, "__iter__"):
        return (v,)
    return tuple(v)


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _position(v):
    if isinstance(v, str):
        if v in POSITIONS:
            return v
        if "," in v:
            x0, y0 = v.split(",")
            return (int(x0), int(y0))
        raise ValueError(f"unknown position {v!r}; expected one of {POSITIONS} or 'x0,y0'")
    x0, y0 = v
    return (int(x0), int(y0))


def parse_size(v) -> tuple[int, int]:
    """``"16x8"``, ``[16, 8]`` or ``16`` (square) to ``(w, h)``."""
    if isinstance(v, str):
        parts = v.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"size must look like WxH, got {v!r}")
        w, h = (int(p) for p in parts)
    elif isinstance(v, int):
        w = h = v
    else:
        w, h = (int(p) for p in v)
    if w < 1 or h < 1:
        raise ValueError(f"size must be positive, got {(w, h)}")
    return w, h


def parse_number(v) -> float:
    """Accept floats and fractions such as ``"16/255"``."""
    if isinstance(v, str):
        return float(Fraction(v.strip()))
    return float(v)


def load_config(path=None, **overrides) -> RunConfig:
    """Read a JSON/YAML config file (optional) and apply keyword overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() in (".yml", ".yaml"):
            import yaml

            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a key-value mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return RunConfig(**data)
