"""Test-time weighted ensembles and the natural/adversarial trade-off sweep.

``g = gamma * softmax(f1) + (1 - gamma) * softmax(f2)``.  The sweep reports,
for each ``gamma``, the natural error of ``g`` relative to ``f2`` inside the
corrupted region, the adversarial error of ``g`` relative to ``f1`` outside
the attacked region, and the clean error relative to the better member.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .attack import AttackConfig, region_aware_multi_attack
from .core import IGNORE_INDEX, SegmentationModel, as_image, softmax
from .corruptions import CorruptionSpec, corrupt_localized
from .maskgen import partition_grid, sample_ratio_mask, static_mask
from .metrics import corruption_error, localized_accuracy, mean_defined, pixel_accuracy

MODES = ("probabilities", "logits")
SWEEP_COLUMNS = ("gamma", "ce_nat", "ce_adv", "clean_err")


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be within [0, 1], got {gamma}")
    return gamma


class EnsembleModel(SegmentationModel):
    """Convex combination of two segmentation models.

    In ``probabilities`` mode the members' softmax maps are blended and the
    ensemble output is itself a probability map.  ``logits`` mode blends the
    raw scores instead.  At ``gamma`` 0 or 1 only the active member is
    evaluated, so the endpoints reproduce that member exactly.
    """

    def __init__(self, f1: SegmentationModel, f2: SegmentationModel, gamma: float, mode: str = "probabilities"):
        super().__init__()
        if mode not in MODES:
            raise ValueError(f"unknown ensemble mode {mode!r}; expected one of {MODES}")
        if f1.num_classes != f2.num_classes:
            raise ValueError("ensemble members disagree on the number of classes")
        self.f1, self.f2 = f1, f2
        self.gamma = _check_gamma(gamma)
        self.mode = mode
        self.num_classes = f1.num_classes
        self.score_kind = "probabilities" if mode == "probabilities" else "logits"
        self.supports_gradients = f1.supports_gradients and f2.supports_gradients
        self.concurrent = f1.concurrent and f2.concurrent
        self.name = f"ensemble({f1.name},{f2.name},{self.gamma:g})"

    def _members(self):
        return [(w, f) for w, f in ((self.gamma, self.f1), (1.0 - self.gamma, self.f2)) if w > 0]

    def _member_output(self, f, x):
        s = f.forward(x)
        return softmax(s) if self.mode == "probabilities" else s

    def forward(self, x):
        x = as_image(x)
        members = self._members()
        if len(members) == 1:
            return self._member_output(members[0][1], x)
        return sum(w * self._member_output(f, x) for w, f in members)

    def backward(self, x, grad_scores):
        x = as_image(x)
        grad_scores = np.asarray(grad_scores, dtype=np.float64)
        total = np.zeros_like(x)
        for w, f in self._members():
            g = w * grad_scores if w != 1.0 else grad_scores
            if self.mode == "probabilities":
                p = softmax(f.forward(x))
                g = p * (g - (p * g).sum(axis=-1, keepdims=True))
            total = total + f.backward(x, g)
        return total


def ensemble_forward(f1, f2, gamma: float, x, mode: str = "probabilities") -> np.ndarray:
    return EnsembleModel(f1, f2, gamma, mode).forward(x)


@dataclass(frozen=True)
class SweepSettings:
    """Evaluation protocol shared by every point of a gamma sweep.

    Natural errors use a random patch mask of ratio ``ratio``; adversarial
    errors use one static ``attack_size`` mask at ``attack_position``.
    """

    corruption: str = "gaussian_noise"
    severity: int = 3
    ratio: float = 0.5
    patch_size: tuple[int, int] = (2, 2)
    attack_size: tuple[int, int] = (2, 2)
    attack_position: str | tuple[int, int] = "center"
    n_attacks: int = 5
    epsilon: float = 16 / 255
    iterations: int = 50
    seed: int = 0
    mode: str = "probabilities"
    ignore_index: int = IGNORE_INDEX


def _natural_masks(dataset, s: SweepSettings):
    masks = []
    for idx, (x, _) in enumerate(dataset):
        h, w = x.shape[:2]
        grid = partition_grid(h, w, s.patch_size)
        masks.append(sample_ratio_mask(grid, s.ratio, [s.seed, idx, 1]))
    return masks


def natural_accuracy(model, dataset, s: SweepSettings, masks=None) -> float:
    """Mean accuracy inside the corrupted region over the dataset."""
    masks = _natural_masks(dataset, s) if masks is None else masks
    values = []
    for idx, ((x, y), m) in enumerate(zip(dataset, masks)):
        spec = CorruptionSpec(s.corruption, s.severity, (s.seed, idx, 2))
        pred = model.predict(corrupt_localized(x, spec, m))
        values.append(localized_accuracy(pred, y, m, "corrupted", s.ignore_index))
    return mean_defined(values)


def adversarial_accuracy(model, dataset, s: SweepSettings) -> float:
    """Mean accuracy outside the attacked region after the multi-attack."""
    values = []
    for idx, (x, y) in enumerate(dataset):
        h, w = x.shape[:2]
        m = static_mask(h, w, s.attack_size, s.attack_position)
        cfg = AttackConfig(epsilon=s.epsilon, iterations=s.iterations, rng_seed=s.seed)
        res = region_aware_multi_attack(model, x, y, m, s.n_attacks, cfg, ignore_index=s.ignore_index)
        values.append(localized_accuracy(res.cumulative, y, m, "non-corrupted", s.ignore_index))
    return mean_defined(values)


def clean_accuracy(model, dataset, ignore_index: int = IGNORE_INDEX) -> float:
    return mean_defined(pixel_accuracy(model.predict(x), y, ignore_index) for x, y in dataset)


def ce_nat(f1, f2, gamma: float, dataset, settings: SweepSettings | None = None) -> float:
    """Natural error of the ensemble relative to ``f2`` in the corrupted region."""
    s = settings or SweepSettings()
    masks = _natural_masks(dataset, s)
    base = natural_accuracy(EnsembleModel(f1, f2, 0.0, s.mode), dataset, s, masks)
    return corruption_error(base, natural_accuracy(EnsembleModel(f1, f2, gamma, s.mode), dataset, s, masks))


def ce_adv(f1, f2, gamma: float, dataset, settings: SweepSettings | None = None) -> float:
    """Adversarial error of the ensemble relative to ``f1`` outside the attacked region."""
    s = settings or SweepSettings()
    base = adversarial_accuracy(EnsembleModel(f1, f2, 1.0, s.mode), dataset, s)
    return corruption_error(base, adversarial_accuracy(EnsembleModel(f1, f2, gamma, s.mode), dataset, s))


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    ce_nat: float
    ce_adv: float
    clean_err: float


def sweep_gamma(f1, f2, dataset, gammas: Sequence[float], settings: SweepSettings | None = None) -> list[SweepRow]:
    """Evaluate the ensemble over ``gammas``; baselines are computed once."""
    s = settings or SweepSettings()
    gammas = [_check_gamma(g) for g in gammas]
    masks = _natural_masks(dataset, s)
    nat_base = natural_accuracy(EnsembleModel(f1, f2, 0.0, s.mode), dataset, s, masks)
    adv_base = adversarial_accuracy(EnsembleModel(f1, f2, 1.0, s.mode), dataset, s)
    clean_base = max(clean_accuracy(f1, dataset, s.ignore_index), clean_accuracy(f2, dataset, s.ignore_index))
    rows = []
    for gamma in gammas:
        g = EnsembleModel(f1, f2, gamma, s.mode)
        rows.append(
            SweepRow(
                gamma,
                corruption_error(nat_base, natural_accuracy(g, dataset, s, masks)),
                corruption_error(adv_base, adversarial_accuracy(g, dataset, s)),
                corruption_error(clean_base, clean_accuracy(g, dataset, s.ignore_index)),
            )
        )
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r.gamma), _fmt(r.ce_nat), _fmt(r.ce_adv), _fmt(r.clean_err)])
    return path


def read_sweep_csv(path) -> list[SweepRow]:
    with Path(path).open(newline="") as fh:
        return [SweepRow(*(float(row[c]) for c in SWEEP_COLUMNS)) for row in csv.DictReader(fh)]


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))
