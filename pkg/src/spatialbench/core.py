"""Shared domain types and the pluggable segmentation-model interface.

Images are ``(H, W, C)`` float arrays in ``[0, 1]``, label maps are ``(H, W)``
integer arrays (``IGNORE_INDEX`` marks unlabeled pixels), masks are ``(H, W)``
boolean arrays and score maps are ``(H, W, N)`` float arrays.  The helpers
below validate and normalize those arrays; they are kept as plain numpy
arrays so every module can use vectorized numpy code directly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

IGNORE_INDEX = 255

ScoreKind = Literal["logits", "probabilities"]


def as_image(x, *, copy: bool = False) -> np.ndarray:
    x = np.array(x, dtype=np.float64, copy=copy) if copy else np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3 or x.shape[0] < 1 or x.shape[1] < 1 or x.shape[2] < 1:
        raise ValueError(f"image must have shape (H, W, C), got {x.shape}")
    if not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("image values must be finite and within [0, 1]")
    return x


def as_labels(y, num_classes: int | None = None, ignore_index: int = IGNORE_INDEX) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 2:
        raise ValueError(f"label map must have shape (H, W), got {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ValueError("label map must contain integers")
    y = y.astype(np.int64)
    valid = y != ignore_index
    if np.any(y[valid] < 0):
        raise ValueError("negative class index in label map")
    if num_classes is not None and np.any(y[valid] >= num_classes):
        raise ValueError(f"label value >= num_classes ({num_classes})")
    return y


def as_mask(m, shape: tuple[int, int] | None = None) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"mask must have shape (H, W), got {m.shape}")
    if m.dtype != bool:
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("mask values must be binary")
        m = m.astype(bool)
    if shape is not None and m.shape != tuple(shape):
        raise ValueError(f"mask shape {m.shape} does not match {tuple(shape)}")
    return m


def mask_counts(m) -> tuple[int, int]:
    """Return ``(S, S_bar)``: corrupted and clean pixel counts of a mask."""
    m = as_mask(m)
    s = int(m.sum())
    return s, m.size - s


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    z = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def argmax_prediction(scores) -> np.ndarray:
    """Per-pixel predicted class; ties go to the lowest class index."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 3:
        raise ValueError(f"score map must have shape (H, W, N), got {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("score map contains non-finite values")
    # np.argmax returns the first maximal index
    return np.argmax(scores, axis=-1).astype(np.int64)


@dataclass(frozen=True)
class LossSpec:
    """Adversarial loss restricted to a fooling region.

    ``kind`` is ``"untargeted"`` (maximize cross-entropy of the true labels)
    or ``"targeted"`` (maximize the log-probability of ``target``).
    Ignore-index pixels are dropped from the fooling region on construction.
    """

    fooling_region: np.ndarray
    labels: np.ndarray
    kind: Literal["untargeted", "targeted"] = "untargeted"
    target: int | None = None
    ignore_index: int = IGNORE_INDEX

    def __post_init__(self):
        labels = as_labels(self.labels, ignore_index=self.ignore_index)
        region = as_mask(self.fooling_region, labels.shape) & (labels != self.ignore_index)
        if self.kind not in ("untargeted", "targeted"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "targeted" and (self.target is None or self.target < 0):
            raise ValueError("targeted loss needs a non-negative target class")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "fooling_region", region)

    @property
    def size(self) -> int:
        return int(self.fooling_region.sum())


class SegmentationModel:
    """Base class for per-pixel classifiers with exact input gradients.

    Subclasses implement :meth:`forward` and :meth:`backward`, the
    vector-Jacobian product of the score map with respect to the input.
    :meth:`input_gradient` combines it with the masked loss so attacks never
    depend on a particular differentiation mechanism.

    Models that cannot serve concurrent calls set ``concurrent = False``; the
    harness then serializes access through :attr:`lock`.
    """

    name: str = "model"
    num_classes: int = 2
    score_kind: ScoreKind = "logits"
    concurrent: bool = True
    supports_gradients: bool = True

    def __init__(self):
        self.lock = threading.Lock()

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, x: np.ndarray, grad_scores: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, x) -> np.ndarray:
        return argmax_prediction(self.forward(as_image(x)))

    def probabilities(self, x) -> np.ndarray:
        scores = self.forward(as_image(x))
        return softmax(scores) if self.score_kind == "logits" else scores

    def loss_and_gradient(self, x, loss: LossSpec) -> tuple[float, np.ndarray]:
        from .losses import masked_loss_and_score_grad

        x = as_image(x)
        scores = self.forward(x)
        value, grad_scores = masked_loss_and_score_grad(scores, loss, self.score_kind)
        return value, self.backward(x, grad_scores)

    def input_gradient(self, x, loss: LossSpec) -> np.ndarray:
        return self.loss_and_gradient(x, loss)[1]

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, num_classes={self.num_classes})"


@dataclass
class EvalRecord:
    """One benchmark measurement, serialized as a JSON object."""

    model: str
    corruption: str
    metric: str
    value: float | None
    seed: int
    severity: int | None = None
    ratio: float = 0.0
    region: str = "all"
    extra: dict[str, Any] = field(default_factory=dict)

    REGIONS = ("corrupted", "non-corrupted", "all")
    METRICS = ("accuracy", "A_M", "A_Mbar", "RCE", "CE", "MIoU")

    def __post_init__(self):
        if self.region not in self.REGIONS:
            raise ValueError(f"unknown region {self.region!r}")
        if self.metric not in self.METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.severity is not None and not 1 <= self.severity <= 5:
            raise ValueError("severity must be within 1..5")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("ratio must be within [0, 1]")
        if self.value is not None:
            self.value = float(self.value)
            if np.isnan(self.value):
                self.value = None
        if self.value is not None and self.metric in ("accuracy", "A_M", "A_Mbar", "MIoU"):
            if not -1e-12 <= self.value <= 1.0 + 1e-12:
                raise ValueError(f"{self.metric} value {self.value} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "corruption": self.corruption,
            "severity": self.severity,
            "ratio": self.ratio,
            "region": self.region,
            "metric": self.metric,
            "value": self.value,
            "seed": self.seed,
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvalRecord":
        return cls(
            model=d["model"],
            corruption=d["corruption"],
            severity=d.get("severity"),
            ratio=d.get("ratio", 0.0),
            region=d.get("region", "all"),
            metric=d["metric"],
            value=d.get("value"),
            seed=d["seed"],
            extra=dict(d.get("extra", {})),
        )
