"""Cross-entropy restricted to a fooling region, with its score gradient."""

from __future__ import annotations

import numpy as np

from .core import LossSpec, ScoreKind

_PROB_FLOOR = 1e-12


class EmptyFoolingRegion(ValueError):
    """Raised when a loss is requested over a fooling region with no pixels."""


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def masked_loss_and_score_grad(
    scores: np.ndarray, loss: LossSpec, score_kind: ScoreKind = "logits"
) -> tuple[float, np.ndarray]:
    """Mean per-pixel loss over the fooling region and d(loss)/d(scores).

    Untargeted: mean of ``-log p_y``.  Targeted: mean of ``log p_t`` so that
    ascending the loss pushes pixels toward the target class.  The mean is
    taken over fooling-region pixels only, so pixels outside the region
    contribute neither value nor gradient.
    """
    scores = np.asarray(scores, dtype=np.float64)
    h, w, n = scores.shape
    if loss.labels.shape != (h, w):
        raise ValueError(f"labels {loss.labels.shape} do not match scores {scores.shape[:2]}")
    region = loss.fooling_region
    count = int(region.sum())
    if count == 0:
        raise EmptyFoolingRegion("fooling region is empty")

    if loss.kind == "targeted":
        if loss.target >= n:
            raise ValueError(f"target class {loss.target} >= num_classes {n}")
        cls = np.full((h, w), loss.target, dtype=np.int64)
        sign = 1.0
    else:
        cls = np.where(region, loss.labels, 0)
        if np.any(cls >= n):
            raise ValueError("label exceeds number of score channels")
        sign = -1.0

    rows, cols = np.nonzero(region)
    picked = cls[rows, cols]
    grad = np.zeros_like(scores)

    if score_kind == "logits":
        logp = _log_softmax(scores[rows, cols])
        value = sign * logp[np.arange(count), picked].sum() / count
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        onehot[np.arange(count), picked] = 1.0
        # d(log p_k)/dz = onehot_k - p
        grad[rows, cols] = sign * (onehot - p) / count
    elif score_kind == "probabilities":
        p = np.maximum(scores[rows, cols, picked], _PROB_FLOOR)
        value = sign * np.log(p).sum() / count
        grad[rows, cols, picked] = sign / (p * count)
    else:
        raise ValueError(f"unknown score kind {score_kind!r}")
    return float(value), grad


def masked_loss(scores, loss: LossSpec, score_kind: ScoreKind = "logits") -> float:
    return masked_loss_and_score_grad(scores, loss, score_kind)[0]
