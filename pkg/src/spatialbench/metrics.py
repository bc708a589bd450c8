"""Pixel accuracy, region-weighted (localized) accuracy, corruption errors and MIoU.

Ignore-index pixels are removed from every numerator and denominator.
Per-image metrics over an empty region return ``nan``; dataset means skip
those entries instead of counting them as failures.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import IGNORE_INDEX, as_labels, as_mask
from .corruptions import CorruptionSpec, corrupt_localized

IMPORTANCE_KINDS = ("corrupted", "non-corrupted", "all")


class UndefinedMetric(ValueError):
    """No defined per-image values were available for aggregation."""


class UndefinedBaseline(ValueError):
    """A relative error was requested against a zero (or undefined) baseline."""


def _pair(pred, y, ignore_index):
    y = as_labels(y, ignore_index=ignore_index)
    pred = np.asarray(pred)
    if pred.shape != y.shape:
        raise ValueError(f"prediction {pred.shape} and labels {y.shape} differ in shape")
    return pred, y, y != ignore_index


def pixel_accuracy(pred, y, ignore_index: int = IGNORE_INDEX) -> float:
    pred, y, valid = _pair(pred, y, ignore_index)
    n = int(valid.sum())
    if n == 0:
        return math.nan
    return int(((pred == y) & valid).sum()) / n


def region_support(mask, kind: str, valid: np.ndarray) -> np.ndarray:
    m = as_mask(mask, valid.shape)
    if kind == "corrupted":
        return m & valid
    if kind == "non-corrupted":
        return ~m & valid
    if kind == "all":
        return valid.copy()
    raise ValueError(f"unknown spatial importance {kind!r}; expected one of {IMPORTANCE_KINDS}")


def spatial_importance(mask, kind: str, y=None, ignore_index: int = IGNORE_INDEX) -> np.ndarray:
    """Per-pixel weights that sum to one over the selected region.

    ``corrupted`` gives ``M_i / S``, ``non-corrupted`` gives
    ``(1 - M_i) / S_bar`` and ``all`` gives ``1 / (H * W)``, each computed
    after removing ignore pixels when ``y`` is supplied.
    """
    m = as_mask(mask)
    valid = np.ones(m.shape, bool) if y is None else as_labels(y, ignore_index=ignore_index) != ignore_index
    support = region_support(m, kind, valid)
    total = support.sum()
    if total == 0:
        return np.zeros(m.shape)
    return support / total


def localized_accuracy(pred, y, mask, importance="non-corrupted", ignore_index: int = IGNORE_INDEX) -> float:
    """Importance-weighted accuracy ``sum_i 1(pred_i = y_i) * P_i(M)``.

    ``importance`` is one of the built-in region names or an explicit weight
    grid.  Built-in regions are evaluated as ``correct / region_size`` so the
    result equals the plain per-region pixel accuracy exactly.
    """
    pred, y, valid = _pair(pred, y, ignore_index)
    correct = (pred == y) & valid
    if isinstance(importance, str):
        support = region_support(mask, importance, valid)
        n = int(support.sum())
        if n == 0:
            return math.nan
        return int((correct & support).sum()) / n
    weights = np.asarray(importance, dtype=np.float64)
    if weights.shape != y.shape:
        raise ValueError("importance weights must match the label map shape")
    weights = np.where(valid, weights, 0.0)
    if weights.sum() <= 0:
        return math.nan
    return float((correct * weights).sum() / weights.sum())


@dataclass(frozen=True)
class RegionScore:
    """Accuracy inside (``a_m``) and outside (``a_mbar``) a corruption mask."""

    a_m: float
    a_mbar: float
    correct_in: int
    correct_out: int
    s: int
    s_bar: int

    @property
    def correct_total(self) -> int:
        return self.correct_in + self.correct_out


def region_score(pred, y, mask, ignore_index: int = IGNORE_INDEX) -> RegionScore:
    pred, y, valid = _pair(pred, y, ignore_index)
    m = as_mask(mask, y.shape)
    correct = (pred == y) & valid
    inside, outside = m & valid, ~m & valid
    s, s_bar = int(inside.sum()), int(outside.sum())
    c_in, c_out = int((correct & inside).sum()), int((correct & outside).sum())
    return RegionScore(
        a_m=c_in / s if s else math.nan,
        a_mbar=c_out / s_bar if s_bar else math.nan,
        correct_in=c_in,
        correct_out=c_out,
        s=s,
        s_bar=s_bar,
    )


def corruption_error(a_base: float, a: float) -> float:
    if a_base is None or not a_base > 0:
        raise UndefinedBaseline(f"baseline accuracy must be positive, got {a_base}")
    return (a_base - a) / a_base


def relative_corruption_error(clean: float, corrupted: float) -> float:
    """Relative accuracy drop versus the clean accuracy of the same region."""
    if clean is None or not clean > 0:
        raise UndefinedBaseline(f"clean accuracy must be positive, got {clean}")
    return (clean - corrupted) / clean


def miou(pred, y, mask=None, importance="all", ignore_index: int = IGNORE_INDEX) -> float:
    """Mean IoU over the classes present in ``y`` within the selected region."""
    pred, y, valid = _pair(pred, y, ignore_index)
    support = valid if mask is None else region_support(mask, importance, valid)
    classes = np.unique(y[support])
    if classes.size == 0:
        return math.nan
    ious = []
    for c in classes:
        p, t = (pred == c) & support, (y == c) & support
        ious.append((p & t).sum() / (p | t).sum())
    return float(np.mean(ious))


def mean_defined(values: Iterable[float]) -> float:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    if not vals:
        raise UndefinedMetric("every entry is undefined")
    return float(np.mean(vals))


def dataset_localized_accuracy(
    model,
    dataset: Sequence[tuple[np.ndarray, np.ndarray]],
    corruptions: Sequence[CorruptionSpec],
    mask_source: np.ndarray | Callable[[int, np.ndarray], np.ndarray],
    importance: str = "non-corrupted",
    aggregation: str = "per-image",
    ignore_index: int = IGNORE_INDEX,
) -> float:
    """Dataset-level localized accuracy over a set of corruptions.

    ``mask_source`` is either one fixed mask or a callable
    ``(image_index, image) -> mask`` that draws a fresh mask per image.
    Each corruption's seed is combined with the image index so noise differs
    across images but is shared by every model evaluated with the same specs.

    ``aggregation="per-image"`` averages each image's region accuracy;
    ``"pooled"`` divides total correct region pixels by total region pixels.
    """
    if aggregation not in ("per-image", "pooled"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    per_image, correct, total = [], 0, 0
    for spec in corruptions:
        for idx, (x, y) in enumerate(dataset):
            m = mask_source(idx, x) if callable(mask_source) else mask_source
            local = dataclasses.replace(spec, rng_seed=_seed_tuple(spec.rng_seed) + (idx,))
            pred = model.predict(corrupt_localized(x, local, m))
            if aggregation == "per-image":
                per_image.append(localized_accuracy(pred, y, m, importance, ignore_index))
            else:
                _, yv, valid = _pair(pred, y, ignore_index)
                support = region_support(m, importance, valid)
                correct += int(((pred == yv) & support).sum())
                total += int(support.sum())
    if aggregation == "pooled":
        if total == 0:
            raise UndefinedMetric("selected region is empty across the dataset")
        return correct / total
    return mean_defined(per_image)


def _seed_tuple(seed) -> tuple:
    return tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
