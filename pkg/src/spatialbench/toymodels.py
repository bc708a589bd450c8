"""Small analytic segmentation models with exact input gradients.

``LocalPixelModel`` classifies every pixel from its own color only, so a
corruption can never change predictions outside the corrupted pixels.
``GlobalMixModel`` classifies a blend of each pixel with a Gaussian-weighted
average over the whole image; every output pixel depends on every input
pixel, which makes it robust to zero-mean noise but lets a localized
perturbation leak into predictions outside the perturbed pixels when their
margins are small (see ``low_margin_scene``).  ``ConflictPairModel`` is a
three-pixel witness where the losses of two scored pixels pull one shared
input coordinate in opposite directions.

All constants are fixed so every derived result in the test-suite is
reproducible bit-for-bit.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import IGNORE_INDEX, SegmentationModel, as_image

# class color prototypes shared by the synthetic dataset and the toy heads
PROTOTYPES = np.array(
    [
        [0.30, 0.35, 0.30],
        [0.55, 0.45, 0.75],
        [0.75, 0.65, 0.35],
        [0.25, 0.60, 0.65],
    ]
)
LOCAL_SCALE = 20.0
GLOBAL_SCALE = 20.0
GLOBAL_BANDWIDTH = 1.5
GLOBAL_MIX = 0.85


def prototype_head(num_classes: int = 3, scale: float = LOCAL_SCALE) -> tuple[np.ndarray, np.ndarray]:
    """Linear nearest-prototype head: ``scale * (p . x - |p|^2 / 2)``."""
    if not 1 <= num_classes <= len(PROTOTYPES):
        raise ValueError(f"toy heads support 1..{len(PROTOTYPES)} classes")
    p = PROTOTYPES[:num_classes]
    return scale * p, -scale * 0.5 * (p**2).sum(axis=1)


class LinearHeadModel(SegmentationModel):
    """Per-pixel linear head on top of a (possibly mixed) feature map."""

    def __init__(self, weights, bias, name: str):
        super().__init__()
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (N, C) and bias (N,)")
        self.num_classes = self.weights.shape[0]
        self.channels = self.weights.shape[1]
        self.name = name

    def features(self, x):
        return x

    def features_backward(self, x, grad_features):
        return grad_features

    def _check(self, x):
        x = as_image(x)
        if x.shape[2] != self.channels:
            raise ValueError(f"{self.name} expects {self.channels} channels, got {x.shape[2]}")
        return x

    def forward(self, x):
        x = self._check(x)
        return self.features(x) @ self.weights.T + self.bias

    def backward(self, x, grad_scores):
        x = self._check(x)
        grad_scores = np.asarray(grad_scores, dtype=np.float64)
        if grad_scores.shape != x.shape[:2] + (self.num_classes,):
            raise ValueError("gradient shape does not match the score map")
        return self.features_backward(x, grad_scores @ self.weights)


class LocalPixelModel(LinearHeadModel):
    """Receptive field of one pixel: ``scores_i = W x_i + b``."""

    def __init__(self, weights=None, bias=None, num_classes: int = 3, name: str = "toy-local"):
        if weights is None:
            weights, bias = prototype_head(num_classes, LOCAL_SCALE)
        super().__init__(weights, bias, name)


@lru_cache(maxsize=32)
def gaussian_mixing_matrix(height: int, width: int, bandwidth: float) -> np.ndarray:
    """Row-stochastic ``(HW, HW)`` matrix of Gaussian affinities between pixel positions."""
    yy, xx = np.mgrid[0:height, 0:width]
    coords = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(np.float64)
    d2 = ((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=-1)
    k = np.exp(-d2 / (2 * bandwidth**2))
    k /= k.sum(axis=1, keepdims=True)
    k.setflags(write=False)
    return k


class GlobalMixModel(LinearHeadModel):
    """Head applied to ``(1 - mix) * x + mix * K x`` with a dense Gaussian mixing map ``K``."""

    def __init__(
        self,
        weights=None,
        bias=None,
        num_classes: int = 3,
        bandwidth: float = GLOBAL_BANDWIDTH,
        mix: float = GLOBAL_MIX,
        name: str = "toy-global",
    ):
        if weights is None:
            weights, bias = prototype_head(num_classes, GLOBAL_SCALE)
        super().__init__(weights, bias, name)
        if not 0.0 <= mix <= 1.0:
            raise ValueError("mix must be within [0, 1]")
        self.bandwidth = float(bandwidth)
        self.mix = float(mix)

    def _mixing(self, x):
        h, w, _ = x.shape
        return gaussian_mixing_matrix(h, w, self.bandwidth)

    def features(self, x):
        h, w, c = x.shape
        mixed = (self._mixing(x) @ x.reshape(h * w, c)).reshape(h, w, c)
        return (1 - self.mix) * x + self.mix * mixed

    def features_backward(self, x, grad_features):
        h, w, c = x.shape
        back = (self._mixing(x).T @ grad_features.reshape(h * w, c)).reshape(h, w, c)
        return (1 - self.mix) * grad_features + self.mix * back


class ConflictPairModel(SegmentationModel):
    """Three pixels in a row, one channel, two classes.

    Pixel 0 is the attack carrier (labelled ignore, always predicted class 0).
    Pixels A (index 1) and B (index 2) are both class 0 with margins
    ``margin_a - slope * (x0 - center)`` and ``margin_b + slope * (x0 - center)``,
    where ``x0`` is the carrier value: raising ``x0`` flips A, lowering it flips B,
    so no single perturbation of ``x0`` can flip both.
    """

    num_classes = 2
    score_kind = "logits"

    def __init__(self, margin_a=0.3, margin_b=0.4, slope=10.0, center=0.5, name="toy-conflict"):
        super().__init__()
        self.margin_a = float(margin_a)
        self.margin_b = float(margin_b)
        self.slope = float(slope)
        self.center = float(center)
        self.name = name

    def _check(self, x):
        x = as_image(x)
        if x.shape != (1, 3, 1):
            raise ValueError(f"{self.name} expects a (1, 3, 1) image, got {x.shape}")
        return x

    def forward(self, x):
        x = self._check(x)
        t = x[0, 0, 0] - self.center
        scores = np.zeros((1, 3, 2))
        scores[0, 0, 0] = 1.0
        scores[0, 1, 0] = self.margin_a - self.slope * t
        scores[0, 2, 0] = self.margin_b + self.slope * t
        return scores

    def backward(self, x, grad_scores):
        self._check(x)
        g = np.zeros((1, 3, 1))
        g[0, 0, 0] = -self.slope * grad_scores[0, 1, 0] + self.slope * grad_scores[0, 2, 0]
        return g

    def example(self):
        """Clean input, labels and carrier mask for the conflict scenario."""
        x = np.full((1, 3, 1), self.center)
        y = np.array([[IGNORE_INDEX, 0, 0]])
        mask = np.array([[True, False, False]])
        return x, y, mask


def synthetic_dataset(
    n_images: int = 8,
    size: int = 8,
    num_classes: int = 3,
    noise: float = 0.03,
    contrast: float = 1.0,
    seed: int = 0,
):
    """Blocky scenes: four quadrants with random classes, colored by prototype plus noise.

    ``contrast`` pulls every prototype toward their common mean; values below
    one shrink class margins for both toy models.
    """
    protos = PROTOTYPES[:num_classes]
    protos = protos.mean(axis=0) + contrast * (protos - protos.mean(axis=0))
    rng = np.random.default_rng(seed)
    half = size // 2
    data = []
    for _ in range(n_images):
        quads = rng.integers(0, num_classes, size=(2, 2))
        y = np.kron(quads, np.ones((half, half), dtype=np.int64))
        if y.shape[0] < size:
            y = np.pad(y, ((0, size - y.shape[0]), (0, size - y.shape[1])), mode="edge")
        x = protos[y] + noise * rng.standard_normal((size, size, 3))
        data.append((np.clip(x, 0.0, 1.0), y))
    return data


def low_margin_scene(size: int = 8, offset: float = 0.02, layout: str = "uniform", classes: tuple[int, int] = (0, 1)):
    """Scene whose pixels sit just off the decision boundary between two classes.

    Each pixel's color is the midpoint of the two class prototypes moved
    ``offset`` of their difference toward its own label, so it is correct
    with a small margin.  ``layout="uniform"`` labels everything
    ``classes[0]``; ``"quadrants"`` uses a 2x2 checkerboard of both classes,
    whose pixels ask a perturbation at the center for opposite directions.
    """
    a, b = PROTOTYPES[classes[0]], PROTOTYPES[classes[1]]
    y = np.full((size, size), classes[0], dtype=np.int64)
    if layout == "quadrants":
        half = size // 2
        y[:half, half:] = classes[1]
        y[half:, :half] = classes[1]
    elif layout != "uniform":
        raise ValueError(f"unknown layout {layout!r}")
    mid, d = 0.5 * (a + b), offset * (a - b)
    x = np.where((y == classes[0])[:, :, None], mid + d, mid - d)
    return x, y
