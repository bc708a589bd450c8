"""Severity-parameterized natural corruptions and their localized composition.

Every corruption maps an ``(H, W, C)`` image in ``[0, 1]`` to a corrupted
image of the same shape, clipped back to ``[0, 1]``.  Parameters follow the
ImageNet-C severity tables, rescaled to ``[0, 1]`` intensities.  The snow
corruption is a simplified synthetic compositing (a thresholded, seeded
noise layer smeared along a random falling direction, plus whitening of the
scene); it keeps the locality and range contracts but is not a bit-exact
copy of the ImageNet-C implementation.

Localized corruption computes the corruption on the whole image and then
keeps it only where the mask is set: ``c(x) * M + x * (1 - M)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import as_image, as_mask

KINDS = (
    "identity",
    "gaussian_noise",
    "brightness",
    "contrast",
    "gaussian_blur",
    "motion_blur",
    "snow",
)

GAUSSIAN_NOISE_SIGMA = (0.08, 0.12, 0.18, 0.26, 0.38)
BRIGHTNESS_SHIFT = (0.1, 0.2, 0.3, 0.4, 0.5)
CONTRAST_FACTOR = (0.4, 0.3, 0.2, 0.1, 0.05)
GAUSSIAN_BLUR_SIGMA = (1.0, 2.0, 3.0, 4.0, 6.0)
MOTION_BLUR = ((10, 3.0), (15, 5.0), (15, 8.0), (15, 12.0), (20, 15.0))  # (radius, sigma)
# (loc, scale, zoom, threshold, blur radius, blur sigma, blend)
SNOW = (
    (0.1, 0.3, 3.0, 0.5, 10, 4.0, 0.8),
    (0.2, 0.3, 2.0, 0.5, 12, 4.0, 0.7),
    (0.55, 0.3, 4.0, 0.9, 12, 8.0, 0.7),
    (0.55, 0.3, 4.5, 0.85, 12, 8.0, 0.65),
    (0.55, 0.3, 2.5, 0.85, 12, 12.0, 0.55),
)


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int = 1
    rng_seed: int | tuple = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "identity" and self.severity not in (1, 2, 3, 4, 5):
            raise ValueError(f"severity must be an integer in 1..5, got {self.severity!r}")


def gaussian_noise(x, severity, rng):
    sigma = GAUSSIAN_NOISE_SIGMA[severity - 1]
    return x + sigma * rng.standard_normal(x.shape)


def brightness(x, severity, rng):
    return x + BRIGHTNESS_SHIFT[severity - 1]


def contrast(x, severity, rng):
    c = CONTRAST_FACTOR[severity - 1]
    means = x.mean(axis=(0, 1), keepdims=True)
    return (x - means) * c + means


def _per_channel(x, fn):
    return np.stack([fn(x[:, :, k]) for k in range(x.shape[2])], axis=-1)


def gaussian_blur(x, severity, rng):
    sigma = GAUSSIAN_BLUR_SIGMA[severity - 1]
    return _per_channel(x, lambda ch: ndimage.gaussian_filter(ch, sigma, mode="nearest"))


def motion_kernel(radius: int, sigma: float, angle_deg: float) -> np.ndarray:
    """One-sided line kernel with Gaussian fall-off, bilinearly rasterized."""
    size = 2 * radius + 1
    kernel = np.zeros((size, size))
    theta = np.deg2rad(angle_deg)
    for t in range(radius + 1):
        weight = np.exp(-(t**2) / (2 * sigma**2))
        px = radius + t * np.cos(theta)
        py = radius - t * np.sin(theta)
        x0, y0 = int(np.floor(px)), int(np.floor(py))
        fx, fy = px - x0, py - y0
        for dy, wy in ((0, 1 - fy), (1, fy)):
            for dx, wx in ((0, 1 - fx), (1, fx)):
                if 0 <= y0 + dy < size and 0 <= x0 + dx < size:
                    kernel[y0 + dy, x0 + dx] += weight * wx * wy
    return kernel / kernel.sum()


def _motion_blur_2d(ch, radius, sigma, angle):
    return ndimage.convolve(ch, motion_kernel(radius, sigma, angle), mode="nearest")


def motion_blur(x, severity, rng):
    radius, sigma = MOTION_BLUR[severity - 1]
    angle = rng.uniform(-45.0, 45.0)
    return _per_channel(x, lambda ch: _motion_blur_2d(ch, radius, sigma, angle))


def snow(x, severity, rng):
    loc, scale, zoom, threshold, radius, sigma, blend = SNOW[severity - 1]
    h, w, _ = x.shape
    coarse = rng.normal(loc, scale, size=(int(np.ceil(h / zoom)) + 1, int(np.ceil(w / zoom)) + 1))
    layer = ndimage.zoom(coarse, zoom, order=1, mode="nearest", grid_mode=True)
    layer = np.pad(layer, ((0, max(0, h - layer.shape[0])), (0, max(0, w - layer.shape[1]))), mode="edge")
    layer = layer[:h, :w]
    layer[layer < threshold] = 0.0
    layer = np.clip(layer, 0.0, 1.0)
    angle = rng.uniform(-135.0, -45.0)
    layer = np.clip(_motion_blur_2d(layer, radius, sigma, angle), 0.0, 1.0)[:, :, None]

    gray = x.mean(axis=2, keepdims=True)
    whitened = blend * x + (1 - blend) * np.maximum(x, gray * 1.5 + 0.5)
    return whitened + layer + np.rot90(layer, 2)


_TRANSFORMS = {
    "gaussian_noise": gaussian_noise,
    "brightness": brightness,
    "contrast": contrast,
    "gaussian_blur": gaussian_blur,
    "motion_blur": motion_blur,
    "snow": snow,
}


def apply_corruption_full(x, spec: CorruptionSpec) -> np.ndarray:
    """Corrupt the whole image; all randomness comes from ``spec.rng_seed``."""
    x = as_image(x)
    if spec.kind == "identity":
        return x.copy()
    rng = np.random.default_rng(spec.rng_seed)
    return np.clip(_TRANSFORMS[spec.kind](x, spec.severity, rng), 0.0, 1.0)


def compose_localized(x, corrupted, mask) -> np.ndarray:
    x = as_image(x)
    corrupted = as_image(corrupted)
    if corrupted.shape != x.shape:
        raise ValueError(f"corrupted image {corrupted.shape} does not match input {x.shape}")
    m = as_mask(mask, x.shape[:2])
    return np.where(m[:, :, None], corrupted, x)


def corrupt_localized(x, spec: CorruptionSpec, mask) -> np.ndarray:
    x = as_image(x)
    as_mask(mask, x.shape[:2])
    return compose_localized(x, apply_corruption_full(x, spec), mask)
