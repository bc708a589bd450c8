"""Corruption masks: patch grids, ratio-based patch selection, static placements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POSITIONS = ("center", "bottom-left", "top-left", "top-right", "bottom-right")


@dataclass(frozen=True)
class PatchGrid:
    """Non-overlapping tiling of an ``height x width`` image.

    ``patches`` holds ``(x0, y0, w, h)`` rectangles in row-major order;
    patches on the right and bottom border are clipped to the image.
    """

    height: int
    width: int
    patch_size: tuple[int, int]
    patches: tuple[tuple[int, int, int, int], ...]

    @property
    def counts(self) -> tuple[int, int]:
        dx, dy = self.patch_size
        return math.ceil(self.width / dx), math.ceil(self.height / dy)

    def __len__(self) -> int:
        return len(self.patches)

    def mask_from_selection(self, selected) -> np.ndarray:
        mask = np.zeros((self.height, self.width), dtype=bool)
        for (x0, y0, w, h), keep in zip(self.patches, selected):
            if keep:
                mask[y0 : y0 + h, x0 : x0 + w] = True
        return mask


def partition_grid(height: int, width: int, patch_size: tuple[int, int]) -> PatchGrid:
    """Split the image into ``ceil(W/dx) * ceil(H/dy)`` patches of size ``(dx, dy)``."""
    dx, dy = (int(v) for v in patch_size)
    if height < 1 or width < 1:
        raise ValueError("image dimensions must be positive")
    if not (1 <= dx <= width and 1 <= dy <= height):
        raise ValueError(f"patch size {(dx, dy)} out of range for a {height}x{width} image")
    patches = []
    for y0 in range(0, height, dy):
        for x0 in range(0, width, dx):
            patches.append((x0, y0, min(dx, width - x0), min(dy, height - y0)))
    return PatchGrid(height, width, (dx, dy), tuple(patches))


def _check_ratio(r: float):
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"ratio must be within [0, 1], got {r}")


def sample_ratio_mask(grid: PatchGrid, r: float, rng_seed) -> np.ndarray:
    """Select each patch independently with probability ``r``.

    An empty selection is returned as-is; region metrics over it are undefined.
    """
    _check_ratio(r)
    rng = np.random.default_rng(rng_seed)
    selected = rng.random(len(grid)) < r
    return grid.mask_from_selection(selected)


def exact_ratio_mask(grid: PatchGrid, r: float, rng_seed) -> np.ndarray:
    """Select exactly ``round(r * P)`` patches uniformly without replacement."""
    _check_ratio(r)
    rng = np.random.default_rng(rng_seed)
    k = int(round(r * len(grid)))
    selected = np.zeros(len(grid), dtype=bool)
    selected[rng.choice(len(grid), size=k, replace=False)] = True
    return grid.mask_from_selection(selected)


def static_mask(height: int, width: int, size: tuple[int, int], position="center") -> np.ndarray:
    """One ``size = (w, h)`` rectangle at a named position or explicit ``(x0, y0)``."""
    w, h = (int(v) for v in size)
    if w < 1 or h < 1 or w > width or h > height:
        raise ValueError(f"mask size {(w, h)} does not fit a {height}x{width} image")
    if isinstance(position, str):
        if position == "center":
            x0, y0 = (width - w) // 2, (height - h) // 2
        elif position == "bottom-left":
            x0, y0 = 0, height - h
        elif position == "top-left":
            x0, y0 = 0, 0
        elif position == "top-right":
            x0, y0 = width - w, 0
        elif position == "bottom-right":
            x0, y0 = width - w, height - h
        else:
            raise ValueError(f"unknown position {position!r}; expected one of {POSITIONS}")
    else:
        x0, y0 = (int(v) for v in position)
        if x0 < 0 or y0 < 0 or x0 + w > width or y0 + h > height:
            raise ValueError(f"rectangle at {(x0, y0)} of size {(w, h)} exceeds image bounds")
    mask = np.zeros((height, width), dtype=bool)
    mask[y0 : y0 + h, x0 : x0 + w] = True
    return mask
