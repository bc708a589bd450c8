import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialbench.maskgen import exact_ratio_mask, partition_grid, sample_ratio_mask, static_mask


def test_grid_counts_with_clipped_border_patches():
    g = partition_grid(5, 7, (3, 2))
    assert g.counts == (3, 3)
    assert len(g) == 9
    assert g.patches[2] == (6, 0, 1, 2)
    assert g.patches[-1] == (6, 4, 1, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.data())
def test_grid_tiles_the_image_exactly_once(h, w, data):
    dx = data.draw(st.integers(1, w))
    dy = data.draw(st.integers(1, h))
    g = partition_grid(h, w, (dx, dy))
    cover = np.zeros((h, w), int)
    for x0, y0, pw, ph in g.patches:
        cover[y0 : y0 + ph, x0 : x0 + pw] += 1
    assert np.all(cover == 1)
    assert len(g) == math.ceil(w / dx) * math.ceil(h / dy)


@pytest.mark.parametrize("size", [(0, 1), (9, 1), (1, 9)])
def test_grid_rejects_bad_patch_size(size):
    with pytest.raises(ValueError):
        partition_grid(8, 8, size)


def test_ratio_endpoints():
    g = partition_grid(8, 8, (2, 2))
    assert not sample_ratio_mask(g, 0.0, 0).any()
    assert sample_ratio_mask(g, 1.0, 0).all()
    with pytest.raises(ValueError):
        sample_ratio_mask(g, 1.1, 0)


def test_exact_ratio_selects_rounded_count():
    g = partition_grid(10, 10, (3, 3))  # 16 patches
    m = exact_ratio_mask(g, 0.3, 1)
    picked = sum(bool(m[y0, x0]) for x0, y0, _, _ in g.patches)
    assert picked == round(0.3 * 16)


def test_masks_are_seed_deterministic():
    g = partition_grid(16, 16, (2, 2))
    assert np.array_equal(sample_ratio_mask(g, 0.5, [1, 2]), sample_ratio_mask(g, 0.5, [1, 2]))
    assert not np.array_equal(sample_ratio_mask(g, 0.5, [1, 2]), sample_ratio_mask(g, 0.5, [1, 3]))


def test_static_positions():
    m = static_mask(8, 8, (2, 2), "center")
    assert np.argwhere(m).tolist() == [[3, 3], [3, 4], [4, 3], [4, 4]]
    bl = static_mask(8, 6, (2, 3), "bottom-left")
    assert bl[5:, :2].all() and bl.sum() == 6
    assert static_mask(4, 4, (1, 1), (3, 0))[0, 3]
    with pytest.raises(ValueError):
        static_mask(4, 4, (2, 2), (3, 3))
    with pytest.raises(ValueError):
        static_mask(4, 4, (2, 2), "middle")
