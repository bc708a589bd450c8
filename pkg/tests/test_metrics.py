import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spatialbench.core import IGNORE_INDEX
from spatialbench.corruptions import CorruptionSpec
from spatialbench.metrics import (
    UndefinedBaseline,
    UndefinedMetric,
    corruption_error,
    dataset_localized_accuracy,
    localized_accuracy,
    mean_defined,
    miou,
    pixel_accuracy,
    region_score,
    relative_corruption_error,
    spatial_importance,
)
from spatialbench.toymodels import LocalPixelModel, synthetic_dataset


def test_pixel_accuracy_examples():
    y = np.array([[0, 1], [1, 0]])
    assert pixel_accuracy(y, y) == 1.0
    assert pixel_accuracy(1 - y, y) == 0.0
    assert pixel_accuracy(np.array([[0, 1], [1, 1]]), y) == 0.75
    assert math.isnan(pixel_accuracy(y, np.full((2, 2), IGNORE_INDEX)))


def test_localized_accuracy_left_column_example():
    y = np.zeros((2, 2), int)
    pred = np.array([[1, 0], [0, 0]])
    m = np.array([[1, 0], [1, 0]], bool)
    assert localized_accuracy(pred, y, m, "corrupted") == 0.5
    assert localized_accuracy(pred, y, m, "non-corrupted") == 1.0


def test_empty_mask_non_corrupted_equals_pixel_accuracy():
    rng = np.random.default_rng(0)
    pred, y = rng.integers(0, 3, (5, 5)), rng.integers(0, 3, (5, 5))
    m = np.zeros((5, 5), bool)
    assert localized_accuracy(pred, y, m, "non-corrupted") == pixel_accuracy(pred, y)
    assert math.isnan(localized_accuracy(pred, y, m, "corrupted"))


def test_explicit_weights_match_builtin():
    rng = np.random.default_rng(3)
    pred, y = rng.integers(0, 2, (4, 4)), rng.integers(0, 2, (4, 4))
    m = rng.random((4, 4)) < 0.5
    for kind in ("corrupted", "non-corrupted", "all"):
        w = spatial_importance(m, kind)
        assert np.isclose(w.sum(), 1.0)
        assert localized_accuracy(pred, y, m, w) == pytest.approx(localized_accuracy(pred, y, m, kind))


def test_ignore_pixels_leave_both_regions():
    y = np.array([[0, IGNORE_INDEX], [1, 1]])
    pred = np.array([[0, 0], [0, 1]])
    m = np.array([[1, 1], [0, 0]], bool)
    s = region_score(pred, y, m)
    assert (s.s, s.s_bar, s.a_m, s.a_mbar) == (1, 2, 1.0, 0.5)


@settings(max_examples=200, deadline=None)
@given(
    arrays(np.int64, (6, 5), elements=st.integers(0, 3)),
    arrays(np.int64, (6, 5), elements=st.integers(0, 3)),
    arrays(bool, (6, 5)),
)
def test_decomposition_property(pred, y, m):
    s = region_score(pred, y, m)
    assert s.correct_total == int((pred == y).sum())
    lhs = (s.s * s.a_m if s.s else 0) + (s.s_bar * s.a_mbar if s.s_bar else 0)
    assert lhs == pytest.approx(y.size * pixel_accuracy(pred, y))


def test_exhaustive_2x2_binary_against_counting_oracle():
    for bits in itertools.product((0, 1), repeat=12):
        pred = np.array(bits[:4]).reshape(2, 2)
        y = np.array(bits[4:8]).reshape(2, 2)
        m = np.array(bits[8:], bool).reshape(2, 2)
        for kind, sel in (("corrupted", m), ("non-corrupted", ~m)):
            n = sum(1 for i in range(4) if sel.flat[i])
            c = sum(1 for i in range(4) if sel.flat[i] and pred.flat[i] == y.flat[i])
            got = localized_accuracy(pred, y, m, kind)
            assert (math.isnan(got) and n == 0) or got == c / n


def test_errors_arithmetic():
    assert corruption_error(0.8, 0.8) == 0.0
    assert corruption_error(0.8, 0.6) == pytest.approx(0.25)
    assert corruption_error(0.8, 0.9) == pytest.approx(-0.125)
    assert relative_corruption_error(0.8, 0.2) == pytest.approx(0.75)
    with pytest.raises(UndefinedBaseline):
        corruption_error(0.0, 0.5)
    with pytest.raises(UndefinedBaseline):
        relative_corruption_error(0.0, 0.0)


@given(st.floats(0.01, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_rce_antitone(clean, a, b):
    lo, hi = sorted((a, b))
    assert relative_corruption_error(clean, clean) == 0.0
    assert relative_corruption_error(clean, hi) <= relative_corruption_error(clean, lo)


def test_miou_examples():
    y = np.array([[0, 0], [1, IGNORE_INDEX]])
    assert miou(y, y) == 1.0
    assert miou(np.array([[0, 1], [1, 0]]), y) == pytest.approx(0.5)
    assert miou(np.ones((2, 2), int), np.zeros((2, 2), int)) == 0.0
    assert math.isnan(miou(y, np.full((2, 2), IGNORE_INDEX)))


def test_mean_defined_skips_nan():
    assert mean_defined([0.5, 0.7, math.nan]) == pytest.approx(0.6)
    with pytest.raises(UndefinedMetric):
        mean_defined([math.nan])


class _LookupModel:
    """Returns a stored prediction keyed by the image's first pixel value."""

    def __init__(self, table):
        self.table = table

    def predict(self, x):
        return self.table[round(float(x[0, 0, 0]), 3)]


def test_dataset_mean_skips_undefined_image():
    y = np.zeros((2, 5), int)
    xs = [np.full((2, 5, 1), v) for v in (0.1, 0.2, 0.3)]
    # first k pixels wrong
    wrong = [np.where(np.arange(10).reshape(2, 5) < k, 1, 0) for k in (5, 3)]
    model = _LookupModel({0.1: wrong[0], 0.2: wrong[1], 0.3: y})
    masks = [np.ones((2, 5), bool), np.ones((2, 5), bool), np.zeros((2, 5), bool)]
    acc = dataset_localized_accuracy(model, list(zip(xs, [y] * 3)), [CorruptionSpec("identity")], lambda i, x: masks[i], "corrupted")
    assert acc == pytest.approx(0.6)


def test_dataset_accuracy_identity_and_single_item():
    data = synthetic_dataset(3, seed=2)
    model = LocalPixelModel()
    m = np.zeros((8, 8), bool)
    m[:4] = True
    acc = dataset_localized_accuracy(model, data, [CorruptionSpec("identity")], m, "corrupted")
    assert acc == 1.0
    one = dataset_localized_accuracy(model, data[:1], [CorruptionSpec("gaussian_noise", 5, 1)], m, "corrupted")
    from spatialbench.corruptions import corrupt_localized

    x, y = data[0]
    direct = localized_accuracy(model.predict(corrupt_localized(x, CorruptionSpec("gaussian_noise", 5, (1, 0)), m)), y, m, "corrupted")
    assert one == direct


def test_dataset_accuracy_pooled_vs_per_image():
    data = synthetic_dataset(2, seed=4)
    model = LocalPixelModel()
    masks = [np.eye(8, dtype=bool), np.ones((8, 8), bool)]
    specs = [CorruptionSpec("gaussian_noise", 5, 0)]
    per = dataset_localized_accuracy(model, data, specs, lambda i, x: masks[i], "corrupted")
    pooled = dataset_localized_accuracy(model, data, specs, lambda i, x: masks[i], "corrupted", aggregation="pooled")
    assert 0 <= per <= 1 and 0 <= pooled <= 1
    with pytest.raises(ValueError):
        dataset_localized_accuracy(model, data, specs, masks[0], aggregation="mean")
