import numpy as np
import pytest

from spatialbench.core import LossSpec
from spatialbench.toymodels import (
    ConflictPairModel,
    GlobalMixModel,
    LocalPixelModel,
    gaussian_mixing_matrix,
    low_margin_scene,
    synthetic_dataset,
)


def fd_check(model, x, spec, probes, rng, h=1e-6):
    _, g = model.loss_and_gradient(x, spec)
    worst = 0.0
    for _ in range(probes):
        idx = tuple(rng.integers(0, n) for n in x.shape)
        d = np.zeros_like(x)
        d[idx] = h
        lp = model.loss_and_gradient(x + d, spec)[0]
        lm = model.loss_and_gradient(x - d, spec)[0]
        fd = (lp - lm) / (2 * h)
        worst = max(worst, abs(g[idx] - fd) / max(abs(fd), abs(g[idx]), 1e-8))
    return worst


@pytest.mark.parametrize("model", [LocalPixelModel(), GlobalMixModel()], ids=lambda m: m.name)
def test_gradient_matches_finite_differences(model):
    rng = np.random.default_rng(0)
    x = rng.uniform(0.1, 0.9, (6, 7, 3))
    spec = LossSpec(rng.random((6, 7)) < 0.5, rng.integers(0, 3, (6, 7)))
    assert fd_check(model, x, spec, 10, rng) < 1e-4


def test_conflict_gradient_matches_finite_differences():
    model = ConflictPairModel()
    x, y, _ = model.example()
    spec = LossSpec(np.array([[False, True, True]]), y)
    assert fd_check(model, x + 0.01, spec, 3, np.random.default_rng(1)) < 1e-4


def test_local_model_is_pixelwise():
    rng = np.random.default_rng(2)
    x = rng.random((5, 5, 3))
    m = LocalPixelModel()
    x2 = x.copy()
    x2[2, 3] = rng.random(3)
    changed = np.any(m.forward(x) != m.forward(x2), axis=-1)
    assert changed.sum() == 1 and changed[2, 3]


def test_global_single_pixel_gradient_is_dense():
    x = np.random.default_rng(3).random((8, 8, 3))
    f = np.zeros((8, 8), bool)
    f[0, 0] = True
    g = GlobalMixModel().input_gradient(x, LossSpec(f, np.zeros((8, 8), int)))
    assert np.all(np.abs(g).sum(-1) > 0)


def test_zero_weight_model_is_uniform_with_zero_gradient():
    m = LocalPixelModel(np.zeros((3, 3)), np.zeros(3))
    x = np.random.default_rng(0).random((4, 4, 3))
    assert np.all(m.probabilities(x) == 1 / 3)
    assert np.all(m.input_gradient(x, LossSpec(np.ones((4, 4), bool), np.zeros((4, 4), int))) == 0)


def test_mixing_matrix_row_stochastic_and_readonly():
    k = gaussian_mixing_matrix(4, 5, 1.5)
    assert np.allclose(k.sum(1), 1.0)
    with pytest.raises(ValueError):
        k[0, 0] = 1.0


def test_shape_and_parameter_validation():
    with pytest.raises(ValueError):
        LocalPixelModel().forward(np.zeros((2, 2, 4)))
    with pytest.raises(ValueError):
        GlobalMixModel(mix=1.5)
    with pytest.raises(ValueError):
        ConflictPairModel().forward(np.zeros((1, 2, 1)))
    with pytest.raises(ValueError):
        LocalPixelModel(num_classes=9)


def test_toy_models_are_correct_on_their_scenes():
    for x, y in synthetic_dataset(4, seed=0):
        assert np.array_equal(LocalPixelModel().predict(x), y)
    for layout in ("uniform", "quadrants"):
        x, y = low_margin_scene(layout=layout, offset=0.03)
        assert np.array_equal(GlobalMixModel().predict(x), y)


def test_synthetic_dataset_is_seeded():
    a, b = synthetic_dataset(2, seed=9), synthetic_dataset(2, seed=9)
    assert all(np.array_equal(p[0], q[0]) and np.array_equal(p[1], q[1]) for p, q in zip(a, b))
