import math

import numpy as np
import pytest

from spatialbench.core import LossSpec, SegmentationModel
from spatialbench.ensemble import (
    EnsembleModel,
    SweepRow,
    SweepSettings,
    ce_adv,
    ce_nat,
    ensemble_forward,
    read_sweep_csv,
    sweep_gamma,
    write_sweep_csv,
)
from spatialbench.toymodels import GlobalMixModel, LocalPixelModel, synthetic_dataset

FAST = SweepSettings(iterations=10, n_attacks=2)


class FixedProbs(SegmentationModel):
    """Constant logits producing the given per-pixel probabilities."""

    def __init__(self, probs):
        super().__init__()
        self.logits = np.log(np.asarray(probs, float))
        self.num_classes = self.logits.shape[-1]

    def forward(self, x):
        return self.logits.copy()

    def backward(self, x, grad_scores):
        return np.zeros_like(x)


def test_arithmetic_example():
    f1, f2 = FixedProbs([[[0.7, 0.3]]]), FixedProbs([[[0.2, 0.8]]])
    g = ensemble_forward(f1, f2, 0.4, np.zeros((1, 1, 1)))
    assert np.allclose(g, [[[0.4, 0.6]]])
    assert EnsembleModel(f1, f2, 0.4).predict(np.zeros((1, 1, 1)))[0, 0] == 1


def test_rows_are_distributions():
    x = np.random.default_rng(0).random((5, 5, 3))
    for gamma in np.linspace(0, 1, 7):
        p = ensemble_forward(LocalPixelModel(), GlobalMixModel(), gamma, x)
        assert np.all(p >= 0) and np.allclose(p.sum(-1), 1.0, atol=1e-9)


def test_endpoints_are_exact():
    x = np.random.default_rng(1).random((5, 5, 3))
    f1, f2 = GlobalMixModel(), LocalPixelModel()
    assert np.array_equal(EnsembleModel(f1, f2, 1.0).forward(x), f1.probabilities(x))
    assert np.array_equal(EnsembleModel(f1, f2, 0.0).forward(x), f2.probabilities(x))


def test_validation():
    with pytest.raises(ValueError):
        EnsembleModel(LocalPixelModel(), LocalPixelModel(num_classes=2), 0.5)
    with pytest.raises(ValueError):
        EnsembleModel(LocalPixelModel(), GlobalMixModel(), 1.2)
    with pytest.raises(ValueError):
        EnsembleModel(LocalPixelModel(), GlobalMixModel(), 0.5, mode="votes")


@pytest.mark.parametrize("mode", ["probabilities", "logits"])
def test_ensemble_gradient_matches_finite_differences(mode):
    rng = np.random.default_rng(2)
    x = rng.uniform(0.1, 0.9, (5, 5, 3))
    g = EnsembleModel(GlobalMixModel(), LocalPixelModel(), 0.35, mode)
    spec = LossSpec(rng.random((5, 5)) < 0.5, rng.integers(0, 3, (5, 5)))
    _, grad = g.loss_and_gradient(x, spec)
    h = 1e-6
    for _ in range(10):
        idx = tuple(rng.integers(0, n) for n in x.shape)
        d = np.zeros_like(x)
        d[idx] = h
        fd = (g.loss_and_gradient(x + d, spec)[0] - g.loss_and_gradient(x - d, spec)[0]) / (2 * h)
        assert grad[idx] == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_endpoint_errors_are_zero():
    data = synthetic_dataset(3, contrast=0.2, noise=0.01)
    f1, f2 = GlobalMixModel(), LocalPixelModel()
    assert ce_nat(f1, f2, 0.0, data, FAST) == 0.0
    assert ce_adv(f1, f2, 1.0, data, FAST) == 0.0


def test_local_pair_has_no_adversarial_error():
    data = synthetic_dataset(3)
    assert ce_adv(LocalPixelModel(), LocalPixelModel(), 1.0, data, FAST) == 0.0


def test_identical_members_give_zero_everywhere():
    data = synthetic_dataset(2)
    rows = sweep_gamma(LocalPixelModel(), LocalPixelModel(), data, [0.0, 0.5, 1.0], FAST)
    assert all(r.ce_nat == 0.0 and r.ce_adv == 0.0 and r.clean_err == 0.0 for r in rows)


def test_dominating_f2_gives_non_negative_natural_error():
    # the global member is more noise robust inside the mask, so as f2 it is never beaten
    data = synthetic_dataset(4, contrast=0.2, noise=0.01)
    rows = sweep_gamma(LocalPixelModel(), GlobalMixModel(), data, np.linspace(0, 1, 11), SweepSettings(iterations=1, n_attacks=1))
    assert all(r.ce_nat >= 0 for r in rows)


def test_csv_round_trip(tmp_path):
    rows = [SweepRow(0.0, 0.0, -0.1, 0.0), SweepRow(1.0, -0.25, 0.0, math.nan)]
    path = write_sweep_csv(rows, tmp_path / "s.csv")
    assert path.read_text().splitlines()[0] == "gamma,ce_nat,ce_adv,clean_err"
    back = read_sweep_csv(path)
    assert back[0] == rows[0] and math.isnan(back[1].clean_err)
