"""Localized l-infinity attacks and the region-aware multi-attack analysis.

A localized attack perturbs only the pixels inside a corruption mask ``M``
while its loss is measured on a separate fooling region ``F``.  The
multi-attack repeats the attack on the same mask, each time restricting
``F`` to pixels that every previous attack left correctly classified, and
merges the results into a cumulative adversarial output: each pixel keeps
the first wrong label any attack produced for it, otherwise its clean
prediction.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import IGNORE_INDEX, LossSpec, argmax_prediction, as_image, as_labels, as_mask
from .losses import EmptyFoolingRegion, masked_loss, masked_loss_and_score_grad
from .metrics import RegionScore, region_score

__all__ = [
    "AttackConfig",
    "AttackResult",
    "AttackTrace",
    "EmptyFoolingRegion",
    "MultiAttackResult",
    "evaluate_cumulative",
    "localized_attack",
    "masked_loss",
    "masked_loss_and_score_grad",
    "pgd_step",
    "region_aware_multi_attack",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackConfig:
    """Settings of one localized sign-gradient attack.

    ``epsilon`` and ``alpha`` are in ``[0, 1]`` pixel units (16/255 is
    ``16 / 255``).  ``alpha`` defaults to ``epsilon / 10``.
    """

    epsilon: float = 16 / 255
    alpha: float | None = None
    iterations: int = 50
    mask: np.ndarray | None = None
    loss: str = "untargeted"
    target: int | None = None
    random_start: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.epsilon / 10)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.alpha > self.epsilon:
            warnings.warn(f"step size {self.alpha} exceeds epsilon {self.epsilon}", stacklevel=3)
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.loss not in ("untargeted", "targeted"):
            raise ValueError(f"unknown loss kind {self.loss!r}")


def pgd_step(x_adv, grad, alpha: float, epsilon: float, mask, x_orig) -> np.ndarray:
    """One signed-gradient ascent step projected back onto the feasible set.

    The running perturbation ``x_adv - x_orig`` is moved by
    ``alpha * sign(grad)``, clamped to ``[-epsilon, epsilon]``, zeroed
    outside the mask, and the resulting image is clipped to ``[0, 1]``.
    """
    x_orig = np.asarray(x_orig, dtype=np.float64)
    x_adv = np.asarray(x_adv, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if x_adv.shape != x_orig.shape or grad.shape != x_orig.shape:
        raise ValueError("x_adv, grad and x_orig must share one shape")
    m = as_mask(mask, x_orig.shape[:2])[:, :, None]
    delta = x_adv - x_orig + alpha * np.sign(grad)
    delta = np.clip(delta, -epsilon, epsilon) * m
    return np.where(m, np.clip(x_orig + delta, 0.0, 1.0), x_orig)


@dataclass
class AttackResult:
    x_adv: np.ndarray
    loss_curve: list[float]
    noop: bool = False


def _loss_spec(config: AttackConfig, fooling_region, y, ignore_index) -> LossSpec:
    return LossSpec(fooling_region, y, kind=config.loss, target=config.target, ignore_index=ignore_index)


def localized_attack(
    model,
    x,
    y,
    config: AttackConfig,
    fooling_region,
    ignore_index: int = IGNORE_INDEX,
    on_step: Callable[[int, np.ndarray], None] | None = None,
) -> AttackResult:
    """Maximize the fooling-region loss by perturbing only ``config.mask``.

    Runs ``config.iterations`` calls of :func:`pgd_step` starting from a zero
    perturbation (or a uniform random one when ``random_start`` is set).
    ``loss_curve`` holds the loss before each step plus the final loss.
    An empty fooling region returns ``x`` unchanged with ``noop=True``.
    ``on_step(i, x_adv)`` is called after every step.
    """
    x = as_image(x)
    y = as_labels(y, ignore_index=ignore_index)
    if config.mask is None:
        raise ValueError("attack config has no mask")
    m = as_mask(config.mask, x.shape[:2])
    loss = _loss_spec(config, fooling_region, y, ignore_index)
    if loss.size == 0:
        return AttackResult(x.copy(), [], noop=True)

    x_adv = x.copy()
    if config.random_start:
        rng = np.random.default_rng(config.rng_seed)
        start = rng.uniform(-config.epsilon, config.epsilon, size=x.shape)
        x_adv = pgd_step(x + start * m[:, :, None], np.zeros_like(x), 0.0, config.epsilon, m, x)

    curve = []
    for i in range(config.iterations):
        value, grad = model.loss_and_gradient(x_adv, loss)
        curve.append(value)
        x_adv = pgd_step(x_adv, grad, config.alpha, config.epsilon, m, x)
        if on_step is not None:
            on_step(i, x_adv)
    curve.append(masked_loss(model.forward(x_adv), loss, model.score_kind))
    return AttackResult(x_adv, curve)


@dataclass
class AttackTrace:
    attack_index: int
    fooling_region_size: int
    newly_misclassified: int
    loss_curve: list[float]
    noop: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class MultiAttackResult:
    """Outcome of the region-aware multi-attack.

    ``history[k]`` is the cumulative output after ``k + 1`` attacks;
    ``fooling_regions[k]`` and ``correct_masks[k]`` are the fooling region
    used by attack ``k + 1`` and the still-correct pixels after it.
    """

    clean_prediction: np.ndarray
    cumulative: np.ndarray
    trace: list[AttackTrace]
    history: list[np.ndarray] = field(default_factory=list)
    fooling_regions: list[np.ndarray] = field(default_factory=list)
    correct_masks: list[np.ndarray] = field(default_factory=list)
    adversarial_images: list[np.ndarray] = field(default_factory=list)
    terminated_early: bool = False

    def cumulative_after(self, n_attacks: int) -> np.ndarray:
        """Cumulative output after ``n_attacks`` attacks (prefix of this run)."""
        if n_attacks < 1:
            raise ValueError("n_attacks must be >= 1")
        if not self.history:
            return self.clean_prediction.copy()
        return self.history[min(n_attacks, len(self.history)) - 1]

    def trace_json(self) -> str:
        return json.dumps([t.to_dict() for t in self.trace], indent=2)


def region_aware_multi_attack(
    model,
    x,
    y,
    mask,
    n_attacks: int,
    config: AttackConfig,
    initial_fooling_region=None,
    ignore_index: int = IGNORE_INDEX,
    on_step: Callable[[int, int, np.ndarray], None] | None = None,
) -> MultiAttackResult:
    """Run ``n_attacks`` localized attacks on ``mask`` with shrinking fooling regions.

    The first fooling region is every correctly classified pixel (optionally
    intersected with ``initial_fooling_region``).  Stops early once no
    correctly classified pixel remains in the fooling region.
    ``on_step(attack_index, iteration, x_adv)`` observes every PGD step.
    """
    if n_attacks < 1:
        raise ValueError("n_attacks must be >= 1")
    x = as_image(x)
    y = as_labels(y, ignore_index=ignore_index)
    m = as_mask(mask, x.shape[:2])
    config = dataclasses.replace(config, mask=m)
    valid = y != ignore_index

    clean = argmax_prediction(model.forward(x))
    cumulative = clean.copy()
    correct = (cumulative == y) & valid
    fooling = correct.copy()
    if initial_fooling_region is not None:
        fooling &= as_mask(initial_fooling_region, y.shape)

    result = MultiAttackResult(clean_prediction=clean, cumulative=cumulative, trace=[])
    for k in range(n_attacks):
        fooling = fooling & correct
        if not fooling.any():
            log.debug("fooling region empty before attack %d; stopping", k + 1)
            result.terminated_early = True
            break
        seed = int(np.random.SeedSequence([config.rng_seed, k]).generate_state(1)[0])
        attack_cfg = dataclasses.replace(config, rng_seed=seed)
        step_cb = None if on_step is None else (lambda i, xa, k=k: on_step(k, i, xa))
        res = localized_attack(model, x, y, attack_cfg, fooling, ignore_index, on_step=step_cb)
        y_adv = argmax_prediction(model.forward(res.x_adv))
        current = (y_adv == y) & valid
        newly = ~current & correct
        correct = current & correct
        cumulative = np.where(newly, y_adv, cumulative)

        result.trace.append(AttackTrace(k + 1, int(fooling.sum()), int(newly.sum()), res.loss_curve, res.noop))
        result.history.append(cumulative.copy())
        result.fooling_regions.append(fooling.copy())
        result.correct_masks.append(correct.copy())
        result.adversarial_images.append(res.x_adv)
    result.cumulative = cumulative
    return result


def evaluate_cumulative(cumulative, y, mask, ignore_index: int = IGNORE_INDEX) -> RegionScore:
    return region_score(cumulative, y, mask, ignore_index)
