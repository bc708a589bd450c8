"""Spatial robustness benchmarking of segmentation models under localized corruptions."""

from .attack import AttackConfig, evaluate_cumulative, localized_attack, pgd_step, region_aware_multi_attack
from .core import IGNORE_INDEX, EvalRecord, LossSpec, SegmentationModel
from .corruptions import CorruptionSpec, apply_corruption_full, compose_localized, corrupt_localized
from .ensemble import EnsembleModel, ce_adv, ce_nat, ensemble_forward, sweep_gamma
from .maskgen import exact_ratio_mask, partition_grid, sample_ratio_mask, static_mask
from .metrics import localized_accuracy, miou, pixel_accuracy, region_score, relative_corruption_error
from .toymodels import ConflictPairModel, GlobalMixModel, LocalPixelModel

__version__ = "0.1.0"
