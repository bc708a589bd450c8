"""Benchmark orchestration: natural and adversarial runs, and the ensemble sweep.

Every random draw is seeded from the run seed plus the image index (and the
corruption or ratio it belongs to), never from the model, so all models in
a run see the same masks and the same corruption noise.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..attack import AttackConfig, region_aware_multi_attack
from ..core import EvalRecord, SegmentationModel
from ..corruptions import KINDS, CorruptionSpec, corrupt_localized
from ..ensemble import SweepSettings, sweep_gamma, write_sweep_csv
from ..maskgen import exact_ratio_mask, partition_grid, sample_ratio_mask, static_mask
from ..metrics import UndefinedBaseline, UndefinedMetric, mean_defined, pixel_accuracy, region_score, relative_corruption_error
from .config import SCHEMA_VERSION, RunConfig
from .data import Sample, load_samples
from .registry import build_model

log = logging.getLogger(__name__)


def _guard(model: SegmentationModel):
    return nullcontext() if model.concurrent else model.lock


def _predict(model, x):
    with _guard(model):
        return model.predict(x)


def _map(fn, items, workers: int):
    """Order-preserving map over a bounded thread pool."""
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _ratio_key(r: float) -> int:
    return int(round(r * 1_000_000))


def natural_mask(config: RunConfig, shape, seed: int, idx: int, ratio: float, mode: str | None = None) -> np.ndarray:
    h, w = shape
    mode = mode or config.mask_mode
    if mode == "static":
        return static_mask(h, w, config.mask_size, config.positions[0])
    grid = partition_grid(h, w, config.patch_size)
    seq = [seed, idx, _ratio_key(ratio)]
    if mode == "exact":
        return exact_ratio_mask(grid, ratio, seq)
    return sample_ratio_mask(grid, ratio, seq)


def _aggregate(scores, attr_acc: str, attr_correct: str, attr_n: str, how: str) -> float:
    if how == "pooled":
        n = sum(getattr(s, attr_n) for s in scores)
        return sum(getattr(s, attr_correct) for s in scores) / n if n else math.nan
    try:
        return mean_defined(getattr(s, attr_acc) for s in scores)
    except UndefinedMetric:
        return math.nan


def _rce(clean: float, corrupted: float) -> tuple[float, str | None]:
    if math.isnan(clean) or math.isnan(corrupted):
        return math.nan, "undefined region"
    try:
        return relative_corruption_error(clean, corrupted), None
    except UndefinedBaseline as exc:
        return math.nan, str(exc)


def _region_records(base: dict, clean, corrupted, how: str, extra: dict) -> list[EvalRecord]:
    out = []
    for region, acc, cor, n, metric in (
        ("corrupted", "a_m", "correct_in", "s", "A_M"),
        ("non-corrupted", "a_mbar", "correct_out", "s_bar", "A_Mbar"),
    ):
        c0 = _aggregate(clean, acc, cor, n, how)
        c1 = _aggregate(corrupted, acc, cor, n, how)
        rce, reason = _rce(c0, c1)
        out.append(EvalRecord(metric=metric, value=c1, region=region, extra=dict(extra, clean=_num(c0)), **base))
        rce_extra = dict(extra) if reason is None else dict(extra, undefined=reason)
        out.append(EvalRecord(metric="RCE", value=rce, region=region, extra=rce_extra, **base))
    return out


def _num(v: float):
    return None if math.isnan(v) else v


def _common_extra(config: RunConfig) -> dict:
    return {"config_hash": config.config_hash(), "schema_version": SCHEMA_VERSION, "aggregation": config.aggregation}


def run_natural_benchmark(
    config: RunConfig, samples: list[Sample] | None = None, into: list[EvalRecord] | None = None
) -> list[EvalRecord]:
    """Localized natural corruptions for every model, corruption, severity, ratio and seed.

    Emits, per combination, ``A_M``/``A_Mbar`` of the corrupted input and
    the matching ``RCE`` against the clean prediction on the same masks,
    plus one clean ``accuracy`` record per model and seed.  Records are
    appended to ``into`` as they are produced, so a caller keeps the partial
    results of a run that fails midway.
    """
    samples = load_samples(config) if samples is None else samples
    extra0 = _common_extra(config)
    records: list[EvalRecord] = [] if into is None else into
    if not samples:
        log.warning("natural benchmark: empty dataset, no records")
        return records
    for name in config.models:
        model = build_model(name, config.num_classes)
        clean = _map(lambda s: _predict(model, s.image), samples, config.workers)
        for seed in config.seeds:
            acc = mean_defined(pixel_accuracy(p, s.labels) for p, s in zip(clean, samples))
            records.append(
                EvalRecord(model=name, corruption="clean", metric="accuracy", value=acc, seed=seed, extra=dict(extra0))
            )
            for kind in config.corruptions:
                for severity in config.severities:
                    for ratio in config.ratios:

                        def one(i, kind=kind, severity=severity, ratio=ratio, seed=seed):
                            s = samples[i]
                            m = natural_mask(config, s.labels.shape, seed, i, ratio)
                            spec = CorruptionSpec(kind, severity, (seed, i, KINDS.index(kind), severity))
                            pred = _predict(model, corrupt_localized(s.image, spec, m))
                            return region_score(clean[i], s.labels, m), region_score(pred, s.labels, m), m.mean()

                        out = _map(one, range(len(samples)), config.workers)
                        base = dict(model=name, corruption=kind, severity=severity, ratio=ratio, seed=seed)
                        extra = dict(extra0, mask_mode=config.mask_mode, covered=float(np.mean([o[2] for o in out])))
                        records += _region_records(base, [o[0] for o in out], [o[1] for o in out], config.aggregation, extra)
    return records


@dataclass
class AdversarialRun:
    records: list[EvalRecord]
    traces: dict[str, list[dict]] = field(default_factory=dict)


def run_adversarial_benchmark(config: RunConfig, samples: list[Sample] | None = None) -> AdversarialRun:
    """Region-aware multi-attack for every model, mask placement, epsilon and seed.

    One run of ``n_att`` attacks is reused for every prefix ``1..n_att``.
    Records carry the placement in ``extra["position"]``.  Models without
    gradient support get a single record with ``value=None`` and the reason.
    Traces are keyed ``trace_<image>_<model>.json``.
    """
    samples = load_samples(config) if samples is None else samples
    extra0 = _common_extra(config)
    run = AdversarialRun([])
    for name in config.models:
        model = build_model(name, config.num_classes)
        if not getattr(model, "supports_gradients", False):
            reason = "model does not provide input gradients"
            log.warning("skipping %s: %s", name, reason)
            run.records.append(
                EvalRecord(name, "adversarial", "A_Mbar", None, config.seeds[0], region="non-corrupted",
                           extra=dict(extra0, skipped=reason))
            )
            continue
        static = config.attack_mask_mode == "static"
        placements = config.positions if static else config.ratios
        for placement in placements:
            for eps in config.epsilons:
                for seed in config.seeds:

                    def one(i, placement=placement, eps=eps, seed=seed):
                        s = samples[i]
                        if static:
                            m = static_mask(*s.labels.shape, config.mask_size, placement)
                        else:
                            m = natural_mask(config, s.labels.shape, seed, i, placement, config.attack_mask_mode)
                        cfg = AttackConfig(eps, config.alpha, config.iterations, loss="untargeted",
                                           random_start=config.random_start, rng_seed=seed)
                        with _guard(model):
                            res = region_aware_multi_attack(model, s.image, s.labels, m, config.n_att, cfg)
                        scores = [region_score(res.cumulative_after(k), s.labels, m) for k in range(1, config.n_att + 1)]
                        return region_score(res.clean_prediction, s.labels, m), scores, res, m.mean()

                    out = _map(one, range(len(samples)), config.workers)
                    tag = _placement_tag(placement)
                    ratio = float(np.mean([o[3] for o in out]))
                    for k in range(config.n_att):
                        base = dict(model=name, corruption="adversarial", severity=None, ratio=ratio, seed=seed)
                        extra = dict(extra0, position=tag, epsilon=eps, n_att=k + 1, mask_mode=config.attack_mask_mode)
                        run.records += _region_records(
                            base, [o[0] for o in out], [o[1][k] for o in out], config.aggregation, extra
                        )
                    for s, o in zip(samples, out):
                        res = o[2]
                        run.traces.setdefault(f"trace_{s.name}_{name}.json", []).append(
                            {"position": tag, "epsilon": eps, "seed": seed, "terminated_early": res.terminated_early,
                             "attacks": [t.to_dict() for t in res.trace]}
                        )
    return run


def _placement_tag(placement) -> str:
    if isinstance(placement, str):
        return placement
    if isinstance(placement, tuple):
        return ",".join(map(str, placement))
    return f"ratio={placement}"


def sweep_settings(config: RunConfig) -> SweepSettings:
    return SweepSettings(
        corruption=config.corruptions[0],
        severity=config.severities[0],
        ratio=config.ratios[0],
        patch_size=config.patch_size,
        attack_size=config.mask_size,
        attack_position=config.positions[0],
        n_attacks=config.n_att,
        epsilon=config.epsilons[0],
        iterations=config.iterations,
        seed=config.seeds[0],
        mode=config.ensemble_mode,
    )


def run_ensemble_sweep(config: RunConfig, samples: list[Sample] | None = None):
    samples = load_samples(config) if samples is None else samples
    f1, f2 = (build_model(n, config.num_classes) for n in config.ensemble)
    pairs = [(s.image, s.labels) for s in samples]
    return sweep_gamma(f1, f2, pairs, config.gammas, sweep_settings(config))


def write_records(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_records(records))
    return path


def dumps_records(records) -> str:
    return json.dumps([r.to_dict() for r in records], indent=2, sort_keys=True) + "\n"


def load_records(path) -> list[EvalRecord]:
    return [EvalRecord.from_dict(d) for d in json.loads(Path(path).read_text())]


def write_traces(traces: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fname in sorted(traces):
        p = out_dir / fname
        p.write_text(json.dumps(traces[fname], indent=2, sort_keys=True) + "\n")
        paths.append(p)
    return paths


def write_sweep(rows, out_dir) -> Path:
    return write_sweep_csv(rows, Path(out_dir) / "sweep.csv")
