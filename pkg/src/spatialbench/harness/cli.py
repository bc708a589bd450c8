"""Command-line entry point.

``spatialbench natural|adversarial|ensemble-sweep|report`` with a config
file (``--config``) and per-flag overrides.  Outputs land in ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config, parse_number, parse_size
from .data import DatasetError
from .report import FORMATS, emit_report
from .runner import (
    load_records,
    run_adversarial_benchmark,
    run_ensemble_sweep,
    run_natural_benchmark,
    write_records,
    write_sweep,
    write_traces,
)

log = logging.getLogger("spatialbench")


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON or YAML config file")
    p.add_argument("--seed", type=int, action="append", dest="seeds", help="run seed (repeatable)")
    p.add_argument("--ratio", type=float, action="append", dest="ratios", help="corruption ratio (repeatable)")
    p.add_argument("--patch-size", type=parse_size, help="patch size WxH")
    p.add_argument("--mask-size", type=parse_size, help="static mask size WxH")
    p.add_argument("--mask-mode", choices=("bernoulli", "exact", "static"), help="natural-run mask mode")
    p.add_argument("--attack-mask-mode", choices=("bernoulli", "exact", "static"), help="adversarial-run mask mode")
    p.add_argument("--severity", type=int, action="append", dest="severities", help="severity 1..5 (repeatable)")
    p.add_argument("--corruption", action="append", dest="corruptions", help="corruption kind (repeatable)")
    p.add_argument("--model", action="append", dest="models", help="registered model name (repeatable)")
    p.add_argument("--epsilon", type=parse_number, action="append", dest="epsilons", help="attack budget, e.g. 16/255")
    p.add_argument("--n-att", type=int, dest="n_att", help="number of attacks")
    p.add_argument("--iters", type=int, dest="iterations", help="PGD iterations per attack")
    p.add_argument("--position", action="append", dest="positions", help="static mask position or x0,y0")
    p.add_argument("--dataset", help="dataset directory or synthetic|low-margin|conflict")
    p.add_argument("--workers", type=int, help="image-level worker threads")
    p.add_argument("--out", help="output directory")


_OVERRIDES = (
    "seeds", "ratios", "patch_size", "mask_size", "mask_mode", "attack_mask_mode", "severities", "corruptions", "models",
    "epsilons", "n_att", "iterations", "positions", "dataset", "workers", "out",
)


def _config(args):
    return load_config(args.config, **{k: getattr(args, k) for k in _OVERRIDES})


def _cmd_natural(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    records = []
    try:
        run_natural_benchmark(cfg, into=records)
    finally:
        # partial results survive a failure midway
        write_records(records, out / "records.json")
    emit_report(records, out, ("csv", "markdown"))
    _write_config(cfg, out)
    print(f"{len(records)} records -> {out / 'records.json'}")
    return 0


def _cmd_adversarial(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    run = run_adversarial_benchmark(cfg)
    write_records(run.records, out / "records.json")
    write_traces(run.traces, out)
    emit_report(run.records, out, ("csv", "markdown"))
    _write_config(cfg, out)
    print(f"{len(run.records)} records, {len(run.traces)} traces -> {out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    rows = run_ensemble_sweep(cfg)
    path = write_sweep(rows, out)
    _write_config(cfg, out)
    for r in rows:
        print(f"gamma={r.gamma:.2f}  ce_nat={r.ce_nat:+.4f}  ce_adv={r.ce_adv:+.4f}  clean_err={r.clean_err:+.4f}")
    print(f"-> {path}")
    return 0


def _cmd_report(args) -> int:
    records = load_records(args.records)
    sweep = None
    if args.sweep is not None:
        from ..ensemble import read_sweep_csv

        sweep = read_sweep_csv(args.sweep)
    paths = emit_report(records, args.out, args.format or ("csv", "json", "markdown", "plots"), sweep)
    for p in paths:
        print(p)
    return 0


def _write_config(cfg, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    doc = dict(cfg.to_dict(), config_hash=cfg.config_hash())
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatialbench", description="Spatial robustness benchmark for segmentation models")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("natural", _cmd_natural, "localized natural corruptions"),
        ("adversarial", _cmd_adversarial, "region-aware multi-attack"),
        ("ensemble-sweep", _cmd_sweep, "gamma sweep of the two-model ensemble"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_run_flags(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("report", help="tables and plots from a records.json")
    p.add_argument("records", type=Path)
    p.add_argument("--sweep", type=Path, help="sweep.csv to plot")
    p.add_argument("--format", action="append", choices=FORMATS)
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
