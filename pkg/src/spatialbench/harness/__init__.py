"""Operational shell: configuration, datasets, runs, reports and the CLI."""

from .config import SCHEMA_VERSION, RunConfig, load_config
from .data import DatasetError, Sample, ingest_dataset, load_samples
from .registry import build_model, register_model, registered_models
from .report import emit_report, table_rows
from .runner import (
    load_records,
    run_adversarial_benchmark,
    run_ensemble_sweep,
    run_natural_benchmark,
    write_records,
)

__all__ = [
    "SCHEMA_VERSION",
    "DatasetError",
    "RunConfig",
    "Sample",
    "build_model",
    "emit_report",
    "ingest_dataset",
    "load_config",
    "load_records",
    "load_samples",
    "register_model",
    "registered_models",
    "run_adversarial_benchmark",
    "run_ensemble_sweep",
    "run_natural_benchmark",
    "table_rows",
    "write_records",
]
