"""Report emission: JSON records, a per-setting CSV/markdown table, and plots.

Table rows are keyed by ``(model, corruption, severity, ratio)`` plus the
attack placement, epsilon and attack count for adversarial records; each
metric column is the mean over seeds.  Rows are sorted by
``(model, corruption, severity)`` with ties kept in input order.
"""

from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..core import EvalRecord
from ..ensemble import SweepRow
from .runner import dumps_records

FORMATS = ("csv", "json", "markdown", "plots")
KEY_COLUMNS = ("model", "corruption", "severity", "ratio", "position", "epsilon", "n_att")
VALUE_COLUMNS = ("accuracy", "A_M", "A_Mbar", "RCE_M", "RCE_Mbar")


class ReportError(OSError):
    """The report could not be written."""


def _column(r: EvalRecord) -> str | None:
    if r.metric == "RCE":
        return {"corrupted": "RCE_M", "non-corrupted": "RCE_Mbar"}.get(r.region)
    return r.metric if r.metric in VALUE_COLUMNS else None


def _key(r: EvalRecord) -> tuple:
    e = r.extra
    return (r.model, r.corruption, r.severity, r.ratio, e.get("position", ""), e.get("epsilon", ""), e.get("n_att", ""))


def _sort_key(key: tuple):
    # severity None sorts first
    return (key[0], key[1], -1 if key[2] is None else key[2])


def table_rows(records: Iterable[EvalRecord]) -> list[dict]:
    """Seed-averaged table rows; undefined values are skipped in the mean."""
    groups: "OrderedDict[tuple, dict[str, list[float]]]" = OrderedDict()
    for r in records:
        col = _column(r)
        cells = groups.setdefault(_key(r), {})
        if col is not None and r.value is not None:
            cells.setdefault(col, []).append(r.value)
    rows = []
    for key in sorted(groups, key=_sort_key):
        row = dict(zip(KEY_COLUMNS, key))
        for col in VALUE_COLUMNS:
            vals = groups[key].get(col)
            row[col] = float(np.mean(vals)) if vals else None
        rows.append(row)
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def table_csv(records: Iterable[EvalRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(KEY_COLUMNS + VALUE_COLUMNS)
    for row in table_rows(records):
        writer.writerow([_cell(row[c]) for c in KEY_COLUMNS + VALUE_COLUMNS])
    return buf.getvalue()


def table_markdown(records: Iterable[EvalRecord]) -> str:
    cols = KEY_COLUMNS + VALUE_COLUMNS
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for row in table_rows(records):
        lines.append("| " + " | ".join(_cell(row[c]) for c in cols) + " |")
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def plot_rce_vs_ratio(records: Sequence[EvalRecord], path: Path) -> Path | None:
    """RCE against corruption ratio, one line per model and region."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[tuple[str, str], dict[float, list[float]]] = {}
    for r in records:
        if r.metric == "RCE" and r.value is not None and r.corruption != "adversarial":
            series.setdefault((r.model, r.region), {}).setdefault(r.ratio, []).append(r.value)
    if not series:
        return None
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for (model, region), pts in sorted(series.items()):
        xs = sorted(pts)
        ax.plot(xs, [np.mean(pts[x]) for x in xs], marker="o", label=f"{model} ({region})")
    ax.set_xlabel("corruption ratio r")
    ax.set_ylabel("RCE")
    ax.legend(fontsize=7)
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=120)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def plot_gamma_sweep(rows: Sequence[SweepRow], path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    g = [r.gamma for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(g, [r.ce_nat for r in rows], marker="o", label="CE natural")
    ax.plot(g, [r.ce_adv for r in rows], marker="s", label="CE adversarial")
    ax.plot(g, [r.clean_err for r in rows], marker="^", label="clean error")
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("gamma")
    ax.legend(fontsize=7)
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=120)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def emit_report(
    records: Sequence[EvalRecord],
    out_dir,
    formats: Sequence[str] = ("csv", "json", "markdown"),
    sweep: Sequence[SweepRow] | None = None,
) -> list[Path]:
    """Write the requested report files into ``out_dir`` and return their paths."""
    out_dir = Path(out_dir)
    for f in formats:
        if f not in FORMATS:
            raise ValueError(f"unknown report format {f!r}; expected one of {FORMATS}")
    if out_dir.exists() and not out_dir.is_dir():
        raise ReportError(f"{out_dir} exists and is not a directory")
    written = []
    if "json" in formats:
        written.append(_write(out_dir / "records.json", dumps_records(records)))
    if "csv" in formats:
        written.append(_write(out_dir / "table.csv", table_csv(records)))
    if "markdown" in formats:
        written.append(_write(out_dir / "table.md", table_markdown(records)))
    if "plots" in formats:
        out_dir.mkdir(parents=True, exist_ok=True)
        p = plot_rce_vs_ratio(records, out_dir / "rce_vs_ratio.png")
        if p is not None:
            written.append(p)
        if sweep:
            written.append(plot_gamma_sweep(sweep, out_dir / "gamma_sweep.png"))
    return written
