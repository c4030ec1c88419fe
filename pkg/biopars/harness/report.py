"""
Report emission: per-item CSV with an aggregate section, Markdown summary
tables, and a JSON metadata sidecar next to the output file.
"""

import json
import logging
from pathlib import Path
from typing import Literal, Sequence

import pandas as pd

from biopars.config import AGGREGATE_ROW_ID
from biopars.errors import InputError
from biopars.harness.evaluation import MetricReport

logger = logging.getLogger(__name__)

ReportFormat = Literal["csv", "markdown"]

SETTING_LABELS = {"zs": "ZS", "sim": "Sim", "mmr": "MMR"}
CSV_COLUMNS = ["id", "metric", "score"]


def report_frame(report: MetricReport) -> pd.DataFrame:
    """String-typed rows: per-item scores in shortest round-trip form, then one aggregate line per metric."""
    items = [[row.id, row.metric, repr(row.score)] for row in report.rows]
    aggregates = [[AGGREGATE_ROW_ID, metric, report.aggregate_cell(metric)] for metric in report.metrics]
    return pd.DataFrame(items + aggregates, columns=CSV_COLUMNS, dtype=str)


def render_csv(report: MetricReport) -> str:
    return report_frame(report).to_csv(index=False, lineterminator="\n")


def _ordered_unique(values) -> list:
    seen: dict = {}
    for value in values:
        seen.setdefault(value, None)
    return list(seen)


def render_markdown(reports: Sequence[MetricReport]) -> str:
    """
    One table per metric: settings as rows, systems as columns.

    The best aggregate of each column is bolded (every cell equal to the
    column maximum, compared at the printed precision).
    """
    metrics = _ordered_unique(m for report in reports for m in report.metrics)
    systems = _ordered_unique(report.system for report in reports)
    settings = [s for s in SETTING_LABELS if any(report.setting == s for report in reports)]

    tables = []
    for metric in metrics:
        cells = {
            (report.setting, report.system): report.aggregate_cell(metric)
            for report in reports
            if metric in report.metrics
        }
        best = {}
        for system in systems:
            column = [float(cells[(s, system)]) for s in settings if (s, system) in cells]
            best[system] = max(column) if column else None

        lines = [f"### {metric}", "", "| Setting | " + " | ".join(systems) + " |", "|" + "---|" * (len(systems) + 1)]
        for setting in settings:
            row = []
            for system in systems:
                cell = cells.get((setting, system))
                if cell is None:
                    row.append("-")
                elif float(cell) == best[system]:
                    row.append(f"**{cell}**")
                else:
                    row.append(cell)
            lines.append(f"| {SETTING_LABELS[setting]} | " + " | ".join(row) + " |")
        tables.append("\n".join(lines) + "\n")
    return "\n".join(tables)


def metadata_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".meta.json")


def render_report(reports: MetricReport | Sequence[MetricReport], fmt: ReportFormat, out: str | Path) -> Path:
    """
    Write the report to `out` and its run metadata to `<out>.meta.json`.

    Args:
        reports: One report, or several (settings x systems) for the Markdown tables
        fmt: "csv" (single report only) or "markdown"
        out: Output file

    Returns:
        Path of the written report

    Raises:
        OSError: The output path is not writable
    """
    if isinstance(reports, MetricReport):
        reports = [reports]
    if fmt == "csv":
        if len(reports) != 1:
            raise ValueError(f"CSV output holds exactly one report, got {len(reports)}")
        text = render_csv(reports[0])
    elif fmt == "markdown":
        text = render_markdown(reports)
    else:
        raise ValueError(f"unknown report format {fmt!r}")

    out = Path(out)
    with open(out, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    with open(metadata_path(out), "w", encoding="utf-8", newline="") as f:
        json.dump({"runs": [report.metadata for report in reports]}, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("Wrote %s report to %s", fmt, out)
    return out


def read_report_csv(path: str | Path) -> tuple[pd.DataFrame, dict[str, str]]:
    """
    Parse an emitted CSV report.

    Returns:
        Per-item rows with a float `score` column, and the aggregate cell of each metric
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != CSV_COLUMNS:
        raise InputError(f"{path}: expected columns {CSV_COLUMNS}, got {list(frame.columns)}")
    is_aggregate = frame["id"] == AGGREGATE_ROW_ID
    items = frame[~is_aggregate].reset_index(drop=True)
    items["score"] = items["score"].astype(float)
    aggregates = dict(zip(frame.loc[is_aggregate, "metric"], frame.loc[is_aggregate, "score"]))
    return items, aggregates
