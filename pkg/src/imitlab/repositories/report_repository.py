"""
Report repository - persistence for campaign reports and worst-case sweeps.

CSV is written with a fixed column order and "\\n" line endings so that
identical reports give byte-identical files. Reals use repr(), which
round-trips exactly; non-finite reals use "+inf", "-inf" and "nan".
"""
import csv
import io
import logging
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..core.schemas import REPORT_COLUMNS, CampaignReport, OutputFormat, ReportRow, format_extended
from ..services.bounds import BoundReport
from ..services.worstcase import SweepRow

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("gamma", "v_e", "v_i", "gap", "epsilon", "thm1_rhs", "ratio")


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def to_report_rows(
    reports: Iterable[BoundReport],
    *,
    campaign: str,
    trial: int,
    seed: int,
    gamma: float,
    m: int | None = None,
    delta: float | None = None,
    algorithm: str = "",
    train_metric: float | None = None,
) -> list[ReportRow]:
    """Flatten BoundReports into report rows sharing one trial context."""
    return [
        ReportRow(
            campaign=campaign,
            trial=trial,
            seed=seed,
            gamma=gamma,
            bound_id=report.bound_id.value,
            lhs=report.lhs,
            rhs=report.rhs,
            slack=report.slack,
            holds=report.holds,
            m=m,
            delta=delta,
            algorithm=algorithm,
            train_metric=None if train_metric is None else float(train_metric),
            inputs={key: _plain(value) for key, value in report.inputs.items()},
        )
        for report in reports
    ]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        formatted = format_extended(value)
        return formatted if isinstance(formatted, str) else repr(formatted)
    return str(value)


def _csv_text(columns: tuple[str, ...], records: Iterable[dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for record in records:
        writer.writerow([_cell(record[column]) for column in columns])
    return buffer.getvalue()


def _write(text: str, path: Path | None) -> None:
    if path is None:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("Report written to %s (%d bytes)", path, len(text))


def render_report(report: CampaignReport, fmt: OutputFormat | str) -> str:
    fmt = OutputFormat(fmt)
    if fmt is OutputFormat.JSON:
        return report.model_dump_json(indent=2) + "\n"
    return _csv_text(REPORT_COLUMNS, (row.model_dump() for row in report.rows))


def emit_report(report: CampaignReport, fmt: OutputFormat | str, path: Path | None = None) -> str:
    """
    Render a campaign report and, when path is given, persist it.

    Args:
        report: Campaign report to render
        fmt: "csv" (flat rows, exact column order) or "json" (full report)
        path: Destination file; parent directories are created

    Returns:
        The rendered text

    Raises:
        OSError: if the path cannot be written
    """
    text = render_report(report, fmt)
    _write(text, path)
    return text


def load_report(path: Path) -> CampaignReport:
    """Parse a JSON report written by emit_report."""
    return CampaignReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def parse_csv_rows(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def emit_sweep(rows: Iterable[SweepRow], path: Path | None = None) -> str:
    """Worst-case gamma sweep as plot-ready CSV; ratio is "nan" at gamma = 0."""
    records = ({column: float(getattr(row, column)) for column in SWEEP_COLUMNS} for row in rows)
    text = _csv_text(SWEEP_COLUMNS, records)
    _write(text, path)
    return text


def is_violation(row: ReportRow) -> bool:
    return not row.holds and math.isfinite(row.rhs)
