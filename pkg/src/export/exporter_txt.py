from __future__ import annotations

import os
from typing import List, Tuple

from ..core.constants import MIB, TREND_WIDTH
from ..profiler.trends import render_sparkline
from ..report.aggregate import ProfileReport, ReportRow

COLUMNS = ("Line", "Py%", "Native%", "Net Py MB", "Net C MB", "Trend", "Copy MB/s")
NUMERIC_WIDTH = {"Py%": 7, "Native%": 7, "Net Py MB": 9, "Net C MB": 8, "Copy MB/s": 9}


def _cells(row: ReportRow) -> List[str]:
    return [
        row.line.label(),
        f"{row.python_pct:.2f}",
        f"{row.native_pct:.2f}",
        f"{row.python_net_mib:.2f}",
        f"{row.native_net_mib:.2f}",
        row.trend,
        f"{row.copy_mb_s:.2f}",
    ]


def _format(cells: List[str], line_width: int) -> str:
    out = []
    for name, cell in zip(COLUMNS, cells):
        if name == "Line":
            out.append(cell.ljust(line_width))
        elif name == "Trend":
            out.append(cell.ljust(TREND_WIDTH))
        else:
            out.append(cell.rjust(NUMERIC_WIDTH[name]))
    return " | ".join(out)


def render_report(report: ProfileReport) -> str:
    lines = []
    lines.append("MINIPROF PROFILE")
    lines.append("=" * 16)
    if report.checkpoint is not None:
        lines.append(f"Checkpoint: {report.checkpoint}")
    lines.append(f"Run time: {report.run_seconds:.6f} s (virtual)")
    if report.peak_bytes is None:
        lines.append("Peak footprint: n/a")
    else:
        lines.append(f"Peak footprint: {report.peak_bytes / MIB:.2f} MiB")
    lines.append(f"Attributed CPU: {report.attributed_seconds:.6f} s in {report.cpu_samples} samples")
    trend = render_sparkline(report.trend, TREND_WIDTH).rstrip() if len(report.trend) else ""
    lines.append(f"Memory trend: {trend or '(none)'}")
    lines.append(
        "Units: Py% and Native% of attributed CPU time; "
        "Net MB in MiB (2^20 bytes); Copy MB/s in 10^6 bytes per second"
    )
    lines.append("")

    line_width = max([len("Line")] + [len(r.line.label()) for r in report.rows])
    lines.append(_format(list(COLUMNS), line_width))
    widths = [line_width] + [
        TREND_WIDTH if name == "Trend" else NUMERIC_WIDTH[name] for name in COLUMNS[1:]
    ]
    lines.append("-+-".join("-" * w for w in widths))
    for row in report.rows:
        lines.append(_format(_cells(row), line_width))

    return "\n".join(lines) + "\n"


def export_report_file(path: str, report: ProfileReport) -> str:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(render_report(report))
    return path


def export_checkpoint(path: str, report: ProfileReport, index: int) -> Tuple[str, str]:
    """
    Overwrite the rolling report at `path` and keep a numbered snapshot
    `path.<index>` next to it.
    """
    rolling = export_report_file(path, report)
    snapshot = export_report_file(f"{path}.{index}", report)
    return rolling, snapshot


def checkpoint_paths(path: str, count: int) -> List[str]:
    return [f"{path}.{i}" for i in range(1, count + 1)]
