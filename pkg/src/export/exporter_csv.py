from __future__ import annotations

import csv
import io
import os

from ..simulation.simulator import StudyTable

CSV_HEADER = ["time", "ratio_python", "ratio_native", "rho_python", "rho_native"]


def render_study_csv(table: StudyTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in table.rows:
        writer.writerow(
            [
                f"{row.time:.6f}",
                f"{row.ratio_python:.6f}",
                f"{row.ratio_native:.6f}",
                f"{row.rho_python:.6f}",
                f"{row.rho_native:.6f}",
            ]
        )
    return buf.getvalue()


def export_study_csv(path: str, table: StudyTable) -> str:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(render_study_csv(table))
    return path
