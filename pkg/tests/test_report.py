from pathlib import Path

import pytest

from src.core.types import UNKNOWN_LINE, LineId, Record, RecordKind
from src.export.exporter_txt import (
    checkpoint_paths,
    export_checkpoint,
    export_report_file,
    render_report,
)
from src.profiler.cpu import CpuDelta
from src.report.aggregate import Aggregator, aggregate, split_bytes

GOLDEN = Path(__file__).parent / "golden"
L3 = LineId("demo.py", 3)
L7 = LineId("demo.py", 7)


def _small_report():
    deltas = [CpuDelta(L3, 30_000, 10_000), CpuDelta(L7, 10_000, 50_000), CpuDelta(L3, 10_000, 0)]
    records = [
        Record(1, RecordKind.MALLOC, 2_097_152, 1.0, 2_097_152, L3),
        Record(2, RecordKind.MALLOC, 1_048_576, 0.5, 3_145_728, L7),
        Record(3, RecordKind.FREE, 1_048_576, 1.0, 2_097_152, L3),
        Record(4, RecordKind.COPY, 3_000_000, 0.0, 2_097_152, L7),
    ]
    return aggregate(deltas, records, run_seconds=2.0, peak_bytes=3_145_728)


@pytest.mark.parametrize(
    "nbytes, fraction, expected",
    [(1000, 0.0, (0, 1000)), (1000, 1.0, (1000, 0)), (1001, 0.5, (500, 501)), (7, 0.333333, (2, 5))],
)
def test_split_bytes_keeps_the_total(nbytes, fraction, expected):
    assert split_bytes(nbytes, fraction) == expected
    assert sum(split_bytes(nbytes, fraction)) == nbytes


def test_report_matches_golden_file():
    assert render_report(_small_report()) == (GOLDEN / "report_small.txt").read_text(encoding="utf-8")


def test_percentages_share_the_attributed_total():
    report = _small_report()
    total = sum(r.python_pct + r.native_pct for r in report.rows)

    assert total == pytest.approx(100.0)
    assert report.attributed_seconds == pytest.approx(0.11)
    assert report.cpu_samples == 3


def test_rows_are_sorted_by_file_then_line():
    deltas = [CpuDelta(LineId("b.py", 1), 10, 0), CpuDelta(LineId("a.py", 9), 10, 0), CpuDelta(LineId("a.py", 2), 10, 0)]
    report = aggregate(deltas, [], run_seconds=1.0)

    assert [r.line.label() for r in report.rows] == ["a.py:2", "a.py:9", "b.py:1"]


def test_copy_rate_uses_decimal_megabytes():
    record = Record(1, RecordKind.COPY, 600 * 2 ** 20, 0.0, 0, L3)
    report = aggregate([], [record], run_seconds=1.05)

    rate = report.row_for(L3).copy_mb_s
    assert rate == pytest.approx(599.186, abs=0.01)
    assert 571 <= rate <= 600


def test_lines_outside_the_program_go_to_the_unknown_bucket():
    deltas = [CpuDelta(L3, 10_000, 0), CpuDelta(LineId("elsewhere.py", 99), 5_000, 0)]
    report = aggregate(deltas, [], run_seconds=1.0, known_lines=[L3])

    assert report.row_for(UNKNOWN_LINE).python_pct == pytest.approx(100 / 3)
    assert report.row_for(LineId("elsewhere.py", 99)) is None


def test_lines_without_activity_are_left_out():
    agg = Aggregator()
    agg.add_cpu([CpuDelta(L3, 0, 0), CpuDelta(L7, 10, 0)])
    report = agg.report(run_seconds=1.0)

    assert [r.line for r in report.rows] == [L7]


def test_program_net_bytes_balance_malloc_and_free():
    records = []
    footprint = 0
    for seq in range(1, 41):
        kind = RecordKind.MALLOC if seq % 2 else RecordKind.FREE
        footprint += 1000 if kind is RecordKind.MALLOC else -1000
        records.append(Record(seq, kind, 1000, 0.25, footprint, L3))

    report = aggregate([], records, run_seconds=1.0)
    stats = report.stats[L3]

    assert report.program_net_bytes == 0
    assert stats.python_net_bytes == 0 and stats.native_net_bytes == 0
    assert stats.python_alloc_bytes + stats.native_alloc_bytes == 20_000


def test_empty_report_is_just_the_header():
    text = render_report(aggregate([], [], run_seconds=0.0))
    lines = text.splitlines()

    assert lines[0] == "MINIPROF PROFILE"
    assert "Peak footprint: n/a" in lines
    assert "Memory trend: (none)" in lines
    assert lines[-1].startswith("-----+-")
    assert lines[-2].startswith("Line | ")


def test_checkpoint_header_and_snapshot_files(tmp_path):
    agg = Aggregator()
    agg.add_cpu([CpuDelta(L3, 10_000, 0)])
    path = str(tmp_path / "out" / "profile.txt")

    rolling, snapshot = export_checkpoint(path, agg.report(1.0, checkpoint=2), 2)

    assert rolling == path
    assert snapshot == path + ".2"
    assert "Checkpoint: 2" in Path(snapshot).read_text(encoding="utf-8")
    assert checkpoint_paths(path, 2) == [path + ".1", path + ".2"]


def test_export_report_file_creates_parent_dirs(tmp_path):
    path = str(tmp_path / "a" / "b" / "report.txt")
    export_report_file(path, _small_report())

    assert Path(path).read_text(encoding="utf-8").startswith("MINIPROF PROFILE\n")
