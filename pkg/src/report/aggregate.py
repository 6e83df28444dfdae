from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set

from ..core.constants import MB, MIB, MICROS_PER_SECOND, SPARKLINE_CAPACITY, TREND_WIDTH
from ..core.types import UNKNOWN_LINE, LineId, LineStats, Record, RecordKind
from ..profiler.cpu import CpuDelta
from ..profiler.trends import SparklineBuffer, push_footprint, render_sparkline


@dataclass
class ReportRow:
    line: LineId
    python_pct: float
    native_pct: float
    python_net_mib: float
    native_net_mib: float
    trend: str
    copy_mb_s: float


@dataclass
class ProfileReport:
    rows: List[ReportRow]
    stats: Dict[LineId, LineStats]
    run_seconds: float
    peak_bytes: Optional[int]
    trend: SparklineBuffer
    total_python_us: int = 0
    total_native_us: int = 0
    cpu_samples: int = 0
    program_net_bytes: int = 0
    checkpoint: Optional[int] = None

    @property
    def attributed_seconds(self) -> float:
        return (self.total_python_us + self.total_native_us) / MICROS_PER_SECOND

    def row_for(self, line: LineId) -> Optional[ReportRow]:
        for row in self.rows:
            if row.line == line:
                return row
        return None


def split_bytes(nbytes: int, python_fraction: float):
    """(python, native) integer split; the two parts always sum to nbytes."""
    py = int(round(nbytes * python_fraction))
    return py, nbytes - py


class Aggregator:
    """Accumulates CPU deltas and drained records into per-line stats."""

    def __init__(
        self,
        sparkline_capacity: int = SPARKLINE_CAPACITY,
        known_lines: Optional[Iterable[LineId]] = None,
    ):
        self.capacity = sparkline_capacity
        self.known: Optional[Set[LineId]] = set(known_lines) if known_lines is not None else None
        self.stats: Dict[LineId, LineStats] = {}
        self.trend = SparklineBuffer(sparkline_capacity)
        self.program_net_bytes = 0

    def _line(self, line: LineId) -> LineStats:
        if self.known is not None and line not in self.known:
            line = UNKNOWN_LINE
        st = self.stats.get(line)
        if st is None:
            st = LineStats(footprint_trend=SparklineBuffer(self.capacity))
            self.stats[line] = st
        return st

    def add_cpu(self, deltas: Iterable[CpuDelta]) -> None:
        for d in deltas:
            st = self._line(d.line)
            st.python_us += d.python_us
            st.native_us += d.native_us
            if d.python_us:
                st.cpu_sample_count += 1

    def add_records(self, records: Iterable[Record]) -> None:
        for r in records:
            st = self._line(r.line)
            if r.kind is RecordKind.COPY:
                st.copy_bytes += r.bytes
                continue
            py, native = split_bytes(r.bytes, r.python_fraction)
            if r.kind is RecordKind.MALLOC:
                st.python_alloc_bytes += py
                st.native_alloc_bytes += native
                self.program_net_bytes += r.bytes
            else:
                st.python_freed_bytes += py
                st.native_freed_bytes += native
                self.program_net_bytes -= r.bytes
            push_footprint(st.footprint_trend, r.footprint)
            push_footprint(self.trend, r.footprint)

    def report(
        self,
        run_seconds: float,
        peak_bytes: Optional[int] = None,
        checkpoint: Optional[int] = None,
    ) -> ProfileReport:
        total_py = sum(s.python_us for s in self.stats.values())
        total_native = sum(s.native_us for s in self.stats.values())
        total = total_py + total_native

        rows: List[ReportRow] = []
        for line in sorted(self.stats):
            st = self.stats[line]
            if st.is_empty():
                continue
            rows.append(
                ReportRow(
                    line=line,
                    python_pct=100.0 * st.python_us / total if total else 0.0,
                    native_pct=100.0 * st.native_us / total if total else 0.0,
                    python_net_mib=st.python_net_bytes / MIB,
                    native_net_mib=st.native_net_bytes / MIB,
                    trend=render_sparkline(st.footprint_trend, TREND_WIDTH),
                    copy_mb_s=(st.copy_bytes / MB) / run_seconds if run_seconds > 0 else 0.0,
                )
            )

        stats = {k: _copy_stats(v) for k, v in self.stats.items()}
        return ProfileReport(
            rows=rows,
            stats=stats,
            run_seconds=run_seconds,
            peak_bytes=peak_bytes,
            trend=self.trend.copy(),
            total_python_us=total_py,
            total_native_us=total_native,
            cpu_samples=sum(s.cpu_sample_count for s in self.stats.values()),
            program_net_bytes=self.program_net_bytes,
            checkpoint=checkpoint,
        )


def _copy_stats(st: LineStats) -> LineStats:
    return LineStats(
        python_us=st.python_us,
        native_us=st.native_us,
        python_alloc_bytes=st.python_alloc_bytes,
        native_alloc_bytes=st.native_alloc_bytes,
        python_freed_bytes=st.python_freed_bytes,
        native_freed_bytes=st.native_freed_bytes,
        copy_bytes=st.copy_bytes,
        cpu_sample_count=st.cpu_sample_count,
        footprint_trend=st.footprint_trend.copy(),
    )


def aggregate(
    cpu_deltas: Iterable[CpuDelta],
    records: Iterable[Record],
    run_seconds: float,
    peak_bytes: Optional[int] = None,
    known_lines: Optional[Iterable[LineId]] = None,
    sparkline_capacity: int = SPARKLINE_CAPACITY,
) -> ProfileReport:
    agg = Aggregator(sparkline_capacity, known_lines)
    agg.add_cpu(cpu_deltas)
    agg.add_records(records)
    return agg.report(run_seconds, peak_bytes)
