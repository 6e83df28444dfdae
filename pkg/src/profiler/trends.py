"""
Footprint trends.

A SparklineBuffer keeps a bounded series of footprint samples. When it is
full, consecutive triples collapse to their median before the next sample
is appended, so older history is smoothed while recent samples stay sharp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

from ..core.constants import SPARKLINE_CAPACITY, SPARKLINE_GLYPHS


@dataclass
class SparklineBuffer:
    capacity: int = SPARKLINE_CAPACITY
    entries: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.capacity < 3 or self.capacity % 3:
            raise ValueError(f"capacity must be a positive multiple of 3, got {self.capacity}")

    def __len__(self) -> int:
        return len(self.entries)

    def copy(self) -> "SparklineBuffer":
        return SparklineBuffer(self.capacity, list(self.entries))


def _median3(a: int, b: int, c: int) -> int:
    return sorted((a, b, c))[1]


def reduce_by_median(buffer: SparklineBuffer) -> None:
    n = len(buffer.entries)
    assert n % 3 == 0, f"buffer length {n} is not a multiple of 3"
    e = buffer.entries
    buffer.entries = [_median3(e[i], e[i + 1], e[i + 2]) for i in range(0, n, 3)]


def push_footprint(buffer: SparklineBuffer, value: int) -> None:
    if len(buffer.entries) >= buffer.capacity:
        reduce_by_median(buffer)
    buffer.entries.append(value)


def glyph_levels(buffer: SparklineBuffer) -> List[int]:
    """Ramp level (0..7) per entry, scaled linearly to the buffer maximum."""
    if not buffer.entries:
        return []
    top = len(SPARKLINE_GLYPHS) - 1
    peak = max(buffer.entries)
    if peak <= 0:
        return [0] * len(buffer.entries)
    return [min(top, max(0, (v * len(SPARKLINE_GLYPHS)) // peak)) for v in buffer.entries]


def render_sparkline(buffer: SparklineBuffer, width: int) -> str:
    """
    One glyph per entry. Longer series keep their most recent `width`
    entries; shorter ones are right-padded with spaces. Empty -> "".
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    if not buffer.entries:
        return ""
    levels = glyph_levels(buffer)[-width:]
    return "".join(SPARKLINE_GLYPHS[k] for k in levels).ljust(width)
