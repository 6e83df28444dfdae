from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Tuple

from ..profiler.trends import SparklineBuffer
from .constants import MICROS_PER_SECOND, SPARKLINE_CAPACITY


class LineId(NamedTuple):
    file: str
    line: int

    def label(self) -> str:
        return f"{self.file}:{self.line}"


UNKNOWN_LINE = LineId("(unknown)", 0)


@dataclass
class Frame:
    function: str
    index: int = 0                # opcode currently (or most recently) executing
    pc: int = 0                   # next opcode to execute
    stack: List[int] = field(default_factory=list)

    def snapshot(self) -> "Frame":
        return Frame(self.function, self.index, self.pc, list(self.stack))


FrameStack = Tuple[Frame, ...]    # innermost frame last


class ThreadStatus(str, Enum):
    EXECUTING = "executing"
    SLEEPING = "sleeping"


class NotificationKind(str, Enum):
    TIMER = "timer"
    MALLOC = "malloc"
    FREE = "free"
    COPY = "copy"


class RecordKind(str, Enum):
    MALLOC = "alloc-malloc"
    FREE = "alloc-free"
    COPY = "copy"


@dataclass(frozen=True)
class Record:
    seq: int
    kind: RecordKind
    bytes: int
    python_fraction: float        # alloc kinds only; 0.0 for copy
    footprint: int
    line: LineId


@dataclass
class LineStats:
    python_us: int = 0
    native_us: int = 0
    python_alloc_bytes: int = 0
    native_alloc_bytes: int = 0
    python_freed_bytes: int = 0
    native_freed_bytes: int = 0
    copy_bytes: int = 0
    cpu_sample_count: int = 0
    footprint_trend: SparklineBuffer = field(
        default_factory=lambda: SparklineBuffer(SPARKLINE_CAPACITY)
    )

    @property
    def python_seconds(self) -> float:
        return self.python_us / MICROS_PER_SECOND

    @property
    def native_seconds(self) -> float:
        return self.native_us / MICROS_PER_SECOND

    @property
    def freed_bytes(self) -> int:
        return self.python_freed_bytes + self.native_freed_bytes

    @property
    def python_net_bytes(self) -> int:
        return self.python_alloc_bytes - self.python_freed_bytes

    @property
    def native_net_bytes(self) -> int:
        return self.native_alloc_bytes - self.native_freed_bytes

    def is_empty(self) -> bool:
        return not (
            self.python_us
            or self.native_us
            or self.python_alloc_bytes
            or self.native_alloc_bytes
            or self.freed_bytes
            or self.copy_bytes
        )
