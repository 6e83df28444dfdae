"""
Threshold sampling on top of the allocator.

Every `alloc_threshold` bytes of allocation (a prime, so periodic
programs do not alias with it) one malloc record is written to the
channel and a notification is raised; frees and copies are sampled the
same way. Every threshold/13 bytes the allocating stack is classified
as interpreter or native, and the resulting byte ratio travels with the
next malloc record.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Union

from ..core.config import ProfilerConfig
from ..core.constants import FRACTION_DIGITS, INTERPRETER_PREFIXES, NATIVE_OVERRIDES
from ..core.types import (
    UNKNOWN_LINE,
    Frame,
    FrameStack,
    LineId,
    NotificationKind,
    Record,
    RecordKind,
)
from .channel import Channel
from .heap import HeapLayout


class Provenance(str, Enum):
    PYTHON = "python"
    NATIVE = "native"


_NOTIFY_FOR = {
    RecordKind.MALLOC: NotificationKind.MALLOC,
    RecordKind.FREE: NotificationKind.FREE,
    RecordKind.COPY: NotificationKind.COPY,
}


# -----------------------------
# Classification
# -----------------------------
def classify_frame(function: str, overrides: Sequence[str] = NATIVE_OVERRIDES) -> Provenance:
    if any(function.startswith(p) for p in overrides):
        return Provenance.NATIVE
    if function.startswith(INTERPRETER_PREFIXES):
        return Provenance.PYTHON
    return Provenance.NATIVE


class ClassifierCache:
    """Open-addressing (linear probing) map from function name to provenance."""

    _EMPTY = None

    def __init__(self, capacity: int = 64, overrides: Sequence[str] = NATIVE_OVERRIDES):
        size = 8
        while size < capacity:
            size *= 2
        self._keys: List[Optional[str]] = [self._EMPTY] * size
        self._vals: List[Optional[Provenance]] = [None] * size
        self._used = 0
        self.overrides = tuple(overrides)
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return self._used

    def _slot(self, key: str) -> int:
        mask = len(self._keys) - 1
        i = hash(key) & mask
        while self._keys[i] is not self._EMPTY and self._keys[i] != key:
            i = (i + 1) & mask
        return i

    def _grow(self) -> None:
        old = [(k, v) for k, v in zip(self._keys, self._vals) if k is not self._EMPTY]
        self._keys = [self._EMPTY] * (len(self._keys) * 2)
        self._vals = [None] * len(self._keys)
        self._used = 0
        for k, v in old:
            i = self._slot(k)
            self._keys[i], self._vals[i] = k, v
            self._used += 1

    def lookup(self, function: str) -> Provenance:
        i = self._slot(function)
        if self._keys[i] == function:
            self.hits += 1
            return self._vals[i]
        self.misses += 1
        result = classify_frame(function, self.overrides)
        if (self._used + 1) * 2 > len(self._keys):
            self._grow()
            i = self._slot(function)
        self._keys[i], self._vals[i] = function, result
        self._used += 1
        return result


def _function_names(stack: Sequence[Union[Frame, str]]) -> List[str]:
    return [f.function if isinstance(f, Frame) else str(f) for f in stack]


def classify_allocation_stack(
    stack: Sequence[Union[Frame, str]],
    max_depth: int = 4,
    cache: Optional[ClassifierCache] = None,
    overrides: Sequence[str] = NATIVE_OVERRIDES,
) -> Provenance:
    """Python if any of the innermost `max_depth` frames (innermost last) is interpreter code."""
    if not stack:
        raise ValueError("empty allocation stack")
    for name in reversed(_function_names(stack)[-max_depth:]):
        kind = cache.lookup(name) if cache is not None else classify_frame(name, overrides)
        if kind is Provenance.PYTHON:
            return Provenance.PYTHON
    return Provenance.NATIVE


# -----------------------------
# Sampling state / runtime
# -----------------------------
@dataclass
class SamplingState:
    alloc_threshold: int
    callstack_divisor: int
    copy_multiplier: int
    alloc_accum: int = 0
    free_accum: int = 0
    copy_accum: int = 0
    provenance_accum: int = 0
    footprint: int = 0
    peak: int = 0
    python_bytes: int = 0
    total_bytes: int = 0
    provenance_samples: int = 0
    last_python_fraction: float = 0.0
    in_handler: bool = False
    counts: Dict[RecordKind, int] = field(
        default_factory=lambda: {k: 0 for k in RecordKind}
    )

    @property
    def provenance_interval(self) -> int:
        return self.alloc_threshold // self.callstack_divisor

    @property
    def copy_threshold(self) -> int:
        return self.alloc_threshold * self.copy_multiplier


Locate = Callable[[FrameStack], LineId]
Notify = Callable[[NotificationKind], None]


class SamplingRuntime:
    def __init__(
        self,
        config: Optional[ProfilerConfig] = None,
        heap: Optional[HeapLayout] = None,
        channel: Optional[Channel] = None,
        notify: Optional[Notify] = None,
        locate: Optional[Locate] = None,
    ):
        cfg = config or ProfilerConfig()
        self.config = cfg
        self.state = SamplingState(cfg.alloc_threshold, cfg.callstack_divisor, cfg.copy_multiplier)
        self.heap = heap or HeapLayout(arena_bytes=cfg.arena_bytes)
        self.channel = channel
        self.notify = notify or (lambda kind: None)
        self.locate = locate or (lambda stack: UNKNOWN_LINE)
        self.cache = ClassifierCache(overrides=cfg.native_overrides)
        self._seq = 0
        # records emitted when no channel is attached
        self.outbox: List[Record] = []

    @contextmanager
    def handler(self) -> Iterator[None]:
        prev = self.state.in_handler
        self.state.in_handler = True
        try:
            yield
        finally:
            self.state.in_handler = prev

    # -----------------------------
    # Hooks
    # -----------------------------
    def allocate(self, size: int, stack: FrameStack) -> int:
        address = self.heap.allocate(size)
        st = self.state
        st.footprint += size
        st.peak = max(st.peak, st.footprint)
        st.alloc_accum += size

        st.provenance_accum += size
        if st.provenance_accum >= st.provenance_interval:
            crossed = st.provenance_accum // st.provenance_interval
            st.provenance_accum %= st.provenance_interval
            st.provenance_samples += crossed
            st.total_bytes += size
            if stack and classify_allocation_stack(
                stack, self.config.max_stack_depth, self.cache
            ) is Provenance.PYTHON:
                st.python_bytes += size

        if st.alloc_accum >= st.alloc_threshold and not st.in_handler:
            line = self.locate(stack) if stack else UNKNOWN_LINE
            while st.alloc_accum >= st.alloc_threshold:
                st.alloc_accum -= st.alloc_threshold
                self.emit_alloc_record(RecordKind.MALLOC, line)
        return address

    def deallocate(self, address: int, stack: FrameStack) -> bool:
        size = self.heap.deallocate(address)
        if size is None:
            return False
        st = self.state
        st.footprint -= size
        st.free_accum += size
        if st.free_accum >= st.alloc_threshold and not st.in_handler:
            line = self.locate(stack) if stack else UNKNOWN_LINE
            while st.free_accum >= st.alloc_threshold:
                st.free_accum -= st.alloc_threshold
                self.emit_alloc_record(RecordKind.FREE, line)
        return True

    def copy_bytes(self, n: int, line: LineId) -> None:
        if n < 0:
            raise ValueError("copy size must be non-negative")
        if n == 0:
            return
        st = self.state
        st.copy_accum += n
        if st.in_handler:
            return
        while st.copy_accum >= st.copy_threshold:
            st.copy_accum -= st.copy_threshold
            self._emit(RecordKind.COPY, st.copy_threshold, 0.0, line)

    # -----------------------------
    # Records
    # -----------------------------
    def emit_alloc_record(self, kind: RecordKind, line: LineId = UNKNOWN_LINE) -> Record:
        st = self.state
        if kind is RecordKind.MALLOC:
            fraction = round(st.python_bytes / st.total_bytes, FRACTION_DIGITS) if st.total_bytes else 0.0
            st.last_python_fraction = fraction
            st.python_bytes = 0
            st.total_bytes = 0
        elif kind is RecordKind.FREE:
            fraction = st.last_python_fraction
        else:
            raise ValueError(f"not an allocation record kind: {kind}")
        return self._emit(kind, st.alloc_threshold, fraction, line)

    def _emit(self, kind: RecordKind, nbytes: int, fraction: float, line: LineId) -> Record:
        self._seq += 1
        record = Record(self._seq, kind, nbytes, fraction, self.state.footprint, line)
        self.state.counts[kind] += 1
        if self.channel is not None:
            self.channel.append_record(record)
        else:
            self.outbox.append(record)
        self.notify(_NOTIFY_FOR[kind])
        return record

    def take_outbox(self) -> List[Record]:
        out, self.outbox = self.outbox, []
        return out
