"""
CPU attribution from delayed timer notifications.

A timer armed every q of virtual time can only be observed when the main
thread reaches an opcode boundary. If the observation comes T after the
previous one, q of that went to bytecode and the remaining T - q was
spent where the VM could not react: inside native calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

from ..core.types import UNKNOWN_LINE, FrameStack, LineId, ThreadStatus
from ..vm.assembler import Program, disassemble
from ..vm.machine import VmState

CALL_PREFIX = "CALL_"

ProfiledScope = Callable[[str], bool]
CallOpcodeMap = Dict[str, FrozenSet[int]]


def default_profiled_scope(file_name: str) -> bool:
    return not file_name.startswith("runtime")


@dataclass(frozen=True)
class CpuSampleContext:
    q: int                   # µs
    last_signal_time: int    # µs
    now: int                 # µs

    def __post_init__(self) -> None:
        if self.q <= 0:
            raise ValueError("q must be positive")
        if self.now < self.last_signal_time:
            raise ValueError("now precedes last_signal_time")

    @property
    def elapsed(self) -> int:
        return max(self.now - self.last_signal_time, 0)

    @property
    def native_share(self) -> int:
        return max(self.elapsed - self.q, 0)


class CpuDelta(NamedTuple):
    line: LineId
    python_us: int
    native_us: int


def build_call_map(program: Program) -> CallOpcodeMap:
    found: Dict[str, set] = {name: set() for name in program.functions}
    for row in disassemble(program):
        if row.name.startswith(CALL_PREFIX):
            found[row.function].add(row.index)
    return {name: frozenset(idx) for name, idx in found.items()}


def walk_to_profiled_line(
    frames: FrameStack,
    program: Program,
    profiled_scope: ProfiledScope = default_profiled_scope,
) -> LineId:
    """Innermost frame whose file is in scope; the outermost frame's line otherwise."""
    if not frames:
        raise ValueError("empty frame stack")
    # a frame entered into an empty body has no line yet
    placed = [f for f in frames if program.line_table.get(f.function)]
    if not placed:
        return UNKNOWN_LINE
    for frame in reversed(placed):
        line = program.line_of(frame.function, frame.index)
        if profiled_scope(line.file):
            return line
    outer = placed[0]
    return program.line_of(outer.function, outer.index)


def on_cpu_sample(
    ctx: CpuSampleContext,
    main_frames: FrameStack,
    others: Sequence[Tuple[ThreadStatus, FrameStack]],
    call_map: CallOpcodeMap,
    program: Program,
    profiled_scope: ProfiledScope = default_profiled_scope,
    diagnostics: Optional[Dict[str, int]] = None,
) -> List[CpuDelta]:
    diag = diagnostics if diagnostics is not None else {}
    out: List[CpuDelta] = []

    if main_frames:
        line = walk_to_profiled_line(main_frames, program, profiled_scope)
        out.append(CpuDelta(line, ctx.q, ctx.native_share))
    else:
        diag["empty_frames"] = diag.get("empty_frames", 0) + 1

    for status, frames in others:
        if status is not ThreadStatus.EXECUTING:
            continue
        if not frames:
            diag["empty_frames"] = diag.get("empty_frames", 0) + 1
            continue
        inner = frames[-1]
        line = walk_to_profiled_line(frames, program, profiled_scope)
        if inner.index in call_map.get(inner.function, frozenset()):
            out.append(CpuDelta(line, 0, ctx.q))
        else:
            out.append(CpuDelta(line, ctx.q, 0))
    return out


def patch_blocking_join(vm: VmState, switch_interval: int) -> None:
    """Turn JOIN into a loop of timed waits of `switch_interval` µs each."""
    if switch_interval <= 0:
        raise ValueError("switch_interval must be positive")
    vm.join_wait = switch_interval
