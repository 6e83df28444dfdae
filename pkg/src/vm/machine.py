"""
Deterministic green-thread VM.

Virtual time is kept in integer microseconds. Only thread 0 (main) ever
observes notifications, and only at the boundary after an opcode it
completed; a CALL_NATIVE advances the clock by its full duration in one
step, so anything that fires during it waits until the call returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Protocol, Set, Tuple

from ..core.bootstrap import console
from ..core.config import ProfilerConfig
from ..core.types import Frame, FrameStack, NotificationKind, ThreadStatus
from .assembler import Instr, Opcode, Program

MAIN_THREAD = 0
NULL_HEAP_BASE = 0x1000_0000


class VmError(RuntimeError):
    pass


class ExitStatus(str, Enum):
    HALTED = "halted"
    ABORTED = "aborted"


class StepOutcome(NamedTuple):
    halted: bool
    thread_id: Optional[int]


class Delivery(NamedTuple):
    clock_us: int
    kind: NotificationKind


@dataclass
class ThreadRec:
    id: int
    frames: List[Frame]
    status: ThreadStatus = ThreadStatus.EXECUTING
    alive: bool = True
    join_target: Optional[int] = None
    wake_at: Optional[int] = None     # patched joins only


@dataclass
class VmState:
    switch_interval: int              # µs
    op_cost: int                      # µs
    quantum: Optional[int] = None     # µs; None disables the timer
    virtual_clock: int = 0
    threads: List[ThreadRec] = field(default_factory=list)
    gil_holder: int = MAIN_THREAD
    pending_notifications: List[NotificationKind] = field(default_factory=list)
    next_timer: Optional[int] = None
    join_wait: Optional[int] = None   # set by patch_blocking_join
    slice_start: int = 0
    halted: bool = False
    deliveries: List[Delivery] = field(default_factory=list)
    diagnostics: Dict[str, int] = field(default_factory=dict)

    def count(self, key: str, n: int = 1) -> None:
        self.diagnostics[key] = self.diagnostics.get(key, 0) + n

    @property
    def clock_seconds(self) -> float:
        return self.virtual_clock / 1_000_000


class ProfilerHooks(Protocol):
    def on_notification(self, vm: VmState, kind: NotificationKind) -> None: ...

    def on_alloc(self, vm: VmState, thread_id: int, size: int) -> int: ...

    def on_free(self, vm: VmState, thread_id: int, address: int) -> bool: ...

    def on_copy(self, vm: VmState, thread_id: int, nbytes: int) -> None: ...

    def on_step(self, vm: VmState) -> None: ...


class NullHooks:
    """Unprofiled execution: a bump allocator and no-op callbacks."""

    def __init__(self, base: int = NULL_HEAP_BASE):
        self._next = base
        self._live: Set[int] = set()

    def on_notification(self, vm: VmState, kind: NotificationKind) -> None:
        return None

    def on_alloc(self, vm: VmState, thread_id: int, size: int) -> int:
        addr = self._next
        self._next += max(16, (size + 15) // 16 * 16)
        self._live.add(addr)
        return addr

    def on_free(self, vm: VmState, thread_id: int, address: int) -> bool:
        if address in self._live:
            self._live.discard(address)
            return True
        return False

    def on_copy(self, vm: VmState, thread_id: int, nbytes: int) -> None:
        return None

    def on_step(self, vm: VmState) -> None:
        return None


@dataclass
class RunResult:
    status: ExitStatus
    vm: VmState


# -----------------------------
# Construction / introspection
# -----------------------------
def new_vm(program: Program, config: ProfilerConfig, timer: bool = True) -> VmState:
    if config.clock_mode != "virtual":
        raise NotImplementedError("wall-clock mode is not implemented; use clock_mode=virtual")
    q = config.quantum_us if timer else None
    vm = VmState(
        switch_interval=config.switch_interval_us,
        op_cost=config.op_cost_us,
        quantum=q,
        next_timer=q,
    )
    vm.threads.append(ThreadRec(MAIN_THREAD, [Frame(program.entry)]))
    return vm


def enumerate_threads(vm: VmState) -> List[Tuple[int, ThreadStatus]]:
    return [(t.id, t.status) for t in vm.threads if t.alive]


def current_frames(vm: VmState, thread_id: int) -> FrameStack:
    if not 0 <= thread_id < len(vm.threads) or not vm.threads[thread_id].alive:
        raise VmError(f"unknown or finished thread {thread_id}")
    return tuple(f.snapshot() for f in vm.threads[thread_id].frames)


def notify(vm: VmState, kind: NotificationKind) -> None:
    # depth one per kind: a second signal of the same kind is lost
    if kind in vm.pending_notifications:
        vm.count("coalesced")
        return
    vm.pending_notifications.append(kind)


# -----------------------------
# Clock / scheduling
# -----------------------------
def _advance(vm: VmState, dt: int) -> None:
    vm.virtual_clock += dt
    _wake_expired(vm)
    if vm.next_timer is None or vm.quantum is None or vm.virtual_clock < vm.next_timer:
        return
    crossed = (vm.virtual_clock - vm.next_timer) // vm.quantum + 1
    notify(vm, NotificationKind.TIMER)
    if crossed > 1:
        vm.count("coalesced", crossed - 1)
    vm.next_timer += crossed * vm.quantum


def _wake_expired(vm: VmState) -> None:
    # a timed-out wait leaves the thread executing until JOIN re-runs
    for t in vm.threads:
        if t.status is ThreadStatus.SLEEPING and t.wake_at is not None and t.wake_at <= vm.virtual_clock:
            t.status = ThreadStatus.EXECUTING


def _target_alive(vm: VmState, tid: Optional[int]) -> bool:
    return tid is not None and 0 <= tid < len(vm.threads) and vm.threads[tid].alive


def _runnable(vm: VmState, t: ThreadRec) -> bool:
    if not t.alive:
        return False
    if t.join_target is None:
        return True
    if not _target_alive(vm, t.join_target):
        return True
    return t.wake_at is not None and t.wake_at <= vm.virtual_clock


def _next_runnable(vm: VmState, after: int) -> Optional[int]:
    n = len(vm.threads)
    for k in range(1, n + 1):
        cand = vm.threads[(after + k) % n]
        if _runnable(vm, cand):
            return cand.id
    return None


def _ensure_holder(vm: VmState) -> ThreadRec:
    holder = vm.threads[vm.gil_holder]
    if _runnable(vm, holder):
        return holder
    nxt = _next_runnable(vm, holder.id)
    if nxt is None:
        wakes = [t.wake_at for t in vm.threads if t.alive and t.wake_at is not None]
        if not wakes:
            raise VmError("deadlock: no runnable thread")
        # nobody holds the interpreter; the clock idles to the next wake-up
        _advance(vm, max(0, min(wakes) - vm.virtual_clock))
        nxt = _next_runnable(vm, holder.id)
        if nxt is None:
            raise VmError("deadlock: no runnable thread after idle wait")
    vm.gil_holder = nxt
    vm.slice_start = vm.virtual_clock
    return vm.threads[nxt]


def _rotate(vm: VmState) -> None:
    holder = vm.threads[vm.gil_holder]
    if _runnable(vm, holder) and vm.virtual_clock - vm.slice_start < vm.switch_interval:
        return
    nxt = _next_runnable(vm, holder.id)
    if nxt is not None:
        vm.gil_holder = nxt
    vm.slice_start = vm.virtual_clock


# -----------------------------
# Execution
# -----------------------------
def _pop(vm: VmState, frame: Frame) -> int:
    if not frame.stack:
        vm.count("stack_underflow")
        console("VM", f"stack underflow in {frame.function} at opcode {frame.index}")
        return 0
    return frame.stack.pop()


def _finish_thread(vm: VmState, thread: ThreadRec) -> None:
    thread.join_target = None
    thread.wake_at = None
    if thread.id == MAIN_THREAD:
        # the program ends with main; it stays listed for the final report
        vm.halted = True
    else:
        thread.alive = False


def _join(vm: VmState, thread: ThreadRec, frame: Frame, target: int) -> bool:
    """Returns True when the opcode boundary was reached."""
    if target >= len(vm.threads):
        vm.count("unknown_join_target")
    if not _target_alive(vm, target):
        thread.join_target = None
        thread.wake_at = None
        thread.status = ThreadStatus.EXECUTING
        frame.pc += 1
        return True
    thread.join_target = target
    if vm.join_wait is None:
        # blocking wait: no boundary until the target finishes
        return False
    # one bounded wait; the opcode re-runs after wake-up
    thread.status = ThreadStatus.SLEEPING
    thread.wake_at = vm.virtual_clock + vm.join_wait
    return True


def _execute(
    vm: VmState, program: Program, hooks: ProfilerHooks, thread: ThreadRec, frame: Frame, instr: Instr
) -> bool:
    op = instr.op
    cost = vm.op_cost
    completed = True

    if op is Opcode.PUSH:
        frame.stack.append(int(instr.args[0]))
        frame.pc += 1
    elif op is Opcode.POP:
        _pop(vm, frame)
        frame.pc += 1
    elif op is Opcode.ADD:
        b = _pop(vm, frame)
        a = _pop(vm, frame)
        frame.stack.append(a + b)
        frame.pc += 1
    elif op is Opcode.JMP:
        frame.pc = int(instr.args[0])
    elif op is Opcode.JNZ:
        if frame.stack:
            top = frame.stack[-1]
        else:
            vm.count("stack_underflow")
            top = 0
        frame.pc = int(instr.args[0]) if top != 0 else frame.pc + 1
    elif op is Opcode.CALL:
        frame.pc += 1
        thread.frames.append(Frame(str(instr.args[0])))
    elif op is Opcode.CALL_NATIVE:
        cost = instr.duration_us
        frame.pc += 1
    elif op is Opcode.ALLOC:
        frame.pc += 1
        frame.stack.append(hooks.on_alloc(vm, thread.id, int(instr.args[0])))
    elif op is Opcode.FREE:
        frame.pc += 1
        address = _pop(vm, frame)
        if not hooks.on_free(vm, thread.id, address):
            vm.count("invalid_free")
    elif op is Opcode.COPY:
        frame.pc += 1
        hooks.on_copy(vm, thread.id, int(instr.args[0]))
    elif op is Opcode.SPAWN:
        frame.pc += 1
        tid = len(vm.threads)
        vm.threads.append(ThreadRec(tid, [Frame(str(instr.args[0]))]))
        console("VM", f"spawned thread {tid} running {instr.args[0]}")
    elif op is Opcode.JOIN:
        completed = _join(vm, thread, frame, int(instr.args[0]))
    elif op is Opcode.RET:
        if len(thread.frames) > 1:
            thread.frames.pop()
        else:
            # bottom frame stays put so a final sample can still attribute it
            _finish_thread(vm, thread)
    elif op is Opcode.HALT:
        cost = 0
        vm.halted = True
    else:  # pragma: no cover
        raise VmError(f"unhandled opcode {op}")

    _advance(vm, cost)
    return completed


def _deliver(vm: VmState, hooks: ProfilerHooks) -> None:
    pending, vm.pending_notifications = vm.pending_notifications, []
    for kind in pending:
        vm.deliveries.append(Delivery(vm.virtual_clock, kind))
        if kind is NotificationKind.TIMER and vm.quantum is not None:
            # re-armed from the delivery, like a one-shot interval timer
            vm.next_timer = vm.virtual_clock + vm.quantum
        hooks.on_notification(vm, kind)


def step(vm: VmState, program: Program, hooks: ProfilerHooks) -> StepOutcome:
    if vm.halted:
        raise VmError("cannot step a halted VM")

    thread = _ensure_holder(vm)
    frame = thread.frames[-1]
    code = program.functions[frame.function]
    if frame.pc >= len(code):
        # falling off the end of a function body returns from it
        instr = Instr(Opcode.RET)
        frame.index = max(0, len(code) - 1)
    else:
        instr = code[frame.pc]
        frame.index = frame.pc

    completed = _execute(vm, program, hooks, thread, frame, instr)

    if completed and thread.id == MAIN_THREAD and vm.pending_notifications:
        _deliver(vm, hooks)
    hooks.on_step(vm)
    if vm.halted:
        return StepOutcome(True, thread.id)
    _rotate(vm)
    return StepOutcome(False, thread.id)


def run(
    program: Program,
    hooks: Optional[ProfilerHooks] = None,
    config: Optional[ProfilerConfig] = None,
    vm: Optional[VmState] = None,
) -> RunResult:
    """
    Drive `step` until HALT, main's return, or the runaway guard.
    Pass a prepared `vm` (e.g. after patch_blocking_join) to reuse it.
    """
    config = (config or ProfilerConfig()).validate()
    hooks = hooks or NullHooks()
    vm = vm or new_vm(program, config)
    limit = config.max_time_us

    while not vm.halted:
        if vm.virtual_clock > limit:
            console("VM", f"runaway guard: aborted at {vm.clock_seconds:.6f}s virtual", force=True)
            return RunResult(ExitStatus.ABORTED, vm)
        step(vm, program, hooks)
    return RunResult(ExitStatus.HALTED, vm)
