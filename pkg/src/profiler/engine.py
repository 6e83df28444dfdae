"""
The hook object the VM calls into: CPU samples on timer notifications,
channel drains on allocation/copy notifications, and the allocator
behind ALLOC/FREE/COPY.
"""

from __future__ import annotations

from contextlib import nullcontext
from typing import Callable, Dict, List, Optional

from ..core.bootstrap import console
from ..core.config import ProfilerConfig
from ..core.types import FrameStack, LineId, NotificationKind, Record
from ..report.aggregate import Aggregator, ProfileReport
from ..vm.assembler import Program
from ..vm.machine import MAIN_THREAD, VmState, current_frames, notify
from .channel import Channel
from .cpu import (
    CpuSampleContext,
    ProfiledScope,
    build_call_map,
    default_profiled_scope,
    on_cpu_sample,
    walk_to_profiled_line,
)
from .heap import DEFAULT_ARENA_BASE, HeapLayout
from .sampling import SamplingRuntime

# arena placement varies with the seed, in 1 MiB steps
ARENA_SEED_STRIDE = 1 << 20
ARENA_SEED_SLOTS = 64

CheckpointSink = Callable[[ProfileReport, int], None]


class Profiler:
    def __init__(
        self,
        program: Program,
        config: Optional[ProfilerConfig] = None,
        channel: Optional[Channel] = None,
        profiled_scope: ProfiledScope = default_profiled_scope,
        on_checkpoint: Optional[CheckpointSink] = None,
    ):
        self.program = program
        self.config = (config or ProfilerConfig()).validate()
        self.scope = profiled_scope
        self.call_map = build_call_map(program)
        self.aggregator = Aggregator(self.config.sparkline_capacity, program.all_lines())
        self.diagnostics: Dict[str, int] = {}
        self.events: List[Record] = []
        self.last_signal_us = 0
        self.vm: Optional[VmState] = None

        base = DEFAULT_ARENA_BASE + (self.config.seed % ARENA_SEED_SLOTS) * ARENA_SEED_STRIDE
        self.heap = HeapLayout(base=base, arena_bytes=self.config.arena_bytes)
        self.channel = channel
        self.runtime: Optional[SamplingRuntime] = None
        if not self.config.cpu_only:
            self.runtime = SamplingRuntime(
                self.config, self.heap, channel, notify=self._notify, locate=self._locate
            )

        self.on_checkpoint = on_checkpoint
        self.checkpoints = 0
        self._next_checkpoint = self.config.profile_interval_us

    def attach(self, vm: VmState) -> None:
        self.vm = vm

    def _notify(self, kind: NotificationKind) -> None:
        if self.vm is not None:
            notify(self.vm, kind)

    def _locate(self, stack: FrameStack) -> LineId:
        return walk_to_profiled_line(stack, self.program, self.scope)

    def _frames(self, vm: VmState, thread_id: int) -> FrameStack:
        return tuple(vm.threads[thread_id].frames)

    # -----------------------------
    # VM hooks
    # -----------------------------
    def on_notification(self, vm: VmState, kind: NotificationKind) -> None:
        self.vm = vm
        guard = self.runtime.handler() if self.runtime is not None else nullcontext()
        with guard:
            if kind is NotificationKind.TIMER:
                self._sample_cpu(vm)
            else:
                self._drain()

    def on_alloc(self, vm: VmState, thread_id: int, size: int) -> int:
        self.vm = vm
        if self.runtime is None:
            return self.heap.allocate(size)
        return self.runtime.allocate(size, self._frames(vm, thread_id))

    def on_free(self, vm: VmState, thread_id: int, address: int) -> bool:
        self.vm = vm
        if self.runtime is None:
            return self.heap.deallocate(address) is not None
        return self.runtime.deallocate(address, self._frames(vm, thread_id))

    def on_copy(self, vm: VmState, thread_id: int, nbytes: int) -> None:
        self.vm = vm
        if self.runtime is None:
            return
        self.runtime.copy_bytes(nbytes, self._locate(self._frames(vm, thread_id)))

    def on_step(self, vm: VmState) -> None:
        if self._next_checkpoint is None or vm.virtual_clock < self._next_checkpoint:
            return
        interval = self.config.profile_interval_us
        while self._next_checkpoint <= vm.virtual_clock:
            self._next_checkpoint += interval
        self._drain()
        self.checkpoints += 1
        console("Profiler", f"checkpoint {self.checkpoints} at {vm.clock_seconds:.6f}s")
        if self.on_checkpoint is not None:
            self.on_checkpoint(self.report(vm, checkpoint=self.checkpoints), self.checkpoints)

    # -----------------------------
    # Internals
    # -----------------------------
    def _sample_cpu(self, vm: VmState) -> None:
        ctx = CpuSampleContext(vm.quantum or self.config.quantum_us, self.last_signal_us, vm.virtual_clock)
        others = [
            (t.status, self._frames(vm, t.id))
            for t in vm.threads
            if t.alive and t.id != MAIN_THREAD
        ]
        deltas = on_cpu_sample(
            ctx,
            current_frames(vm, MAIN_THREAD),
            others,
            self.call_map,
            self.program,
            self.scope,
            self.diagnostics,
        )
        self.aggregator.add_cpu(deltas)
        self.last_signal_us = vm.virtual_clock

    def _drain(self) -> None:
        if self.runtime is None:
            return
        if self.channel is not None:
            records = self.channel.drain()
        else:
            records = self.runtime.take_outbox()
        if records:
            self.events.extend(records)
            self.aggregator.add_records(records)

    def report(self, vm: VmState, checkpoint: Optional[int] = None) -> ProfileReport:
        peak = self.runtime.state.peak if self.runtime is not None else None
        return self.aggregator.report(vm.clock_seconds, peak, checkpoint)

    def finish(self, vm: VmState) -> ProfileReport:
        """Pick up records whose notification never reached a boundary."""
        self._drain()
        return self.report(vm)
