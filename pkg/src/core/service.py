from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from ..export.exporter_csv import export_study_csv
from ..export.exporter_txt import export_checkpoint, export_report_file
from ..profiler.channel import Channel, write_event_log
from ..profiler.cpu import ProfiledScope, default_profiled_scope, patch_blocking_join
from ..profiler.engine import Profiler
from ..report.aggregate import ProfileReport
from ..simulation.simulator import StudyTable, run_study, study_times
from ..vm.assembler import Program, parse_program
from ..vm.machine import ExitStatus, VmState, new_vm, run
from .bootstrap import console
from .config import ProfilerConfig
from .types import Record

# NOTE:
# This module is the integration point for the CLI and end-to-end tests.
# Without a config the built-in ProfilerConfig() defaults apply; the CLI
# passes one built from the environment and its flags.


@dataclass
class ProfileOutcome:
    status: ExitStatus
    report: ProfileReport
    vm: VmState
    events: List[Record] = field(default_factory=list)
    checkpoint_files: List[str] = field(default_factory=list)
    report_path: Optional[str] = None
    events_path: Optional[str] = None
    diagnostics: Dict[str, int] = field(default_factory=dict)


# -----------------------------
# Profiling
# -----------------------------
def profile_program(
    program: Program,
    config: Optional[ProfilerConfig] = None,
    out: Optional[str] = None,
    events_path: Optional[str] = None,
    channel_path: Optional[str] = None,
    profiled_scope: ProfiledScope = default_profiled_scope,
) -> ProfileOutcome:
    config = (config or ProfilerConfig()).validate()
    vm = new_vm(program, config)
    if config.patch_join:
        patch_blocking_join(vm, config.switch_interval_us)

    checkpoint_files: List[str] = []

    def _checkpoint(report: ProfileReport, index: int) -> None:
        if not out:
            return
        _, snapshot = export_checkpoint(out, report, index)
        checkpoint_files.append(snapshot)

    channel = None if config.cpu_only else Channel(Path(channel_path) if channel_path else None)
    try:
        profiler = Profiler(program, config, channel, profiled_scope, _checkpoint)
        profiler.attach(vm)
        result = run(program, profiler, config, vm=vm)
        report = profiler.finish(vm)
        diagnostics = dict(vm.diagnostics)
        diagnostics.update(profiler.diagnostics)
        diagnostics.update(profiler.heap.diagnostics)
        if channel is not None:
            diagnostics.update(channel.diagnostics)
    finally:
        if channel is not None:
            channel.close()

    outcome = ProfileOutcome(
        status=result.status,
        report=report,
        vm=vm,
        events=list(profiler.events),
        checkpoint_files=checkpoint_files,
        diagnostics=diagnostics,
    )
    if out:
        outcome.report_path = export_report_file(out, report)
    if events_path:
        outcome.events_path = str(write_event_log(events_path, outcome.events))
    console(
        "Profiler",
        f"{result.status.value} after {vm.clock_seconds:.6f}s virtual, "
        f"{len(outcome.events)} records, {report.cpu_samples} cpu samples",
    )
    return outcome


def profile_source(
    source_text: str,
    source_name: str = "<program>",
    config: Optional[ProfilerConfig] = None,
    **kwargs,
) -> ProfileOutcome:
    return profile_program(parse_program(source_text, source_name), config, **kwargs)


def profile_file(path: str, config: Optional[ProfilerConfig] = None, **kwargs) -> ProfileOutcome:
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    return profile_source(text, p.name, config, **kwargs)


# -----------------------------
# Simulation study
# -----------------------------
def simulate_study(
    runs: int = 10,
    lines: int = 100,
    alpha: float = 1.16,
    q: float = 0.01,
    max_time: float = 64.0,
    seed: int = 0,
    csv_path: Optional[str] = None,
    times: Optional[Sequence[float]] = None,
) -> StudyTable:
    table = run_study(
        runs=runs,
        times=list(times) if times is not None else study_times(max_time),
        n=lines,
        alpha=alpha,
        q=q,
        seed=seed,
    )
    if csv_path:
        export_study_csv(csv_path, table)
    return table
