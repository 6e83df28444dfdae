import pytest

from conftest import asm, counting_loop, fixture_path
from src.core.config import ProfilerConfig
from src.core.types import LineId, NotificationKind, RecordKind
from src.core.service import profile_file, profile_source
from src.profiler.cpu import patch_blocking_join
from src.profiler.engine import Profiler
from src.profiler.trends import glyph_levels
from src.vm.assembler import parse_program
from src.vm.machine import ExitStatus, new_vm, run

ITERATIONS = 100


def _share_program(fraction: float) -> str:
    """
    One line, ITERATIONS one-second iterations; `fraction` of each is a
    native call and the rest is bytecode at 1 ms per opcode.
    """
    loop_ops = round(((1 - fraction) * 1000 - 5) / 3)
    body = [".file share.py", ".func main", ".line 1", f"PUSH {ITERATIONS}"]
    top = len(body) - 3
    if fraction > 0:
        body.append(f"CALL_NATIVE work {fraction}")
    if loop_ops > 0:
        inner = len(body) - 3 + 1
        body += [f"PUSH {loop_ops}", "PUSH -1", "ADD", f"JNZ {inner}", "POP"]
    body += ["PUSH -1", "ADD", f"JNZ {top}", "POP", "HALT"]
    return asm(*body)


def _timer_clocks(outcome):
    return [d.clock_us for d in outcome.vm.deliveries if d.kind is NotificationKind.TIMER]


@pytest.mark.parametrize("fraction", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_native_share_converges(fraction):
    config = ProfilerConfig(op_cost=0.001, cpu_only=True)
    outcome = profile_source(_share_program(fraction), "share.py", config)

    row = outcome.report.row_for(LineId("share.py", 1))
    share = row.native_pct / (row.python_pct + row.native_pct)
    assert outcome.report.run_seconds == pytest.approx(100.0, abs=0.5)
    assert share == pytest.approx(fraction, abs=0.02)


def test_one_second_native_calls_are_mostly_native():
    outcome = profile_file(str(fixture_path("native.asm")), ProfilerConfig())

    stats = outcome.report.stats[LineId("native.py", 3)]
    assert stats.native_us / (stats.python_us + stats.native_us) >= 0.98


def test_pure_bytecode_is_interpreter_time():
    outcome = profile_source(counting_loop(33333), "loop.py", ProfilerConfig())

    stats = outcome.report.stats[LineId("loop.py", 1)]
    assert stats.python_us / (stats.python_us + stats.native_us) >= 0.99
    assert stats.cpu_sample_count == 100


@pytest.mark.parametrize("name", ["julia.asm", "native.asm", "threads.asm", "sawtooth.asm", "ticker.asm"])
def test_python_time_is_samples_times_quantum(name):
    config = ProfilerConfig()
    report = profile_file(str(fixture_path(name)), config).report

    assert report.total_python_us == report.cpu_samples * config.quantum_us


@pytest.mark.parametrize("name", ["julia.asm", "native.asm", "ticker.asm"])
def test_single_thread_attribution_is_conserved(name):
    report = profile_file(str(fixture_path(name)), ProfilerConfig()).report

    assert report.attributed_seconds <= report.run_seconds
    assert report.attributed_seconds >= 0.95 * report.run_seconds


def test_patched_join_keeps_sampling_the_workers():
    # GIVEN two one-second workers joined by main
    outcome = profile_file(str(fixture_path("threads.asm")), ProfilerConfig(patch_join=True))
    report = outcome.report

    # THEN
    assert len(_timer_clocks(outcome)) >= 100
    assert report.attributed_seconds >= 0.95 * report.run_seconds
    assert report.stats[LineId("threads.py", 14)].python_us > 0


def test_unpatched_join_sees_nothing_until_the_join_returns():
    outcome = profile_file(str(fixture_path("threads.asm")), ProfilerConfig(patch_join=False))

    clocks = _timer_clocks(outcome)
    assert clocks
    assert min(clocks) > 1_900_000
    # the whole wait shows up as one late sample on the JOIN line
    assert outcome.report.stats[LineId("threads.py", 7)].native_us > 1_800_000


def test_sleeping_thread_accumulates_nothing():
    source = asm(
        ".file sleeper.py",
        ".func main",
        ".line 1",
        "SPAWN sleeper",
        ".line 2",
        "PUSH 20000",
        "PUSH -1",
        "ADD",
        "JNZ 2",
        "POP",
        "HALT",
        ".func sleeper",
        ".line 20",
        "JOIN 0",
        "RET",
    )
    program = parse_program(source, "sleeper.py")
    config = ProfilerConfig(cpu_only=True)
    vm = new_vm(program, config)
    # a single wait that outlasts the whole run
    patch_blocking_join(vm, 100_000_000)
    profiler = Profiler(program, config)
    profiler.attach(vm)

    result = run(program, profiler, config, vm=vm)
    report = profiler.finish(vm)

    assert result.status is ExitStatus.HALTED
    assert report.cpu_samples > 0
    assert report.row_for(LineId("sleeper.py", 20)) is None
    assert report.row_for(LineId("sleeper.py", 2)).python_pct > 99


def test_sawtooth_trend_alternates_and_nets_to_zero():
    outcome = profile_file(str(fixture_path("sawtooth.asm")), ProfilerConfig())
    stats = outcome.report.stats[LineId("sawtooth.py", 4)]
    kinds = [r.kind for r in outcome.events]

    assert kinds.count(RecordKind.MALLOC) == 39
    assert kinds.count(RecordKind.FREE) == 39
    assert stats.python_net_bytes + stats.native_net_bytes == 0
    assert outcome.report.program_net_bytes == 0

    glyphs = outcome.report.row_for(LineId("sawtooth.py", 4)).trend.rstrip()
    assert len(set(glyphs)) == 2
    assert all(a != b for a, b in zip(glyphs, glyphs[1:]))


def test_leak_trend_only_goes_up():
    outcome = profile_file(str(fixture_path("sawtooth_leak.asm")), ProfilerConfig())
    stats = outcome.report.stats[LineId("sawtooth.py", 4)]

    levels = glyph_levels(stats.footprint_trend)
    assert levels == sorted(levels)
    assert levels[-1] > levels[0]
    assert stats.python_net_bytes + stats.native_net_bytes == 39 * 1_048_583


def test_runtime_allocations_are_python_bytes_on_the_calling_line():
    outcome = profile_file(str(fixture_path("julia.asm")), ProfilerConfig())
    mallocs = [r for r in outcome.events if r.kind is RecordKind.MALLOC]
    copies = [r for r in outcome.events if r.kind is RecordKind.COPY]

    assert mallocs
    assert all(r.python_fraction == 1.0 for r in mallocs)
    assert {r.line for r in mallocs} == {LineId("julia.py", 22)}
    assert {r.line for r in copies} == {LineId("julia.py", 23)}
    assert len(copies) == 200 * 65_536 // (2 * 1_048_583)


def test_memory_columns_balance_the_record_stream():
    outcome = profile_file(str(fixture_path("julia.asm")), ProfilerConfig())
    report = outcome.report

    per_line = sum(s.python_net_bytes + s.native_net_bytes for s in report.stats.values())
    assert per_line == report.program_net_bytes


def test_cpu_only_emits_no_records():
    outcome = profile_file(str(fixture_path("julia.asm")), ProfilerConfig(cpu_only=True))

    assert outcome.events == []
    assert outcome.report.peak_bytes is None
    assert outcome.report.cpu_samples > 0


def test_event_log_matches_across_seeds_and_runs(tmp_path):
    paths = []
    for tag, seed in (("a", 4), ("b", 4), ("c", 9)):
        path = tmp_path / f"{tag}.events"
        profile_file(str(fixture_path("julia.asm")), ProfilerConfig(seed=seed), events_path=str(path))
        paths.append(path.read_text(encoding="utf-8"))

    assert paths[0] == paths[1]
    # the seed moves the arena, not the sampled records
    assert paths[0] == paths[2]


def test_calls_into_an_empty_function_are_charged_to_the_caller():
    source = asm(".file empty.py", ".func main", ".line 1", "CALL nothing", "JMP 0", ".func nothing")

    outcome = profile_source(source, "empty.py", ProfilerConfig(max_time=0.05))

    assert outcome.status is ExitStatus.ABORTED
    assert outcome.report.cpu_samples > 0
    assert set(outcome.report.stats) == {LineId("empty.py", 1)}
