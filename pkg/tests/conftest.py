from pathlib import Path

import pytest

from src.core.config import ProfilerConfig
from src.vm.assembler import parse_program

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    for key in (
        "MINIPROF_VERBOSE",
        "MINIPROF_QUANTUM",
        "MINIPROF_SWITCH_INTERVAL",
        "MINIPROF_OP_COST",
        "MINIPROF_MAX_TIME",
        "MINIPROF_ALLOC_THRESHOLD",
        "MINIPROF_ARENA_BYTES",
        "MINIPROF_CPU_ONLY",
        "MINIPROF_PATCH_JOIN",
        "MINIPROF_PROFILE_INTERVAL",
        "MINIPROF_SEED",
        "MINIPROF_CLOCK_MODE",
    ):
        monkeypatch.delenv(key, raising=False)
    # keep channel files out of the shared temp dir
    monkeypatch.setenv("MINIPROF_TMPDIR", str(tmp_path / "channel"))


@pytest.fixture
def config():
    return ProfilerConfig()


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def load_fixture(name: str):
    return parse_program(fixture_path(name).read_text(encoding="utf-8"), name)


def asm(*lines: str) -> str:
    return "\n".join(lines) + "\n"


def counting_loop(iterations: int, line: int = 1) -> str:
    """main: `iterations` trips of PUSH -1 / ADD / JNZ, all on one line."""
    return asm(
        ".file loop.py",
        ".func main",
        f".line {line}",
        f"PUSH {iterations}",
        "PUSH -1",
        "ADD",
        "JNZ 1",
        "POP",
        "HALT",
    )
