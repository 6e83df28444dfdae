import pytest

from src.core.config import (
    ConfigError,
    ProfilerConfig,
    channel_dir,
    env_bool,
    to_micros,
    to_seconds,
    verbose,
)


@pytest.mark.parametrize("raw, expected", [("1", True), ("yes", True), ("TRUE", True), ("0", False), ("no", False)])
def test_env_bool(monkeypatch, raw, expected):
    monkeypatch.setenv("MINIPROF_X", raw)

    assert env_bool("MINIPROF_X") is expected


def test_defaults_without_environment():
    config = ProfilerConfig.from_env()

    assert config == ProfilerConfig()
    assert config.quantum_us == 10_000
    assert config.switch_interval_us == 5_000
    assert config.op_cost_us == 10
    assert config.profile_interval_us is None
    assert not verbose()


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("MINIPROF_QUANTUM", "0.02")
    monkeypatch.setenv("MINIPROF_CPU_ONLY", "yes")
    monkeypatch.setenv("MINIPROF_PATCH_JOIN", "0")
    monkeypatch.setenv("MINIPROF_PROFILE_INTERVAL", "1.5")
    monkeypatch.setenv("MINIPROF_SEED", "42")

    config = ProfilerConfig.from_env()

    assert config.quantum_us == 20_000
    assert config.cpu_only is True
    assert config.patch_join is False
    assert config.profile_interval_us == 1_500_000
    assert config.seed == 42


@pytest.mark.parametrize(
    "key, raw",
    [
        ("MINIPROF_QUANTUM", "fast"),
        ("MINIPROF_ALLOC_THRESHOLD", "1.5"),
        ("MINIPROF_QUANTUM", "0"),
        ("MINIPROF_CLOCK_MODE", "sundial"),
    ],
)
def test_bad_environment_values_raise(monkeypatch, key, raw):
    monkeypatch.setenv(key, raw)

    with pytest.raises(ConfigError):
        ProfilerConfig.from_env()


def test_overrides_ignore_none_and_revalidate():
    base = ProfilerConfig(quantum=0.02)

    assert base.with_overrides(quantum=None, seed=3) == ProfilerConfig(quantum=0.02, seed=3)
    with pytest.raises(ConfigError):
        base.with_overrides(sparkline_capacity=10)


def test_sub_microsecond_quantum_is_rejected():
    with pytest.raises(ConfigError):
        ProfilerConfig(quantum=1e-7).validate()


def test_time_conversions():
    assert to_micros(0.01) == 10_000
    assert to_micros(1e-6) == 1
    assert to_seconds(2_500_000) == 2.5


def test_channel_dir_comes_from_the_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("MINIPROF_TMPDIR", str(tmp_path))
    assert channel_dir() == str(tmp_path)

    monkeypatch.delenv("MINIPROF_TMPDIR")
    assert channel_dir() is None
