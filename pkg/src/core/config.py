from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from .constants import (
    CALLSTACK_DIVISOR,
    COPY_MULTIPLIER,
    DEFAULT_ALLOC_THRESHOLD,
    DEFAULT_ARENA_BYTES,
    DEFAULT_MAX_TIME,
    DEFAULT_OP_COST,
    DEFAULT_QUANTUM,
    DEFAULT_SWITCH_INTERVAL,
    MAX_STACK_DEPTH,
    MICROS_PER_SECOND,
    NATIVE_OVERRIDES,
    SPARKLINE_CAPACITY,
)


class ConfigError(ValueError):
    pass


def env_bool(key: str, default: str = "0") -> bool:
    """
    Env bool parser.
    Accepts: 1/0, true/false, yes/no (case-insensitive)
    """
    v = os.getenv(key, default)
    if v is None:
        v = default
    return str(v).strip().lower() in ("1", "true", "yes", "y")


def env_str(key: str, default: str = "") -> str:
    v = os.getenv(key, default)
    if v is None:
        v = default
    return str(v).strip()


def env_float(key: str, default: float) -> float:
    raw = env_str(key, "")
    if not raw:
        return float(default)
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw!r}")


def env_int(key: str, default: int) -> int:
    raw = env_str(key, "")
    if not raw:
        return int(default)
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}")


# -------------------------------------------------
# Runtime getters
# -------------------------------------------------
def verbose() -> bool:
    return env_bool("MINIPROF_VERBOSE", "0")


def channel_dir() -> Optional[str]:
    return env_str("MINIPROF_TMPDIR", "") or None


def to_micros(seconds: float) -> int:
    return int(round(float(seconds) * MICROS_PER_SECOND))


def to_seconds(micros: int) -> float:
    return micros / MICROS_PER_SECOND


@dataclass(frozen=True)
class ProfilerConfig:
    quantum: float = DEFAULT_QUANTUM
    switch_interval: float = DEFAULT_SWITCH_INTERVAL
    op_cost: float = DEFAULT_OP_COST
    max_time: float = DEFAULT_MAX_TIME
    alloc_threshold: int = DEFAULT_ALLOC_THRESHOLD
    callstack_divisor: int = CALLSTACK_DIVISOR
    copy_multiplier: int = COPY_MULTIPLIER
    max_stack_depth: int = MAX_STACK_DEPTH
    sparkline_capacity: int = SPARKLINE_CAPACITY
    arena_bytes: int = DEFAULT_ARENA_BYTES
    cpu_only: bool = False
    patch_join: bool = True
    profile_interval: Optional[float] = None
    seed: int = 0
    clock_mode: str = "virtual"
    native_overrides: Tuple[str, ...] = field(default=NATIVE_OVERRIDES)

    # integer-microsecond views used by the VM and the CPU accounting
    @property
    def quantum_us(self) -> int:
        return to_micros(self.quantum)

    @property
    def switch_interval_us(self) -> int:
        return to_micros(self.switch_interval)

    @property
    def op_cost_us(self) -> int:
        return to_micros(self.op_cost)

    @property
    def max_time_us(self) -> int:
        return to_micros(self.max_time)

    @property
    def profile_interval_us(self) -> Optional[int]:
        if self.profile_interval is None:
            return None
        return to_micros(self.profile_interval)

    def validate(self) -> "ProfilerConfig":
        if self.quantum_us <= 0:
            raise ConfigError("quantum must be positive (at least 1 µs)")
        if self.switch_interval_us <= 0:
            raise ConfigError("switch_interval must be positive")
        if self.op_cost_us <= 0:
            raise ConfigError("op_cost must be positive")
        if self.max_time <= 0:
            raise ConfigError("max_time must be positive")
        if self.alloc_threshold < self.callstack_divisor:
            raise ConfigError("alloc_threshold must be at least callstack_divisor bytes")
        if self.callstack_divisor < 1 or self.copy_multiplier < 1:
            raise ConfigError("callstack_divisor and copy_multiplier must be >= 1")
        if self.max_stack_depth < 1:
            raise ConfigError("max_stack_depth must be >= 1")
        if self.sparkline_capacity < 3 or self.sparkline_capacity % 3:
            raise ConfigError("sparkline_capacity must be a positive multiple of 3")
        if self.profile_interval is not None and self.profile_interval_us <= 0:
            raise ConfigError("profile_interval must be positive")
        if self.clock_mode not in ("virtual", "wall"):
            raise ConfigError(f"clock_mode must be 'virtual' or 'wall', got {self.clock_mode!r}")
        return self

    def with_overrides(self, **changes) -> "ProfilerConfig":
        """Apply non-None overrides (CLI flags win over env values)."""
        clean = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **clean).validate()

    @classmethod
    def from_env(cls) -> "ProfilerConfig":
        base = cls()
        interval = env_str("MINIPROF_PROFILE_INTERVAL", "")
        if interval:
            interval = env_float("MINIPROF_PROFILE_INTERVAL", 0.0)
        return cls(
            quantum=env_float("MINIPROF_QUANTUM", base.quantum),
            switch_interval=env_float("MINIPROF_SWITCH_INTERVAL", base.switch_interval),
            op_cost=env_float("MINIPROF_OP_COST", base.op_cost),
            max_time=env_float("MINIPROF_MAX_TIME", base.max_time),
            alloc_threshold=env_int("MINIPROF_ALLOC_THRESHOLD", base.alloc_threshold),
            arena_bytes=env_int("MINIPROF_ARENA_BYTES", base.arena_bytes),
            cpu_only=env_bool("MINIPROF_CPU_ONLY", "0"),
            patch_join=env_bool("MINIPROF_PATCH_JOIN", "1"),
            profile_interval=interval or None,
            seed=env_int("MINIPROF_SEED", base.seed),
            clock_mode=env_str("MINIPROF_CLOCK_MODE", base.clock_mode) or "virtual",
        ).validate()
