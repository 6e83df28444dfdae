"""
Closed-form event simulation of the delayed-timer estimator.

Each line alternates an interpreter phase, where a due timer is observed
immediately, and a native phase, where a due timer is only observed when
the phase ends. The estimator adds q to the line's interpreter total per
observation and the excess delay (T - q) to its native total. Costs are
Pareto distributed so a few lines dominate, as in real programs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from ..core.bootstrap import console
from ..core.constants import DEFAULT_QUANTUM, SIM_ALPHA, SIM_LINES, SIM_MAX_TIME, SIM_RUNS


class SimulationError(ValueError):
    pass


@dataclass
class SimWorkload:
    """Per-line interpreter/native cost shares; both arrays together sum to 1."""

    python_cost: np.ndarray
    native_cost: np.ndarray
    alpha: float = SIM_ALPHA
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        self.python_cost = np.asarray(self.python_cost, dtype=float)
        self.native_cost = np.asarray(self.native_cost, dtype=float)
        if self.python_cost.shape != self.native_cost.shape or self.python_cost.ndim != 1:
            raise SimulationError("python_cost and native_cost must be 1-d arrays of equal length")
        if len(self.python_cost) < 1:
            raise SimulationError("a workload needs at least one line")
        if (self.python_cost < 0).any() or (self.native_cost < 0).any():
            raise SimulationError("costs must be non-negative")
        if self.python_cost.sum() + self.native_cost.sum() <= 0:
            raise SimulationError("workload has zero total cost")

    @property
    def n(self) -> int:
        return len(self.python_cost)

    @property
    def total_cost(self) -> np.ndarray:
        return self.python_cost + self.native_cost


@dataclass
class SimResult:
    actual_python: np.ndarray
    actual_native: np.ndarray
    estimated_python: np.ndarray
    estimated_native: np.ndarray
    python_samples: np.ndarray
    sample_count: int
    q: float
    rho_python: float
    rho_native: float
    ratio_python: float
    ratio_native: float

    @property
    def estimated_python_total(self) -> float:
        return self.sample_count * self.q

    @property
    def estimated_native_total(self) -> float:
        return float(self.estimated_native.sum())


@dataclass
class StudyRow:
    time: float
    ratio_python: float
    ratio_native: float
    rho_python: float
    rho_native: float
    error_python: float     # mean |ratio - 1| across runs
    error_native: float


@dataclass
class StudyTable:
    rows: List[StudyRow] = field(default_factory=list)
    runs: int = SIM_RUNS
    lines: int = SIM_LINES
    alpha: float = SIM_ALPHA
    q: float = DEFAULT_QUANTUM
    seed: int = 0

    def row_at(self, time: float) -> StudyRow:
        for row in self.rows:
            if row.time == time:
                return row
        raise KeyError(time)


# -----------------------------
# Workloads
# -----------------------------
def pareto_draws(rng: np.random.Generator, n: int, alpha: float) -> np.ndarray:
    """Inverse-transform Pareto draws with minimum 1."""
    u = rng.random(n)
    return (1.0 - u) ** (-1.0 / alpha)


def generate_workload(n: int = SIM_LINES, alpha: float = SIM_ALPHA, seed: int = 0) -> SimWorkload:
    if n < 1:
        raise SimulationError("n must be >= 1")
    if not alpha > 1.0:
        raise SimulationError(f"alpha must be > 1, got {alpha}")
    rng = np.random.default_rng(seed)
    python = pareto_draws(rng, n, alpha)
    native = pareto_draws(rng, n, alpha)
    total = python.sum() + native.sum()
    return SimWorkload(python / total, native / total, alpha, seed)


def top_share(costs: Sequence[float], fraction: float = 0.2) -> float:
    """Share of the total held by the largest `fraction` of entries."""
    arr = np.sort(np.asarray(costs, dtype=float))[::-1]
    k = max(1, int(round(len(arr) * fraction)))
    total = arr.sum()
    return float(arr[:k].sum() / total) if total > 0 else 0.0


# -----------------------------
# Statistics
# -----------------------------
def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    Rank correlation with average ranks for ties. Returns NaN when either
    side has no rank variance (the coefficient is undefined there).
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise SimulationError("spearman_rho needs two 1-d sequences of equal length")
    if len(x) < 2:
        raise SimulationError("spearman_rho needs at least 2 points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    rho = stats.spearmanr(x, y)[0]
    return float(max(-1.0, min(1.0, rho)))


# -----------------------------
# Simulation
# -----------------------------
def simulate_run(
    workload: SimWorkload,
    total_time: float,
    q: float = DEFAULT_QUANTUM,
    visits: int = 1,
) -> SimResult:
    if total_time <= 0:
        raise SimulationError("total_time must be positive")
    if q <= 0:
        raise SimulationError("q must be positive")
    if visits < 1:
        raise SimulationError("visits must be >= 1")

    scale = float(total_time) / float(workload.total_cost.sum())
    actual_python = workload.python_cost * scale
    actual_native = workload.native_cost * scale
    py_phase = actual_python / visits
    native_phase = actual_native / visits

    n = workload.n
    samples = np.zeros(n, dtype=np.int64)
    est_native = np.zeros(n, dtype=float)
    t = 0.0
    last_delivery = 0.0
    next_fire = q

    for _ in range(visits):
        for i in range(n):
            # interpreter phase: every due timer is observed on time
            end = t + py_phase[i]
            if next_fire <= end:
                k = int(math.floor((end - next_fire) / q)) + 1
                samples[i] += k
                last_delivery = next_fire + (k - 1) * q
                next_fire = last_delivery + q
            t = end

            # native phase: a due timer waits for the call to return
            end = t + native_phase[i]
            if next_fire <= end:
                samples[i] += 1
                est_native[i] += max(end - last_delivery - q, 0.0)
                last_delivery = end
                next_fire = end + q
            t = end

    est_python = samples * q
    sample_count = int(samples.sum())
    p_total = float(actual_python.sum())
    c_total = float(actual_native.sum())
    return SimResult(
        actual_python=actual_python,
        actual_native=actual_native,
        estimated_python=est_python,
        estimated_native=est_native,
        python_samples=samples,
        sample_count=sample_count,
        q=q,
        rho_python=spearman_rho(actual_python, est_python) if n >= 2 else float("nan"),
        rho_native=spearman_rho(actual_native, est_native) if n >= 2 else float("nan"),
        ratio_python=(sample_count * q) / p_total if p_total > 0 else float("nan"),
        ratio_native=float(est_native.sum()) / c_total if c_total > 0 else float("nan"),
    )


def study_times(max_time: float = SIM_MAX_TIME) -> List[float]:
    """1, 2, 4, ... up to max_time seconds."""
    if max_time < 1:
        raise SimulationError("max_time must be >= 1 second")
    times = []
    t = 1.0
    while t <= max_time:
        times.append(t)
        t *= 2
    return times


def run_study(
    runs: int = SIM_RUNS,
    times: Optional[Sequence[float]] = None,
    n: int = SIM_LINES,
    alpha: float = SIM_ALPHA,
    q: float = DEFAULT_QUANTUM,
    seed: int = 0,
    visits: int = 1,
) -> StudyTable:
    if runs < 1:
        raise SimulationError("runs must be >= 1")
    times = list(times) if times is not None else study_times()
    workloads = [generate_workload(n, alpha, seed + r) for r in range(runs)]
    table = StudyTable(runs=runs, lines=n, alpha=alpha, q=q, seed=seed)

    for total_time in times:
        results = [simulate_run(w, total_time, q, visits) for w in workloads]
        rp = np.array([r.ratio_python for r in results])
        rn = np.array([r.ratio_native for r in results])
        row = StudyRow(
            time=float(total_time),
            ratio_python=float(np.mean(rp)),
            ratio_native=float(np.mean(rn)),
            rho_python=float(np.mean([r.rho_python for r in results])),
            rho_native=float(np.mean([r.rho_native for r in results])),
            error_python=float(np.mean(np.abs(rp - 1.0))),
            error_native=float(np.mean(np.abs(rn - 1.0))),
        )
        table.rows.append(row)
        console(
            "Sim",
            f"t={total_time:g}s ratio_py={row.ratio_python:.4f} ratio_c={row.ratio_native:.4f} "
            f"rho_py={row.rho_python:.4f} rho_c={row.rho_native:.4f}",
        )
    return table
