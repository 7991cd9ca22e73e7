"""
Alibaba cluster-trace ingestion (batch_task table)

Rows are headerless, comma-separated, in the trace's column order:

    task_name, instance_num, job_name, task_type, status,
    start_time, end_time, plan_cpu, plan_mem

plan_cpu and plan_mem are percentages; an arrival is the pair
(cpu, mem) = (plan_cpu / 100, plan_mem / 100). Selecting regime theta at
round t turns arrival t into

    r = max(0, c1[theta] * cpu + c2[theta] * mem + eps),   eps ~ N(0, sigma^2)

with consumption [cpu, mem] independent of the regime.
"""

import hashlib
import os
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from core_model import ArrivalSampler, ArrivalStream, RewardResourcePair, ScenarioSpec, SimulationError
from logging_config import get_logger, log_execution_time

logger = get_logger(__name__)

BATCH_TASK_COLUMNS = [
    "task_name",
    "instance_num",
    "job_name",
    "task_type",
    "status",
    "start_time",
    "end_time",
    "plan_cpu",
    "plan_mem",
]
NUMERIC_COLUMNS = ["start_time", "plan_cpu", "plan_mem"]

DEFAULT_SIGMA = 0.1
BUDGET_FRACTION = 0.5
CHUNK_ROWS = 500_000


class TraceError(SimulationError):
    pass


@dataclass(frozen=True)
class TraceArrival:
    """One task: normalized cpu and mem plus its row position in the file."""
    cpu: float
    mem: float
    order_index: int

    def __post_init__(self):
        if not (self.cpu > 0 and self.mem > 0):
            raise TraceError(f"trace arrival needs positive cpu and mem, got ({self.cpu}, {self.mem})")

    @property
    def consumption(self):
        return np.array([self.cpu, self.mem])


@dataclass(frozen=True)
class RegimeTable:
    c1: Tuple[float, ...] = (2.0, 0.5, 1.2)
    c2: Tuple[float, ...] = (0.5, 2.0, 1.2)
    names: Tuple[str, ...] = ("cpu-heavy", "mem-heavy", "balanced")

    @property
    def K(self):
        return len(self.c1)

    def coefficients(self, theta):
        if not 0 <= theta < self.K:
            raise TraceError(f"unknown regime {theta}; valid regimes are 0..{self.K - 1}")
        return self.c1[theta], self.c2[theta]


DEFAULT_REGIMES = RegimeTable()


@dataclass
class ParseStats:
    rows_read: int = 0
    rows_kept: int = 0
    rows_invalid: int = 0
    rows_malformed: int = 0
    window: int = 0

    def as_dict(self):
        return {
            "rows_read": self.rows_read,
            "rows_kept": self.rows_kept,
            "rows_invalid": self.rows_invalid,
            "rows_malformed": self.rows_malformed,
            "window": self.window,
        }


def _count_lines(path):
    with open(path, "rb") as f:
        return sum(1 for line in f if line.strip())


@log_execution_time(logger)
def parse_trace_with_stats(path, T_cap, chunksize=CHUNK_ROWS):
    """
    Parse batch_task.csv and keep the T_cap earliest valid tasks.

    Rows with missing or nonpositive plan_cpu / plan_mem are invalid and
    dropped. Rows whose fields do not parse (wrong field count, non-numeric
    start_time / plan_cpu / plan_mem) are malformed and skipped with a
    warning. The kept rows are ordered by start_time, ties in file order.

    Args:
        path: Path to batch_task.csv
        T_cap: Number of arrivals to return
        chunksize: Rows per pandas chunk

    Returns:
        (list of TraceArrival, ParseStats)
    """
    if T_cap < 1:
        raise TraceError(f"T_cap must be >= 1, got {T_cap}")
    if not os.path.isfile(path):
        raise TraceError(f"trace file not found: {path}")

    stats = ParseStats()
    physical_rows = _count_lines(path)
    kept = None
    parsed_rows = 0

    reader = pd.read_csv(
        path,
        header=None,
        names=BATCH_TASK_COLUMNS,
        usecols=NUMERIC_COLUMNS,
        dtype=str,
        keep_default_na=False,
        on_bad_lines="skip",
        chunksize=chunksize,
    )
    for chunk in reader:
        chunk = chunk.copy()
        chunk["order_index"] = np.arange(parsed_rows, parsed_rows + len(chunk))
        parsed_rows += len(chunk)

        raw = {col: chunk[col].str.strip() for col in NUMERIC_COLUMNS}
        numeric = {col: pd.to_numeric(raw[col], errors="coerce") for col in NUMERIC_COLUMNS}

        # Present but unparseable fields make a row malformed
        malformed = numeric["start_time"].isna()
        for col in ("plan_cpu", "plan_mem"):
            malformed |= (raw[col] != "") & numeric[col].isna()
        invalid = ~malformed & (
            numeric["plan_cpu"].isna()
            | numeric["plan_mem"].isna()
            | (numeric["plan_cpu"] <= 0)
            | (numeric["plan_mem"] <= 0)
        )
        stats.rows_malformed += int(malformed.sum())
        stats.rows_invalid += int(invalid.sum())

        valid = ~(malformed | invalid)
        frame = pd.DataFrame({
            "start_time": numeric["start_time"][valid],
            "cpu": numeric["plan_cpu"][valid] / 100.0,
            "mem": numeric["plan_mem"][valid] / 100.0,
            "order_index": chunk["order_index"][valid],
        })
        stats.rows_kept += len(frame)
        kept = frame if kept is None else pd.concat([kept, frame], ignore_index=True)
        kept = kept.sort_values(["start_time", "order_index"], kind="mergesort").head(T_cap)

    stats.rows_read = physical_rows
    # Lines pandas dropped for a wrong field count
    stats.rows_malformed += max(physical_rows - parsed_rows, 0)

    if stats.rows_malformed:
        logger.warning(f"[TRACE] Skipped {stats.rows_malformed} malformed rows in {path}")
    if stats.rows_invalid:
        logger.info(f"[TRACE] Dropped {stats.rows_invalid} rows with missing or nonpositive plan_cpu/plan_mem")

    n_kept = 0 if kept is None else len(kept)
    if n_kept < T_cap:
        raise TraceError(f"trace has only {n_kept} valid rows, {T_cap} requested (short by {T_cap - n_kept})")
    stats.window = T_cap

    arrivals = [
        TraceArrival(float(cpu), float(mem), int(idx))
        for cpu, mem, idx in zip(kept["cpu"], kept["mem"], kept["order_index"])
    ]
    logger.info(f"[TRACE] Parsed {stats.rows_read} rows, kept window of {len(arrivals)} from {path}")
    return arrivals, stats


def parse_trace(path, T_cap, chunksize=CHUNK_ROWS):
    arrivals, _ = parse_trace_with_stats(path, T_cap, chunksize=chunksize)
    return arrivals


def construct_reward(arrival, theta, regimes=DEFAULT_REGIMES, sigma=DEFAULT_SIGMA, rng=None):
    """
    Regime reward of one arrival, clipped below at 0.

    Args:
        arrival: TraceArrival
        theta: Regime index
        regimes: RegimeTable
        sigma: Noise standard deviation (>= 0)
        rng: numpy Generator; required when sigma > 0
    """
    if sigma < 0:
        raise TraceError(f"sigma must be nonnegative, got {sigma}")
    c1, c2 = regimes.coefficients(theta)
    noise = rng.normal(0.0, sigma) if sigma > 0 else 0.0
    return max(0.0, c1 * arrival.cpu + c2 * arrival.mem + noise)


def _rewards(cpu, mem, theta, regimes, noise):
    c1, c2 = regimes.coefficients(theta)
    return np.maximum(c1 * cpu + c2 * mem + noise, 0.0)


class TraceReplayStream(ArrivalStream):
    """
    Replays the window in temporal order: round t always sees arrival t.

    The noise of round t is drawn up front, so the (cpu, mem) sequence and
    the noise sequence do not depend on which regimes get selected.
    """

    def __init__(self, cpu, mem, regimes, sigma, rng):
        self.cpu = cpu
        self.mem = mem
        self.regimes = regimes
        self.noise = rng.normal(0.0, sigma, size=cpu.shape[0]) if sigma > 0 else np.zeros(cpu.shape[0])

    def draw(self, theta, t):
        if t >= self.cpu.shape[0]:
            raise TraceError(f"round {t} is past the end of the {self.cpu.shape[0]}-arrival trace window")
        r = float(_rewards(self.cpu[t], self.mem[t], theta, self.regimes, self.noise[t]))
        return RewardResourcePair(r, np.array([self.cpu[t], self.mem[t]]))


class TraceSampler(ArrivalSampler):
    """
    Stationary surrogate of the window for the oracles: arrivals drawn
    uniformly with replacement, fresh noise per draw.
    """

    def __init__(self, cpu, mem, regimes=DEFAULT_REGIMES, sigma=DEFAULT_SIGMA):
        self.cpu = np.asarray(cpu, dtype=float)
        self.mem = np.asarray(mem, dtype=float)
        self.regimes = regimes
        self.sigma = sigma

    def sample_batch(self, theta, n, rng):
        idx = rng.integers(0, self.cpu.shape[0], size=n)
        noise = rng.normal(0.0, self.sigma, size=n) if self.sigma > 0 else np.zeros(n)
        cpu, mem = self.cpu[idx], self.mem[idx]
        return _rewards(cpu, mem, theta, self.regimes, noise), np.column_stack([cpu, mem])

    def open_stream(self, rng):
        return TraceReplayStream(self.cpu, self.mem, self.regimes, self.sigma, rng)


def _fingerprint(cpu, mem, regimes, sigma):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(cpu).tobytes())
    h.update(np.ascontiguousarray(mem).tobytes())
    h.update(repr((regimes.c1, regimes.c2, float(sigma))).encode("utf-8"))
    return h.hexdigest()[:16]


def trace_scenario(arrivals, regimes=DEFAULT_REGIMES, sigma=DEFAULT_SIGMA, rho=1.0):
    """
    Package a trace window as a scenario.

    The nominal per-period budget is b0 = 0.5 * mean([cpu, mem]) over the
    window, so the total budget is B = rho * 0.5 * T * mean([cpu, mem]).

    Returns:
        (ScenarioSpec, total budget vector B)
    """
    if not arrivals:
        raise TraceError("cannot build a scenario from an empty trace window")
    if rho < 0:
        raise TraceError(f"rho must be nonnegative, got {rho}")
    cpu = np.array([a.cpu for a in arrivals])
    mem = np.array([a.mem for a in arrivals])
    T = cpu.shape[0]
    mean_consumption = np.array([cpu.mean(), mem.mean()])

    spec = ScenarioSpec(
        name="alibaba",
        K=regimes.K,
        d=2,
        R_max=max(regimes.c1) * float(cpu.max()) + max(regimes.c2) * float(mem.max()) + 6.0 * sigma,
        A_max=float(max(cpu.max(), mem.max())),
        b0=BUDGET_FRACTION * mean_consumption,
        sampler=TraceSampler(cpu, mem, regimes, sigma),
        rho=rho,
        description=f"Alibaba batch_task window of {T} arrivals",
        fingerprint=f"alibaba-{T}-{_fingerprint(cpu, mem, regimes, sigma)}",
        config_names=list(regimes.names),
    )
    B_total = spec.total_budget(T, rho)
    logger.info(f"[TRACE] Scenario over {T} arrivals, rho={rho}: B={np.round(B_total, 3).tolist()}")
    return spec, B_total


def trace_summary(arrivals, rho=1.0, stats=None):
    """Window statistics (cpu/mem mean and std) and the budget at rho."""
    cpu = np.array([a.cpu for a in arrivals])
    mem = np.array([a.mem for a in arrivals])
    T = cpu.shape[0]
    ddof = 1 if T > 1 else 0
    summary = {
        "T": T,
        "cpu_mean": float(cpu.mean()),
        "cpu_std": float(cpu.std(ddof=ddof)),
        "mem_mean": float(mem.mean()),
        "mem_std": float(mem.std(ddof=ddof)),
        "budget_cpu": float(rho * BUDGET_FRACTION * T * cpu.mean()),
        "budget_mem": float(rho * BUDGET_FRACTION * T * mem.mean()),
        "rho": rho,
    }
    if stats is not None:
        summary.update(stats.as_dict())
    return summary
