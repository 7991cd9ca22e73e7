"""
Online policies

SP-UCB-OLP: after a round-robin warm start, every round solves (on a
resolve schedule) the optimistic saddle

    (w_t, p_t) = saddle of <p, b_safe> + sum_theta w_theta (g_hat_theta(p) + beta_theta(t))

over p in [0, P_max]^d when the scenario fixes P_max. It then samples
theta_t ~ w_t, observes the arrival, stores it and admits it against the
bid price p_t.

Baselines:
    greedy   SP-UCB-OLP with alpha = 0
    onehot   SP-UCB-OLP committed to the largest-weight vertex of its first
             mixture; later solves only refresh the price
    oracle   the true saddle (w*, p*) every round, no learning
    random   uniform theta_t, admit whenever the arrival fits the budget
"""

import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from core_model import (
    BudgetState,
    Mixture,
    PreconditionError,
    PriceVector,
    RewardResourcePair,
    SampleStore,
    admit,
)
from fluid_oracle import funded_saddle
from logging_config import get_logger

logger = get_logger(__name__)

POLICY_KINDS = ("spucb", "greedy", "random", "oracle", "onehot")
BASELINE_KINDS = ("greedy", "random", "oracle", "onehot")
RESOLVE_SCHEDULES = ("doubling", "every_round")

# Policies that never read alpha
ALPHA_FREE_KINDS = ("random", "oracle")


@dataclass(frozen=True)
class PolicyParams:
    alpha: float = 0.0
    delta: Optional[float] = None  # None -> T^-2
    c_g: float = 0.0707
    c_0: float = 1.0
    resolve_schedule: str = "doubling"
    rng_seed: Optional[int] = None
    log_trajectory: bool = True
    saddle_method: str = "auto"

    def __post_init__(self):
        if self.alpha < 0:
            raise PreconditionError(f"alpha must be nonnegative, got {self.alpha}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise PreconditionError(f"delta must lie in (0, 1), got {self.delta}")
        if self.c_g <= 0:
            raise PreconditionError(f"c_g must be positive, got {self.c_g}")
        if self.resolve_schedule not in RESOLVE_SCHEDULES:
            raise PreconditionError(
                f"unknown resolve schedule {self.resolve_schedule!r}; expected one of {RESOLVE_SCHEDULES}"
            )

    def confidence(self, T):
        return self.delta if self.delta is not None else T ** -2.0


@dataclass
class RoundLog:
    t: int
    theta: int
    r: float
    a: np.ndarray
    x: int
    p: Optional[PriceVector]
    w: Optional[Mixture]


@dataclass
class RunRecord:
    policy: str
    T: int
    total_reward: float
    budget: BudgetState
    solve_count: int = 0
    accepts: int = 0
    rounds: List[RoundLog] = field(default_factory=list)
    elapsed: float = 0.0

    def check_invariants(self, tol=1e-9, bounds=None):
        """
        Pathwise budget feasibility and, with a trajectory, reward accounting.

        bounds=(R_max, A_max) also requires every logged arrival to lie in
        [0, R_max] x [0, A_max]^d.
        """
        used = self.budget.used
        if np.any(used > self.budget.B_total + tol):
            raise PreconditionError(f"{self.policy}: consumption {used} exceeds budget {self.budget.B_total}")
        if self.rounds:
            reward = sum(log.r * log.x for log in self.rounds)
            if abs(reward - self.total_reward) > tol * (1.0 + abs(reward)):
                raise PreconditionError(f"{self.policy}: reward log sums to {reward}, record says {self.total_reward}")
            spent = sum((log.a * log.x for log in self.rounds), np.zeros_like(used))
            if np.any(np.abs(spent - used) > 1e-7 * (1.0 + np.abs(used))):
                raise PreconditionError(f"{self.policy}: logged consumption {spent} disagrees with budget {used}")
            if bounds is not None:
                R_max, A_max = bounds
                for log in self.rounds:
                    if not RewardResourcePair(log.r, log.a).within_bounds(R_max, A_max):
                        raise PreconditionError(
                            f"{self.policy}: arrival at t={log.t} (r={log.r}, a={log.a}) outside [0, {R_max}] x [0, {A_max}]^d"
                        )
        return True


def confidence_radius(N, params, scenario, K, T, b=None):
    """
    Bonus beta = alpha c_g R_max sqrt((d log(c_0 d P_max A_max T / R_max) + log(K T / delta)) / max(N, 1))

    Args:
        N: Sample count of the configuration
        params: PolicyParams (alpha, c_g, c_0, delta)
        scenario: ScenarioSpec supplying d, R_max, A_max and P_max
        K: Number of configurations
        T: Horizon
        b: Per-period budget used for the default price cap

    Returns:
        Nonnegative float
    """
    if N < 0 or T < 1:
        raise PreconditionError(f"need N >= 0 and T >= 1, got N={N}, T={T}")
    if params.alpha == 0:
        return 0.0
    P_max = _radius_price_cap(scenario, b)
    delta = params.confidence(T)
    inner_arg = params.c_0 * scenario.d * P_max * scenario.A_max * T / scenario.R_max
    outer_arg = K * T / delta
    if inner_arg <= 0 or outer_arg <= 0:
        raise PreconditionError(
            f"confidence radius log argument is not positive (c_0 d P_max A_max T / R_max = {inner_arg}, K T / delta = {outer_arg})"
        )
    numerator = scenario.d * math.log(inner_arg) + math.log(outer_arg)
    if numerator < 0:
        raise PreconditionError(f"confidence radius is undefined for these constants (log term {numerator})")
    return params.alpha * params.c_g * scenario.R_max * math.sqrt(numerator / max(N, 1))


def _radius_price_cap(scenario, b):
    cap = scenario.price_cap(b)
    if not math.isfinite(cap):
        cap = scenario.price_cap(scenario.b0)
    return cap


def _start_run(scenario, T, rho, rng):
    if T < 1:
        raise PreconditionError(f"horizon must be >= 1, got {T}")
    b = scenario.budget(rho)
    budget = BudgetState.from_total(T * b, T)
    arrival_rng, choice_rng = rng.spawn(2)
    return b, budget, scenario.open_stream(arrival_rng), choice_rng


def _finish(record, start):
    record.elapsed = time.time() - start
    logger.info(
        f"[POLICY] {record.policy} finished T={record.T}: reward={record.total_reward:.4f} "
        f"accepts={record.accepts} solves={record.solve_count} in {record.elapsed:.2f}s"
    )
    return record


def _run_optimistic(kind, scenario, T, rho, params, rng, commit_vertex=False):
    K, d = scenario.K, scenario.d
    if T <= K:
        raise PreconditionError(f"horizon T={T} must exceed K={K} to fit the warm start")
    start = time.time()
    b, budget, stream, choice_rng = _start_run(scenario, T, rho, rng)
    store = SampleStore(K, d, capacity=max(16, 2 * T // K))
    record = RunRecord(policy=kind, T=T, total_reward=0.0, budget=budget)

    # Warm start: observe each configuration once, admit nothing
    for t in range(K):
        pair = stream.draw(t, t)
        store.append(t, pair)
        if params.log_trajectory:
            record.rounds.append(RoundLog(t, t, pair.r, pair.a, 0, None, None))

    w, p = None, None
    solved_counts = None
    for t in range(K, T):
        counts = store.counts
        resolve = (
            solved_counts is None
            or params.resolve_schedule == "every_round"
            or bool(np.any(counts >= 2 * solved_counts))
        )
        if resolve:
            bonuses = np.array([confidence_radius(n, params, scenario, K, T, b) for n in counts])
            solution = funded_saddle(store, bonuses, budget.b_safe, method=params.saddle_method,
                                     p_max=scenario.P_max)
            p = solution.p
            if w is None or not commit_vertex:
                # A committed policy keeps its first vertex; later solves only move the price
                w = solution.w.vertex() if commit_vertex else solution.w
            solved_counts = counts
            record.solve_count += 1
            logger.debug(
                f"[POLICY] t={t} solve #{record.solve_count}: w={np.round(w.w, 4).tolist()} "
                f"p={np.round(p.p, 4).tolist()} N={counts.tolist()}"
            )

        theta = w.sample(choice_rng)
        pair = stream.draw(theta, t)
        store.append(theta, pair)
        accepted, _ = admit(pair, p, budget)
        if accepted:
            record.total_reward += pair.r
            record.accepts += 1
        if params.log_trajectory:
            record.rounds.append(RoundLog(t, theta, pair.r, pair.a, int(accepted), p, w))

    return _finish(record, start)


def run_spucb(scenario, T, rho, params, rng):
    """
    Run SP-UCB-OLP for T rounds.

    Args:
        scenario: ScenarioSpec
        T: Horizon (must exceed K)
        rho: Budget scale; the per-period budget is rho * b0
        params: PolicyParams
        rng: numpy Generator owning all randomness of the run

    Returns:
        RunRecord
    """
    return _run_optimistic("spucb", scenario, T, rho, params, rng)


def _run_oracle(scenario, T, rho, params, rng, oracle):
    if oracle is None:
        raise PreconditionError("the oracle baseline needs a precomputed saddle solution")
    if oracle.p.d != scenario.d or oracle.w.K != scenario.K:
        raise PreconditionError("oracle saddle does not match the scenario dimensions")
    start = time.time()
    _, budget, stream, choice_rng = _start_run(scenario, T, rho, rng)
    record = RunRecord(policy="oracle", T=T, total_reward=0.0, budget=budget)
    w, p = oracle.w, oracle.p
    for t in range(T):
        theta = w.sample(choice_rng)
        pair = stream.draw(theta, t)
        accepted, _ = admit(pair, p, budget)
        if accepted:
            record.total_reward += pair.r
            record.accepts += 1
        if params.log_trajectory:
            record.rounds.append(RoundLog(t, theta, pair.r, pair.a, int(accepted), p, w))
    return _finish(record, start)


def _run_random(scenario, T, rho, params, rng):
    start = time.time()
    _, budget, stream, choice_rng = _start_run(scenario, T, rho, rng)
    record = RunRecord(policy="random", T=T, total_reward=0.0, budget=budget)
    for t in range(T):
        theta = int(choice_rng.integers(scenario.K))
        pair = stream.draw(theta, t)
        accepted = budget.fits(pair.a)
        if accepted:
            budget.consume(pair.a)
            record.total_reward += pair.r
            record.accepts += 1
        if params.log_trajectory:
            record.rounds.append(RoundLog(t, theta, pair.r, pair.a, int(accepted), None, None))
    return _finish(record, start)


def run_baseline(kind, scenario, T, rho, params, rng, oracle=None):
    """
    Run one of the baselines.

    Args:
        kind: "greedy", "random", "oracle" or "onehot"
        oracle: SaddleSolution of the true problem (required for "oracle")
    """
    if kind == "greedy":
        return _run_optimistic("greedy", scenario, T, rho, replace(params, alpha=0.0), rng)
    if kind == "onehot":
        return _run_optimistic("onehot", scenario, T, rho, params, rng, commit_vertex=True)
    if kind == "oracle":
        return _run_oracle(scenario, T, rho, params, rng, oracle)
    if kind == "random":
        return _run_random(scenario, T, rho, params, rng)
    raise PreconditionError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")


def run_policy(kind, scenario, T, rho, params, rng, oracle=None):
    if kind == "spucb":
        return run_spucb(scenario, T, rho, params, rng)
    return run_baseline(kind, scenario, T, rho, params, rng, oracle=oracle)


def regret_mix(record, v_mix_per_period, T):
    """T * V_mix - R_T for one run."""
    return T * v_mix_per_period - record.total_reward


def competitive_ratios(record, v_mix_per_period, v_fixed_total, T):
    """
    Returns:
        (cr_mix, cr_star) = (R_T / (T V_mix), R_T / V_fixed)
    """
    if v_mix_per_period <= 0 or v_fixed_total <= 0:
        raise PreconditionError(
            f"competitive ratios need positive benchmarks (v_mix={v_mix_per_period}, v_fixed={v_fixed_total})"
        )
    return record.total_reward / (T * v_mix_per_period), record.total_reward / v_fixed_total
