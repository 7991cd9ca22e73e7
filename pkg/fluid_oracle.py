"""
Fluid oracles and the empirical saddle point

The switching-aware benchmark is

    V_mix(b) = min_{p >= 0}  <p, b> + max_theta ( g_theta(p) + beta_theta )

and its empirical version replaces g_theta by the sample surplus over a
SampleStore. solve_saddle returns the minimizing price p together with a
maximizing mixture w (the multipliers of the envelope rows), so that
(w, p) is a saddle point of

    L(w, p) = <p, b> + sum_theta w_theta ( g_theta(p) + beta_theta ).

Two solvers share one contract:
  - "lp":  the explicit LP with one hinge variable per sample
  - "cut": the same LP with the hinge variables projected out, solved by
           adding supporting cuts of each surplus function until the
           envelope is attained (for Monte Carlo sized stores)
"""

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import FrozenSet, Optional

import numpy as np

from core_model import (
    STRICT,
    Mixture,
    PreconditionError,
    PriceVector,
    SampleStore,
    SimulationError,
    StoreSlice,
    as_price,
    empirical_consumption,
    empirical_surplus,
)
from logging_config import get_logger, log_solve
from lp_solver import LinearProgram, SolverStalledError, solve

logger = get_logger(__name__)

# Stores with at most this many samples in total use the explicit LP
FULL_LP_SAMPLE_LIMIT = 120
# Offline paths up to this length are solved as the primal knapsack LP
PRIMAL_PATH_LIMIT = 400

CUT_MAX_ROUNDS = 5000
CUT_REL_TOL = 1e-9
CUT_ACCEPT_TOL = 1e-6

GRID_POINT_LIMIT = 20_000_000
GRID_CHUNK_CELLS = 4_000_000


class SaddleSolveError(SimulationError):
    pass


class GridTooLargeError(PreconditionError):
    pass


@dataclass
class SaddleSolution:
    w: Mixture
    p: PriceVector
    value: float
    active_set: FrozenSet[int]
    consumption: np.ndarray
    budget: np.ndarray
    bonuses: np.ndarray
    method: str = "lp"
    iterations: int = 0

    def to_dict(self):
        return {
            "w": self.w.w.tolist(),
            "p": self.p.p.tolist(),
            "value": self.value,
            "active_set": sorted(self.active_set),
            "consumption": self.consumption.tolist(),
            "budget": self.budget.tolist(),
            "bonuses": self.bonuses.tolist(),
            "method": self.method,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            w=Mixture(np.asarray(data["w"], dtype=float)),
            p=PriceVector(np.asarray(data["p"], dtype=float)),
            value=float(data["value"]),
            active_set=frozenset(int(i) for i in data["active_set"]),
            consumption=np.asarray(data["consumption"], dtype=float),
            budget=np.asarray(data["budget"], dtype=float),
            bonuses=np.asarray(data["bonuses"], dtype=float),
            method=data.get("method", "lp"),
            iterations=int(data.get("iterations", 0)),
        )


@dataclass
class KKTTolerances:
    tol_env: float = 1e-6
    tol_w: float = 1e-8
    tol_h: float = 1e-6
    tol_cs: float = 1e-6
    tol_tie: float = 1e-9

    @classmethod
    def for_problem(cls, R_max, budget, P_max):
        """Default tolerances scaled to the problem's reward bound, budget and price cap."""
        budget = np.asarray(budget, dtype=float)
        P_max = P_max if math.isfinite(P_max) else 0.0
        return cls(
            tol_env=1e-6 * (1.0 + R_max),
            tol_w=1e-8,
            tol_h=1e-6,
            tol_cs=1e-6 * (1.0 + float(np.abs(budget).sum()) * P_max),
            tol_tie=1e-9 * (1.0 + R_max),
        )


@dataclass
class KKTReport:
    support_ok: bool
    feasible_ok: bool
    complementary_ok: bool
    envelope: np.ndarray = field(default=None, repr=False)
    consumption_strict: np.ndarray = field(default=None, repr=False)
    consumption_weak: np.ndarray = field(default=None, repr=False)

    @property
    def ok(self):
        return self.support_ok and self.feasible_ok and self.complementary_ok


def _slices(stores):
    if isinstance(stores, SampleStore):
        return stores.slices()
    return list(stores)


def _bonuses(bonuses, K):
    if bonuses is None:
        return np.zeros(K)
    bonuses = np.asarray(bonuses, dtype=float).reshape(-1)
    if bonuses.shape[0] != K:
        raise PreconditionError(f"{bonuses.shape[0]} bonuses for {K} configurations")
    return bonuses


def envelope(stores, p, bonuses=None):
    """Per-configuration optimistic surplus g_hat_theta(p) + beta_theta."""
    slices = _slices(stores)
    beta = _bonuses(bonuses, len(slices))
    return np.array([empirical_surplus(s, p) for s in slices]) + beta


def lagrangian(w, p, stores, budget, bonuses=None):
    """L(w, p) = <p, b> + sum_theta w_theta (g_hat_theta(p) + beta_theta)."""
    weights = w.w if isinstance(w, Mixture) else np.asarray(w, dtype=float)
    price = as_price(p)
    return float(np.asarray(budget, dtype=float) @ price + weights @ envelope(stores, price, bonuses))


def dual_function(p, stores, budget, bonuses=None):
    """f(p) = <p, b> + max_theta (g_hat_theta(p) + beta_theta); the saddle value is its minimum."""
    price = as_price(p)
    return float(np.asarray(budget, dtype=float) @ price + envelope(stores, price, bonuses).max())


def _active_set(G, tol):
    top = G.max()
    return frozenset(int(i) for i in np.flatnonzero(G >= top - tol))


def _env_tolerance(slices):
    r_max = max((float(np.abs(s.rewards).max()) for s in slices if s.n), default=0.0)
    return 1e-6 * (1.0 + r_max)


def _solve_full_lp(slices, beta, budget, p_max=None):
    """
    Explicit LP over (p, z, y):

        min  b.p + z
        s.t. z - (1/N_theta) sum_j y_{theta,j} >= beta_theta     (dual w_theta)
             y_{theta,j} + a_{theta,j}.p      >= r_{theta,j}    (dual eta_{theta,j})
             0 <= p <= p_max, y >= 0, z free
    """
    K = len(slices)
    d = budget.shape[0]
    counts = [s.n for s in slices]
    N = sum(counts)
    n_vars = d + 1 + N

    A = np.zeros((K + N, n_vars))
    rhs = np.zeros(K + N)
    offset = 0
    for theta, s in enumerate(slices):
        A[theta, d] = 1.0
        A[theta, d + 1 + offset:d + 1 + offset + s.n] = -1.0 / s.n
        rhs[theta] = beta[theta]
        rows = slice(K + offset, K + offset + s.n)
        A[rows, :d] = s.consumption
        A[rows, d + 1 + offset:d + 1 + offset + s.n] = np.eye(s.n)
        rhs[rows] = s.rewards
        offset += s.n

    objective = np.zeros(n_vars)
    objective[:d] = budget
    objective[d] = 1.0
    lower = np.zeros(n_vars)
    lower[d] = -np.inf
    upper = None
    if p_max is not None:
        upper = np.full(n_vars, np.inf)
        upper[:d] = p_max

    lp = LinearProgram(objective, A, rhs, [">="] * (K + N), lower=lower, upper=upper)
    sol = solve(lp)
    if not sol.optimal:
        raise SaddleSolveError(f"saddle LP reported {sol.status.value}; this indicates malformed samples")

    p = np.clip(sol.x[:d], 0.0, math.inf if p_max is None else p_max)
    w_raw = sol.duals[:K]
    eta = sol.duals[K:]
    all_a = np.vstack([s.consumption for s in slices])
    consumption = eta @ all_a
    return p, w_raw, consumption, sol.iterations


def _solve_cutting_plane(slices, beta, budget, p_max=None, max_rounds=CUT_MAX_ROUNDS, rel_tol=CUT_REL_TOL):
    """
    Kelley cutting planes on min_p b.p + max_theta G_theta(p) over the box
    0 <= p <= U, U_i = f(0)/b_i + 1 (no minimizer lies outside it), cut
    down to p_max when a price cap is given.

    Each cut of configuration theta taken at q is

        z + h.p >= G_theta(q) + h.q,     h = strict consumption at q,

    a supporting hyperplane since -h is a subgradient of the surplus at q.
    The master LP is solved in its dual form

        min  -c.lambda + U.mu
        s.t. sum lambda = 1                        (multiplier -z)
             sum_k lambda_k h_k - mu <= b          (multiplier -p)
             lambda, mu >= 0

    so lambda aggregated per configuration is the mixture w and
    sum_k lambda_k h_k the consumption.
    """
    K = len(slices)
    d = budget.shape[0]

    def surplus_all(p):
        return np.array([empirical_surplus(s, p) for s in slices]) + beta

    cut_theta, cut_h, cut_c = [], [], []

    def add_cut(theta, q, g_q):
        h = empirical_consumption(slices[theta], q, STRICT)
        cut_theta.append(theta)
        cut_h.append(h)
        cut_c.append(g_q + float(h @ q))

    p0 = np.zeros(d)
    G0 = surplus_all(p0)
    upper = max(float(G0.max()), 0.0) / budget + 1.0
    if p_max is not None:
        upper = np.minimum(upper, p_max)
    for theta in range(K):
        add_cut(theta, p0, G0[theta])
        # The surplus is nonnegative, so z >= beta_theta holds everywhere
        cut_theta.append(theta)
        cut_h.append(np.zeros(d))
        cut_c.append(float(beta[theta]))

    gap = math.inf
    F = math.inf
    for rounds in range(1, max_rounds + 1):
        n = len(cut_c)
        Hc = np.array(cut_h)
        A = np.zeros((d + 1, n + d))
        A[0, :n] = 1.0
        A[1:, :n] = Hc.T
        A[1:, n:] = -np.eye(d)
        objective = np.concatenate([-np.array(cut_c), upper])
        master = LinearProgram(objective, A, np.concatenate([[1.0], budget]), ["="] + ["<="] * d)
        sol = solve(master)
        if not sol.optimal:
            raise SaddleSolveError(f"cutting-plane master reported {sol.status.value}")

        lam = np.maximum(sol.x[:n], 0.0)
        p = np.clip(-sol.duals[1:], 0.0, upper)
        model = float(np.max(np.array(cut_c) - Hc @ p))
        lower_bound = -sol.objective_value

        G = surplus_all(p)
        F = float(budget @ p + G.max())
        gap = F - lower_bound
        if gap <= rel_tol * (1.0 + abs(F)):
            break

        added = 0
        for theta in range(K):
            if G[theta] > model:
                add_cut(theta, p, G[theta])
                added += 1
        if added == 0:
            break
    else:
        if gap > CUT_ACCEPT_TOL * (1.0 + abs(F)):
            raise SolverStalledError(
                f"cutting plane did not close the gap ({gap:.3e}) in {max_rounds} rounds",
                iterations=max_rounds,
                rule="kelley",
            )
        logger.warning(f"[SADDLE] cutting plane stopped at round cap with gap {gap:.3e}")

    theta_of_cut = np.array(cut_theta)
    w_raw = np.array([lam[theta_of_cut == theta].sum() for theta in range(K)])
    consumption = lam @ np.array(cut_h)
    return p, w_raw, consumption, rounds


def solve_saddle(stores, bonuses, budget, method="auto", p_max=None):
    """
    Empirical optimistic saddle point.

    Args:
        stores: SampleStore or list of StoreSlice, every N_theta >= 1
        bonuses: K-vector of bonuses beta (None means zeros)
        budget: d-vector, strictly positive
        method: "lp", "cut" or "auto" (explicit LP for small stores)
        p_max: Optional price cap; prices are then minimized over [0, p_max]^d

    Returns:
        SaddleSolution
    """
    slices = _slices(stores)
    K = len(slices)
    beta = _bonuses(bonuses, K)
    budget = np.asarray(budget, dtype=float).reshape(-1)
    if K == 0:
        raise PreconditionError("no configurations to solve over")
    empty = [theta for theta, s in enumerate(slices) if s.n == 0]
    if empty:
        raise PreconditionError(f"configurations {empty} have no samples")
    if np.any(budget <= 0):
        raise PreconditionError(f"saddle budget must be positive, got {budget}")
    d = budget.shape[0]
    for s in slices:
        if s.consumption.shape[1] != d:
            raise PreconditionError(f"samples have d={s.consumption.shape[1]}, budget has d={d}")
    if p_max is not None and not p_max > 0:
        raise PreconditionError(f"price cap must be positive, got {p_max}")

    total = sum(s.n for s in slices)
    if method == "auto":
        method = "lp" if total <= FULL_LP_SAMPLE_LIMIT else "cut"

    start = time.time()
    params = {"K": K, "d": d, "samples": total, "method": method, "p_max": p_max}
    try:
        if method == "lp":
            p, w_raw, consumption, iterations = _solve_full_lp(slices, beta, budget, p_max)
        elif method == "cut":
            p, w_raw, consumption, iterations = _solve_cutting_plane(slices, beta, budget, p_max)
        else:
            raise PreconditionError(f"unknown saddle method {method!r}")
        w = Mixture.from_weights(w_raw)
    except SimulationError as e:
        log_solve(logger, "saddle", params, error=e, duration=time.time() - start)
        raise

    G = envelope(slices, p, beta)
    value = float(budget @ p + G.max())
    solution = SaddleSolution(
        w=w,
        p=PriceVector(p, math.inf if p_max is None else p_max),
        value=value,
        active_set=_active_set(G, _env_tolerance(slices)),
        consumption=consumption,
        budget=budget.copy(),
        bonuses=beta.copy(),
        method=method,
        iterations=iterations,
    )
    log_solve(
        logger,
        "saddle",
        params,
        result={"value": round(value, 10), "iterations": iterations},
        duration=time.time() - start,
    )
    return solution


def restrict_to_funded(stores, budget):
    """
    Drop zero-budget resources from a saddle problem.

    An arrival that consumes a resource with no budget can never be
    admitted, so its reward is zeroed and the resource column removed.

    Returns:
        (reduced slices, boolean mask of funded resources)
    """
    slices = _slices(stores)
    budget = np.asarray(budget, dtype=float).reshape(-1)
    if np.any(budget < 0):
        raise PreconditionError(f"budget must be nonnegative, got {budget}")
    funded = budget > 0
    if funded.all():
        return slices, funded
    reduced = []
    for s in slices:
        blocked = np.any(s.consumption[:, ~funded] > 0, axis=1)
        reduced.append(StoreSlice(np.where(blocked, 0.0, s.rewards), s.consumption[:, funded]))
    return reduced, funded


def funded_saddle(stores, bonuses, budget, method="auto", p_max=None):
    """
    solve_saddle that also accepts zero budget coordinates.

    Prices on unfunded resources are reported as 0; hard feasibility
    rejects every arrival that needs them.
    """
    budget = np.asarray(budget, dtype=float).reshape(-1)
    reduced, funded = restrict_to_funded(stores, budget)
    K = len(reduced)
    beta = _bonuses(bonuses, K)
    if funded.all():
        return solve_saddle(reduced, beta, budget, method=method, p_max=p_max)

    d = budget.shape[0]
    if funded.any():
        inner = solve_saddle(reduced, beta, budget[funded], method=method, p_max=p_max)
        p = np.zeros(d)
        p[funded] = inner.p.p
        consumption = np.zeros(d)
        consumption[funded] = inner.consumption
        return SaddleSolution(
            w=inner.w,
            p=PriceVector(p, inner.p.p_max),
            value=inner.value,
            active_set=inner.active_set,
            consumption=consumption,
            budget=budget.copy(),
            bonuses=beta.copy(),
            method=inner.method,
            iterations=inner.iterations,
        )

    # No funded resource: the surplus does not depend on the price
    G = np.array([float(s.rewards.clip(min=0.0).mean()) if s.n else 0.0 for s in reduced]) + beta
    best = int(np.argmax(G))
    return SaddleSolution(
        w=Mixture.one_hot(K, best),
        p=PriceVector.zeros(d),
        value=float(G[best]),
        active_set=_active_set(G, _env_tolerance(reduced)),
        consumption=np.zeros(d),
        budget=budget.copy(),
        bonuses=beta.copy(),
        method="unfunded",
    )


def brute_force_saddle(stores, bonuses, budget, grid_step, p_max=None):
    """
    Grid-search minimum of <p, b> + max_theta (g_hat_theta(p) + beta_theta).

    The grid spans [0, p_max]^d; by default each axis runs to f(0)/b_i,
    beyond which no price can beat p = 0.

    Args:
        stores: SampleStore or list of StoreSlice
        bonuses: K-vector (None means zeros)
        budget: d-vector, d <= 2
        grid_step: Grid spacing
        p_max: Optional common upper end of every axis

    Returns:
        Approximate saddle value (float)
    """
    slices = _slices(stores)
    beta = _bonuses(bonuses, len(slices))
    budget = np.asarray(budget, dtype=float).reshape(-1)
    d = budget.shape[0]
    if d > 2:
        raise GridTooLargeError(f"grid search supports d <= 2, got d={d}")
    if grid_step <= 0:
        raise PreconditionError(f"grid_step must be positive, got {grid_step}")

    f0 = dual_function(np.zeros(d), slices, budget, beta)
    if p_max is None:
        with np.errstate(divide="ignore"):
            tops = np.where(budget > 0, max(f0, 0.0) / budget, 0.0)
    else:
        tops = np.full(d, float(p_max))
    lengths = [int(math.ceil((top + grid_step) / grid_step)) for top in tops]
    n_points = math.prod(lengths)
    if n_points > GRID_POINT_LIMIT:
        raise GridTooLargeError(f"grid of {n_points} points exceeds {GRID_POINT_LIMIT}")
    axes = [np.minimum(np.arange(n) * grid_step, top) for n, top in zip(lengths, tops)]

    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.column_stack([m.reshape(-1) for m in mesh])

    largest = max(max(s.n for s in slices), 1)
    chunk = max(1, GRID_CHUNK_CELLS // largest)
    best = math.inf
    for start in range(0, n_points, chunk):
        P = points[start:start + chunk]
        G = np.empty((P.shape[0], len(slices)))
        for theta, s in enumerate(slices):
            if s.n == 0:
                G[:, theta] = beta[theta]
                continue
            hinge = np.maximum(s.rewards[None, :] - P @ s.consumption.T, 0.0)
            G[:, theta] = hinge.mean(axis=1) + beta[theta]
        values = P @ budget + G.max(axis=1)
        best = min(best, float(values.min()))
    return best


def mix_oracle(scenario, b, n_samples_per_config, rng, method="auto"):
    """Monte Carlo saddle of the scenario at per-period budget b (zero bonuses)."""
    if n_samples_per_config < 1:
        raise PreconditionError(f"need at least one sample per configuration, got {n_samples_per_config}")
    store = scenario.sample_store(n_samples_per_config, rng)
    solution = funded_saddle(store, np.zeros(scenario.K), b, method=method)
    logger.info(
        f"[ORACLE] v_mix={solution.value:.6f} for {scenario.name} at b={np.round(b, 6).tolist()} "
        f"(n={n_samples_per_config}, w={np.round(solution.w.w, 4).tolist()}, "
        f"p={np.round(solution.p.p, 4).tolist()})"
    )
    return solution


def v_mix(scenario, b, n_samples_per_config, rng):
    """Switching-aware fluid value, per period."""
    return mix_oracle(scenario, b, n_samples_per_config, rng).value


def offline_value(rewards, consumption, total_budget, method="auto"):
    """
    Hindsight optimum of one path:

        max sum_t r_t x_t   s.t.  sum_t a_t x_t <= B,  0 <= x <= 1

    Short paths are solved as this LP directly. Long paths use its dual,
    min_p B.p + sum_t (r_t - a_t.p)_+, which is T times a single
    configuration saddle problem at budget B/T.
    """
    rewards = np.asarray(rewards, dtype=float).reshape(-1)
    T = rewards.shape[0]
    consumption = np.asarray(consumption, dtype=float).reshape(T, -1)
    total_budget = np.asarray(total_budget, dtype=float).reshape(-1)
    if T == 0:
        return 0.0
    if method == "auto":
        method = "primal" if T <= PRIMAL_PATH_LIMIT else "dual"

    if method == "primal":
        d = total_budget.shape[0]
        lp = LinearProgram(
            objective=-rewards,
            constraints=consumption.T,
            rhs=total_budget,
            senses=["<="] * d,
            lower=np.zeros(T),
            upper=np.ones(T),
        )
        sol = solve(lp)
        if not sol.optimal:
            raise SaddleSolveError(f"offline LP reported {sol.status.value}")
        return -sol.objective_value
    if method == "dual":
        single = [StoreSlice(rewards, consumption)]
        return T * funded_saddle(single, np.zeros(1), total_budget / T).value
    raise PreconditionError(f"unknown offline method {method!r}")


def offline_values(scenario, b, T, n_paths, rng):
    """Mean hindsight value of each configuration over n_paths sampled T-length paths."""
    if T < 1 or n_paths < 1:
        raise PreconditionError(f"need T >= 1 and n_paths >= 1, got T={T}, n_paths={n_paths}")
    total_budget = T * np.asarray(b, dtype=float)
    means = np.zeros(scenario.K)
    for theta, theta_rng in enumerate(rng.spawn(scenario.K)):
        values = []
        for path_rng in theta_rng.spawn(n_paths):
            r, A = scenario.sampler.sample_batch(theta, T, path_rng)
            values.append(offline_value(r, A, total_budget))
        means[theta] = float(np.mean(values))
        logger.debug(f"[ORACLE] offline value of config {theta}: {means[theta]:.4f}")
    return means


def v_fixed(scenario, b, T, n_paths, rng):
    """Best single-configuration hindsight value over T periods (total units)."""
    means = offline_values(scenario, b, T, n_paths, rng)
    best = int(np.argmax(means))
    logger.info(f"[ORACLE] v_fixed={means[best]:.4f} (config {best}) for {scenario.name}, T={T}")
    return float(means[best])


def kkt_check(w, p, stores, budget, tolerances=None, bonuses=None):
    """
    Verify the saddle optimality conditions at (w, p).

    support:        every theta with w_theta > tol_w is on the envelope
    feasibility:    some tie-weighted consumption is <= b + tol_h
    complementarity: some tie-weighted consumption H has |<p, b - H>| <= tol_cs

    Tie weights are not searched; consumption with ties excluded (strict)
    and included (weak) brackets every tie-weighted value. Samples within
    tol_tie of the price line count as ties.
    """
    slices = _slices(stores)
    weights = w.w if isinstance(w, Mixture) else np.asarray(w, dtype=float)
    price = as_price(p)
    budget = np.asarray(budget, dtype=float).reshape(-1)
    tol = tolerances or KKTTolerances()
    if any(s.n == 0 for s in slices):
        raise PreconditionError("kkt_check needs samples for every configuration")

    G = envelope(slices, price, bonuses)
    on_envelope = G >= G.max() - tol.tol_env
    support_ok = bool(np.all(on_envelope[weights > tol.tol_w]))

    H_strict = np.zeros(budget.shape[0])
    H_weak = np.zeros(budget.shape[0])
    for weight, s in zip(weights, slices):
        margin = s.rewards - s.consumption @ price
        H_strict += weight * s.consumption[margin > tol.tol_tie].sum(axis=0) / s.n
        H_weak += weight * s.consumption[margin >= -tol.tol_tie].sum(axis=0) / s.n

    feasible_ok = bool(np.all(H_strict <= budget + tol.tol_h))

    # <p, b - H> over the tie box is the interval [<p, b - H_weak>, <p, b - H_strict>]
    low = float(price @ (budget - H_weak))
    high = float(price @ (budget - H_strict))
    complementary_ok = low <= tol.tol_cs and high >= -tol.tol_cs

    return KKTReport(
        support_ok=support_ok,
        feasible_ok=feasible_ok,
        complementary_ok=complementary_ok,
        envelope=G,
        consumption_strict=H_strict,
        consumption_weak=H_weak,
    )


def price_grid(d, top, points=21):
    """Regular grid of prices in [0, top]^d (used for saddle-inequality checks)."""
    axis = np.linspace(0.0, top, points)
    return [np.array(q) for q in itertools.product(axis, repeat=d)]
