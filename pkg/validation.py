#!/usr/bin/env python3
"""
End-to-end property suite

Prints one PASS/FAIL line per property and returns a nonzero exit
status if any property fails. Used by `cli.py validate`; the instance
generators below are shared with the pytest suite.
"""

import itertools
import math
import sys
import time

import numpy as np

from core_model import (
    STRICT,
    WEAK,
    BudgetState,
    Mixture,
    RewardResourcePair,
    StoreSlice,
    admission_rule,
    admit,
    empirical_consumption,
    empirical_surplus,
)
from fluid_oracle import (
    KKTTolerances,
    brute_force_saddle,
    dual_function,
    kkt_check,
    lagrangian,
    mix_oracle,
    offline_value,
    price_grid,
    solve_saddle,
    v_fixed,
    v_mix,
)
from logging_config import get_logger
from lp_solver import LinearProgram, LPStatus, row_slacks, solve
from policy import PolicyParams, run_baseline, run_policy, run_spucb
from scenarios import clip_and_jitter_batch, make_example1, make_s0, make_s4

logger = get_logger(__name__)

VALIDATION_SEED = 20240917


def print_section(title):
    """Print a formatted section header"""
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70)


# ---------------------------------------------------------------------------
# Shared instance generators
# ---------------------------------------------------------------------------

def random_bounded_lp(rng, max_vars=5, max_rows=8):
    """
    Random LP with a known feasible point and a bounded box 0 <= x <= u.
    """
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    A = np.round(rng.normal(size=(m, n)), 3)
    x0 = rng.uniform(0.0, 2.0, size=n)
    senses = list(rng.choice([">=", "<=", "="], size=m, p=[0.4, 0.45, 0.15]))
    slack = rng.uniform(0.1, 1.0, size=m)
    shift = np.array([s if sense == "<=" else (-s if sense == ">=" else 0.0) for s, sense in zip(slack, senses)])
    rhs = A @ x0 + shift
    upper = x0 + rng.uniform(0.5, 3.0, size=n)
    c = np.round(rng.normal(size=n), 3)
    return LinearProgram(c, A, rhs, senses, lower=np.zeros(n), upper=upper)


def enumerate_vertices(lp, tol=1e-7):
    """
    Minimum objective over all vertices of a bounded LP (brute force).

    Every vertex is the unique solution of n linearly independent active
    constraints taken from the rows and the variable bounds.
    """
    n = lp.n
    planes, values = [], []
    for i in range(lp.m):
        planes.append(lp.constraints[i])
        values.append(lp.rhs[i])
    lower, upper = lp.lower_bounds(), lp.upper_bounds()
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        for bound in (lower[j], upper[j]):
            if np.isfinite(bound):
                planes.append(e)
                values.append(bound)
    planes = np.array(planes)
    values = np.array(values)

    combos = np.array(list(itertools.combinations(range(len(planes)), n)))
    if combos.size == 0:
        return None
    M = planes[combos]
    v = values[combos]
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-10
    if not ok.any():
        return None
    X = np.linalg.solve(M[ok], v[ok][..., None])[..., 0]

    slack = X @ lp.constraints.T - lp.rhs
    feasible = np.ones(X.shape[0], dtype=bool)
    for i, sense in enumerate(lp.senses):
        scale = tol * (1.0 + abs(lp.rhs[i]))
        if sense == ">=":
            feasible &= slack[:, i] >= -scale
        elif sense == "<=":
            feasible &= slack[:, i] <= scale
        else:
            feasible &= np.abs(slack[:, i]) <= scale
    feasible &= np.all(X >= lower - tol, axis=1) & np.all(X <= upper + tol, axis=1)
    if not feasible.any():
        return None
    return float((X[feasible] @ lp.objective).min())


def lp_certificate_errors(lp, sol, tol=1e-6):
    """List of violated optimality certificates (dual signs, CS, strong duality)."""
    errors = []
    for i, sense in enumerate(lp.senses):
        y = sol.duals[i]
        if sense == ">=" and y < -1e-9:
            errors.append(f"row {i} (>=) has dual {y}")
        if sense == "<=" and y > 1e-9:
            errors.append(f"row {i} (<=) has dual {y}")
    slack = row_slacks(lp, sol.x)
    for i in range(lp.m):
        if abs(sol.duals[i] * slack[i]) > tol * (1.0 + abs(lp.rhs[i])):
            errors.append(f"row {i} complementary slackness {sol.duals[i] * slack[i]:.3e}")
    primal = float(lp.objective @ sol.x)
    dual = sol.dual_objective(lp)
    if abs(primal - dual) > tol * (1.0 + abs(primal)):
        errors.append(f"duality gap {primal - dual:.3e}")
    return errors


def random_saddle_instance(rng, max_K=3, max_d=2, max_samples=6, bonus_high=0.5):
    """Small saddle instance: rewards and consumption in [0, 1], budget in [0.2, 0.8]."""
    K = int(rng.integers(1, max_K + 1))
    d = int(rng.integers(1, max_d + 1))
    slices = []
    for _ in range(K):
        n = int(rng.integers(1, max_samples + 1))
        slices.append(StoreSlice(rng.uniform(0.0, 1.0, size=n), rng.uniform(0.0, 1.0, size=(n, d))))
    bonuses = rng.uniform(0.0, bonus_high, size=K)
    budget = rng.uniform(0.2, 0.8, size=d)
    return slices, bonuses, budget


def saddle_tolerances(slices, bonuses, budget):
    R = max(float(s.rewards.max()) for s in slices) + float(np.max(bonuses, initial=0.0))
    f0 = dual_function(np.zeros(budget.shape[0]), slices, budget, bonuses)
    return KKTTolerances.for_problem(R, budget, f0 / float(budget.min()))


# ---------------------------------------------------------------------------
# Properties; each returns (ok, detail)
# ---------------------------------------------------------------------------

def check_lp_examples(rng):
    lp = LinearProgram([1.0], [[1.0]], [1.0], [">="])
    sol = solve(lp)
    if not (sol.optimal and abs(sol.x[0] - 1) < 1e-9 and abs(sol.duals[0] - 1) < 1e-9):
        return False, f"min x s.t. x >= 1 gave {sol}"
    lp = LinearProgram([-1.0], [[1.0]], [0.0], ["<="])
    sol = solve(lp)
    if not (sol.optimal and abs(sol.objective_value) < 1e-12):
        return False, f"min -x s.t. x <= 0 gave {sol}"
    lp = LinearProgram([-1.0], [[1.0]], [1.0], [">="])
    if solve(lp).status != LPStatus.UNBOUNDED:
        return False, "unbounded LP not detected"
    lp = LinearProgram([1.0], [[1.0], [1.0]], [2.0, 1.0], [">=", "<="])
    if solve(lp).status != LPStatus.INFEASIBLE:
        return False, "infeasible LP not detected"
    return True, "trivial, boundary, unbounded and infeasible cases"


def check_lp_vertex_oracle(rng, count=500):
    worst = 0.0
    for k in range(count):
        lp = random_bounded_lp(rng)
        sol = solve(lp)
        if not sol.optimal:
            return False, f"instance {k}: status {sol.status.value} on a feasible bounded LP"
        best = enumerate_vertices(lp)
        if best is None:
            return False, f"instance {k}: vertex enumeration found no vertex"
        err = abs(sol.objective_value - best)
        worst = max(worst, err)
        if err > 1e-6 * (1.0 + abs(best)):
            return False, f"instance {k}: simplex {sol.objective_value:.10g} vs vertices {best:.10g}"
        errors = lp_certificate_errors(lp, sol)
        if errors:
            return False, f"instance {k}: {errors[0]}"
    return True, f"{count} LPs, worst objective error {worst:.2e}"


def check_saddle_examples(rng):
    single = [StoreSlice(np.array([1.0]), np.array([[1.0]]))]
    sol = solve_saddle(single, np.zeros(1), np.array([2.0]))
    if abs(sol.value - 1.0) > 1e-9 or sol.p.p[0] > 1e-9:
        return False, f"K=1 example gave value {sol.value}, p {sol.p.p}"
    ortho = [
        StoreSlice(np.array([1.0]), np.array([[1.0, 0.0]])),
        StoreSlice(np.array([1.0]), np.array([[0.0, 1.0]])),
    ]
    sol = solve_saddle(ortho, np.zeros(2), np.array([0.35, 0.35]))
    if abs(sol.value - 0.7) > 1e-9:
        return False, f"orthogonal example gave value {sol.value}"
    if not kkt_check(sol.w, sol.p, ortho, [0.35, 0.35]).ok:
        return False, "orthogonal example fails the KKT check"
    shifted = brute_force_saddle(ortho, np.full(2, 10.0), np.array([0.35, 0.35]), 0.01)
    base = brute_force_saddle(ortho, np.zeros(2), np.array([0.35, 0.35]), 0.01)
    if abs(shifted - base - 10.0) > 1e-9:
        return False, f"uniform bonus shifted the value by {shifted - base}"
    rewards = rng.uniform(0.0, 2.0, size=2000)
    mirrored = [
        StoreSlice(rewards, np.tile([1.0, 0.0], (2000, 1))),
        StoreSlice(rewards.copy(), np.tile([0.0, 1.0], (2000, 1))),
    ]
    report = kkt_check([0.5, 0.5], [0.0, 0.0], mirrored, [0.5, 0.5])
    if not report.ok:
        return False, f"Example-1 equilibrium on mirrored stores: {report}"
    return True, "K=1, orthogonal, bonus-shift and mirrored Example-1 examples"


def check_saddle_brute_force(rng, count=200, grid_step=0.005):
    worst = 0.0
    for k in range(count):
        slices, bonuses, budget = random_saddle_instance(rng)
        sol = solve_saddle(slices, bonuses, budget)
        grid = brute_force_saddle(slices, bonuses, budget, grid_step)
        err = abs(sol.value - grid)
        worst = max(worst, err)
        if err > 0.02:
            return False, f"instance {k}: LP {sol.value:.6f} vs grid {grid:.6f}"
        if grid < sol.value - 1e-9:
            return False, f"instance {k}: grid {grid:.9f} beats the LP minimum {sol.value:.9f}"
        report = kkt_check(sol.w, sol.p, slices, budget, saddle_tolerances(slices, bonuses, budget), bonuses)
        if not report.ok:
            return False, f"instance {k}: KKT {report}"
    return True, f"{count} instances, worst |LP - grid| {worst:.4f}"


def check_saddle_methods_agree(rng, count=20):
    worst = 0.0
    for k in range(count):
        slices, bonuses, budget = random_saddle_instance(rng, max_K=3, max_d=3, max_samples=30)
        lp = solve_saddle(slices, bonuses, budget, method="lp")
        cut = solve_saddle(slices, bonuses, budget, method="cut")
        err = abs(lp.value - cut.value)
        worst = max(worst, err)
        if err > 1e-7 * (1.0 + abs(lp.value)):
            return False, f"instance {k}: lp {lp.value:.10f} vs cut {cut.value:.10f}"
        report = kkt_check(cut.w, cut.p, slices, budget, saddle_tolerances(slices, bonuses, budget), bonuses)
        if not report.support_ok:
            return False, f"instance {k}: cutting-plane mixture off the envelope"
    return True, f"{count} instances, worst difference {worst:.2e}"


def check_saddle_inequalities(rng, count=20):
    for k in range(count):
        slices, bonuses, budget = random_saddle_instance(rng)
        sol = solve_saddle(slices, bonuses, budget)
        here = lagrangian(sol.w, sol.p, slices, budget, bonuses)
        for theta in range(len(slices)):
            other = lagrangian(Mixture.one_hot(len(slices), theta), sol.p, slices, budget, bonuses)
            if other > here + 1e-6:
                return False, f"instance {k}: vertex {theta} improves L by {other - here:.3e}"
        top = 2.0 * float(sol.p.p.max(initial=0.0)) + 1.0
        for q in price_grid(budget.shape[0], top):
            if lagrangian(sol.w, q, slices, budget, bonuses) < here - 1e-6:
                return False, f"instance {k}: price {q} lowers L below the saddle value"
    return True, f"{count} instances, vertex and 21-point price deviations"


def check_price_box(rng, count=100):
    for k in range(count):
        slices, _, budget = random_saddle_instance(rng)
        sol = solve_saddle(slices, None, budget)
        bound = 1.0 / float(budget.min()) + 1e-6
        if sol.p.p.max(initial=0.0) > bound:
            return False, f"instance {k}: ||p||_inf = {sol.p.p.max()} > {bound}"
    return True, f"{count} instances within R_max / b_min"


def check_surplus_inequality(rng, count=10_000):
    for k in range(count):
        d = int(rng.integers(1, 4))
        p = rng.uniform(0.0, 2.0, size=d)
        a = rng.uniform(0.0, 1.0, size=d)
        if k % 4 == 0:
            r = float(a @ p)  # exact tie
        else:
            r = float(rng.uniform(0.0, 2.0))
        budget = BudgetState.from_total(rng.uniform(0.0, 2.0, size=d), 10)
        fits = budget.fits(a)
        accepted, _ = admit(RewardResourcePair(r, a), p, budget)
        x = 1.0 if accepted else 0.0
        priced = float(a @ p)
        surplus = max(r - priced, 0.0)
        if r * x > priced * x + surplus + 1e-12:
            return False, f"case {k}: r x exceeds priced consumption plus surplus"
        if fits and abs(r * x - (priced * x + surplus)) > 1e-12:
            return False, f"case {k}: admission with slack budget did not collect the surplus"
    return True, f"{count} cases"


def check_tie_separation(rng):
    budget = BudgetState.from_total(np.array([10.0]), 10)
    accepted, _ = admit(RewardResourcePair(1.0, [2.0]), np.array([0.5]), budget)
    if accepted:
        return False, "arrival with r == <p, a> was admitted"
    accepted, _ = admit(RewardResourcePair(1.0 + 1e-12, [2.0]), np.array([0.5]), budget)
    if not accepted:
        return False, "arrival just above the price was rejected"
    return True, "ties rejected, strict improvements admitted"


def check_consumption_sandwich(rng, count=500):
    for k in range(count):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 20))
        p = rng.uniform(0.0, 1.0, size=d)
        A = rng.uniform(0.0, 1.0, size=(n, d))
        r = rng.uniform(0.0, 1.0, size=n)
        r[::3] = A[::3] @ p  # ties
        s = StoreSlice(r, A)
        strict = empirical_consumption(s, p, STRICT)
        weak = empirical_consumption(s, p, WEAK)
        if np.any(strict > weak + 1e-15):
            return False, f"case {k}: strict consumption exceeds weak"
        if empirical_surplus(s, p) < 0:
            return False, f"case {k}: negative surplus"
    return True, f"{count} stores, strict <= weak"


def _scenario_runs():
    return [
        (make_s4(0.7), 300),
        (make_example1(), 200),
        (make_s0(0.7), 150),
    ]


def check_budget_feasibility(rng):
    runs = 0
    for scenario, T in _scenario_runs():
        oracle = mix_oracle(scenario, scenario.budget(), 2000, np.random.default_rng(11))
        for kind in ("spucb", "greedy", "random", "oracle", "onehot"):
            for seed in range(3):
                record = run_policy(kind, scenario, T, scenario.rho, PolicyParams(alpha=0.5),
                                    np.random.default_rng(seed), oracle=oracle)
                record.check_invariants(bounds=(scenario.R_max, scenario.A_max))
                runs += 1
    return True, f"{runs} runs within budget"


def check_mixture_sampling(rng, draws=100_000):
    w = Mixture(np.array([0.5, 0.3, 0.15, 0.05]))
    samples = rng.choice(w.K, size=draws, p=w.w)
    freq = np.bincount(samples, minlength=w.K) / draws
    # Single draws through Mixture.sample on a shorter run
    single = np.bincount([w.sample(rng) for _ in range(20_000)], minlength=w.K) / 20_000
    for theta in range(w.K):
        if abs(freq[theta] - w.w[theta]) > 4 * math.sqrt(w.w[theta] / draws):
            return False, f"config {theta}: frequency {freq[theta]:.5f} vs weight {w.w[theta]}"
        if abs(single[theta] - w.w[theta]) > 4 * math.sqrt(w.w[theta] / 20_000):
            return False, f"config {theta}: Mixture.sample frequency {single[theta]:.5f}"
    return True, f"{draws} draws within 4 sigma"


def check_warm_start_and_doubling(rng):
    for scenario, T in _scenario_runs():
        record = run_spucb(scenario, T, scenario.rho, PolicyParams(alpha=1.0), np.random.default_rng(7))
        K = scenario.K
        warm = record.rounds[:K]
        if [log.theta for log in warm] != list(range(K)) or any(log.x for log in warm):
            return False, f"{scenario.name}: warm start is not K observe-only rounds"
        bound = K * (math.log2(T) + 2) + 1
        if record.solve_count > bound:
            return False, f"{scenario.name}: {record.solve_count} solves > {bound:.1f}"
    return True, "warm start and solve counts"


def check_greedy_is_alpha_zero(rng):
    scenario = make_s4(0.7)
    greedy = run_baseline("greedy", scenario, 300, 0.7, PolicyParams(alpha=2.0), np.random.default_rng(3))
    spucb = run_spucb(scenario, 300, 0.7, PolicyParams(alpha=0.0), np.random.default_rng(3))
    same = [(g.theta, g.x) for g in greedy.rounds] == [(s.theta, s.x) for s in spucb.rounds]
    if not same or greedy.total_reward != spucb.total_reward:
        return False, "greedy and alpha=0 trajectories differ"
    return True, "identical trajectories"


def check_example1_oracles(rng):
    scenario = make_example1()
    b = scenario.budget()
    mix = v_mix(scenario, b, 10_000, np.random.default_rng(1))
    fixed = v_fixed(scenario, b, 100, 200, np.random.default_rng(2))
    if abs(100 * mix - 100) > 2:
        return False, f"T v_mix = {100 * mix:.3f}, expected 100 +/- 2"
    if abs(fixed - 7550 / 101) > 0.7:
        return False, f"v_fixed = {fixed:.3f}, expected {7550 / 101:.3f} +/- 0.7"
    return True, f"T v_mix = {100 * mix:.2f}, v_fixed = {fixed:.2f}"


def check_offline_methods_agree(rng, count=10):
    for k in range(count):
        T = int(rng.integers(20, 120))
        d = int(rng.integers(1, 3))
        r = rng.uniform(0.0, 2.0, size=T)
        A = rng.uniform(0.0, 1.0, size=(T, d))
        B = T * rng.uniform(0.1, 0.6, size=d)
        primal = offline_value(r, A, B, method="primal")
        dual = offline_value(r, A, B, method="dual")
        if abs(primal - dual) > 1e-6 * (1.0 + abs(primal)):
            return False, f"path {k}: primal {primal:.8f} vs dual {dual:.8f}"
    return True, f"{count} paths"


def check_price_cap(rng, count=60, grid_step=0.005):
    for k in range(count):
        slices, bonuses, budget = random_saddle_instance(rng)
        cap = float(rng.uniform(0.2, 1.5))
        free = solve_saddle(slices, bonuses, budget)
        for method in ("lp", "cut"):
            sol = solve_saddle(slices, bonuses, budget, method=method, p_max=cap)
            if sol.p.p.max(initial=0.0) > cap + 1e-9:
                return False, f"instance {k} ({method}): price {sol.p.p} above the cap {cap}"
            if sol.value < free.value - 1e-7:
                return False, f"instance {k} ({method}): capped value {sol.value:.8f} below uncapped {free.value:.8f}"
            grid = brute_force_saddle(slices, bonuses, budget, grid_step, p_max=cap)
            if grid < sol.value - 1e-7 or grid - sol.value > 0.02:
                return False, f"instance {k} ({method}): capped value {sol.value:.6f} vs grid {grid:.6f}"
    return True, f"{count} instances, both methods inside [0, p_max]^d"


def check_value_monotone_lipschitz(rng, count=100):
    worst = 0.0
    for k in range(count):
        slices, _, budget = random_saddle_instance(rng)
        smaller = budget * rng.uniform(0.5, 1.0, size=budget.shape)
        high = solve_saddle(slices, None, budget).value
        low = solve_saddle(slices, None, smaller).value
        if low > high + 1e-7:
            return False, f"instance {k}: value fell from {low:.8f} to {high:.8f} as the budget grew"
        r_max = max(float(s.rewards.max()) for s in slices)
        bound = 2.0 * r_max / float(smaller.min()) * float(np.abs(budget - smaller).sum())
        worst = max(worst, (high - low) / bound if bound > 0 else 0.0)
        if high - low > bound + 1e-7:
            return False, f"instance {k}: value moved {high - low:.6f} > {bound:.6f}"
    return True, f"{count} budget pairs on shared samples, worst ratio to the bound {worst:.3f}"


def check_surplus_convexity(rng, count=2000):
    worst = 0.0
    for k in range(count):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 30))
        s = StoreSlice(rng.uniform(0.0, 2.0, size=n), rng.uniform(0.0, 1.0, size=(n, d)))
        p, q = rng.uniform(0.0, 3.0, size=(2, d))
        lam = float(rng.uniform())
        gap = empirical_surplus(s, lam * p + (1 - lam) * q) - (
            lam * empirical_surplus(s, p) + (1 - lam) * empirical_surplus(s, q)
        )
        worst = max(worst, gap)
        if gap > 1e-9:
            return False, f"case {k}: surplus lies {gap:.3e} above its chord"
    return True, f"{count} chords, worst excess {worst:.1e}"


def check_oracle_dominance(rng, seeds=30):
    runs = [(make_s4(0.7), 150, 2000), (make_example1(), 100, 10_000)]
    worst = -math.inf
    for scenario, T, n_mc in runs:
        oracle = mix_oracle(scenario, scenario.budget(), n_mc, np.random.default_rng(11))
        # Monte Carlo slack on the benchmark itself
        bound = T * (oracle.value + 0.02)
        for kind in ("spucb", "greedy", "random", "oracle", "onehot"):
            params = PolicyParams(alpha=0.5, log_trajectory=False)
            rewards = np.array([
                run_policy(kind, scenario, T, scenario.rho, params, np.random.default_rng(seed), oracle=oracle).total_reward
                for seed in range(seeds)
            ])
            se = float(rewards.std(ddof=1)) / math.sqrt(seeds)
            excess = float(rewards.mean()) - bound - 3.0 * se
            worst = max(worst, excess)
            if excess > 0:
                return False, f"{scenario.name}/{kind}: mean reward {rewards.mean():.3f} > T v_mix {T * oracle.value:.3f} + 3 SE"
    return True, f"{seeds} seeds per policy, worst margin {worst:.3f}"


def check_jitter_duplicates(rng, n=1_000_000):
    r, _ = clip_and_jitter_batch(np.full(n, 1.0), np.zeros((n, 1)), 2.0, 1.0, 1e-6, rng)
    freq = 1.0 - np.unique(r).shape[0] / n
    if freq >= 1e-3:
        return False, f"duplicate frequency {freq:.2e} at a fixed reward"
    return True, f"duplicate frequency {freq:.1e} over {n} draws"


def check_example1_uniform_rewards(rng, n=10_000):
    r, _ = make_example1().sampler.sample_batch(0, n, rng)
    r = np.sort(r)
    cdf = r / 2.0
    ks = max(float(np.max(np.arange(1, n + 1) / n - cdf)), float(np.max(cdf - np.arange(n) / n)))
    if ks >= 0.02:
        return False, f"KS distance to U(0, 2) is {ks:.4f}"
    return True, f"KS distance {ks:.4f}"


PROPERTIES = [
    ("lp.examples", check_lp_examples),
    ("lp.vertex_oracle", check_lp_vertex_oracle),
    ("saddle.examples", check_saddle_examples),
    ("saddle.brute_force_and_kkt", check_saddle_brute_force),
    ("saddle.methods_agree", check_saddle_methods_agree),
    ("saddle.inequalities", check_saddle_inequalities),
    ("saddle.price_box", check_price_box),
    ("saddle.price_cap", check_price_cap),
    ("saddle.value_monotone_lipschitz", check_value_monotone_lipschitz),
    ("admission.surplus_inequality", check_surplus_inequality),
    ("admission.tie_separation", check_tie_separation),
    ("estimators.consumption_sandwich", check_consumption_sandwich),
    ("estimators.surplus_convexity", check_surplus_convexity),
    ("policy.budget_feasibility", check_budget_feasibility),
    ("policy.mixture_sampling", check_mixture_sampling),
    ("policy.warm_start_and_doubling", check_warm_start_and_doubling),
    ("policy.greedy_is_alpha_zero", check_greedy_is_alpha_zero),
    ("policy.oracle_dominance", check_oracle_dominance),
    ("oracle.example1", check_example1_oracles),
    ("oracle.offline_methods_agree", check_offline_methods_agree),
    ("scenarios.jitter_duplicates", check_jitter_duplicates),
    ("scenarios.example1_uniform_rewards", check_example1_uniform_rewards),
]


def run_validation(filter_text=None, inject_fault=False):
    """
    Run every property whose name contains filter_text.

    Args:
        filter_text: Substring filter on property names
        inject_fault: Flip admission to the weak tie rule (self-test of the suite)

    Returns:
        (passed names, failed names)
    """
    selected = [(name, fn) for name, fn in PROPERTIES if not filter_text or filter_text in name]
    print_section(f"PROPERTY SUITE ({len(selected)} properties)")
    if not selected:
        logger.warning(f"[VALIDATE] 0 properties run (filter {filter_text!r} matched nothing)")
        print("⚠ 0 properties run")
        return [], []

    passed, failed = [], []
    rule = WEAK if inject_fault else STRICT
    if inject_fault:
        print("⚠ Fault injected: admission uses the weak tie rule")
    with admission_rule(rule):
        for name, fn in selected:
            rng = np.random.default_rng([VALIDATION_SEED, len(name)])
            start = time.time()
            try:
                ok, detail = fn(rng)
            except Exception as e:
                ok, detail = False, f"raised {type(e).__name__}: {e}"
            elapsed = time.time() - start
            mark = "✓ PASS" if ok else "✗ FAIL"
            print(f"{mark}  {name}  ({elapsed:.1f}s)  {detail}")
            (passed if ok else failed).append(name)

    print_section("SUMMARY")
    print(f"  {len(passed)} passed, {len(failed)} failed")
    for name in failed:
        print(f"  ✗ {name}")
    return passed, failed


if __name__ == "__main__":
    from logging_config import setup_logging

    setup_logging(level="WARNING", log_to_file=False)
    _, failures = run_validation(sys.argv[1] if len(sys.argv) > 1 else None)
    sys.exit(2 if failures else 0)
