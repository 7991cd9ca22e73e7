import numpy as np
import pytest

from core_model import PreconditionError, SampleStore, StoreSlice
from fluid_oracle import (
    FULL_LP_SAMPLE_LIMIT,
    GridTooLargeError,
    SaddleSolution,
    brute_force_saddle,
    dual_function,
    funded_saddle,
    kkt_check,
    lagrangian,
    offline_value,
    price_grid,
    restrict_to_funded,
    solve_saddle,
    v_fixed,
    v_mix,
)
from scenarios import make_example1, make_s4
from validation import random_saddle_instance, saddle_tolerances


class TestSolveSaddle:
    def test_single_configuration_with_slack_budget(self):
        sol = solve_saddle([StoreSlice(np.array([1.0]), np.array([[1.0]]))], None, [2.0])
        assert sol.value == pytest.approx(1.0)
        assert sol.p.p[0] == pytest.approx(0.0, abs=1e-9)
        assert sol.w.w.tolist() == [1.0]

    def test_orthogonal_configurations_mix(self, orthogonal_slices):
        sol = solve_saddle(orthogonal_slices, np.zeros(2), [0.35, 0.35])
        assert sol.value == pytest.approx(0.7)
        np.testing.assert_allclose(sol.w.w, [0.5, 0.5], atol=1e-9)
        assert sol.active_set == frozenset({0, 1})
        assert kkt_check(sol.w, sol.p, orthogonal_slices, [0.35, 0.35]).ok

    def test_uniform_bonus_shifts_value(self, orthogonal_slices):
        base = solve_saddle(orthogonal_slices, np.zeros(2), [0.35, 0.35])
        shifted = solve_saddle(orthogonal_slices, np.full(2, 10.0), [0.35, 0.35])
        assert shifted.value - base.value == pytest.approx(10.0)

    def test_empty_configuration_is_a_precondition_error(self):
        slices = [StoreSlice(np.array([1.0]), np.array([[1.0]])), StoreSlice(np.zeros(0), np.zeros((0, 1)))]
        with pytest.raises(PreconditionError):
            solve_saddle(slices, None, [0.5])

    def test_nonpositive_budget_rejected(self):
        with pytest.raises(PreconditionError):
            solve_saddle([StoreSlice(np.array([1.0]), np.array([[1.0]]))], None, [0.0])

    def test_unknown_method(self, orthogonal_slices):
        with pytest.raises(PreconditionError):
            solve_saddle(orthogonal_slices, None, [0.3, 0.3], method="newton")

    def test_accepts_sample_store(self, rng):
        store = SampleStore.from_arrays([
            (rng.uniform(0, 1, 5), rng.uniform(0, 1, (5, 2))),
            (rng.uniform(0, 1, 3), rng.uniform(0, 1, (3, 2))),
        ])
        sol = solve_saddle(store, None, [0.3, 0.4])
        assert sol.method == "lp"
        assert sol.value == pytest.approx(dual_function(sol.p, store, [0.3, 0.4]))

    def test_auto_switches_to_cutting_plane(self, rng):
        n = FULL_LP_SAMPLE_LIMIT
        slices = [StoreSlice(rng.uniform(0, 1, n), rng.uniform(0, 1, (n, 2))) for _ in range(2)]
        sol = solve_saddle(slices, None, [0.2, 0.3])
        assert sol.method == "cut"

    def test_methods_agree(self, rng):
        for _ in range(8):
            slices, bonuses, budget = random_saddle_instance(rng, max_samples=12)
            lp = solve_saddle(slices, bonuses, budget, method="lp")
            cut = solve_saddle(slices, bonuses, budget, method="cut")
            assert cut.value == pytest.approx(lp.value, rel=1e-6, abs=1e-6)

    def test_matches_grid_and_passes_kkt(self, rng):
        for _ in range(25):
            slices, bonuses, budget = random_saddle_instance(rng)
            sol = solve_saddle(slices, bonuses, budget)
            grid = brute_force_saddle(slices, bonuses, budget, 0.01)
            # Grid search can only overshoot the minimum
            assert sol.value <= grid + 1e-9
            assert grid - sol.value < 0.05
            report = kkt_check(sol.w, sol.p, slices, budget, saddle_tolerances(slices, bonuses, budget), bonuses)
            assert report.ok, report

    def test_saddle_inequalities(self, rng):
        slices, bonuses, budget = random_saddle_instance(rng, max_K=3, max_d=2)
        sol = solve_saddle(slices, bonuses, budget)
        K = len(slices)
        tol = 1e-6
        for q in price_grid(budget.shape[0], 2.0, points=9):
            assert lagrangian(sol.w, q, slices, budget, bonuses) >= sol.value - tol
        for theta in range(K):
            e = np.zeros(K)
            e[theta] = 1.0
            assert lagrangian(e, sol.p, slices, budget, bonuses) <= sol.value + tol

    @pytest.mark.parametrize("method", ["lp", "cut"])
    def test_price_cap_binds(self, method):
        # Uncapped, p = 4 prices the single arrival out at value 2
        slices = [StoreSlice(np.array([4.0]), np.array([[1.0]]))]
        sol = solve_saddle(slices, None, [0.5], method=method, p_max=2.0)
        assert sol.p.p[0] == pytest.approx(2.0, abs=1e-7)
        assert sol.p.p_max == 2.0
        assert sol.value == pytest.approx(3.0, abs=1e-7)

    def test_capped_value_matches_capped_grid(self, rng):
        for _ in range(15):
            slices, bonuses, budget = random_saddle_instance(rng)
            free = solve_saddle(slices, bonuses, budget)
            capped = solve_saddle(slices, bonuses, budget, p_max=0.5)
            assert capped.p.p.max() <= 0.5 + 1e-9
            assert capped.value >= free.value - 1e-7
            grid = brute_force_saddle(slices, bonuses, budget, 0.005, p_max=0.5)
            assert capped.value <= grid + 1e-7
            assert grid - capped.value < 0.02

    def test_nonpositive_price_cap_rejected(self, orthogonal_slices):
        with pytest.raises(PreconditionError):
            solve_saddle(orthogonal_slices, None, [0.3, 0.3], p_max=0.0)

    def test_value_monotone_and_lipschitz_in_budget(self, rng):
        for _ in range(20):
            slices, _, budget = random_saddle_instance(rng)
            smaller = budget * rng.uniform(0.5, 1.0, size=budget.shape)
            high = solve_saddle(slices, None, budget).value
            low = solve_saddle(slices, None, smaller).value
            r_max = max(float(s.rewards.max()) for s in slices)
            assert low <= high + 1e-7
            assert high - low <= 2.0 * r_max / smaller.min() * np.abs(budget - smaller).sum() + 1e-7

    def test_solution_serialization(self, orthogonal_slices):
        sol = solve_saddle(orthogonal_slices, None, [0.35, 0.35])
        back = SaddleSolution.from_dict(sol.to_dict())
        np.testing.assert_allclose(back.w.w, sol.w.w)
        np.testing.assert_allclose(back.p.p, sol.p.p)
        assert back.value == sol.value
        assert back.active_set == sol.active_set


class TestFundedSaddle:
    def test_drops_unfunded_resource(self):
        slices = [
            StoreSlice(np.array([1.0, 2.0]), np.array([[0.5, 0.0], [0.5, 1.0]])),
            StoreSlice(np.array([0.4]), np.array([[0.2, 0.0]])),
        ]
        reduced, funded = restrict_to_funded(slices, [0.5, 0.0])
        assert funded.tolist() == [True, False]
        np.testing.assert_allclose(reduced[0].rewards, [1.0, 0.0])
        assert reduced[0].consumption.shape == (2, 1)

        sol = funded_saddle(slices, None, [0.5, 0.0])
        assert sol.p.p[1] == 0.0
        assert sol.budget.tolist() == [0.5, 0.0]

    def test_nothing_funded(self):
        slices = [
            StoreSlice(np.array([1.0, 3.0]), np.array([[0.0], [1.0]])),
            StoreSlice(np.array([0.8]), np.array([[0.0]])),
        ]
        sol = funded_saddle(slices, None, [0.0])
        # Only arrivals with zero consumption remain admissible
        assert sol.value == pytest.approx(0.8)
        assert sol.w.w.tolist() == [0.0, 1.0]
        assert sol.method == "unfunded"

    def test_all_funded_is_solve_saddle(self, orthogonal_slices):
        a = funded_saddle(orthogonal_slices, None, [0.35, 0.35])
        b = solve_saddle(orthogonal_slices, None, [0.35, 0.35])
        assert a.value == pytest.approx(b.value)


class TestBruteForce:
    def test_three_dimensions_rejected(self):
        slices = [StoreSlice(np.array([1.0]), np.array([[1.0, 1.0, 1.0]]))]
        with pytest.raises(GridTooLargeError):
            brute_force_saddle(slices, None, [0.5, 0.5, 0.5], 0.1)

    def test_grid_size_limit(self):
        slices = [StoreSlice(np.array([1.0]), np.array([[1.0, 1.0]]))]
        with pytest.raises(GridTooLargeError):
            brute_force_saddle(slices, None, [0.5, 0.5], 1e-3, p_max=1000.0)


class TestKKT:
    def test_detects_wrong_price(self, orthogonal_slices):
        sol = solve_saddle(orthogonal_slices, None, [0.35, 0.35])
        assert not kkt_check(sol.w, [0.0, 0.0], orthogonal_slices, [0.35, 0.35]).ok

    def test_detects_off_envelope_weight(self):
        slices = [
            StoreSlice(np.array([1.0]), np.array([[0.1]])),
            StoreSlice(np.array([0.2]), np.array([[0.1]])),
        ]
        report = kkt_check([0.0, 1.0], [0.0], slices, [1.0])
        assert not report.support_ok

    def test_example1_equilibrium_on_mirrored_stores(self, rng):
        # Shared reward draws put both configurations exactly on the envelope at p = 0
        rewards = rng.uniform(0.0, 2.0, size=5000)
        slices = [
            StoreSlice(rewards, np.tile([1.0, 0.0], (5000, 1))),
            StoreSlice(rewards.copy(), np.tile([0.0, 1.0], (5000, 1))),
        ]
        report = kkt_check([0.5, 0.5], [0.0, 0.0], slices, [0.5, 0.5])
        assert report.support_ok
        assert report.feasible_ok
        assert report.complementary_ok


class TestOffline:
    def test_fractional_knapsack(self):
        # Budget 1.5 takes the best arrival and half of the second
        value = offline_value([3.0, 2.0, 1.0], [[1.0], [1.0], [1.0]], [1.5])
        assert value == pytest.approx(4.0)

    def test_primal_and_dual_agree(self, rng):
        r = rng.uniform(0, 2, 80)
        A = rng.uniform(0, 1, (80, 2))
        B = np.array([20.0, 15.0])
        primal = offline_value(r, A, B, method="primal")
        dual = offline_value(r, A, B, method="dual")
        assert dual == pytest.approx(primal, rel=1e-6)

    def test_empty_path(self):
        assert offline_value([], np.zeros((0, 1)), [1.0]) == 0.0

    def test_zero_budget_keeps_free_arrivals(self):
        value = offline_value([1.0, 2.0], [[0.0], [1.0]], [0.0], method="dual")
        assert value == pytest.approx(1.0)


class TestExampleOne:
    def test_v_mix(self):
        scenario = make_example1()
        value = v_mix(scenario, scenario.budget(), 5000, np.random.default_rng(1))
        assert 100 * value == pytest.approx(100.0, abs=3.0)

    def test_v_fixed(self):
        scenario = make_example1()
        value = v_fixed(scenario, scenario.budget(), 100, 60, np.random.default_rng(2))
        assert value == pytest.approx(7550 / 101, abs=1.5)


class TestComplementarity:
    def test_v_mix(self):
        scenario = make_s4(rho=0.7)
        value = v_mix(scenario, scenario.budget(), 2000, np.random.default_rng(1))
        assert value == pytest.approx(0.70, abs=0.02)

    def test_v_fixed(self):
        scenario = make_s4(rho=0.7)
        value = v_fixed(scenario, scenario.budget(), 100, 40, np.random.default_rng(2))
        assert value == pytest.approx(35.0, abs=1.0)

    def test_full_budget_gap(self):
        scenario = make_s4(rho=1.0)
        mix = v_mix(scenario, scenario.budget(), 2000, np.random.default_rng(3))
        fixed = v_fixed(scenario, scenario.budget(), 100, 40, np.random.default_rng(4))
        assert mix == pytest.approx(1.0, abs=0.02)
        assert fixed / 100 == pytest.approx(0.5, abs=0.02)
        assert 100 * mix / fixed == pytest.approx(2.0, abs=0.06)

    def test_value_on_shared_samples(self, rng):
        scenario = make_s4()
        store = scenario.sample_store(300, rng)
        budgets = [scenario.budget(rho) for rho in (0.5, 0.6, 0.7, 0.8)]
        values = [solve_saddle(store, None, b).value for b in budgets]
        for b_lo, b_hi, v_lo, v_hi in zip(budgets, budgets[1:], values, values[1:]):
            assert v_lo <= v_hi + 1e-7
            assert v_hi - v_lo <= 2.0 * scenario.R_max / b_lo.min() * np.abs(b_hi - b_lo).sum() + 1e-7
