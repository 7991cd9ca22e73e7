import math

import numpy as np
import pytest

from core_model import (
    STRICT,
    WEAK,
    BudgetState,
    DimensionError,
    EmptyStoreError,
    Mixture,
    PreconditionError,
    PriceVector,
    RewardResourcePair,
    SampleStore,
    StoreSlice,
    admission_rule,
    admit,
    empirical_consumption,
    empirical_surplus,
)


def _budget(total, T=10):
    return BudgetState.from_total(np.asarray(total, dtype=float), T)


class TestAdmit:
    def test_accepts_when_reward_beats_price_and_fits(self):
        budget = _budget([1.0, 1.0])
        accepted, budget = admit(RewardResourcePair(1.0, [0.5, 0.0]), [1.0, 1.0], budget)
        assert accepted
        np.testing.assert_allclose(budget.B_rem, [0.5, 1.0])

    def test_tie_is_rejected(self):
        budget = _budget([1.0])
        accepted, budget = admit(RewardResourcePair(0.5, [0.5]), [1.0], budget)
        assert not accepted
        np.testing.assert_allclose(budget.B_rem, [1.0])

    def test_weak_rule_admits_ties(self):
        budget = _budget([1.0])
        with admission_rule(WEAK):
            accepted, _ = admit(RewardResourcePair(0.5, [0.5]), [1.0], budget)
        assert accepted
        # The rule is restored on exit
        accepted, _ = admit(RewardResourcePair(0.5, [0.5]), [1.0], _budget([1.0]))
        assert not accepted

    def test_rejects_when_over_budget_even_at_zero_price(self):
        budget = _budget([0.3])
        accepted, _ = admit(RewardResourcePair(5.0, [0.4]), [0.0], budget)
        assert not accepted

    def test_exact_fit_leaves_zero(self):
        budget = _budget([0.5, 0.5])
        accepted, budget = admit(RewardResourcePair(1.0, [0.5, 0.5]), PriceVector.zeros(2), budget)
        assert accepted
        assert np.all(budget.B_rem == 0.0)

    def test_unknown_rule(self):
        with pytest.raises(PreconditionError):
            with admission_rule("sometimes"):
                pass


class TestBudgetState:
    def test_safe_budget(self):
        budget = BudgetState.from_total([100.0, 50.0], 100)
        eps = math.sqrt(math.log(100) / 100)
        assert budget.eps == pytest.approx(eps)
        np.testing.assert_allclose(budget.b, [1.0, 0.5])
        np.testing.assert_allclose(budget.b_safe, [(1 - eps) * 1.0, (1 - eps) * 0.5])

    def test_horizon_one_has_zero_eps(self):
        assert BudgetState.from_total([1.0], 1).eps == 0.0

    def test_negative_budget_rejected(self):
        with pytest.raises(PreconditionError):
            BudgetState.from_total([-1.0], 10)

    def test_consume_past_remaining_raises(self):
        budget = _budget([1.0])
        with pytest.raises(PreconditionError):
            budget.consume(np.array([1.5]))


class TestMixture:
    def test_rejects_off_simplex(self):
        with pytest.raises(PreconditionError):
            Mixture(np.array([0.7, 0.7]))
        with pytest.raises(PreconditionError):
            Mixture(np.array([1.2, -0.2]))

    def test_from_weights_repairs_drift(self):
        w = Mixture.from_weights([0.5 + 1e-8, 0.5 - 2e-8, -1e-9])
        assert w.w.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(w.w >= 0)

    def test_vertex_breaks_ties_low(self):
        assert Mixture(np.array([0.5, 0.5])).vertex().w.tolist() == [1.0, 0.0]
        assert Mixture(np.array([0.2, 0.3, 0.5])).vertex().w.tolist() == [0.0, 0.0, 1.0]

    def test_support(self):
        assert Mixture(np.array([0.0, 0.4, 0.6])).support() == [1, 2]

    def test_sample_is_reproducible(self):
        w = Mixture.uniform(3)
        a = [w.sample(np.random.default_rng(7)) for _ in range(5)]
        b = [w.sample(np.random.default_rng(7)) for _ in range(5)]
        assert a == b


class TestPriceVector:
    def test_box(self):
        with pytest.raises(PreconditionError):
            PriceVector(np.array([-0.1]))
        with pytest.raises(PreconditionError):
            PriceVector(np.array([3.0]), p_max=2.0)

    def test_shape(self):
        with pytest.raises(DimensionError):
            PriceVector(np.zeros((2, 2)))


class TestEstimators:
    def test_surplus_hinge_mean(self):
        s = StoreSlice(np.array([1.0, 0.2, 0.6]), np.array([[0.5], [0.5], [0.5]]))
        # hinges at p=1: 0.5, 0, 0.1
        assert empirical_surplus(s, [1.0]) == pytest.approx(0.6 / 3)

    def test_surplus_of_empty_store_is_zero(self):
        assert empirical_surplus(StoreSlice(np.zeros(0), np.zeros((0, 2))), [0.1, 0.1]) == 0.0

    def test_consumption_strict_and_weak(self):
        s = StoreSlice(np.array([1.0, 0.5]), np.array([[1.0], [1.0]]))
        np.testing.assert_allclose(empirical_consumption(s, [0.5], STRICT), [0.5])
        np.testing.assert_allclose(empirical_consumption(s, [0.5], WEAK), [1.0])

    def test_consumption_of_empty_store(self):
        with pytest.raises(EmptyStoreError):
            empirical_consumption(StoreSlice(np.zeros(0), np.zeros((0, 1))), [0.0])

    def test_price_dimension_mismatch(self):
        s = StoreSlice(np.array([1.0]), np.array([[1.0, 1.0]]))
        with pytest.raises(DimensionError):
            empirical_surplus(s, [1.0])

    def test_surplus_monotone_in_price(self, rng):
        s = StoreSlice(rng.uniform(0, 1, 50), rng.uniform(0, 1, (50, 2)))
        low = empirical_surplus(s, [0.1, 0.1])
        high = empirical_surplus(s, [0.5, 0.3])
        assert high <= low + 1e-12

    def test_surplus_convex_in_price(self, rng):
        s = StoreSlice(rng.uniform(0, 2, 40), rng.uniform(0, 1, (40, 3)))
        for _ in range(200):
            p, q = rng.uniform(0, 3, (2, 3))
            lam = rng.uniform()
            chord = lam * empirical_surplus(s, p) + (1 - lam) * empirical_surplus(s, q)
            assert empirical_surplus(s, lam * p + (1 - lam) * q) <= chord + 1e-9


class TestSampleStore:
    def test_append_grows_buffers(self):
        store = SampleStore(2, 1, capacity=1)
        for k in range(10):
            store.append(k % 2, RewardResourcePair(float(k), [0.1]))
        assert store.counts.tolist() == [5, 5]
        assert store.total == 10
        np.testing.assert_allclose(store.slice(0).rewards, [0, 2, 4, 6, 8])

    def test_dimension_checked(self):
        store = SampleStore(1, 2)
        with pytest.raises(DimensionError):
            store.append(0, RewardResourcePair(1.0, [0.1]))

    def test_counts_is_a_copy(self):
        store = SampleStore(1, 1)
        counts = store.counts
        store.append(0, RewardResourcePair(1.0, [0.1]))
        assert counts.tolist() == [0]
