"""
Core domain model for configuration selection with admission control

Every round a policy picks a configuration theta, observes one arrival
(reward r, consumption vector a) drawn from that configuration, and then
accepts or rejects it against a bid price p:

    accept  iff  a <= B_rem (componentwise)  and  r > <p, a>

This module holds the value types shared by all policies, the
per-configuration sample store, and the empirical estimators built on it:

    surplus      g_hat(p) = mean (r - <p, a>)_+
    consumption  h_hat(p) = mean a * 1{r > <p, a>}   (strict)
                           mean a * 1{r >= <p, a>}  (weak)
"""

import math
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from logging_config import get_logger

logger = get_logger(__name__)

MIXTURE_TOL = 1e-9
BOUND_TOL = 1e-9

STRICT = "strict"
WEAK = "weak"

# Tie rule used by admit(); only the validation fault hook flips it
_admission_rule = STRICT


class SimulationError(Exception):
    def __init__(self, message, exit_code=2):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code


class DimensionError(SimulationError):
    pass


class EmptyStoreError(SimulationError):
    pass


class PreconditionError(SimulationError):
    pass


def _as_vector(values, name="vector"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class RewardResourcePair:
    """One arrival: reward r and its d-vector of resource consumption a."""
    r: float
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "a", _as_vector(self.a, "consumption"))

    @property
    def d(self):
        return self.a.shape[0]

    def within_bounds(self, R_max, A_max, tol=BOUND_TOL):
        return (-tol <= self.r <= R_max + tol) and bool(np.all((self.a >= -tol) & (self.a <= A_max + tol)))


@dataclass(frozen=True)
class PriceVector:
    """Bid prices, one per resource, inside the box [0, p_max]^d."""
    p: np.ndarray
    p_max: float = math.inf

    def __post_init__(self):
        p = _as_vector(self.p, "price")
        if np.any(p < -BOUND_TOL) or np.any(p > self.p_max + BOUND_TOL):
            raise PreconditionError(f"price {p} outside [0, {self.p_max}]")
        object.__setattr__(self, "p", np.clip(p, 0.0, self.p_max))

    @classmethod
    def zeros(cls, d, p_max=math.inf):
        return cls(np.zeros(d), p_max)

    @property
    def d(self):
        return self.p.shape[0]


def as_price(p):
    """Accept a PriceVector or anything array-like."""
    if isinstance(p, PriceVector):
        return p.p
    return _as_vector(p, "price")


@dataclass(frozen=True)
class Mixture:
    """Probability weights over the K configurations."""
    w: np.ndarray

    def __post_init__(self):
        w = _as_vector(self.w, "mixture")
        if np.any(w < -MIXTURE_TOL):
            raise PreconditionError(f"mixture has negative weight: {w}")
        if abs(w.sum() - 1.0) > MIXTURE_TOL:
            raise PreconditionError(f"mixture weights sum to {w.sum():.12f}, expected 1")
        object.__setattr__(self, "w", np.clip(w, 0.0, None))

    @classmethod
    def from_weights(cls, raw, drift_tol=1e-6):
        """
        Project raw weights (e.g. LP duals) onto the simplex.

        Small negative entries and a sum off by at most drift_tol are
        repaired; anything larger is an error.
        """
        raw = _as_vector(raw, "mixture")
        if np.any(raw < -drift_tol) or abs(raw.sum() - 1.0) > drift_tol:
            raise PreconditionError(f"weights {raw} are not within {drift_tol} of the simplex")
        w = np.clip(raw, 0.0, None)
        return cls(w / w.sum())

    @classmethod
    def uniform(cls, K):
        return cls(np.full(K, 1.0 / K))

    @classmethod
    def one_hot(cls, K, theta):
        w = np.zeros(K)
        w[theta] = 1.0
        return cls(w)

    @property
    def K(self):
        return self.w.shape[0]

    def support(self, tol=0.0):
        return [int(i) for i in np.flatnonzero(self.w > tol)]

    def vertex(self):
        """Indicator of the largest weight; ties go to the lowest index."""
        return Mixture.one_hot(self.K, int(np.argmax(self.w)))

    def sample(self, rng):
        return int(rng.choice(self.K, p=self.w))


@dataclass
class BudgetState:
    B_total: np.ndarray
    B_rem: np.ndarray
    b: np.ndarray
    b_safe: np.ndarray
    eps: float

    @classmethod
    def from_total(cls, B_total, T):
        """Per-period budget b = B/T and safe budget (1 - eps) b, eps = sqrt(log T / T)."""
        if T < 1:
            raise PreconditionError(f"horizon must be >= 1, got {T}")
        B_total = _as_vector(B_total, "budget")
        if np.any(B_total < 0):
            raise PreconditionError(f"budget must be nonnegative, got {B_total}")
        eps = math.sqrt(math.log(T) / T)
        b = B_total / T
        return cls(
            B_total=B_total.copy(),
            B_rem=B_total.copy(),
            b=b,
            b_safe=(1.0 - eps) * b,
            eps=eps,
        )

    @property
    def used(self):
        return self.B_total - self.B_rem

    def fits(self, a):
        return bool(np.all(a <= self.B_rem))

    def consume(self, a):
        if not self.fits(a):
            raise PreconditionError(f"consumption {a} exceeds remaining budget {self.B_rem}")
        # a <= B_rem makes the difference exactly nonnegative in IEEE arithmetic
        self.B_rem = self.B_rem - a


class StoreSlice(NamedTuple):
    """Samples of one configuration: rewards (N,) and consumption (N, d)."""
    rewards: np.ndarray
    consumption: np.ndarray

    @property
    def n(self):
        return self.rewards.shape[0]


class SampleStore:
    """
    Append-only history of observed arrivals per configuration.

    Backed by growable numpy buffers so the estimators run vectorised
    over all N_theta samples.
    """

    def __init__(self, K, d, capacity=64):
        self.K = K
        self.d = d
        self._r = [np.empty(capacity) for _ in range(K)]
        self._a = [np.empty((capacity, d)) for _ in range(K)]
        self._n = np.zeros(K, dtype=int)

    @classmethod
    def from_arrays(cls, per_config):
        """Build a store from a list of (rewards, consumption) per configuration."""
        K = len(per_config)
        if K == 0:
            raise PreconditionError("need at least one configuration")
        d = np.atleast_2d(np.asarray(per_config[0][1], dtype=float)).shape[1]
        store = cls(K, d, capacity=1)
        for theta, (r, A) in enumerate(per_config):
            store.extend(theta, r, A)
        return store

    def _grow(self, theta, needed):
        cap = self._r[theta].shape[0]
        if needed <= cap:
            return
        new_cap = max(needed, 2 * cap)
        n = self._n[theta]
        r = np.empty(new_cap)
        r[:n] = self._r[theta][:n]
        A = np.empty((new_cap, self.d))
        A[:n] = self._a[theta][:n]
        self._r[theta], self._a[theta] = r, A

    def append(self, theta, pair):
        if pair.d != self.d:
            raise DimensionError(f"pair has d={pair.d}, store expects d={self.d}")
        n = self._n[theta]
        self._grow(theta, n + 1)
        self._r[theta][n] = pair.r
        self._a[theta][n] = pair.a
        self._n[theta] = n + 1

    def extend(self, theta, rewards, consumption):
        rewards = np.asarray(rewards, dtype=float).reshape(-1)
        consumption = np.asarray(consumption, dtype=float).reshape(rewards.shape[0], -1)
        if consumption.shape[1] != self.d:
            raise DimensionError(f"consumption has d={consumption.shape[1]}, store expects d={self.d}")
        n = self._n[theta]
        m = rewards.shape[0]
        self._grow(theta, n + m)
        self._r[theta][n:n + m] = rewards
        self._a[theta][n:n + m] = consumption
        self._n[theta] = n + m

    def count(self, theta):
        return int(self._n[theta])

    @property
    def counts(self):
        return self._n.copy()

    @property
    def total(self):
        return int(self._n.sum())

    def slice(self, theta):
        n = self._n[theta]
        return StoreSlice(self._r[theta][:n], self._a[theta][:n])

    def slices(self):
        return [self.slice(theta) for theta in range(self.K)]


def _check_price_dim(samples, p):
    p = as_price(p)
    if p.shape[0] != samples.consumption.shape[1]:
        raise DimensionError(
            f"price has d={p.shape[0]} but samples have d={samples.consumption.shape[1]}"
        )
    return p


def empirical_surplus(samples, p):
    """
    Sample mean of (r - <p, a>)_+ over one configuration's store.

    Args:
        samples: StoreSlice of one configuration
        p: PriceVector or array

    Returns:
        Nonnegative float; 0.0 for an empty store (N v 1 convention)
    """
    p = _check_price_dim(samples, p)
    if samples.n == 0:
        return 0.0
    hinge = np.maximum(samples.rewards - samples.consumption @ p, 0.0)
    return float(hinge.sum() / samples.n)


def empirical_consumption(samples, p, mode=STRICT):
    """
    Mean consumption of the arrivals the price threshold would admit.

    Args:
        samples: StoreSlice of one configuration (must be nonempty)
        p: PriceVector or array
        mode: "strict" (r > <p,a>) or "weak" (r >= <p,a>)

    Returns:
        d-vector
    """
    p = _check_price_dim(samples, p)
    if samples.n == 0:
        raise EmptyStoreError("consumption is undefined for an empty store")
    priced = samples.consumption @ p
    if mode == STRICT:
        mask = samples.rewards > priced
    elif mode == WEAK:
        mask = samples.rewards >= priced
    else:
        raise PreconditionError(f"unknown consumption mode {mode!r}")
    return samples.consumption[mask].sum(axis=0) / samples.n


@contextmanager
def admission_rule(rule):
    """Temporarily switch the admission tie rule (fault-injection hook)."""
    global _admission_rule
    if rule not in (STRICT, WEAK):
        raise PreconditionError(f"unknown admission rule {rule!r}")
    previous = _admission_rule
    _admission_rule = rule
    try:
        yield
    finally:
        _admission_rule = previous


def admit(pair, p, budget):
    """
    Bid-price admission with hard feasibility.

    Accepts iff the arrival fits the remaining budget and its reward
    strictly beats its priced consumption. On accept the budget is
    debited in place.

    Returns:
        (accepted, budget)
    """
    price = as_price(p)
    priced = float(pair.a @ price)
    beats_price = pair.r > priced if _admission_rule == STRICT else pair.r >= priced
    if beats_price and budget.fits(pair.a):
        budget.consume(pair.a)
        return True, budget
    return False, budget


class ArrivalStream(ABC):
    """Arrivals of one run; draw() is called once per round."""

    @abstractmethod
    def draw(self, theta, t):
        """Return the RewardResourcePair observed when theta is selected at round t."""


class ArrivalSampler(ABC):
    """Source of configuration-conditional arrivals for a scenario."""

    @abstractmethod
    def sample_batch(self, theta, n, rng):
        """
        Draw n i.i.d. arrivals of configuration theta.

        Returns:
            (rewards (n,), consumption (n, d))
        """

    @abstractmethod
    def open_stream(self, rng):
        """Start the arrival stream of one run."""


class BufferedStream(ArrivalStream):
    """
    Per-configuration i.i.d. stream with its own generator per theta.

    Draws are buffered in blocks; the sequence seen by configuration theta
    depends only on the run seed, not on which configurations were picked.
    """

    def __init__(self, sampler, K, rng, block=256):
        self.sampler = sampler
        self.block = block
        self._rngs = rng.spawn(K)
        self._buffers = [None] * K
        self._pos = [0] * K

    def draw(self, theta, t):
        buf = self._buffers[theta]
        if buf is None or self._pos[theta] >= buf[0].shape[0]:
            buf = self.sampler.sample_batch(theta, self.block, self._rngs[theta])
            self._buffers[theta] = buf
            self._pos[theta] = 0
        i = self._pos[theta]
        self._pos[theta] = i + 1
        return RewardResourcePair(buf[0][i], buf[1][i].copy())


@dataclass
class ScenarioSpec:
    """
    A scenario: K configurations over d resources plus bound constants.

    b0 is the baseline per-period budget; the run budget is rho * b0 per
    period (rho defaults to the value the scenario was built with).
    P_max, when given, overrides the default price cap 2 R_max / b_min.
    """
    name: str
    K: int
    d: int
    R_max: float
    A_max: float
    b0: np.ndarray
    sampler: ArrivalSampler
    rho: float = 1.0
    P_max: Optional[float] = None
    description: str = ""
    fingerprint: str = ""
    config_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.b0 = _as_vector(self.b0, "b0")
        if self.b0.shape[0] != self.d:
            raise DimensionError(f"b0 has {self.b0.shape[0]} entries, expected d={self.d}")
        if np.any(self.b0 <= 0):
            raise PreconditionError(f"every coordinate of b0 must be positive, got {self.b0}")
        if not self.fingerprint:
            self.fingerprint = self.name

    def budget(self, rho=None):
        """Per-period budget b = rho * b0."""
        rho = self.rho if rho is None else rho
        if rho < 0:
            raise PreconditionError(f"rho must be nonnegative, got {rho}")
        return rho * self.b0

    def total_budget(self, T, rho=None):
        return T * self.budget(rho)

    def price_cap(self, b=None):
        if self.P_max is not None:
            return float(self.P_max)
        b = self.budget() if b is None else _as_vector(b, "budget")
        b_min = float(np.min(b))
        if b_min <= 0:
            return math.inf
        return 2.0 * self.R_max / b_min

    def open_stream(self, rng):
        return self.sampler.open_stream(rng)

    def sample_store(self, n_per_config, rng):
        """Draw n i.i.d. samples for every configuration, one generator stream each."""
        store = SampleStore(self.K, self.d, capacity=max(n_per_config, 1))
        for theta, child in enumerate(rng.spawn(self.K)):
            r, A = self.sampler.sample_batch(theta, n_per_config, child)
            store.extend(theta, r, A)
        return store
