"""
Synthetic scenarios

Built-in scenarios (addressable by name):
    s0        five truncated-Gaussian configurations over three resources
    s4        two configurations with orthogonal consumption (complementarity)
    example1  two configurations, Uniform(0, 2) rewards, unit orthogonal consumption

User scenarios are JSON files validated by ScenarioFile; see
scenario_files/ for examples.
"""

import hashlib
import json
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from core_model import (
    ArrivalSampler,
    BufferedStream,
    PreconditionError,
    RewardResourcePair,
    ScenarioSpec,
    SimulationError,
)
from logging_config import get_logger

logger = get_logger(__name__)

TRUNCATION_LOWER = 0.01
MAX_REJECTION_ATTEMPTS = 1000
DEFAULT_JITTER = 1e-6


class ScenarioError(SimulationError):
    def __init__(self, message):
        super().__init__(message, exit_code=1)


class TruncationError(SimulationError):
    pass


@dataclass(frozen=True)
class GaussianConfig:
    mu_r: float
    sigma_r: float
    mu_a: tuple
    sigma_a: tuple

    def __post_init__(self):
        object.__setattr__(self, "mu_a", tuple(float(x) for x in self.mu_a))
        object.__setattr__(self, "sigma_a", tuple(float(x) for x in self.sigma_a))
        if self.sigma_r <= 0 or any(s <= 0 for s in self.sigma_a):
            raise PreconditionError("Gaussian standard deviations must be positive")
        if len(self.mu_a) != len(self.sigma_a):
            raise PreconditionError("mu_a and sigma_a must have the same length")

    @property
    def d(self):
        return len(self.mu_a)


# S0: (mu_r, sigma_r, mu_a), sigma_a = 0.2 on every resource
S0_TABLE = [
    (1.0, 0.3, (0.8, 0.2, 0.2)),
    (0.8, 0.3, (0.2, 0.7, 0.2)),
    (0.6, 0.3, (0.2, 0.2, 0.6)),
    (0.9, 0.3, (0.5, 0.5, 0.5)),
    (0.4, 0.3, (0.1, 0.1, 0.1)),
]
S0_SIGMA_A = 0.2
S0_B0 = (0.8, 0.2, 0.2)


class ConfigDistribution(ABC):
    """Arrival distribution of a single configuration."""

    @abstractmethod
    def sample(self, n, rng):
        """Return (rewards (n,), consumption (n, d))."""

    @abstractmethod
    def params(self):
        """JSON-ready parameters; they feed the scenario fingerprint."""


def _truncated_normal(mean, std, low, high, size, rng):
    """Rejection-sample N(mean, std^2) restricted to [low, high]."""
    out = rng.normal(mean, std, size=size)
    bad = (out < low) | (out > high)
    attempts = 1
    while bad.any():
        if attempts >= MAX_REJECTION_ATTEMPTS:
            raise TruncationError(
                f"truncated normal N({mean}, {std}^2) on [{low}, {high}] "
                f"still rejecting after {MAX_REJECTION_ATTEMPTS} attempts"
            )
        out[bad] = rng.normal(mean, std, size=int(bad.sum()))
        bad = (out < low) | (out > high)
        attempts += 1
    return out


class TruncatedGaussian(ConfigDistribution):
    def __init__(self, config, R_max, A_max, lower=TRUNCATION_LOWER):
        self.config = config
        self.R_max = R_max
        self.A_max = A_max
        self.lower = lower

    def params(self):
        c = self.config
        return {"kind": "gaussian_truncated", "mu_r": c.mu_r, "sigma_r": c.sigma_r, "mu_a": list(c.mu_a),
                "sigma_a": list(c.sigma_a), "R_max": self.R_max, "A_max": self.A_max, "lower": self.lower}

    def sample(self, n, rng):
        c = self.config
        r = _truncated_normal(c.mu_r, c.sigma_r, self.lower, self.R_max, n, rng)
        A = np.column_stack([
            _truncated_normal(mu, sigma, self.lower, self.A_max, n, rng)
            for mu, sigma in zip(c.mu_a, c.sigma_a)
        ])
        return r, A


class UniformBox(ConfigDistribution):
    """Reward ~ U(r_low, r_high); consumption_i ~ U(a_low_i, a_high_i), clipped below at 0."""

    def __init__(self, r_low, r_high, a_low, a_high):
        self.r_low, self.r_high = float(r_low), float(r_high)
        self.a_low = np.asarray(a_low, dtype=float)
        self.a_high = np.asarray(a_high, dtype=float)

    def params(self):
        return {"kind": "uniform", "r_low": self.r_low, "r_high": self.r_high,
                "a_low": self.a_low.tolist(), "a_high": self.a_high.tolist()}

    def sample(self, n, rng):
        r = rng.uniform(self.r_low, self.r_high, size=n)
        A = rng.uniform(self.a_low, self.a_high, size=(n, self.a_low.shape[0]))
        return r, np.maximum(A, 0.0)


class OrthogonalUnit(ConfigDistribution):
    """Reward ~ U(r_low, r_high); consumption is the unit vector of one resource."""

    def __init__(self, index, d, r_low=0.0, r_high=2.0):
        self.index = index
        self.d = d
        self.r_low, self.r_high = float(r_low), float(r_high)

    def params(self):
        return {"kind": "orthogonal_unit", "index": self.index, "d": self.d, "r_low": self.r_low, "r_high": self.r_high}

    def sample(self, n, rng):
        r = rng.uniform(self.r_low, self.r_high, size=n)
        A = np.zeros((n, self.d))
        A[:, self.index] = 1.0
        return r, A


class Clipped(ConfigDistribution):
    """Boundedness enforcement around another distribution (clip plus tie-breaking jitter)."""

    def __init__(self, inner, R_max, A_max, eta=DEFAULT_JITTER):
        self.inner = inner
        self.R_max = R_max
        self.A_max = A_max
        self.eta = eta

    def params(self):
        return {"kind": "clipped", "inner": self.inner.params(), "R_max": self.R_max, "A_max": self.A_max, "eta": self.eta}

    def sample(self, n, rng):
        r, A = self.inner.sample(n, rng)
        return clip_and_jitter_batch(r, A, self.R_max, self.A_max, self.eta, rng)


class PerConfigSampler(ArrivalSampler):
    def __init__(self, distributions):
        self.distributions = list(distributions)

    def params(self):
        return [dist.params() for dist in self.distributions]

    def sample_batch(self, theta, n, rng):
        if not 0 <= theta < len(self.distributions):
            raise PreconditionError(f"configuration {theta} out of range")
        return self.distributions[theta].sample(n, rng)

    def open_stream(self, rng):
        return BufferedStream(self, len(self.distributions), rng)


def clip_and_jitter(r, a, R_max, A_max, eta, rng):
    """
    Clip r to [0, R_max] and a to [0, A_max], then add U(-eta, eta) jitter
    to r and clip again.
    """
    if eta < 0:
        raise PreconditionError(f"jitter eta must be nonnegative, got {eta}")
    a = np.clip(np.asarray(a, dtype=float), 0.0, A_max)
    r = float(np.clip(r, 0.0, R_max))
    if eta > 0:
        r = float(np.clip(r + rng.uniform(-eta, eta), 0.0, R_max))
    return RewardResourcePair(r, a)


def clip_and_jitter_batch(r, A, R_max, A_max, eta, rng):
    if eta < 0:
        raise PreconditionError(f"jitter eta must be nonnegative, got {eta}")
    A = np.clip(A, 0.0, A_max)
    r = np.clip(r, 0.0, R_max)
    if eta > 0:
        r = np.clip(r + rng.uniform(-eta, eta, size=r.shape), 0.0, R_max)
    return r, A


def _check_rho(rho):
    if rho <= 0:
        raise PreconditionError(f"rho must be positive, got {rho}")


def parameter_fingerprint(spec):
    """Content hash of a scenario's constants and distributions; rho is not part of it."""
    payload = {
        "name": spec.name,
        "K": spec.K,
        "d": spec.d,
        "R_max": spec.R_max,
        "A_max": spec.A_max,
        "b0": spec.b0.tolist(),
        "P_max": spec.P_max,
        "configs": spec.sampler.params(),
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
    return f"{spec.name}-{digest}"


def _fingerprinted(spec):
    spec.fingerprint = parameter_fingerprint(spec)
    return spec


def make_s0(rho=1.0):
    _check_rho(rho)
    R_max = A_max = 2.0
    configs = [GaussianConfig(mu_r, sigma_r, mu_a, (S0_SIGMA_A,) * 3) for mu_r, sigma_r, mu_a in S0_TABLE]
    return _fingerprinted(ScenarioSpec(
        name="s0",
        K=5,
        d=3,
        R_max=R_max,
        A_max=A_max,
        b0=np.array(S0_B0),
        sampler=PerConfigSampler(TruncatedGaussian(c, R_max, A_max) for c in configs),
        rho=rho,
        P_max=2.0,
        description="five truncated-Gaussian configurations, three resources",
        config_names=["cpu-heavy", "mem-heavy", "io-heavy", "balanced", "light"],
    ))


def make_s4(rho=1.0):
    _check_rho(rho)
    noise = 0.01
    return _fingerprinted(ScenarioSpec(
        name="s4",
        K=2,
        d=2,
        R_max=1.0 + noise,
        A_max=1.0 + noise,
        b0=np.array([0.5, 0.5]),
        sampler=PerConfigSampler([
            UniformBox(1 - noise, 1 + noise, [1 - noise, -noise], [1 + noise, noise]),
            UniformBox(1 - noise, 1 + noise, [-noise, 1 - noise], [noise, 1 + noise]),
        ]),
        rho=rho,
        description="orthogonal complementarity: each configuration uses one resource",
        config_names=["resource-0", "resource-1"],
    ))


def make_example1():
    return _fingerprinted(ScenarioSpec(
        name="example1",
        K=2,
        d=2,
        R_max=2.0,
        A_max=1.0,
        b0=np.array([0.5, 0.5]),
        sampler=PerConfigSampler([OrthogonalUnit(0, 2), OrthogonalUnit(1, 2)]),
        rho=1.0,
        description="two configurations, Uniform(0,2) rewards, unit orthogonal consumption",
        config_names=["resource-0", "resource-1"],
    ))


BUILTIN_SCENARIOS = {
    "s0": make_s0,
    "s4": make_s4,
    "example1": lambda rho=1.0: _scaled(make_example1(), rho),
}


def _scaled(spec, rho):
    _check_rho(rho)
    spec.rho = rho
    return spec


class DistributionSpec(BaseModel):
    kind: Literal["gaussian_truncated", "uniform", "orthogonal_unit"]
    mu_r: Optional[float] = None
    sigma_r: Optional[float] = Field(default=None, gt=0)
    mu_a: Optional[List[float]] = None
    sigma_a: Optional[List[float]] = None
    r_low: Optional[float] = None
    r_high: Optional[float] = None
    a_low: Optional[List[float]] = None
    a_high: Optional[List[float]] = None
    index: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def check_parameters(self):
        required = {
            "gaussian_truncated": ("mu_r", "sigma_r", "mu_a", "sigma_a"),
            "uniform": ("r_low", "r_high", "a_low", "a_high"),
            "orthogonal_unit": ("index",),
        }[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind} needs parameters {missing}")
        if self.r_low is not None and self.r_high is not None and self.r_low > self.r_high:
            raise ValueError("r_low must not exceed r_high")
        return self


class ScenarioFile(BaseModel):
    name: str
    description: str = ""
    K: int = Field(ge=1)
    d: int = Field(ge=1)
    R_max: float = Field(gt=0)
    A_max: float = Field(gt=0)
    b0: List[float]
    P_max: Optional[float] = Field(default=None, gt=0)
    eta: float = Field(default=DEFAULT_JITTER, ge=0)
    configs: List[DistributionSpec]

    @model_validator(mode="after")
    def check_shapes(self):
        if len(self.configs) != self.K:
            raise ValueError(f"K={self.K} but {len(self.configs)} configs given")
        if len(self.b0) != self.d:
            raise ValueError(f"d={self.d} but b0 has {len(self.b0)} entries")
        if any(x <= 0 for x in self.b0):
            raise ValueError("b0 must be positive")
        for i, c in enumerate(self.configs):
            for name in ("mu_a", "sigma_a", "a_low", "a_high"):
                vec = getattr(c, name)
                if vec is not None and len(vec) != self.d:
                    raise ValueError(f"config {i}: {name} has {len(vec)} entries, expected {self.d}")
            if c.kind == "orthogonal_unit" and c.index >= self.d:
                raise ValueError(f"config {i}: index {c.index} out of range for d={self.d}")
        return self

    def build_distribution(self, c):
        if c.kind == "gaussian_truncated":
            return TruncatedGaussian(GaussianConfig(c.mu_r, c.sigma_r, c.mu_a, c.sigma_a), self.R_max, self.A_max)
        if c.kind == "uniform":
            inner = UniformBox(c.r_low, c.r_high, c.a_low, c.a_high)
        else:
            r_low = 0.0 if c.r_low is None else c.r_low
            r_high = self.R_max if c.r_high is None else c.r_high
            inner = OrthogonalUnit(c.index, self.d, r_low, r_high)
        return Clipped(inner, self.R_max, self.A_max, self.eta)

    def fingerprint(self):
        canonical = json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def to_spec(self, rho=1.0):
        _check_rho(rho)
        return ScenarioSpec(
            name=self.name,
            K=self.K,
            d=self.d,
            R_max=self.R_max,
            A_max=self.A_max,
            b0=np.array(self.b0),
            sampler=PerConfigSampler(self.build_distribution(c) for c in self.configs),
            rho=rho,
            P_max=self.P_max,
            description=self.description,
            fingerprint=f"{self.name}-{self.fingerprint()}",
        )


def load_scenario_file(path, rho=1.0):
    try:
        with open(path, "r") as f:
            raw = f.read()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file {path}: {e}")
    try:
        model = ScenarioFile.model_validate_json(raw)
    except ValidationError as e:
        raise ScenarioError(f"invalid scenario file {path}:\n{e}")
    logger.info(f"[SCENARIO] Loaded {model.name} from {path} (K={model.K}, d={model.d})")
    return model.to_spec(rho)


def load_scenario(name_or_path, rho=None):
    """
    Resolve a built-in scenario name or a JSON scenario file.

    Args:
        name_or_path: "s0", "s4", "example1" or a path to a JSON file
        rho: Budget scale (defaults to 1.0)

    Returns:
        ScenarioSpec

    Raises:
        ScenarioError: Unknown name or invalid file
    """
    rho = 1.0 if rho is None else rho
    key = str(name_or_path).strip().lower()
    if key in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[key](rho)
    if os.path.isfile(name_or_path):
        return load_scenario_file(name_or_path, rho)
    valid = ", ".join(sorted(BUILTIN_SCENARIOS))
    raise ScenarioError(f"unknown scenario {name_or_path!r}; valid names: {valid} (or a JSON scenario file)")
