"""
Experiment harness

Runs every (policy, alpha, rho, T, seed) combination of an experiment,
precomputing the oracle benchmarks once per (scenario, rho, T), and writes

    <out>              one data row per run
    <out-stem>_summary.csv   one row per (policy, alpha, rho, T)

Conventions: v_mix is per period, v_fixed is a total over T periods.
Spreads are sample standard deviations (ddof=1; 0 for a single seed).
"""

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from tqdm import tqdm

from core_model import SimulationError
from fluid_oracle import SaddleSolution, mix_oracle, v_fixed
from logging_config import get_logger, log_execution_time, run_context, setup_logging
from policy import ALPHA_FREE_KINDS, POLICY_KINDS, PolicyParams, competitive_ratios, regret_mix, run_policy
from scenarios import load_scenario
from settings import get_settings
from trace_ingest import DEFAULT_REGIMES, DEFAULT_SIGMA, parse_trace_with_stats, trace_scenario

logger = get_logger(__name__)

CACHE_VERSION = 2

POLICY_STREAM_ID = {"spucb": 1, "greedy": 2, "random": 3, "oracle": 4, "onehot": 5}

DATA_COLUMNS = [
    "scenario", "policy", "alpha", "rho", "T", "seed",
    "total_reward", "regret_mix", "cr_mix", "cr_star", "solve_count",
]
GROUP_COLUMNS = ["policy", "alpha", "rho", "T"]
FLOAT_FORMAT = "%.10g"
LOCK_IN_THRESHOLD = 0.7


class ConfigError(SimulationError):
    def __init__(self, message):
        super().__init__(message, exit_code=1)


def parse_seed_range(text):
    """
    Parse "a..b" (inclusive), "a,b,c" or a single integer into a list of seeds.
    """
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            seeds = list(range(lo, hi + 1))
        else:
            seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse seed range {text!r}; expected a..b, a,b,c or an integer")
    if not seeds:
        raise ConfigError(f"seed range {text!r} is empty")
    return seeds


def parse_list(text, cast, name):
    """Parse a comma-separated CLI list like "100,500,2000"."""
    try:
        values = [cast(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {name} list {text!r}")
    if not values:
        raise ConfigError(f"{name} list is empty")
    return values


def expand_policies(text):
    names = [p.strip().lower() for p in str(text).split(",") if p.strip()]
    if "all" in names:
        return list(POLICY_KINDS)
    unknown = [p for p in names if p not in POLICY_KINDS]
    if unknown:
        raise ConfigError(f"unknown policies {unknown}; valid: {', '.join(POLICY_KINDS)} or all")
    return names


class ExperimentConfig(BaseModel):
    scenario: str = "s4"
    T: List[int] = Field(default_factory=lambda: [1000])
    rho: List[float] = Field(default_factory=lambda: [1.0])
    policies: List[str] = Field(default_factory=lambda: ["spucb"])
    alpha: List[float] = Field(default_factory=lambda: [1.0])
    seeds: List[int] = Field(default_factory=lambda: [0])
    c_g: float = Field(default=0.0707, gt=0)
    delta: Optional[float] = None
    resolve_schedule: str = "doubling"
    mc_samples: int = Field(default=10_000, ge=1)
    mc_paths: int = Field(default=200, ge=1)
    oracle_seed: int = 20240917
    with_v_fixed: bool = True
    out: Optional[str] = None
    jobs: int = Field(default=0, ge=0)
    use_cache: bool = True
    cache_dir: str = ".oracle_cache"
    log_trajectory: bool = True
    trace_path: Optional[str] = None
    sigma: float = Field(default=DEFAULT_SIGMA, ge=0)
    progress: bool = True

    @field_validator("T")
    @classmethod
    def check_T(cls, value):
        if not value or any(t < 1 for t in value):
            raise ValueError("T values must be positive")
        return value

    @field_validator("rho")
    @classmethod
    def check_rho(cls, value):
        if not value or any(r < 0 for r in value):
            raise ValueError("rho values must be nonnegative")
        return value

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, value):
        if not value or any(a < 0 for a in value):
            raise ValueError("alpha values must be nonnegative")
        return value

    @field_validator("seeds")
    @classmethod
    def check_seeds(cls, value):
        if not value:
            raise ValueError("seed range must be nonempty")
        return value

    @model_validator(mode="after")
    def check_policies(self):
        unknown = [p for p in self.policies if p not in POLICY_KINDS]
        if unknown or not self.policies:
            raise ValueError(f"unknown policies {unknown}; valid: {', '.join(POLICY_KINDS)}")
        return self

    @classmethod
    def build(cls, **values):
        """Validate keyword values, turning pydantic errors into ConfigError."""
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"invalid experiment configuration:\n{e}")

    def policy_params(self, alpha):
        return PolicyParams(
            alpha=alpha,
            delta=self.delta,
            c_g=self.c_g,
            resolve_schedule=self.resolve_schedule,
            log_trajectory=self.log_trajectory,
        )


@dataclass
class OracleReport:
    scenario: str
    rho: float
    T: int
    budget: List[float]
    v_mix: float
    v_fixed: Optional[float]
    saddle: SaddleSolution
    mc_samples: int
    mc_paths: int
    seed: int
    cached: bool = False

    @property
    def T_v_mix(self):
        return self.T * self.v_mix

    @property
    def gap(self):
        if self.v_fixed is None or self.v_fixed <= 0:
            return None
        return self.T_v_mix / self.v_fixed

    def to_row(self):
        return {
            "scenario": self.scenario,
            "rho": self.rho,
            "T": self.T,
            "v_mix": self.v_mix,
            "T_v_mix": self.T_v_mix,
            "v_fixed": self.v_fixed,
            "gap": self.gap,
            "mc_samples": self.mc_samples,
            "mc_paths": self.mc_paths,
        }

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "rho": self.rho,
            "T": self.T,
            "budget": self.budget,
            "v_mix": self.v_mix,
            "v_fixed": self.v_fixed,
            "saddle": self.saddle.to_dict(),
            "mc_samples": self.mc_samples,
            "mc_paths": self.mc_paths,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            scenario=data["scenario"],
            rho=data["rho"],
            T=data["T"],
            budget=data["budget"],
            v_mix=data["v_mix"],
            v_fixed=data["v_fixed"],
            saddle=SaddleSolution.from_dict(data["saddle"]),
            mc_samples=data["mc_samples"],
            mc_paths=data["mc_paths"],
            seed=data["seed"],
            cached=True,
        )


def oracle_cache_key(scenario, rho, T, mc_samples, mc_paths, seed, with_v_fixed):
    request = {
        "version": CACHE_VERSION,
        "scenario": scenario.fingerprint,
        "rho": float(rho),
        "T": int(T),
        "mc_samples": int(mc_samples),
        "mc_paths": int(mc_paths),
        "seed": int(seed),
        "v_fixed": bool(with_v_fixed),
    }
    canonical = json.dumps(request, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _read_cache(path):
    try:
        with open(path, "r") as f:
            return OracleReport.from_dict(json.load(f))
    except (OSError, ValueError, KeyError) as e:
        logger.warning(f"[ORACLE] Ignoring unreadable cache entry {path}: {e}")
        return None


def _write_cache(path, report):
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        tmp = f"{path}.tmp"
        with open(tmp, "w") as f:
            json.dump(report.to_dict(), f, indent=2)
        os.replace(tmp, path)
    except OSError as e:
        logger.warning(f"[ORACLE] Could not write cache entry {path}: {e}")


@log_execution_time(logger)
def precompute_oracle(scenario, rho, T, mc_samples, mc_paths, seed, with_v_fixed=True,
                      cache_dir=None, use_cache=True):
    """
    Compute (or load from cache) v_mix, v_fixed and the oracle saddle.

    Args:
        scenario: ScenarioSpec
        rho: Budget scale
        T: Horizon (v_fixed is a T-period total)
        mc_samples: Monte Carlo samples per configuration for v_mix
        mc_paths: Sampled paths per configuration for v_fixed
        seed: Oracle seed
        with_v_fixed: Skip the (expensive) fixed-configuration oracle when False
        cache_dir: Cache directory (None disables caching)
        use_cache: Read and write the cache

    Returns:
        OracleReport
    """
    path = None
    if use_cache and cache_dir:
        key = oracle_cache_key(scenario, rho, T, mc_samples, mc_paths, seed, with_v_fixed)
        path = os.path.join(cache_dir, f"{key}.json")
        if os.path.isfile(path):
            report = _read_cache(path)
            if report is not None:
                logger.info(f"[ORACLE] Cache hit for {scenario.name} rho={rho} T={T}")
                return report

    b = scenario.budget(rho)
    mix_rng, fixed_rng = np.random.default_rng(seed).spawn(2)
    saddle = mix_oracle(scenario, b, mc_samples, mix_rng)
    fixed = v_fixed(scenario, b, T, mc_paths, fixed_rng) if with_v_fixed else None

    report = OracleReport(
        scenario=scenario.name,
        rho=rho,
        T=T,
        budget=b.tolist(),
        v_mix=saddle.value,
        v_fixed=fixed,
        saddle=saddle,
        mc_samples=mc_samples,
        mc_paths=mc_paths,
        seed=seed,
    )
    gap = f"{report.gap:.4f}" if report.gap is not None else "n/a"
    logger.info(
        f"[ORACLE] {scenario.name} rho={rho} T={T}: T*v_mix={report.T_v_mix:.4f} "
        f"v_fixed={fixed if fixed is not None else 'n/a'} gap={gap}"
    )
    if path:
        _write_cache(path, report)
    return report


@dataclass
class RunTask:
    index: int
    policy: str
    alpha: Optional[float]
    rho: float
    T: int
    seed: int


@dataclass
class ExperimentResult:
    rows: pd.DataFrame
    summary: pd.DataFrame
    oracles: Dict[tuple, OracleReport] = field(default_factory=dict)
    data_path: Optional[str] = None
    summary_path: Optional[str] = None


def _alphas_for(policy, alphas):
    if policy in ALPHA_FREE_KINDS:
        return [None]
    if policy == "greedy":
        return [0.0]
    return list(alphas)


def build_tasks(config):
    tasks = []
    for rho in config.rho:
        for T in config.T:
            for policy in config.policies:
                for alpha in _alphas_for(policy, config.alpha):
                    for seed in config.seeds:
                        tasks.append(RunTask(len(tasks), policy, alpha, rho, T, seed))
    return tasks


def run_rng(seed, policy):
    """Independent generator per (seed, policy kind)."""
    return np.random.default_rng([seed, POLICY_STREAM_ID[policy]])


def execute_task(task, scenario, config, oracle):
    """Run one (policy, alpha, rho, T, seed) task and return its data row."""
    with run_context(scenario=scenario.name, policy=task.policy, seed=task.seed):
        if task.T <= scenario.K and task.policy not in ALPHA_FREE_KINDS:
            raise ConfigError(f"T={task.T} must exceed K={scenario.K} for {task.policy}")
        params = config.policy_params(task.alpha or 0.0)
        record = run_policy(task.policy, scenario, task.T, task.rho, params, run_rng(task.seed, task.policy),
                            oracle=oracle.saddle)
        record.check_invariants(bounds=(scenario.R_max, scenario.A_max))

        regret = regret_mix(record, oracle.v_mix, task.T)
        cr_mix = cr_star = math.nan
        if oracle.v_mix > 0:
            cr_mix = record.total_reward / (task.T * oracle.v_mix)
            if oracle.v_fixed is not None and oracle.v_fixed > 0:
                cr_mix, cr_star = competitive_ratios(record, oracle.v_mix, oracle.v_fixed, task.T)
        return {
            "index": task.index,
            "scenario": scenario.name,
            "policy": task.policy,
            "alpha": math.nan if task.alpha is None else task.alpha,
            "rho": task.rho,
            "T": task.T,
            "seed": task.seed,
            "total_reward": record.total_reward,
            "regret_mix": regret,
            "cr_mix": cr_mix,
            "cr_star": cr_star,
            "solve_count": record.solve_count,
        }


def _worker_init(level):
    setup_logging(level=level, log_to_file=False)


def _worker(payload):
    task, scenario, config, oracle = payload
    return execute_task(task, scenario, config, oracle)


def summarize(rows):
    """
    Per (policy, alpha, rho, T) statistics of the data rows.

    Returns:
        DataFrame with n_seeds and mean/std columns plus cr_mix standard
        error, range and the fraction of seeds with cr_mix below 0.7.
    """
    if rows.empty:
        return pd.DataFrame()
    frame = rows.copy()
    frame["regret_sqrt_T"] = frame["regret_mix"] / np.sqrt(frame["T"])
    grouped = frame.groupby(GROUP_COLUMNS, sort=False, dropna=False)

    def spread(series):
        return float(series.std(ddof=1)) if series.count() > 1 else 0.0

    records = []
    for key, group in grouped:
        row = dict(zip(GROUP_COLUMNS, key))
        n = len(group)
        row["n_seeds"] = n
        for col in ("total_reward", "regret_mix", "regret_sqrt_T", "cr_mix", "cr_star"):
            values = group[col]
            row[f"{col}_mean"] = float(values.mean()) if values.count() else math.nan
            row[f"{col}_std"] = spread(values) if values.count() else math.nan
        cr = group["cr_mix"]
        if cr.count():
            row["cr_mix_se"] = row["cr_mix_std"] / math.sqrt(cr.count())
            row["cr_mix_min"] = float(cr.min())
            row["cr_mix_max"] = float(cr.max())
            row["frac_cr_mix_below_0.7"] = float((cr < LOCK_IN_THRESHOLD).sum() / cr.count())
        else:
            row["cr_mix_se"] = row["cr_mix_min"] = row["cr_mix_max"] = row["frac_cr_mix_below_0.7"] = math.nan
        records.append(row)
    return pd.DataFrame.from_records(records)


def summary_path_for(out):
    stem, ext = os.path.splitext(out)
    return f"{stem}_summary{ext or '.csv'}"


def write_csv(frame, path, comment):
    """CSV with a single '#' comment header line; data rows are deterministic."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# {comment}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, na_rep="")


def _header_comment(config, kind):
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return (
        f"{kind} generated {stamp}; scenario={config.scenario}; v_mix per period, v_fixed total; "
        f"+/- columns are sample std (ddof=1), cr_mix_se = std/sqrt(n)"
    )


class ScenarioResolver:
    """Builds (and memoises) the scenario used at each horizon."""

    def __init__(self, config):
        self.config = config
        self._scenarios = {}
        self._arrivals = None
        if config.trace_path:
            self._arrivals, self.stats = parse_trace_with_stats(config.trace_path, max(config.T))

    def __call__(self, T):
        if T not in self._scenarios:
            if self._arrivals is not None:
                spec, _ = trace_scenario(self._arrivals[:T], DEFAULT_REGIMES, self.config.sigma, rho=1.0)
            else:
                spec = load_scenario(self.config.scenario)
            self._scenarios[T] = spec
        return self._scenarios[T]


@log_execution_time(logger)
def run_experiment(config):
    """
    Run an experiment and write its CSVs.

    Args:
        config: ExperimentConfig

    Returns:
        ExperimentResult
    """
    settings = get_settings()
    resolve = ScenarioResolver(config)
    tasks = build_tasks(config)
    logger.info(
        f"[HARNESS] {len(tasks)} runs: policies={config.policies} T={config.T} "
        f"rho={config.rho} alpha={config.alpha} seeds={len(config.seeds)}"
    )

    oracles = {}
    for rho in config.rho:
        for T in config.T:
            scenario = resolve(T)
            with run_context(scenario=scenario.name, policy="oracle-precompute", seed=config.oracle_seed):
                oracles[(rho, T)] = precompute_oracle(
                    scenario, rho, T,
                    mc_samples=config.mc_samples,
                    mc_paths=config.mc_paths,
                    seed=config.oracle_seed,
                    with_v_fixed=config.with_v_fixed,
                    cache_dir=config.cache_dir,
                    use_cache=config.use_cache,
                )

    jobs = config.jobs or settings.worker_count()
    payloads = [(task, resolve(task.T), config, oracles[(task.rho, task.T)]) for task in tasks]
    show = config.progress and os.isatty(2)
    results = []
    if jobs <= 1 or len(tasks) <= 1:
        for payload in tqdm(payloads, desc="runs", disable=not show):
            results.append(_worker(payload))
    else:
        level = settings.log_level
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init, initargs=(level,)) as pool:
            futures = [pool.submit(_worker, payload) for payload in payloads]
            for future in tqdm(as_completed(futures), total=len(futures), desc="runs", disable=not show):
                results.append(future.result())

    rows = pd.DataFrame.from_records(sorted(results, key=lambda row: row["index"]))
    rows = rows[DATA_COLUMNS] if not rows.empty else pd.DataFrame(columns=DATA_COLUMNS)
    summary = summarize(rows)
    result = ExperimentResult(rows=rows, summary=summary, oracles=oracles)

    if config.out:
        result.data_path = config.out
        result.summary_path = summary_path_for(config.out)
        write_csv(rows, result.data_path, _header_comment(config, "runs"))
        write_csv(summary, result.summary_path, _header_comment(config, "summary"))
        logger.info(f"[HARNESS] Wrote {len(rows)} rows to {result.data_path} and summary to {result.summary_path}")
    return result


def oracle_report(config):
    """Oracle reports for every (rho, T) of config, without running policies."""
    resolve = ScenarioResolver(config)
    reports = []
    for rho in config.rho:
        for T in config.T:
            scenario = resolve(T)
            reports.append(precompute_oracle(
                scenario, rho, T,
                mc_samples=config.mc_samples,
                mc_paths=config.mc_paths,
                seed=config.oracle_seed,
                with_v_fixed=config.with_v_fixed,
                cache_dir=config.cache_dir,
                use_cache=config.use_cache,
            ))
    frame = pd.DataFrame.from_records([r.to_row() for r in reports])
    if config.out:
        write_csv(frame, config.out, _header_comment(config, "oracle"))
    return reports, frame
