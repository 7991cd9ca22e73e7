import math
import os

import numpy as np
import pandas as pd
import pytest

from harness import (
    DATA_COLUMNS,
    ConfigError,
    ExperimentConfig,
    build_tasks,
    expand_policies,
    oracle_cache_key,
    oracle_report,
    parse_list,
    parse_seed_range,
    precompute_oracle,
    run_experiment,
    run_rng,
    summarize,
    summary_path_for,
)
from policy import POLICY_KINDS
from scenarios import make_example1, make_s4


def _config(tmp_path, **overrides):
    values = dict(
        scenario="example1",
        T=[30],
        rho=[1.0],
        policies=["spucb"],
        alpha=[0.1],
        seeds=[0, 1],
        mc_samples=200,
        mc_paths=5,
        jobs=1,
        cache_dir=str(tmp_path / "cache"),
        progress=False,
    )
    values.update(overrides)
    return ExperimentConfig.build(**values)


class TestParsing:
    def test_seed_range(self):
        assert parse_seed_range("0..3") == [0, 1, 2, 3]
        assert parse_seed_range("42..44") == [42, 43, 44]
        assert parse_seed_range("5") == [5]
        assert parse_seed_range("1,4,9") == [1, 4, 9]

    @pytest.mark.parametrize("text", ["3..1", "a..b", "", "1..x"])
    def test_bad_seed_range(self, text):
        with pytest.raises(ConfigError) as e:
            parse_seed_range(text)
        assert e.value.exit_code == 1

    def test_lists(self):
        assert parse_list("100,500", int, "T") == [100, 500]
        with pytest.raises(ConfigError):
            parse_list("1.5.2", float, "rho")

    def test_policies(self):
        assert expand_policies("all") == list(POLICY_KINDS)
        assert expand_policies("SPUCB, greedy") == ["spucb", "greedy"]
        with pytest.raises(ConfigError):
            expand_policies("spucb,bandit")

    def test_config_validation(self, tmp_path):
        with pytest.raises(ConfigError):
            _config(tmp_path, T=[0])
        with pytest.raises(ConfigError):
            _config(tmp_path, rho=[-0.1])
        with pytest.raises(ConfigError):
            _config(tmp_path, policies=["nope"])


class TestTasks:
    def test_alpha_free_policies_run_once(self, tmp_path):
        config = _config(tmp_path, policies=list(POLICY_KINDS), alpha=[0.01, 1.0], seeds=[0])
        tasks = build_tasks(config)
        by_policy = {}
        for task in tasks:
            by_policy.setdefault(task.policy, []).append(task.alpha)
        assert by_policy["spucb"] == [0.01, 1.0]
        assert by_policy["onehot"] == [0.01, 1.0]
        assert by_policy["greedy"] == [0.0]
        assert by_policy["random"] == [None]
        assert by_policy["oracle"] == [None]
        assert [t.index for t in tasks] == list(range(len(tasks)))

    def test_policy_streams_differ(self):
        a = run_rng(3, "spucb").random()
        b = run_rng(3, "greedy").random()
        assert a != b
        assert run_rng(3, "spucb").random() == a


class TestOracle:
    def test_cache_round_trip(self, tmp_path):
        scenario = make_example1()
        kwargs = dict(mc_samples=100, mc_paths=3, seed=7, cache_dir=str(tmp_path))
        first = precompute_oracle(scenario, 1.0, 20, **kwargs)
        assert not first.cached
        assert len(os.listdir(tmp_path)) == 1
        second = precompute_oracle(scenario, 1.0, 20, **kwargs)
        assert second.cached
        assert second.v_mix == first.v_mix
        assert second.v_fixed == first.v_fixed
        np.testing.assert_allclose(second.saddle.p.p, first.saddle.p.p)

    def test_cache_key_depends_on_request(self):
        scenario = make_example1()
        base = oracle_cache_key(scenario, 1.0, 100, 1000, 10, 1, True)
        assert base == oracle_cache_key(scenario, 1.0, 100, 1000, 10, 1, True)
        assert base != oracle_cache_key(scenario, 0.5, 100, 1000, 10, 1, True)
        assert base != oracle_cache_key(scenario, 1.0, 100, 1000, 10, 2, True)
        assert base != oracle_cache_key(make_s4(), 1.0, 100, 1000, 10, 1, True)

    def test_corrupt_cache_entry_is_recomputed(self, tmp_path):
        scenario = make_example1()
        key = oracle_cache_key(scenario, 1.0, 20, 100, 3, 7, True)
        (tmp_path / f"{key}.json").write_text("{ broken")
        report = precompute_oracle(scenario, 1.0, 20, 100, 3, 7, cache_dir=str(tmp_path))
        assert not report.cached
        assert report.v_mix > 0

    def test_without_v_fixed(self, tmp_path):
        report = precompute_oracle(make_example1(), 1.0, 20, 100, 3, 7, with_v_fixed=False, cache_dir=None)
        assert report.v_fixed is None
        assert report.gap is None
        assert report.T_v_mix == pytest.approx(20 * report.v_mix)

    def test_report_frame(self, tmp_path):
        out = tmp_path / "oracle.csv"
        config = _config(tmp_path, T=[20, 40], out=str(out))
        reports, frame = oracle_report(config)
        assert len(reports) == 2
        assert frame["T"].tolist() == [20, 40]
        assert out.read_text().startswith("# ")


class TestRunExperiment:
    def test_rows_and_summary(self, tmp_path):
        out = tmp_path / "results" / "runs.csv"
        config = _config(tmp_path, policies=["spucb", "random", "greedy"], out=str(out))
        result = run_experiment(config)
        assert list(result.rows.columns) == DATA_COLUMNS
        assert len(result.rows) == 6
        assert result.rows["alpha"].isna().sum() == 2
        assert result.rows.loc[result.rows["policy"] == "greedy", "alpha"].tolist() == [0.0, 0.0]
        assert os.path.isfile(summary_path_for(str(out)))

        written = pd.read_csv(out, comment="#")
        assert len(written) == 6
        summary = pd.read_csv(summary_path_for(str(out)), comment="#")
        assert set(summary["policy"]) == {"spucb", "random", "greedy"}
        assert (summary["n_seeds"] == 2).all()

    def test_deterministic_across_runs(self, tmp_path):
        config = _config(tmp_path, policies=["spucb", "oracle"])
        a = run_experiment(config).rows
        b = run_experiment(config).rows
        pd.testing.assert_frame_equal(a, b)

    def test_parallel_matches_serial(self, tmp_path):
        serial = run_experiment(_config(tmp_path, seeds=[0, 1, 2], jobs=1)).rows
        parallel = run_experiment(_config(tmp_path, seeds=[0, 1, 2], jobs=2)).rows
        pd.testing.assert_frame_equal(serial, parallel)

    def test_horizon_too_short(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment(_config(tmp_path, T=[2]))

    def test_trace_experiment(self, tmp_path, fixture_trace):
        config = _config(tmp_path, scenario="alibaba", trace_path=fixture_trace, T=[40],
                         policies=["spucb", "random"], alpha=[0.01])
        result = run_experiment(config)
        assert len(result.rows) == 4
        assert (result.rows["scenario"] == "alibaba").all()
        assert (result.rows["total_reward"] >= 0).all()


class TestSummarize:
    def test_statistics(self):
        rows = pd.DataFrame({
            "scenario": ["s"] * 3,
            "policy": ["spucb"] * 3,
            "alpha": [0.1] * 3,
            "rho": [1.0] * 3,
            "T": [100] * 3,
            "seed": [0, 1, 2],
            "total_reward": [90.0, 95.0, 100.0],
            "regret_mix": [10.0, 5.0, 0.0],
            "cr_mix": [0.6, 0.95, 1.0],
            "cr_star": [math.nan] * 3,
            "solve_count": [5, 5, 5],
        })
        summary = summarize(rows).iloc[0]
        assert summary["n_seeds"] == 3
        assert summary["total_reward_mean"] == pytest.approx(95.0)
        assert summary["total_reward_std"] == pytest.approx(5.0)
        assert summary["regret_sqrt_T_mean"] == pytest.approx(0.5)
        assert summary["cr_mix_min"] == pytest.approx(0.6)
        assert summary["frac_cr_mix_below_0.7"] == pytest.approx(1 / 3)
        assert math.isnan(summary["cr_star_mean"])

    def test_single_seed_has_zero_spread(self):
        rows = pd.DataFrame({
            "scenario": ["s"], "policy": ["random"], "alpha": [math.nan], "rho": [1.0], "T": [10], "seed": [0],
            "total_reward": [3.0], "regret_mix": [1.0], "cr_mix": [0.75], "cr_star": [0.8], "solve_count": [0],
        })
        summary = summarize(rows).iloc[0]
        assert summary["total_reward_std"] == 0.0
        assert summary["cr_mix_se"] == 0.0
