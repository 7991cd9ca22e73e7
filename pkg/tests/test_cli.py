import pandas as pd
import pytest
from click.testing import CliRunner

from cli import cli, main


def _run(*args):
    return main(["-q", *args])


def test_help_lists_commands():
    result = CliRunner().invoke(cli, ["--help"])
    assert result.exit_code == 0
    for name in ("simulate", "oracle", "validate", "trace-simulate", "trace-info"):
        assert name in result.output
    assert "inject-fault" not in CliRunner().invoke(cli, ["validate", "--help"]).output


def test_simulate_writes_csvs(tmp_path, capsys):
    out = tmp_path / "s4.csv"
    code = _run("simulate", "--scenario", "s4", "--policy", "spucb,random", "--T", "40", "--rho", "0.7",
                "--alpha", "0.1", "--seeds", "0..1", "--jobs", "1", "--mc-samples", "200", "--mc-paths", "3",
                "--out", str(out))
    assert code == 0
    rows = pd.read_csv(out, comment="#")
    assert len(rows) == 4
    assert set(rows["policy"]) == {"spucb", "random"}
    assert (tmp_path / "s4_summary.csv").is_file()
    assert "spucb" in capsys.readouterr().out


def test_simulate_without_cr_star(tmp_path):
    out = tmp_path / "runs.csv"
    code = _run("simulate", "--scenario", "example1", "--T", "20", "--seeds", "3", "--jobs", "1",
                "--mc-samples", "100", "--no-cr-star", "--out", str(out))
    assert code == 0
    rows = pd.read_csv(out, comment="#")
    assert rows["cr_star"].isna().all()


@pytest.mark.parametrize("args", [
    ("simulate", "--scenario", "s9"),
    ("simulate", "--policy", "bandit"),
    ("simulate", "--seeds", "5..1"),
    ("simulate", "--T", "abc"),
    ("simulate", "--jobs", "-1"),
    ("frobnicate",),
])
def test_usage_errors_exit_one(args):
    assert _run(*args) == 1


def test_oracle_table(tmp_path, capsys):
    code = _run("oracle", "--scenario", "example1", "--T", "20", "--mc-samples", "200", "--mc-paths", "3")
    assert code == 0
    out = capsys.readouterr().out
    assert "T_v_mix" in out and "gap" in out


def test_validate_filter(capsys):
    assert _run("validate", "--filter", "lp.examples") == 0
    assert "1 passed, 0 failed" in capsys.readouterr().out


def test_validate_empty_filter_is_not_a_failure(capsys):
    assert _run("validate", "--filter", "no-such-property") == 0
    assert "0 properties run" in capsys.readouterr().out


def test_injected_fault_is_caught(capsys):
    assert _run("validate", "--filter", "admission.tie", "--inject-fault") == 2
    assert "FAIL" in capsys.readouterr().out


def test_trace_info(fixture_trace, capsys):
    assert _run("trace-info", "--trace", fixture_trace, "--T", "10") == 0
    out = capsys.readouterr().out
    assert "cpu_mean" in out and "1.9750" in out
    assert "rows_invalid" in out


def test_trace_needs_a_path():
    assert _run("trace-info") == 1


def test_short_trace_is_a_runtime_error(fixture_trace):
    assert _run("trace-info", "--trace", fixture_trace, "--T", "500") == 2


def test_trace_simulate(fixture_trace, tmp_path):
    out = tmp_path / "alibaba.csv"
    code = _run("trace-simulate", "--trace", fixture_trace, "--T", "30", "--alpha", "0.01", "--seeds", "42..43",
                "--policy", "spucb,greedy", "--jobs", "1", "--mc-samples", "100", "--mc-paths", "3",
                "--out", str(out))
    assert code == 0
    rows = pd.read_csv(out, comment="#")
    assert rows["seed"].tolist() == [42, 43, 42, 43]
