#!/usr/bin/env python3
"""
Command-line interface

    python cli.py simulate --scenario s4 --policy all --T 5000 --rho 0.7 --alpha 0.1 --seeds 0..9 --out results/s4.csv
    python cli.py oracle --scenario example1 --T 100
    python cli.py validate [--filter saddle]
    python cli.py trace-simulate --trace $TRACE_PATH --T 5000 --rho 1.0 --alpha 0.01 --seeds 42..91 --out results/alibaba.csv
    python cli.py trace-info --trace $TRACE_PATH --T 5000

Exit status: 0 success, 1 usage error, 2 runtime failure.
"""

import logging
import sys

import click

from core_model import SimulationError
from harness import (
    ExperimentConfig,
    expand_policies,
    oracle_report,
    parse_list,
    parse_seed_range,
    run_experiment,
)
from logging_config import get_logger, log_exception, setup_logging
from settings import get_settings
from trace_ingest import DEFAULT_SIGMA, parse_trace_with_stats, trace_summary
from validation import run_validation

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def _common_experiment_values(ctx, T, rho, alpha, seeds, policy, out, jobs, no_cache,
                              no_trajectory_log, mc_samples, mc_paths, c_g, no_cr_star):
    settings = ctx.obj["settings"]
    return dict(
        T=parse_list(T, int, "T"),
        rho=parse_list(rho, float, "rho"),
        alpha=parse_list(alpha, float, "alpha"),
        seeds=parse_seed_range(seeds),
        policies=expand_policies(policy),
        out=out,
        jobs=settings.jobs if jobs is None else jobs,
        use_cache=not no_cache,
        cache_dir=settings.cache_dir,
        log_trajectory=not no_trajectory_log,
        mc_samples=mc_samples or settings.mc_samples,
        mc_paths=mc_paths or settings.mc_paths,
        oracle_seed=settings.oracle_seed,
        c_g=c_g,
        with_v_fixed=not no_cr_star,
        progress=not ctx.obj["quiet"],
    )


def experiment_options(func):
    options = [
        click.option("--policy", default="spucb", show_default=True,
                     help="spucb, greedy, random, oracle, onehot, a comma list, or all"),
        click.option("--T", "T", default="1000", show_default=True, help="Horizon(s), comma-separated"),
        click.option("--rho", default="1.0", show_default=True, help="Budget scale(s), comma-separated"),
        click.option("--alpha", default="1.0", show_default=True, help="Exploration scale(s), comma-separated"),
        click.option("--seeds", default="0..9", show_default=True, help="Seed range a..b (inclusive) or list"),
        click.option("--out", default=None, help="Data CSV path; the summary goes to <stem>_summary.csv"),
        click.option("--jobs", type=click.IntRange(min=0), default=None, help="Worker processes (0 = logical cores)"),
        click.option("--no-cache", is_flag=True, help="Recompute oracle values"),
        click.option("--no-trajectory-log", is_flag=True, help="Do not keep per-round logs in memory"),
        click.option("--mc-samples", type=click.IntRange(min=1), default=None, help="Oracle MC samples per configuration"),
        click.option("--mc-paths", type=click.IntRange(min=1), default=None, help="Oracle paths per configuration"),
        click.option("--c-g", "c_g", type=float, default=0.0707, show_default=True, help="Confidence radius constant"),
        click.option("--no-cr-star", is_flag=True, help="Skip the fixed-configuration oracle (cr_star left empty)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _print_summary(result):
    if result.summary.empty:
        click.echo("No runs.")
        return
    columns = [
        "policy", "alpha", "rho", "T", "n_seeds",
        "total_reward_mean", "regret_mix_mean", "regret_mix_std",
        "regret_sqrt_T_mean", "cr_mix_mean", "cr_mix_std", "cr_star_mean",
    ]
    click.echo(result.summary[columns].to_string(index=False, na_rep="", float_format=lambda x: f"{x:.4f}"))
    if result.data_path:
        click.echo(f"\nRuns: {result.data_path}\nSummary: {result.summary_path}")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="DEBUG logging")
@click.option("-q", "--quiet", is_flag=True, help="Warnings only, no progress bars")
@click.pass_context
def cli(ctx, verbose, quiet):
    """Configuration selection with bid-price admission control: simulator and oracles."""
    settings = get_settings()
    level = logging.DEBUG if verbose else (logging.WARNING if quiet else settings.log_level)
    setup_logging(level=level, log_dir=settings.log_dir)
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings
    ctx.obj["quiet"] = quiet


@cli.command()
@click.option("--scenario", default="s4", show_default=True, help="s0, s4, example1 or a JSON scenario file")
@experiment_options
@click.option("--resolve-schedule", type=click.Choice(["doubling", "every_round"]), default="doubling",
              show_default=True)
@click.pass_context
def simulate(ctx, scenario, resolve_schedule, **options):
    """Run policies over seeds on a synthetic scenario."""
    values = _common_experiment_values(ctx, **options)
    config = ExperimentConfig.build(scenario=scenario, resolve_schedule=resolve_schedule, **values)
    _print_summary(run_experiment(config))
    return EXIT_OK


@cli.command()
@click.option("--scenario", default="example1", show_default=True)
@click.option("--rho", default="1.0", show_default=True)
@click.option("--T", "T", default="100", show_default=True)
@click.option("--mc-samples", type=click.IntRange(min=1), default=None)
@click.option("--mc-paths", type=click.IntRange(min=1), default=None)
@click.option("--no-v-fixed", is_flag=True, help="Only compute v_mix")
@click.option("--no-cache", is_flag=True)
@click.option("--trace", "trace_path", default=None, help="Use a trace window instead of --scenario")
@click.option("--out", default=None, help="Oracle report CSV")
@click.pass_context
def oracle(ctx, scenario, rho, T, mc_samples, mc_paths, no_v_fixed, no_cache, trace_path, out):
    """Report v_mix, T*v_mix, v_fixed and their gap."""
    settings = ctx.obj["settings"]
    config = ExperimentConfig.build(
        scenario=scenario,
        rho=parse_list(rho, float, "rho"),
        T=parse_list(T, int, "T"),
        mc_samples=mc_samples or settings.mc_samples,
        mc_paths=mc_paths or settings.mc_paths,
        oracle_seed=settings.oracle_seed,
        with_v_fixed=not no_v_fixed,
        use_cache=not no_cache,
        cache_dir=settings.cache_dir,
        trace_path=trace_path,
        out=out,
    )
    _, frame = oracle_report(config)
    click.echo(frame.to_string(index=False, na_rep="", float_format=lambda x: f"{x:.4f}"))
    return EXIT_OK


@cli.command()
@click.option("--filter", "filter_text", default=None, help="Only run properties whose name contains this")
@click.option("--inject-fault", is_flag=True, hidden=True)
def validate(filter_text, inject_fault):
    """Run the property suite; nonzero exit status on any failure."""
    _, failed = run_validation(filter_text, inject_fault=inject_fault)
    return EXIT_RUNTIME if failed else EXIT_OK


@cli.command("trace-simulate")
@click.option("--trace", "trace_path", default=None, help="batch_task.csv (defaults to TRACE_PATH)")
@click.option("--sigma", type=click.FloatRange(min=0), default=DEFAULT_SIGMA, show_default=True)
@experiment_options
@click.pass_context
def trace_simulate(ctx, trace_path, sigma, **options):
    """Replay an Alibaba batch_task window under each policy."""
    trace_path = trace_path or ctx.obj["settings"].trace_path
    if not trace_path:
        raise click.UsageError("no trace given: pass --trace or set TRACE_PATH")
    values = _common_experiment_values(ctx, **options)
    config = ExperimentConfig.build(scenario="alibaba", trace_path=trace_path, sigma=sigma, **values)
    _print_summary(run_experiment(config))
    return EXIT_OK


@cli.command("trace-info")
@click.option("--trace", "trace_path", default=None, help="batch_task.csv (defaults to TRACE_PATH)")
@click.option("--T", "T", type=click.IntRange(min=1), default=5000, show_default=True)
@click.option("--rho", type=click.FloatRange(min=0), default=1.0, show_default=True)
@click.pass_context
def trace_info(ctx, trace_path, T, rho):
    """Row counts, window statistics and budget of a trace."""
    trace_path = trace_path or ctx.obj["settings"].trace_path
    if not trace_path:
        raise click.UsageError("no trace given: pass --trace or set TRACE_PATH")
    arrivals, stats = parse_trace_with_stats(trace_path, T)
    summary = trace_summary(arrivals, rho, stats)
    width = max(len(key) for key in summary)
    for key, value in summary.items():
        shown = f"{value:.4f}" if isinstance(value, float) else value
        click.echo(f"{key:<{width}}  {shown}")
    return EXIT_OK


def main(argv=None):
    """Entry point returning the process exit status."""
    try:
        rv = cli.main(args=argv, prog_name="cli.py", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except SimulationError as e:
        if e.exit_code == EXIT_USAGE:
            click.echo(f"Error: {e.message}", err=True)
        else:
            log_exception(logger, f"Run failed: {e.message}")
            click.echo(f"Error: {e.message}", err=True)
        return e.exit_code
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
