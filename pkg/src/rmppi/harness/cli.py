import logging
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from rmppi.planner.config import DYNAMICS_PRESETS, PLANNER_PRESETS, Variant

logger = logging.getLogger(__name__)

config_option = click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Experiment INI file.",
)
override_option = click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="SECTION.KEY=VALUE",
    help="Override one experiment key, may be repeated.",
)
seed_option = click.option("--seed", type=int, default=None, help="Replace [run] seed.")


def _load(config_path, overrides, seed):
    from rmppi.harness.config import load_experiment

    return load_experiment(config_path, list(overrides), seed)


@click.command(name="train-dynamics")
@config_option
@override_option
@seed_option
def train_dynamics_(config_path, overrides, seed):
    """Collect prior rollouts and fit the learned dynamics model."""
    from rmppi.harness.pipeline import cmd_train_dynamics

    result = cmd_train_dynamics(_load(config_path, overrides, seed))
    if result.losses:
        head, tail = result.losses[0], result.losses[-1]
        click.echo(f"Saved {result.model_path} (loss {head:.4g} -> {tail:.4g})")
    else:
        click.echo(f"Saved {result.model_path} (untrained, 0 steps)")


@click.command(name="run")
@config_option
@override_option
@seed_option
@click.option(
    "--variant",
    type=click.Choice([v.value for v in Variant], case_sensitive=False),
    default=None,
    help="Planner variant, overrides [planner] variant.",
)
def run_(config_path, overrides, seed, variant):
    """Run receding-horizon episodes and write per-episode metrics."""
    from rmppi.harness.pipeline import cmd_run

    result = cmd_run(_load(config_path, overrides, seed), variant)
    _print_summary(result.summary, f"Summary ({result.run_dir})")


@click.command(name="fewshot")
@config_option
@override_option
@seed_option
@click.option("--iterations", type=int, default=1, show_default=True)
def fewshot_(config_path, overrides, seed, iterations):
    """Alternate planning with online fine-tuning of the dynamics model."""
    from rmppi.harness.pipeline import cmd_fewshot

    result = cmd_fewshot(_load(config_path, overrides, seed), iterations)
    _print_summary(result.summary, f"After {iterations} iterations ({result.run_dir})")


@click.command(name="oracle-check")
@click.option(
    "--fixtures",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Fixture suite, defaults to fixtures/oracle_suite.json.",
)
@click.option("--report", type=click.Path(dir_okay=False, path_type=Path), default=None)
def oracle_check_(fixtures, report):
    """Check the tabular identities on the fixture MDPs."""
    from rmppi.harness.pipeline import cmd_oracle_check

    result = cmd_oracle_check(fixtures, report)
    click.echo(f"{len(result.results)} fixture cases, no violations")


@click.command(name="ablate")
@config_option
@click.option("--key", required=True, metavar="planner.KEY", help="Planner key to vary.")
@click.option("--values", required=True, metavar="V1,V2,...", help="Comma-separated values.")
@override_option
@seed_option
def ablate_(config_path, key, values, overrides, seed):
    """Re-run once per value of one planner key, e.g. --key planner.samples --values 64,256."""
    from rmppi.harness.pipeline import cmd_ablate

    points = [v.strip() for v in values.split(",") if v.strip()]
    table = cmd_ablate(_load(config_path, overrides, seed), key, points)
    click.echo(table.to_string(index=False))


@click.command(name="presets")
def presets_():
    """List the planner and dynamics presets."""
    console = Console()
    table = Table(title="Planner presets")
    keys = ["horizon", "samples", "sigma", "temperature", "gamma", "omega_prime", "top_ratio"]
    table.add_column("name")
    for key in keys:
        table.add_column(key, justify="right")
    for name, values in PLANNER_PRESETS.items():
        table.add_row(name, *(str(values.get(k, "-")) for k in keys))
    console.print(table)

    table = Table(title="Dynamics presets")
    keys = ["hidden", "activation", "learning_rate", "batch_size", "window", "gamma", "dataset_steps"]
    table.add_column("name")
    for key in keys:
        table.add_column(key, justify="right")
    for name, values in DYNAMICS_PRESETS.items():
        table.add_row(name, *(str(values[k]) for k in keys))
    console.print(table)


def _print_summary(summary, title):
    table = Table(title=title)
    table.add_column("metric")
    table.add_column("mean", justify="right")
    table.add_column("std", justify="right")
    for metric, mean, std in summary.itertuples(index=False):
        table.add_row(metric, f"{mean:.4f}", f"{std:.4f}")
    Console().print(table)


commands = [train_dynamics_, run_, fewshot_, oracle_check_, ablate_, presets_]
