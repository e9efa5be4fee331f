"""Command-line interface.

Subcommands map to the experiment protocols: `run` (single baseline
simulation), `compare-agents`, `sweep-dirichlet`, and `ablate-signals`. All
accept --config/--seed/--seeds/--out/--set/--jobs. Without --config, the
desk-scale profile is used (table defaults with DQN schedules shortened to
the run length); a config file is taken literally. Exit status is nonzero if
any run fails.
"""

from __future__ import annotations

import sys

import click

from . import __version__, kernels
from .config import ConfigError, SimConfig, desk_profile, load_config
from .experiments import make_spec, run_experiment

_KIND_BY_COMMAND = {
    "run": "baseline",
    "compare-agents": "agent_comparison",
    "sweep-dirichlet": "dirichlet_sweep",
    "ablate-signals": "signal_budget",
}


def _common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="YAML config file (omit for the desk-scale profile)."),
        click.option("--seed", type=int, default=None,
                     help="Single master seed (overrides the schedule)."),
        click.option("--seeds", default=None, metavar="LIST",
                     help="Comma-separated seed list."),
        click.option("--out", "out_dir", type=click.Path(), default="out",
                     show_default=True, help="Output directory."),
        click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                     help="Dotted-path config override (repeatable)."),
        click.option("--jobs", type=int, default=1, show_default=True,
                     help="Worker processes for condition x seed runs."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _parse_seeds(seeds: str | None, seed: int | None):
    if seeds is not None:
        try:
            return [int(s) for s in seeds.split(",") if s.strip()]
        except ValueError:
            raise click.ClickException(f"--seeds must be integers, got {seeds!r}")
    if seed is not None:
        return [seed]
    return None


def _load(config_path, overrides):
    base = desk_profile(SimConfig()) if config_path is None else None
    try:
        return load_config(config_path, tuple(overrides), base=base)
    except ConfigError as exc:
        raise click.ClickException(str(exc))


def _fmt_stat(stat: dict) -> str:
    if stat["mean"] is None:
        return "n/a"
    if stat["std"] is None:
        return f"{stat['mean']:.4f}"
    return f"{stat['mean']:.4f} +/- {stat['std']:.4f}"


def _execute(command: str, config_path, seed, seeds, out_dir, overrides, jobs):
    cfg = _load(config_path, overrides)
    seed_list = _parse_seeds(seeds, seed)
    if command == "run" and seed_list is None:
        seed_list = [cfg.master_seed]
    spec = make_spec(_KIND_BY_COMMAND[command], cfg, out_dir, seeds=seed_list)
    summary, failures = run_experiment(spec, jobs=max(1, jobs))
    for condition, stats in summary.items():
        click.echo(
            f"{condition}: acc={_fmt_stat(stats['final_accuracy'])}"
            f"  asr={_fmt_stat(stats['final_asr'])}"
            f"  auc={_fmt_stat(stats['mean_roc_auc'])}"
            f"  reward={_fmt_stat(stats['mean_reward'])}"
        )
    click.echo(f"artifacts written to {out_dir}/")
    if failures:
        for name, s, tb in failures:
            click.echo(f"FAILED condition={name} seed={s}\n{tb}", err=True)
        sys.exit(1)


@click.group()
@click.version_option(__version__)
def main():
    """Deterministic federated-learning simulator with a trust-aware DQN defense."""


@main.command("run")
@_common
def run_cmd(config_path, seed, seeds, out_dir, overrides, jobs):
    """Run the baseline pipeline (single seed unless --seeds is given)."""
    _execute("run", config_path, seed, seeds, out_dir, overrides, jobs)


@main.command("compare-agents")
@_common
def compare_agents_cmd(config_path, seed, seeds, out_dir, overrides, jobs):
    """Run all four controllers over the agent-comparison seed schedule."""
    _execute("compare-agents", config_path, seed, seeds, out_dir, overrides, jobs)


@main.command("sweep-dirichlet")
@_common
def sweep_dirichlet_cmd(config_path, seed, seeds, out_dir, overrides, jobs):
    """Sweep the Dirichlet concentration over {0.1..1.0, 5.0}."""
    _execute("sweep-dirichlet", config_path, seed, seeds, out_dir, overrides, jobs)


@main.command("ablate-signals")
@_common
def ablate_signals_cmd(config_path, seed, seeds, out_dir, overrides, jobs):
    """Run the three signal budgets (full / no_validation / directional_only)."""
    _execute("ablate-signals", config_path, seed, seeds, out_dir, overrides, jobs)


@main.command("backend")
def backend_cmd():
    """Report which kernel backend (cython or numpy) is active."""
    click.echo(kernels.backend())


if __name__ == "__main__":
    main()
