"""
EdgeRes: command-line benchmark runner.
Builds ESN / SCR / PTA reservoirs, runs seeded repetitions and writes
result tables and per-epoch traces.
"""

from typing import Optional

import click
from pydantic import ValidationError

from app.core.config import get_settings, merge_overrides, read_config_file
from app.core.errors import EdgeResError
from app.core.schemas import ExperimentConfig, ExperimentResult, ModelName, TaskName
from app.services.bench_service import resume_experiment, run_experiment, run_sweep, seed_streams
from app.utils.datasets import export_dataset, generate
from app.utils.logger import setup_logger
from app.utils.store import get_store

logger = setup_logger("edgeres.main")

TASKS = [t.value for t in TaskName]
MODELS = [m.value for m in ModelName]


def build_config(config_file: Optional[str], **cli_values) -> ExperimentConfig:
    """Defaults < settings < config file < CLI flags."""
    settings = get_settings()
    file_values = read_config_file(config_file) if config_file else {}
    nested = merge_overrides(file_values, cli_values)
    nested.setdefault("kappa", settings.default_kappa)
    nested.setdefault("repetitions", settings.default_repetitions)
    nested.setdefault("output_path", settings.output_dir)
    return ExperimentConfig.model_validate(nested)


def _fail(e: Exception):
    if isinstance(e, ValidationError):
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise click.ClickException(f"Invalid configuration: {problems}")
    raise click.ClickException(str(e))


def _report(result: ExperimentResult):
    mean = f"{result.mean:.6g}" if result.mean is not None else "n/a"
    std = f"{result.std:.3g}" if result.std is not None else "n/a"
    done = sum(1 for r in result.repetitions if r.status == "done")
    click.echo(
        f"{result.task.value}/{result.model.value} ω={result.config.reservoir.input_scaling:g}: "
        f"{result.metric_name} = {mean} ± {std} "
        f"({done}/{result.config.repetitions} repetitions, run {result.run_id})"
    )


def _require_complete(results: list[ExperimentResult]):
    incomplete = [r.run_id for r in results if not r.complete]
    if incomplete:
        raise click.ClickException(
            f"Some repetitions failed in {', '.join(incomplete)}; fix the cause and `resume` the run"
        )


def _experiment_options(fn):
    options = [
        click.option("--task", type=click.Choice(TASKS), default=None, help="Benchmark task."),
        click.option("--model", type=click.Choice(MODELS), default=None, help="Reservoir model."),
        click.option("--units", type=int, default=None, help="Reservoir size N."),
        click.option("--input-scaling", type=float, default=None, help="Input scaling ω."),
        click.option("--rho", type=float, default=None,
                     help="Spectral radius (ESN), ring weight (SCR) or initial gain (PTA)."),
        click.option("--kappa", type=float, default=None, help="Ridge regularization κ."),
        click.option("--repetitions", type=int, default=None, help="Seeded repetitions."),
        click.option("--seed", type=int, default=None, help="Base seed; repetition i uses seed + i."),
        click.option("--epochs", type=int, default=None, help="PTA max epochs."),
        click.option("--learning-rate", type=float, default=None, help="PTA learning rate."),
        click.option("--momentum", type=float, default=None, help="PTA momentum."),
        click.option("--budget", type=int, default=None,
                     help="Random-search candidates (default: time-matched to PTA)."),
        click.option("--length", type=int, default=None, help="Series length T."),
        click.option("--washout", type=int, default=None, help="Washout τ (default 2N for mc, 100 otherwise)."),
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Flat key = value experiment file."),
        click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _cli_values(**kw) -> dict:
    return {
        "task": kw["task"],
        "model": kw["model"],
        "units": kw["units"],
        "input_scaling": kw["input_scaling"],
        "rho": kw["rho"],
        "kappa": kw["kappa"],
        "repetitions": kw["repetitions"],
        "seed": kw["seed"],
        "epochs": kw["epochs"],
        "learning_rate": kw["learning_rate"],
        "momentum": kw["momentum"],
        "budget": kw["budget"],
        "length": kw["length"],
        "washout": kw["washout"],
        "out": kw["out"],
    }


@click.group()
def cli():
    """EdgeRes: edge-of-stability reservoir benchmarks."""
    interrupted = get_store().interrupt_active_runs()
    if interrupted:
        logger.warning(f"Marked {interrupted} unfinished run(s) as interrupted", extra={"status": "interrupted"})


@cli.command()
@_experiment_options
def run(config_file, **kw):
    """Run one experiment (task × model) over seeded repetitions."""
    try:
        cfg = build_config(config_file, **_cli_values(**kw))
        result = run_experiment(cfg)
    except (ValidationError, EdgeResError) as e:
        _fail(e)
    _report(result)
    _require_complete([result])


@cli.command()
@click.option("--table", type=click.Choice(["memory", "prediction"]), required=True,
              help="memory: MC for ω ∈ {0.01, 0.1, 1}; prediction: NLM, NARMA-20, Mackey-Glass.")
@_experiment_options
def sweep(table, config_file, **kw):
    """Run every model on a comparison table's task settings."""
    try:
        cfg = build_config(config_file, **_cli_values(**kw))
        results = run_sweep(cfg, table)
    except (ValidationError, EdgeResError) as e:
        _fail(e)
    for result in results:
        _report(result)
    _require_complete(results)


@cli.command()
@click.argument("run_id")
def resume(run_id):
    """Finish the pending or failed repetitions of an earlier run."""
    try:
        result = resume_experiment(run_id)
    except EdgeResError as e:
        _fail(e)
    _report(result)
    _require_complete([result])


@cli.command()
def runs():
    """List recorded runs."""
    rows = get_store().list_runs()
    if not rows:
        click.echo("No runs recorded.")
        return
    for r in rows:
        click.echo(
            f"{r['id']}  {r['task']:<8} {r['model']:<4} {r['status']:<11} "
            f"{r['done'] or 0}/{r['repetitions']}  {r['started_at']}"
        )


@cli.command("export-dataset")
@click.option("--task", type=click.Choice(TASKS), required=True)
@click.option("--length", type=int, default=20000, show_default=True)
@click.option("--units", type=int, default=100, show_default=True, help="N (sets the MC delay count 2N).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--washout", type=int, default=None)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), required=True)
def export_dataset_cmd(task, length, units, seed, washout, out_file):
    """Write a generated dataset as a comma-separated file."""
    try:
        ds = generate(TaskName(task), length, units, seed_streams(seed)[0], washout)
        path = export_dataset(ds, out_file)
    except EdgeResError as e:
        _fail(e)
    click.echo(f"Wrote {ds.length} rows to {path}")


if __name__ == "__main__":
    cli()
