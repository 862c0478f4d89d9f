"""
Result Writer
Writes an experiment's artifacts: a JSON summary, the raw per-repetition
metrics, the per-epoch PTA trace, and a comparison table that accumulates
one row per experiment across runs.
"""

import os
from typing import Optional

import numpy as np
import pandas as pd

from app.core.config import get_settings
from app.core.errors import OutputError
from app.core.schemas import ExperimentResult
from app.utils.logger import setup_logger

logger = setup_logger("edgeres.report_writer")

SUMMARY_FILE = "summary.json"
REPETITIONS_FILE = "repetitions.csv"
TRACE_FILE = "trace.csv"

COMPARISON_COLUMNS = [
    "run_id", "task", "model", "n_units", "input_scaling", "metric", "mean", "std",
    "repetitions", "complete", "search_budget", "wall_clock_s", "finished_at",
]


def run_dir(result: ExperimentResult, root: str) -> str:
    name = f"{result.task.value}_{result.model.value}_w{result.config.reservoir.input_scaling:g}"
    return os.path.join(root, name)


def repetitions_frame(result: ExperimentResult) -> pd.DataFrame:
    rows = []
    for rep in result.repetitions:
        selected = rep.selected
        rows.append({
            "repetition": rep.index,
            "seed": rep.seed,
            "status": rep.status,
            "metric": rep.metrics.metric if rep.metrics else np.nan,
            "test_lambda": rep.metrics.test_lambda if rep.metrics else np.nan,
            "epochs_run": rep.epochs_run,
            "spectral_radius": selected.spectral_radius if selected else np.nan,
            "bias_scaling": selected.bias_scaling if selected else np.nan,
            "duration_s": rep.duration_s,
            "error": rep.error or "",
        })
    return pd.DataFrame(rows)


def trace_frame(result: ExperimentResult) -> pd.DataFrame:
    rows = [
        {"repetition": rep.index, "epoch": rec.epoch, "mean_lambda": rec.mean_lambda, "test_mc": rec.test_mc}
        for rep in result.repetitions
        for rec in rep.trace
    ]
    return pd.DataFrame(rows, columns=["repetition", "epoch", "mean_lambda", "test_mc"])


def aggregate_from_file(path: str) -> tuple[float, float]:
    """Recompute (mean, population std) from a written repetitions file."""
    frame = pd.read_csv(path)
    values = frame.loc[frame["status"] == "done", "metric"].to_numpy(dtype=float)
    return float(np.mean(values)), float(np.std(values))


def load_summary(path: str) -> ExperimentResult:
    with open(path, "r", encoding="utf-8") as f:
        return ExperimentResult.model_validate_json(f.read())


def _append_comparison(result: ExperimentResult, path: str):
    row = pd.DataFrame([{
        "run_id": result.run_id or "",
        "task": result.task.value,
        "model": result.model.value,
        "n_units": result.config.reservoir.n_units,
        "input_scaling": result.config.reservoir.input_scaling,
        "metric": result.metric_name,
        "mean": result.mean,
        "std": result.std,
        "repetitions": len(result.repetitions),
        "complete": result.complete,
        "search_budget": result.search_budget,
        "wall_clock_s": round(result.wall_clock_s, 2),
        "finished_at": result.finished_at or "",
    }], columns=COMPARISON_COLUMNS)
    row.to_csv(path, mode="a", header=not os.path.exists(path), index=False)


def emit_outputs(result: ExperimentResult, path: str, comparison_file: Optional[str] = None) -> dict[str, str]:
    """
    Write all artifacts under `path`. The trace file is omitted when the
    model produced no per-epoch trace. Returns {artifact: file path}.
    """
    comparison_file = comparison_file or get_settings().comparison_file
    out_dir = run_dir(result, path)
    written: dict[str, str] = {}
    target = out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)

        target = os.path.join(out_dir, SUMMARY_FILE)
        with open(target, "w", encoding="utf-8") as f:
            f.write(result.model_dump_json(indent=2))
        written["summary"] = target

        target = os.path.join(out_dir, REPETITIONS_FILE)
        repetitions_frame(result).to_csv(target, index=False)
        written["repetitions"] = target

        trace = trace_frame(result)
        if not trace.empty:
            target = os.path.join(out_dir, TRACE_FILE)
            trace.to_csv(target, index=False)
            written["trace"] = target

        target = os.path.join(path, comparison_file)
        _append_comparison(result, target)
        written["comparison"] = target
    except OSError as e:
        raise OutputError(f"Cannot write experiment output ({e.strerror or e})", target) from e

    logger.info(
        f"Outputs written to {out_dir}",
        extra={"task": result.task.value, "model": result.model.value, "run_id": result.run_id},
    )
    return written
