"""
Benchmark Service
Runs seeded ESN / SCR / PTA experiments: dataset generation, reservoir
construction, PTA adaptation, ridge readout and evaluation, random search
for the baselines, repetitions on a worker pool with every finished
repetition persisted to the run ledger, and output emission.
"""

import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Callable, Optional

import numpy as np

from app.core.config import get_settings
from app.core.errors import EdgeResError, ExperimentError, InvalidArgumentError, InvalidConfigError
from app.core.pta import PTAParameters, lyapunov_from_states, lyapunov_trace, train_pta
from app.core.readout import MetricReport, evaluate, fit_ridge, predict
from app.core.reservoir import ReservoirWeights, build_reservoir, collect_states, spawn_rngs
from app.core.schemas import (
    EpochRecord,
    ExperimentConfig,
    ExperimentResult,
    MetricValues,
    ModelName,
    RepetitionResult,
    ReservoirConfig,
    RunStatus,
    SelectedHyper,
    TaskName,
    Topology,
)
from app.utils.datasets import Dataset, generate
from app.utils.logger import setup_logger
from app.utils.report_writer import emit_outputs
from app.utils.store import RunStore, get_store
from app.utils.time_estimator import TimeEstimator, measure

logger = setup_logger("edgeres.bench_service")

BUDGET_FLOOR = 10
BUDGET_CAP = 200

MEMORY_SCALINGS = (0.01, 0.1, 1.0)
PREDICTION_TASKS = (TaskName.nlm, TaskName.narma20, TaskName.mg)
ALL_MODELS = (ModelName.esn, ModelName.scr, ModelName.pta)

# ─── Calibration cache (one PTA timing per task setting per process) ───
_calibrations: dict[tuple, dict[str, float]] = {}
_calibration_lock = threading.Lock()

Evaluator = Callable[[float, float], float]


def metric_name(task: TaskName) -> str:
    return "mc" if task == TaskName.mc else "nmse"


def higher_is_better(task: TaskName) -> bool:
    return task == TaskName.mc


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """(dataset, reservoir, search) streams for one repetition seed."""
    data_rng, reservoir_rng, search_rng = spawn_rngs(seed, 3)
    return data_rng, reservoir_rng, search_rng


def dataset_for(cfg: ExperimentConfig, seed: int) -> Dataset:
    return generate(cfg.task, cfg.length, cfg.reservoir.n_units, seed_streams(seed)[0], cfg.washout)


def reservoir_config_for(
    cfg: ExperimentConfig,
    seed: int,
    spectral_radius: Optional[float] = None,
    bias_scaling: Optional[float] = None,
) -> ReservoirConfig:
    """
    ESN: dense, ρ and ω_b as given. SCR: ring whose shared weight is ρ.
    PTA: ring with unit weight, ρ as the initial gain, no fixed bias.
    """
    base = cfg.reservoir
    rho = base.spectral_radius if spectral_radius is None else spectral_radius
    omega_b = base.bias_scaling if bias_scaling is None else bias_scaling
    if cfg.model == ModelName.esn:
        update = dict(topology=Topology.dense, spectral_radius=rho, bias_scaling=omega_b)
    elif cfg.model == ModelName.scr:
        update = dict(topology=Topology.ring, ring_weight=rho, spectral_radius=rho, bias_scaling=omega_b)
    else:
        update = dict(topology=Topology.ring, ring_weight=1.0, spectral_radius=rho, bias_scaling=0.0)
    return base.model_copy(update={**update, "seed": seed})


# ─────────────────────────────────────
# READOUT WINDOWS
# ─────────────────────────────────────

def validation_windows(ds: Dataset) -> tuple[tuple[int, int], tuple[int, int]]:
    val_start = ds.train_end - ds.val_len
    if ds.washout >= val_start:
        raise InvalidArgumentError(
            f"washout {ds.washout} leaves no training samples before the validation window at {val_start}"
        )
    return (ds.washout, val_start), (val_start, ds.train_end)


def evaluation_windows(ds: Dataset) -> tuple[tuple[int, int], tuple[int, int]]:
    if ds.washout >= ds.train_end:
        raise InvalidArgumentError(f"washout {ds.washout} covers the whole training segment")
    return (ds.washout, ds.train_end), (ds.train_end, ds.test_end)


def score_states(
    states: np.ndarray,
    ds: Dataset,
    fit: tuple[int, int],
    score: tuple[int, int],
    kappa: float,
) -> MetricReport:
    """Fit the readout on time window `fit`, evaluate on `score`. Column c of states is time washout + c."""
    tau = ds.washout
    readout = fit_ridge(states[:, fit[0] - tau: fit[1] - tau], ds.targets[:, fit[0]: fit[1]], kappa)
    pred = predict(readout, states[:, score[0] - tau: score[1] - tau])
    return evaluate(pred, ds.targets[:, score[0]: score[1]], memory_task=ds.name == TaskName.mc.value)


def primary_metric(report: MetricReport) -> float:
    return report.mc if report.mc is not None else float(np.mean(report.nmse))


# ─────────────────────────────────────
# SINGLE RUN
# ─────────────────────────────────────

def _run_pta(cfg: ExperimentConfig, ds: Dataset, weights: ReservoirWeights, res_cfg: ReservoirConfig):
    hyper = cfg.pta_hyper
    train_inputs = ds.inputs[:, : ds.train_end]
    memory = cfg.task == TaskName.mc
    records: list[EpochRecord] = []

    def record_epoch(epoch: int, params: PTAParameters, mean_lambda: float):
        test_mc = None
        if memory:
            states = collect_states(weights, ds.inputs, ds.washout, params.gain, params.bias)
            test_mc = score_states(states, ds, *evaluation_windows(ds), cfg.kappa).mc
        records.append(EpochRecord(epoch=epoch, mean_lambda=mean_lambda, test_mc=test_mc))

    initial = PTAParameters.initial(weights.n_units, res_cfg.spectral_radius, 1.0)
    record_epoch(0, initial, float(np.mean(lyapunov_trace(weights, initial, train_inputs, hyper.washout))))

    params, trace = train_pta(
        weights, train_inputs, hyper,
        init_gain=res_cfg.spectral_radius, init_bias=1.0,
        on_epoch_end=record_epoch,
    )
    states = collect_states(weights, ds.inputs, ds.washout, params.gain, params.bias)
    report = score_states(states, ds, *evaluation_windows(ds), cfg.kappa)
    test_cols = states[:, ds.train_end - ds.washout:]
    test_lambda = float(np.mean(lyapunov_from_states(test_cols, params.gain, hyper.eta_floor)))
    return report, test_lambda, trace.epochs_run, records


def run_single(cfg: ExperimentConfig, seed: int, dataset: Optional[Dataset] = None) -> RepetitionResult:
    """
    One seeded pipeline: dataset, reservoir, (PTA adaptation), states,
    readout on the training split, metric on the test split. Baselines use
    the ρ / ω_b in `cfg.reservoir` as given.
    """
    try:
        ds = dataset if dataset is not None else dataset_for(cfg, seed)
        res_cfg = reservoir_config_for(cfg, seed)
        weights = build_reservoir(res_cfg, seed_streams(seed)[1])

        test_lambda, epochs_run, records = None, None, []
        if cfg.model == ModelName.pta:
            report, test_lambda, epochs_run, records = _run_pta(cfg, ds, weights, res_cfg)
        else:
            states = collect_states(weights, ds.inputs, ds.washout)
            report = score_states(states, ds, *evaluation_windows(ds), cfg.kappa)
    except ExperimentError:
        raise
    except EdgeResError as e:
        raise ExperimentError(str(e), cfg.task.value, cfg.model.value, seed) from e

    metrics = MetricValues(
        metric=primary_metric(report),
        nmse=report.nmse,
        r_squared=report.r_squared,
        mc=report.mc,
        test_lambda=test_lambda,
        nmse_normalization=report.nmse_normalization,
    )
    return RepetitionResult(index=0, seed=seed, metrics=metrics, epochs_run=epochs_run, trace=records)


# ─────────────────────────────────────
# RANDOM SEARCH
# ─────────────────────────────────────

def _open_uniform(rng: np.random.Generator, high: float) -> float:
    """Sample from (0, high); 0 when high is 0."""
    if high <= 0.0:
        return 0.0
    return float(rng.uniform(np.nextafter(0.0, 1.0), high))


def bias_search_bound(cfg: ExperimentConfig) -> float:
    """ω_b is searched in (0, ω) on the memory task, (0, 1) otherwise."""
    return cfg.reservoir.input_scaling if cfg.task == TaskName.mc else 1.0


def validation_score(cfg: ExperimentConfig, ds: Dataset, seed: int, rho: float, omega_b: float) -> float:
    res_cfg = reservoir_config_for(cfg, seed, rho, omega_b)
    weights = build_reservoir(res_cfg, seed_streams(seed)[1])
    states = collect_states(weights, ds.inputs[:, : ds.train_end], ds.washout)
    return primary_metric(score_states(states, ds, *validation_windows(ds), cfg.kappa))


def random_search(
    cfg: ExperimentConfig,
    rng: np.random.Generator,
    budget: Optional[int] = None,
    evaluator: Optional[Evaluator] = None,
    dataset: Optional[Dataset] = None,
    seed: Optional[int] = None,
    workers: int = 1,
) -> SelectedHyper:
    """
    Sample `budget` (ρ, ω_b) pairs and keep the best validation score
    (max MC / min NMSE); ties go to the earliest sample. Without an injected
    evaluator, candidates are scored on the validation window of `dataset`.
    """
    if cfg.model == ModelName.pta:
        raise InvalidConfigError("random_search applies to the esn and scr baselines only")
    budget = budget if budget is not None else cfg.search_budget
    if budget is None or budget < 1:
        raise InvalidConfigError(f"search budget must be >= 1, got {budget}")

    if evaluator is None:
        seed = cfg.base_seed if seed is None else seed
        ds = dataset if dataset is not None else dataset_for(cfg, seed)

        def evaluator(rho: float, omega_b: float) -> float:
            return validation_score(cfg, ds, seed, rho, omega_b)

    bias_high = bias_search_bound(cfg)
    candidates = [(_open_uniform(rng, 1.0), _open_uniform(rng, bias_high)) for _ in range(budget)]
    maximize = higher_is_better(cfg.task)
    worst = -np.inf if maximize else np.inf

    def safe_score(candidate: tuple[float, float]) -> float:
        try:
            score = float(evaluator(*candidate))
        except EdgeResError as e:
            logger.warning(f"Search candidate rho={candidate[0]:.4f} omega_b={candidate[1]:.4f} failed: {e}")
            return worst
        return score if np.isfinite(score) else worst

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(safe_score, candidates))
    else:
        scores = [safe_score(c) for c in candidates]

    best = 0
    for i, score in enumerate(scores):
        if (score > scores[best]) if maximize else (score < scores[best]):
            best = i
    if scores[best] == worst:
        raise ExperimentError("every random-search candidate failed", cfg.task.value, cfg.model.value, seed)

    rho, omega_b = candidates[best]
    logger.info(
        f"Random search ({budget} candidates): rho={rho:.4f} omega_b={omega_b:.4f} "
        f"validation {metric_name(cfg.task)}={scores[best]:.6g}",
        extra={"task": cfg.task.value, "model": cfg.model.value, "budget": budget},
    )
    return SelectedHyper(spectral_radius=rho, bias_scaling=omega_b, validation_score=scores[best])


def with_selected(cfg: ExperimentConfig, selected: SelectedHyper) -> ExperimentConfig:
    reservoir = cfg.reservoir.model_copy(update={
        "spectral_radius": selected.spectral_radius,
        "bias_scaling": selected.bias_scaling,
    })
    return cfg.model_copy(update={"reservoir": reservoir})


def calibrate_budget(cfg: ExperimentConfig) -> dict[str, float]:
    """
    Search budget matching one PTA repetition's wall-clock time:
    floor(PTA seconds / one baseline evaluation), clipped to [10, 200].
    """
    key = (cfg.task, cfg.model, cfg.reservoir.n_units, cfg.reservoir.input_scaling, cfg.length,
           cfg.washout, cfg.kappa, cfg.pta_hyper.model_dump_json(), cfg.base_seed)
    with _calibration_lock:
        if key in _calibrations:
            return _calibrations[key]

    pta_cfg = cfg.model_copy(update={"model": ModelName.pta})
    _, pta_seconds = measure(run_single, pta_cfg, cfg.base_seed)
    ds = dataset_for(cfg, cfg.base_seed)
    _, eval_seconds = measure(validation_score, cfg, ds, cfg.base_seed, 0.5, 0.5 * bias_search_bound(cfg))

    ratio = pta_seconds / max(eval_seconds, 1e-9)
    budget = int(min(max(np.floor(ratio), BUDGET_FLOOR), BUDGET_CAP))
    calibration = {"pta_seconds": round(pta_seconds, 3), "eval_seconds": round(eval_seconds, 4), "budget": budget}
    logger.info(
        f"Search budget calibrated: PTA {pta_seconds:.1f}s / eval {eval_seconds:.3f}s → {budget}",
        extra={"task": cfg.task.value, "model": cfg.model.value, "budget": budget},
    )
    with _calibration_lock:
        _calibrations[key] = calibration
    return calibration


# ─────────────────────────────────────
# EXPERIMENTS
# ─────────────────────────────────────

def run_repetition(cfg: ExperimentConfig, index: int, seed: int, budget: Optional[int]) -> RepetitionResult:
    if cfg.model == ModelName.pta:
        rep = run_single(cfg, seed)
    else:
        ds = dataset_for(cfg, seed)
        selected = random_search(cfg, seed_streams(seed)[2], budget=budget, dataset=ds, seed=seed)
        rep = run_single(with_selected(cfg, selected), seed, dataset=ds)
        rep.selected = selected
    rep.index = index
    return rep


def aggregate(
    cfg: ExperimentConfig,
    repetitions: list[RepetitionResult],
    run_id: Optional[str] = None,
) -> ExperimentResult:
    """Mean and population std over the successful repetitions."""
    values = [r.metrics.metric for r in repetitions if r.status == "done" and r.metrics is not None]
    return ExperimentResult(
        run_id=run_id,
        task=cfg.task,
        model=cfg.model,
        config=cfg,
        metric_name=metric_name(cfg.task),
        repetitions=sorted(repetitions, key=lambda r: r.index),
        mean=float(np.mean(values)) if values else None,
        std=float(np.std(values)) if values else None,
        complete=len(values) == cfg.repetitions,
    )


def _resolve_budget(cfg: ExperimentConfig) -> tuple[Optional[int], dict[str, float]]:
    if cfg.model == ModelName.pta:
        return None, {}
    if cfg.search_budget is not None:
        return cfg.search_budget, {}
    calibration = calibrate_budget(cfg)
    return int(calibration["budget"]), calibration


def _execute(
    cfg: ExperimentConfig,
    run_id: str,
    jobs: list[tuple[int, int]],
    budget: Optional[int],
    calibration: dict[str, float],
    store: RunStore,
    workers: int,
    started_at: str,
) -> ExperimentResult:
    estimator = TimeEstimator()
    estimator.start_run(len(jobs))
    start = time.time()
    ctx = {"task": cfg.task.value, "model": cfg.model.value, "run_id": run_id}

    def job(index: int, seed: int) -> RepetitionResult:
        record = estimator.start(f"{cfg.task.value}/{cfg.model.value}", index)
        logger.info(f"Repetition {index} started (seed {seed})", extra={**ctx, "repetition": index, "seed": seed})
        try:
            rep = run_repetition(cfg, index, seed, budget)
            estimator.finish(record, "done")
        except Exception as e:
            estimator.finish(record, "error")
            rep = RepetitionResult(index=index, seed=seed, status="error", error=str(e))
            logger.error(
                f"Repetition {index} failed: {e}",
                extra={**ctx, "repetition": index, "seed": seed, "error": str(e)},
            )
        rep.duration_s = record.duration_s or 0.0
        store.mark_repetition(
            run_id, index, rep.status,
            rep.metrics.metric if rep.metrics else None,
            rep.model_dump_json(), rep.error, rep.duration_s,
        )
        stats = estimator.get_stats(workers)
        if rep.status == "done":
            logger.info(
                f"Repetition {index} done: {metric_name(cfg.task)}={rep.metrics.metric:.6g} "
                f"in {rep.duration_s:.1f}s | ETA {estimator.format_eta(stats['eta_seconds'])}",
                extra={**ctx, "repetition": index, "seed": seed, "metric": rep.metrics.metric,
                       "duration_s": rep.duration_s, "eta_s": stats["eta_seconds"],
                       "progress": stats["progress_pct"]},
            )
        return rep

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda j: job(*j), jobs))
    else:
        for index, seed in jobs:
            job(index, seed)

    # The ledger holds every repetition of the run, including those of earlier sessions.
    repetitions = []
    for row in store.get_repetitions(run_id):
        if row["payload"]:
            repetitions.append(RepetitionResult.model_validate_json(row["payload"]))
        else:
            repetitions.append(RepetitionResult(index=row["idx"], seed=row["seed"], status="error", error="not run"))

    result = aggregate(cfg, repetitions, run_id)
    result.search_budget = budget
    result.calibration = calibration
    result.wall_clock_s = time.time() - start
    result.started_at = started_at
    result.finished_at = datetime.now().isoformat()

    status = RunStatus.completed if result.complete else RunStatus.incomplete
    store.finish_run(run_id, status.value)
    emit_outputs(result, cfg.output_path)
    mean = f"{result.mean:.6g}" if result.mean is not None else "n/a"
    std = f"{result.std:.3g}" if result.std is not None else "n/a"
    logger.info(
        f"Experiment {run_id} {status.value}: {result.metric_name} = {mean} ± {std}",
        extra={**ctx, "status": status.value, "duration_s": round(result.wall_clock_s, 2)},
    )
    return result


def run_experiment(
    cfg: ExperimentConfig,
    store: Optional[RunStore] = None,
    workers: Optional[int] = None,
) -> ExperimentResult:
    """
    Repetition i uses seed base_seed + i. Baselines run a fresh random search
    per repetition before the test evaluation; PTA adapts then evaluates.
    Failed repetitions are recorded and the result is marked incomplete.
    """
    store = store or get_store()
    workers = workers or get_settings().workers
    budget, calibration = _resolve_budget(cfg)

    run_id = f"run_{datetime.now().strftime('%Y%m%d_%H%M%S')}_{uuid.uuid4().hex[:6]}"
    seeds = [cfg.base_seed + i for i in range(cfg.repetitions)]
    store.create_run(
        run_id, cfg.task.value, cfg.model.value, cfg.model_dump(mode="json"), seeds,
        extra={"search_budget": budget, "calibration": calibration},
    )
    logger.info(
        f"Experiment {run_id}: {cfg.model.value} on {cfg.task.value}, {cfg.repetitions} repetitions",
        extra={"task": cfg.task.value, "model": cfg.model.value, "run_id": run_id, "budget": budget},
    )
    return _execute(cfg, run_id, list(enumerate(seeds)), budget, calibration, store,
                    workers, datetime.now().isoformat())


def resume_experiment(
    run_id: str,
    store: Optional[RunStore] = None,
    workers: Optional[int] = None,
) -> ExperimentResult:
    """Re-run the pending or failed repetitions of an earlier run and re-emit its outputs."""
    store = store or get_store()
    workers = workers or get_settings().workers
    run = store.get_run(run_id)
    if not run:
        raise InvalidArgumentError(f"Run not found: {run_id}")

    cfg = ExperimentConfig.model_validate(run["config"])
    jobs = [(p["idx"], p["seed"]) for p in store.get_pending_repetitions(run_id)]
    store.set_status(run_id, RunStatus.running.value)
    logger.info(f"Resuming {run_id}: {len(jobs)} repetition(s) left", extra={"run_id": run_id})
    extra = run["extra"]
    return _execute(cfg, run_id, jobs, extra.get("search_budget"), extra.get("calibration", {}),
                    store, workers, run["started_at"])


def run_sweep(
    base: ExperimentConfig,
    table: str,
    store: Optional[RunStore] = None,
    workers: Optional[int] = None,
) -> list[ExperimentResult]:
    """
    `memory`: every model on MC for ω ∈ {0.01, 0.1, 1}.
    `prediction`: every model on NLM, NARMA-20 and Mackey-Glass.
    """
    if table == "memory":
        settings = [(TaskName.mc, w) for w in MEMORY_SCALINGS]
    elif table == "prediction":
        settings = [(task, base.reservoir.input_scaling) for task in PREDICTION_TASKS]
    else:
        raise InvalidConfigError(f"Unknown sweep table '{table}' (expected memory or prediction)")

    results = []
    for task, omega in settings:
        for model in ALL_MODELS:
            reservoir = base.reservoir.model_copy(update={"input_scaling": omega})
            cfg = base.model_copy(update={"task": task, "model": model, "reservoir": reservoir})
            results.append(run_experiment(cfg, store=store, workers=workers))
    return results
