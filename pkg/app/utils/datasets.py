"""
Benchmark Datasets
Generators for the memory-capacity, nonlinear-memorization, NARMA-20 and
Mackey-Glass tasks, the standard 75/25 train/test split with a validation
window at the end of the training segment, and delimited-file export.

Entries that would need samples from before t = 0 (delayed targets, NARMA
history) use a zero history; they fall inside the washout.
"""

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from app.core.errors import GenerationError, InvalidArgumentError, OutputError
from app.core.schemas import TaskName
from app.utils.logger import setup_logger

logger = setup_logger("edgeres.datasets")

DEFAULT_LENGTH = 20000
DEFAULT_WASHOUT = 100


@dataclass
class Dataset:
    name: str
    inputs: np.ndarray  # U×T
    targets: np.ndarray  # Y×T
    washout: int
    train_end: int
    test_end: int
    val_len: int
    target_names: tuple[str, ...] = ("target",)

    @property
    def length(self) -> int:
        return self.inputs.shape[1]


@dataclass
class Segment:
    inputs: np.ndarray
    targets: np.ndarray
    start: int
    stop: int

    def __len__(self) -> int:
        return self.stop - self.start


def split_points(length: int) -> tuple[int, int, int]:
    """(train_end, test_end, val_len): 3/4 of the series for training, validation = test length."""
    train_end = (length * 3) // 4
    test_len = length - train_end
    return train_end, length, test_len


def _make(name: str, inputs: np.ndarray, targets: np.ndarray, washout: int,
          target_names: tuple[str, ...] = ("target",)) -> Dataset:
    if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
        raise GenerationError(f"{name}: generated series contains non-finite values")
    train_end, test_end, val_len = split_points(inputs.shape[1])
    return Dataset(
        name=name,
        inputs=inputs,
        targets=targets,
        washout=washout,
        train_end=train_end,
        test_end=test_end,
        val_len=val_len,
        target_names=target_names,
    )


def _delay(u: np.ndarray, k: int) -> np.ndarray:
    """u shifted right by k samples with zero fill."""
    out = np.zeros_like(u)
    if k < u.shape[0]:
        out[k:] = u[: u.shape[0] - k]
    return out


# ─────────────────────────────────────
# MEMORY CAPACITY
# ─────────────────────────────────────

def mc_targets(u: np.ndarray, n_delays: int) -> np.ndarray:
    """Row k-1 holds u(t-k), k = 1..n_delays."""
    return np.stack([_delay(u, k) for k in range(1, n_delays + 1)])


def gen_mc(length: int, n_units: int, rng: np.random.Generator) -> Dataset:
    n_delays = 2 * n_units
    washout = n_delays
    if length <= n_delays + washout:
        raise InvalidArgumentError(
            f"MC series of length {length} too short for {n_delays} delays and washout {washout}"
        )
    u = rng.uniform(0.0, 0.5, size=length)
    names = tuple(f"delay_{k}" for k in range(1, n_delays + 1))
    return _make("mc", u[np.newaxis, :], mc_targets(u, n_delays), washout, names)


# ─────────────────────────────────────
# NONLINEAR MEMORIZATION
# ─────────────────────────────────────

def nlm_target(u: np.ndarray, nu: float = np.sqrt(2.0), delta: int = 30) -> np.ndarray:
    return np.sin(nu * _delay(u, delta))


def gen_nlm(
    length: int,
    rng: np.random.Generator,
    nu: float = np.sqrt(2.0),
    delta: int = 30,
    washout: int = DEFAULT_WASHOUT,
) -> Dataset:
    if length <= delta + washout:
        raise InvalidArgumentError(f"NLM series of length {length} too short for delay {delta} and washout {washout}")
    u = rng.uniform(0.0, 1.0, size=length)
    return _make("nlm", u[np.newaxis, :], nlm_target(u, nu, delta)[np.newaxis, :], washout)


# ─────────────────────────────────────
# NARMA-20
# ─────────────────────────────────────

def narma20_series(u: np.ndarray, order: int = 20) -> np.ndarray:
    """
    d(t+1) = tanh(0.3 d(t) + 0.05 d(t) Σ_{i<order} d(t-i) + 1.5 u(t-order+1) u(t) + 0.01)
    Returned array is aligned with u: entry t holds d(t+1).
    """
    length = u.shape[0]
    d = np.zeros(length + order)  # d[order + t] holds d(t+1); zeros before are the history
    u_lag = _delay(u, order - 1)
    for t in range(length):
        cur = d[order + t - 1]
        window = d[t: order + t].sum()
        d[order + t] = np.tanh(0.3 * cur + 0.05 * cur * window + 1.5 * u_lag[t] * u[t] + 0.01)
    return d[order:]


def gen_narma20(length: int, rng: np.random.Generator, washout: int = DEFAULT_WASHOUT) -> Dataset:
    if length <= 20 + washout:
        raise InvalidArgumentError(f"NARMA series of length {length} too short for washout {washout}")
    u = rng.uniform(0.0, 0.5, size=length)
    return _make("narma20", u[np.newaxis, :], narma20_series(u)[np.newaxis, :], washout)


# ─────────────────────────────────────
# MACKEY-GLASS
# ─────────────────────────────────────

def mackey_glass_series(
    n_samples: int,
    beta: float = 0.2,
    gamma: float = 0.1,
    delay: float = 30.0,
    n: float = 10.0,
    step: float = 0.1,
    history: float = 1.2,
    transient: int = 1000,
) -> np.ndarray:
    """
    Unit-spaced samples of du/dt = β u(t-δ)/(1 + u(t-δ)^n) − γ u(t), RK4 with
    a fixed internal step. The delayed value is read from the stored grid at
    t - δ and held over the four stages, so the delay must be a whole number
    (at least one) of steps. The first `transient` unit samples are discarded.
    """
    lag = int(round(delay / step))
    per_unit = int(round(1.0 / step))
    if abs(lag * step - delay) > 1e-9 or abs(per_unit * step - 1.0) > 1e-9:
        raise InvalidArgumentError(f"step {step} must divide both the delay {delay} and 1")
    if lag < 1:
        raise InvalidArgumentError(f"delay {delay} must span at least one step of {step}")

    def f(x, x_lag):
        return beta * x_lag / (1.0 + x_lag ** n) - gamma * x

    total = (transient + n_samples) * per_unit
    grid = np.full(lag + total + 1, history, dtype=float)
    for i in range(lag, lag + total):
        x, x_lag = grid[i], grid[i - lag]
        k1 = f(x, x_lag)
        k2 = f(x + 0.5 * step * k1, x_lag)
        k3 = f(x + 0.5 * step * k2, x_lag)
        k4 = f(x + step * k3, x_lag)
        grid[i + 1] = x + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    samples = grid[lag::per_unit][transient: transient + n_samples]
    if not np.all(np.isfinite(samples)):
        raise GenerationError("Mackey-Glass integration produced non-finite values")
    return samples


def gen_mackey_glass(
    length: int,
    beta: float = 0.2,
    gamma: float = 0.1,
    delay: float = 30.0,
    n: float = 10.0,
    step: float = 0.1,
    history: float = 1.2,
    transient: int = 1000,
    washout: int = DEFAULT_WASHOUT,
) -> Dataset:
    """Next-step prediction: target(t) = u(t+1)."""
    if length < 2:
        raise InvalidArgumentError(f"Mackey-Glass series needs length >= 2, got {length}")
    s = mackey_glass_series(length + 1, beta, gamma, delay, n, step, history, transient)
    return _make("mg", s[np.newaxis, :-1], s[np.newaxis, 1:], washout)


# ─────────────────────────────────────
# DISPATCH / SPLIT / EXPORT
# ─────────────────────────────────────

def generate(task: TaskName, length: int, n_units: int, rng: np.random.Generator,
             washout: Optional[int] = None) -> Dataset:
    """Dataset for `task`; `washout` overrides the task default (MC keeps 2N)."""
    wash = DEFAULT_WASHOUT if washout is None else washout
    if task == TaskName.mc:
        ds = gen_mc(length, n_units, rng)
    elif task == TaskName.nlm:
        ds = gen_nlm(length, rng, washout=wash)
    elif task == TaskName.narma20:
        ds = gen_narma20(length, rng, washout=wash)
    else:
        ds = gen_mackey_glass(length, washout=wash)
    logger.debug(f"Generated {ds.name}: T={ds.length} washout={ds.washout}", extra={"task": ds.name})
    return ds


def split(ds: Dataset) -> tuple[Segment, Segment, Segment]:
    """(train, validation, test); validation is the tail of train."""
    if ds.test_end != ds.length or ds.targets.shape[1] != ds.length:
        raise InvalidArgumentError(
            f"{ds.name}: inconsistent lengths (T={ds.length}, test_end={ds.test_end}, targets={ds.targets.shape[1]})"
        )
    if not (0 < ds.val_len <= ds.train_end < ds.test_end):
        raise InvalidArgumentError(
            f"{ds.name}: invalid split (train_end={ds.train_end}, val_len={ds.val_len}, T={ds.length})"
        )

    def seg(start: int, stop: int) -> Segment:
        return Segment(ds.inputs[:, start:stop], ds.targets[:, start:stop], start, stop)

    return (
        seg(0, ds.train_end),
        seg(ds.train_end - ds.val_len, ds.train_end),
        seg(ds.train_end, ds.test_end),
    )


def to_frame(ds: Dataset) -> pd.DataFrame:
    columns = {}
    for i in range(ds.inputs.shape[0]):
        columns[f"input_{i}" if ds.inputs.shape[0] > 1 else "input"] = ds.inputs[i]
    for name, row in zip(ds.target_names, ds.targets):
        columns[name] = row
    frame = pd.DataFrame(columns)
    frame.index.name = "t"
    return frame


def export_dataset(ds: Dataset, path: str) -> str:
    """One row per time step: inputs then targets, header row, comma separated."""
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        to_frame(ds).to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise OutputError(f"Cannot write dataset ({e})", path) from e
    logger.info(f"Dataset {ds.name} written to {path}", extra={"task": ds.name})
    return path
