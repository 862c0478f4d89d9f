"""
Reservoir construction and state dynamics.

Two topologies are supported: a dense random recurrent matrix rescaled to a
target spectral radius, and a ring (simple cycle) where every unit feeds only
its successor with one shared weight. Ring products are computed as a cyclic
shift, so stepping a ring never touches an N×N matrix.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from app.core.errors import (
    ConstructionError,
    ConvergenceError,
    DimensionError,
    InvalidArgumentError,
    InvalidConfigError,
)
from app.core.schemas import ReservoirConfig, Topology
from app.utils.logger import setup_logger

logger = setup_logger("edgeres.reservoir")

Series = Union[np.ndarray, Sequence[np.ndarray]]


@dataclass
class ReservoirWeights:
    recurrent: np.ndarray  # N×N
    input: np.ndarray  # N×U
    bias: np.ndarray  # N
    topology: Topology = Topology.dense
    ring_weight: Optional[float] = None

    @property
    def n_units(self) -> int:
        return self.recurrent.shape[0]

    @property
    def input_dim(self) -> int:
        return self.input.shape[1]

    @property
    def is_ring(self) -> bool:
        return self.topology == Topology.ring


# ─────────────────────────────────────
# RANDOMNESS
# ─────────────────────────────────────

def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent child streams derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def uniform_symmetric(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform samples on [-1, 1]."""
    return 2.0 * rng.random(shape) - 1.0


# ─────────────────────────────────────
# SPECTRAL RADIUS
# ─────────────────────────────────────

def spectral_radius(
    m: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    block: int = 8,
    restart_every: int = 2_000,
    seed: int = 0,
) -> float:
    """
    Largest eigenvalue modulus by block power iteration.

    An orthonormal block of `block` vectors is pushed through the matrix and
    the largest Ritz value modulus of the projected block is the estimate, so
    complex-conjugate and ±λ dominant pairs converge like a single eigenvalue.
    The block is perturbed every `restart_every` iterations without convergence.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"spectral_radius expects a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("spectral_radius: matrix has non-finite entries")
    n = m.shape[0]
    if not np.any(m):
        return 0.0

    rng = make_rng(seed)
    k = min(n, block)
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    estimate = np.inf
    hits = 0

    for it in range(1, max_iter + 1):
        z = m @ q
        ritz = np.linalg.eigvals(q.T @ z)
        current = float(np.max(np.abs(ritz)))
        q, _ = np.linalg.qr(z)

        if abs(current - estimate) <= tol * max(current, np.finfo(float).tiny):
            hits += 1
            if hits >= 2:
                return current
        else:
            hits = 0
        estimate = current

        if it % restart_every == 0:
            logger.debug(f"spectral_radius: restart after {it} iterations (estimate={current:.6g})")
            q, _ = np.linalg.qr(q + 0.1 * rng.standard_normal((n, k)))

    raise ConvergenceError(
        f"spectral_radius did not converge within {max_iter} iterations (last estimate {estimate:.6g})"
    )


# ─────────────────────────────────────
# CONSTRUCTION
# ─────────────────────────────────────

def _input_and_bias(config: ReservoirConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    w_in = uniform_symmetric(rng, (config.n_units, config.input_dim)) * config.input_scaling
    bias = uniform_symmetric(rng, config.n_units) * config.bias_scaling
    return w_in, bias


def init_dense(config: ReservoirConfig, rng: np.random.Generator) -> ReservoirWeights:
    """Dense random reservoir rescaled to `config.spectral_radius`."""
    if config.topology != Topology.dense:
        raise InvalidConfigError(f"init_dense called with topology={config.topology.value}")

    recurrent = uniform_symmetric(rng, (config.n_units, config.n_units))
    try:
        rho_hat = spectral_radius(recurrent)
    except ConvergenceError as e:
        raise ConstructionError(f"Dense reservoir construction failed: {e}") from e
    if rho_hat == 0.0:
        raise ConstructionError("Dense reservoir construction failed: sampled matrix has zero spectral radius")
    recurrent *= config.spectral_radius / rho_hat

    w_in, bias = _input_and_bias(config, rng)
    logger.debug(
        f"Dense reservoir N={config.n_units} rho={config.spectral_radius} "
        f"omega={config.input_scaling} omega_b={config.bias_scaling}",
        extra={"seed": config.seed},
    )
    return ReservoirWeights(recurrent=recurrent, input=w_in, bias=bias, topology=Topology.dense)


def ring_matrix(n_units: int, weight: float) -> np.ndarray:
    """Materialized ring: nonzeros at (i, i-1) and (0, N-1), all equal to `weight`."""
    m = np.zeros((n_units, n_units))
    idx = np.arange(n_units)
    m[idx, idx - 1] = weight
    return m


def init_ring(config: ReservoirConfig, rng: np.random.Generator) -> ReservoirWeights:
    """Simple cycle reservoir. Its spectral radius is |ring_weight| by construction."""
    if config.topology != Topology.ring:
        raise InvalidConfigError(f"init_ring called with topology={config.topology.value}")
    if config.n_units < 2:
        raise InvalidConfigError(f"Ring reservoir needs at least 2 units, got {config.n_units}")

    w_in, bias = _input_and_bias(config, rng)
    logger.debug(
        f"Ring reservoir N={config.n_units} w={config.ring_weight} "
        f"omega={config.input_scaling} omega_b={config.bias_scaling}",
        extra={"seed": config.seed},
    )
    return ReservoirWeights(
        recurrent=ring_matrix(config.n_units, config.ring_weight),
        input=w_in,
        bias=bias,
        topology=Topology.ring,
        ring_weight=float(config.ring_weight),
    )


def build_reservoir(config: ReservoirConfig, rng: Optional[np.random.Generator] = None) -> ReservoirWeights:
    rng = rng if rng is not None else make_rng(config.seed)
    if config.topology == Topology.ring:
        return init_ring(config, rng)
    return init_dense(config, rng)


# ─────────────────────────────────────
# STATE UPDATES
# ─────────────────────────────────────

def _recurrent_product(w: ReservoirWeights, x: np.ndarray) -> np.ndarray:
    if w.is_ring:
        return w.ring_weight * np.concatenate((x[-1:], x[:-1]))
    return w.recurrent @ x


def net_input(w: ReservoirWeights, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return _recurrent_product(w, x) + w.input @ u


def _as_input(u, input_dim: int) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (input_dim,):
        raise DimensionError(f"Input vector has shape {u.shape}, expected ({input_dim},)")
    return u


def _check_state(w: ReservoirWeights, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (w.n_units,):
        raise DimensionError(f"State vector has shape {x.shape}, expected ({w.n_units},)")
    return x


def _check_vector(name: str, v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise DimensionError(f"{name} has shape {v.shape}, expected ({n},)")
    return v


def step_standard(w: ReservoirWeights, x: np.ndarray, u) -> np.ndarray:
    """x' = tanh(Ŵx + Wu + b)"""
    x = _check_state(w, x)
    u = _as_input(u, w.input_dim)
    return np.tanh(net_input(w, x, u) + w.bias)


def step_gained(
    w: ReservoirWeights,
    gain: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    u,
) -> tuple[np.ndarray, np.ndarray]:
    """x' = tanh(a ⊙ net + b) with net = Ŵx + Wu. Returns (x', net)."""
    x = _check_state(w, x)
    u = _as_input(u, w.input_dim)
    gain = _check_vector("gain", gain, w.n_units)
    bias = _check_vector("bias", bias, w.n_units)
    net = net_input(w, x, u)
    return np.tanh(gain * net + bias), net


# ─────────────────────────────────────
# TRAJECTORIES
# ─────────────────────────────────────

def as_series(series: np.ndarray, input_dim: int) -> np.ndarray:
    """Normalise one input series to shape U×T."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[0] != input_dim:
        raise DimensionError(f"Input series has shape {arr.shape}, expected ({input_dim}, T)")
    return arr


def split_series(series: Series, input_dim: int) -> list[np.ndarray]:
    """One series (array) or several (list/tuple) → list of U×T arrays."""
    if isinstance(series, (list, tuple)):
        return [as_series(s, input_dim) for s in series]
    return [as_series(series, input_dim)]


def _run(
    w: ReservoirWeights,
    inputs: np.ndarray,
    washout: int,
    gain: Optional[np.ndarray],
    bias: Optional[np.ndarray],
) -> np.ndarray:
    n, length = w.n_units, inputs.shape[1]
    if length <= washout:
        raise InvalidArgumentError(f"Series length T={length} must exceed washout tau={washout}")

    states = np.empty((n, length - washout))
    x = np.zeros(n)
    for t in range(length):
        net = net_input(w, x, inputs[:, t])
        if gain is None:
            x = np.tanh(net + w.bias)
        else:
            x = np.tanh(gain * net + bias)
        if t >= washout:
            states[:, t - washout] = x
    return states


def collect_states(
    w: ReservoirWeights,
    series: Series,
    washout: int,
    gain: Optional[np.ndarray] = None,
    bias: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Run the reservoir from the zero state and return the N×(T−τ) matrix of
    post-washout states. With (gain, bias) the gained map is used.
    A list of series is washed out independently and concatenated in order.
    """
    if washout < 0:
        raise InvalidArgumentError(f"washout must be >= 0, got {washout}")
    if (gain is None) != (bias is None):
        raise InvalidArgumentError("gain and bias must be given together")
    if gain is not None:
        gain = _check_vector("gain", gain, w.n_units)
        bias = _check_vector("bias", bias, w.n_units)

    blocks = [_run(w, s, washout, gain, bias) for s in split_series(series, w.input_dim)]
    return blocks[0] if len(blocks) == 1 else np.hstack(blocks)
