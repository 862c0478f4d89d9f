"""
Phase Transition Adaptation (PTA)

Unsupervised, per-step adaptation of neuron gains and biases of a ring
reservoir. On a ring the Jacobian keeps the ring structure, so all local
Lyapunov exponents coincide and have the closed form

    λ(t) = (1/N) Σ_k log|η_k(t)|,   η_k = (1 − x_k²)·a_k

Training minimises e(t) = N·λ(t)² with momentum SGD, pushing the dynamics
towards λ = 0 (the edge of stability). Gradients are taken within a single
time step with net(t) held constant; nothing is propagated through time.
Each step costs O(N·U + N).
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from app.core.errors import InvalidArgumentError, InvalidConfigError, TrainingAbortedError
from app.core.reservoir import (
    ReservoirWeights,
    Series,
    collect_states,
    net_input,
    ring_matrix,
    split_series,
)
from app.core.schemas import PTAHyper
from app.utils.logger import setup_logger

logger = setup_logger("edgeres.pta")

EpochCallback = Callable[[int, "PTAParameters", float], None]


@dataclass
class PTAParameters:
    gain: np.ndarray
    bias: np.ndarray
    velocity_gain: np.ndarray
    velocity_bias: np.ndarray

    @classmethod
    def initial(cls, n_units: int, init_gain: float, init_bias: float = 1.0) -> "PTAParameters":
        return cls(
            gain=np.full(n_units, float(init_gain)),
            bias=np.full(n_units, float(init_bias)),
            velocity_gain=np.zeros(n_units),
            velocity_bias=np.zeros(n_units),
        )

    def copy(self) -> "PTAParameters":
        return replace(
            self,
            gain=self.gain.copy(),
            bias=self.bias.copy(),
            velocity_gain=self.velocity_gain.copy(),
            velocity_bias=self.velocity_bias.copy(),
        )


@dataclass
class TrainingTrace:
    epoch_lambda: list[float] = field(default_factory=list)
    epochs_run: int = 0
    stop_reason: str = "zero_epochs"  # zero_epochs | threshold | max_epochs
    # one array of λ(t) per epoch, only when record_steps=True
    step_lambda: list[np.ndarray] = field(default_factory=list)


# ─────────────────────────────────────
# LYAPUNOV EXPONENTS
# ─────────────────────────────────────

def eta_values(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """η_k = (1 − x_k²)·a_k (unclamped)."""
    return (1.0 - x * x) * a


def clamp_eta(eta: np.ndarray, eta_floor: float = 1e-12) -> np.ndarray:
    """Lift |η| below `eta_floor` to ±eta_floor, keeping the sign (0 counts as +)."""
    sign = np.where(eta < 0.0, -1.0, 1.0)
    return np.where(np.abs(eta) < eta_floor, sign * eta_floor, eta)


def local_lyapunov(eta: np.ndarray, eta_floor: float = 1e-12) -> float:
    return float(np.mean(np.log(np.abs(clamp_eta(eta, eta_floor)))))


def jacobian_oracle(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Materialized Jacobian of the gained ring map; diagnostics and tests only."""
    eta = eta_values(np.asarray(x, dtype=float), np.asarray(a, dtype=float))
    return ring_matrix(eta.shape[0], 1.0) * eta[:, np.newaxis]


def lyapunov_trace(
    weights: ReservoirWeights,
    params: PTAParameters,
    series: Series,
    washout: int,
    eta_floor: float = 1e-12,
) -> np.ndarray:
    """Per-step λ(t), t = τ+1..T, with frozen gain and bias."""
    states = collect_states(weights, series, washout, gain=params.gain, bias=params.bias)
    return lyapunov_from_states(states, params.gain, eta_floor)


def lyapunov_from_states(states: np.ndarray, gain: np.ndarray, eta_floor: float = 1e-12) -> np.ndarray:
    """λ for every column of an N×M state matrix produced by the gained map."""
    eta = clamp_eta(eta_values(states, gain[:, np.newaxis]), eta_floor)
    return np.mean(np.log(np.abs(eta)), axis=0)


# ─────────────────────────────────────
# GRADIENTS & UPDATE
# ─────────────────────────────────────

def pta_gradients(
    lam: float,
    eta: np.ndarray,
    x: np.ndarray,
    net: np.ndarray,
    a: np.ndarray,
    eta_floor: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray]:
    """∂e/∂a and ∂e/∂b for e = N·λ², with net held fixed."""
    scale = lam / clamp_eta(eta, eta_floor)
    slope = 1.0 - x * x
    grad_a = 2.0 * scale * slope * (1.0 - 2.0 * x * net * a)
    grad_b = -4.0 * scale * x * slope * a
    return grad_a, grad_b


def pta_update(
    params: PTAParameters,
    grad_a: np.ndarray,
    grad_b: np.ndarray,
    hyper: PTAHyper,
) -> PTAParameters:
    alpha = hyper.momentum
    vel_a = alpha * params.velocity_gain + (1.0 - alpha) * grad_a
    vel_b = alpha * params.velocity_bias + (1.0 - alpha) * grad_b
    return PTAParameters(
        gain=params.gain - hyper.learning_rate * vel_a,
        bias=params.bias - hyper.learning_rate * vel_b,
        velocity_gain=vel_a,
        velocity_bias=vel_b,
    )


# ─────────────────────────────────────
# ONLINE ADAPTER
# ─────────────────────────────────────

def _require_pta_ring(weights: ReservoirWeights):
    if not weights.is_ring or weights.ring_weight != 1.0:
        raise InvalidConfigError("PTA requires a ring reservoir with ring_weight = 1")


class PTAAdapter:
    """
    Holds the reservoir state and PTA parameters and adapts them online,
    one input sample at a time.
    """

    def __init__(
        self,
        weights: ReservoirWeights,
        hyper: PTAHyper,
        params: Optional[PTAParameters] = None,
        init_gain: float = 0.5,
        init_bias: float = 1.0,
    ):
        _require_pta_ring(weights)
        self.weights = weights
        self.hyper = hyper
        self.params = params if params is not None else PTAParameters.initial(
            weights.n_units, init_gain, init_bias
        )
        self.state = np.zeros(weights.n_units)

    def reset_state(self):
        self.state = np.zeros(self.weights.n_units)

    def advance(self, u: np.ndarray) -> np.ndarray:
        """State update only."""
        net = net_input(self.weights, self.state, u)
        self.state = np.tanh(self.params.gain * net + self.params.bias)
        return self.state

    def step(self, u: np.ndarray) -> float:
        """State update followed by one gain/bias update. Returns λ(t)."""
        p = self.params
        net = net_input(self.weights, self.state, u)
        x = np.tanh(p.gain * net + p.bias)
        eta = eta_values(x, p.gain)
        lam = local_lyapunov(eta, self.hyper.eta_floor)
        grad_a, grad_b = pta_gradients(lam, eta, x, net, p.gain, self.hyper.eta_floor)
        self.params = pta_update(p, grad_a, grad_b, self.hyper)
        self.state = x
        return lam


# ─────────────────────────────────────
# TRAINING LOOP
# ─────────────────────────────────────

def train_pta(
    weights: ReservoirWeights,
    series: Series,
    hyper: PTAHyper,
    init_gain: float,
    init_bias: float = 1.0,
    on_epoch_end: Optional[EpochCallback] = None,
    record_steps: bool = False,
) -> tuple[PTAParameters, TrainingTrace]:
    """
    Epoch loop: each epoch restarts every series from the zero state, runs the
    washout without updates, then adapts at every remaining step. Stops once
    the epoch-mean λ reaches `lambda_threshold` or after `max_epochs` epochs;
    the guard is evaluated only after a complete epoch.
    """
    _require_pta_ring(weights)
    inputs = split_series(series, weights.input_dim)
    for s in inputs:
        if s.shape[1] <= hyper.washout:
            raise InvalidArgumentError(
                f"Training series length T={s.shape[1]} must exceed washout tau={hyper.washout}"
            )

    adapter = PTAAdapter(weights, hyper, init_gain=init_gain, init_bias=init_bias)
    trace = TrainingTrace()
    if hyper.max_epochs == 0:
        return adapter.params, trace

    epoch = 0
    while True:
        lambdas = []
        for s in inputs:
            adapter.reset_state()
            for t in range(hyper.washout):
                adapter.advance(s[:, t])
            for t in range(hyper.washout, s.shape[1]):
                lam = adapter.step(s[:, t])
                if not np.isfinite(lam):
                    logger.error(
                        f"Non-finite Lyapunov exponent at epoch {epoch + 1}, step {t}",
                        extra={"epoch": epoch + 1, "step": t, "status": "aborted"},
                    )
                    raise TrainingAbortedError(
                        f"PTA training aborted: non-finite lambda at epoch {epoch + 1}, step {t}",
                        epoch=epoch + 1,
                        step=t,
                    )
                lambdas.append(lam)

        epoch += 1
        step_lambda = np.asarray(lambdas)
        mean_lambda = float(step_lambda.mean())
        trace.epoch_lambda.append(mean_lambda)
        trace.epochs_run = epoch
        if record_steps:
            trace.step_lambda.append(step_lambda)

        logger.info(
            f"PTA epoch {epoch}: mean lambda = {mean_lambda:.4f}",
            extra={"epoch": epoch, "mean_lambda": round(mean_lambda, 6)},
        )
        if on_epoch_end is not None:
            on_epoch_end(epoch, adapter.params, mean_lambda)

        if mean_lambda >= hyper.lambda_threshold:
            trace.stop_reason = "threshold"
            break
        if epoch >= hyper.max_epochs:
            trace.stop_reason = "max_epochs"
            break

    logger.info(
        f"PTA stopped after {epoch} epoch(s): {trace.stop_reason}",
        extra={"epoch": epoch, "status": trace.stop_reason},
    )
    return adapter.params, trace
