"""
Linear readout (closed-form ridge regression) and evaluation metrics.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from app.core.errors import DimensionError, InvalidArgumentError, SolveError, UndefinedMetricError


@dataclass
class ReadoutWeights:
    output_map: np.ndarray  # Y×N
    regularization: float = 0.0


@dataclass
class MetricReport:
    nmse: list[float] = field(default_factory=list)
    r_squared: list[float] = field(default_factory=list)
    mc: Optional[float] = None
    nmse_normalization: str = "variance"


def _as_rows(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[np.newaxis, :]
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 1-D or 2-D, got {a.ndim}-D")
    return a


def fit_ridge(states: np.ndarray, targets: np.ndarray, kappa: float) -> ReadoutWeights:
    """
    V = Y Xᵀ (X Xᵀ + κI)⁻¹, solved as the SPD system (X Xᵀ + κI) Vᵀ = X Yᵀ.
    states: N×M, targets: Y×M (a 1-D target is treated as one row).
    """
    x = _as_rows(states, "states")
    y = _as_rows(targets, "targets")
    if kappa < 0:
        raise InvalidArgumentError(f"kappa must be >= 0, got {kappa}")
    if x.shape[1] < 1:
        raise InvalidArgumentError("fit_ridge needs at least one sample")
    if x.shape[1] != y.shape[1]:
        raise DimensionError(f"states have {x.shape[1]} samples but targets have {y.shape[1]}")

    gram = x @ x.T
    gram[np.diag_indices_from(gram)] += kappa
    try:
        v_t = scipy.linalg.solve(gram, x @ y.T, assume_a="pos")
    except scipy.linalg.LinAlgError as e:
        raise SolveError(
            f"Ridge system is singular or not positive definite (kappa={kappa}); "
            "use a positive regularization coefficient"
        ) from e
    return ReadoutWeights(output_map=v_t.T, regularization=kappa)


def predict(v: ReadoutWeights, states: np.ndarray) -> np.ndarray:
    """Identity output nonlinearity: y = V x."""
    x = _as_rows(states, "states")
    if v.output_map.shape[1] != x.shape[0]:
        raise DimensionError(
            f"Readout expects {v.output_map.shape[1]} state units, got {x.shape[0]}"
        )
    return v.output_map @ x


# ─────────────────────────────────────
# METRICS
# ─────────────────────────────────────

def _pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    if p.shape != t.shape:
        raise DimensionError(f"pred has length {p.size}, target has length {t.size}")
    if p.size < 2:
        raise InvalidArgumentError("metrics need at least 2 samples")
    return p, t


def nmse(pred, target) -> float:
    """Mean squared error over the population variance of the target."""
    p, t = _pair(pred, target)
    var = float(np.var(t))
    if var == 0.0:
        raise UndefinedMetricError("NMSE is undefined for a constant target")
    return float(np.mean((p - t) ** 2) / var)


def squared_correlation(pred, target) -> float:
    """Squared Pearson correlation; 0 when either side is constant."""
    p, t = _pair(pred, target)
    pc = p - p.mean()
    tc = t - t.mean()
    denom = float(np.dot(pc, pc) * np.dot(tc, tc))
    if denom == 0.0:
        return 0.0
    r2 = float(np.dot(pc, tc)) ** 2 / denom
    return min(max(r2, 0.0), 1.0)


def mc_score(preds: np.ndarray, delayed_inputs: np.ndarray) -> float:
    """Sum over delay channels of squared correlation between recall and delayed input."""
    p = _as_rows(preds, "preds")
    d = _as_rows(delayed_inputs, "delayed_inputs")
    if p.shape != d.shape:
        raise DimensionError(f"preds shape {p.shape} does not match delayed inputs shape {d.shape}")
    return float(sum(squared_correlation(p[k], d[k]) for k in range(p.shape[0])))


def evaluate(pred: np.ndarray, target: np.ndarray, memory_task: bool = False) -> MetricReport:
    p = _as_rows(pred, "pred")
    t = _as_rows(target, "target")
    if p.shape != t.shape:
        raise DimensionError(f"pred shape {p.shape} does not match target shape {t.shape}")

    report = MetricReport(r_squared=[squared_correlation(p[k], t[k]) for k in range(p.shape[0])])
    if memory_task:
        report.mc = float(sum(report.r_squared))
    else:
        report.nmse = [nmse(p[k], t[k]) for k in range(p.shape[0])]
    return report
