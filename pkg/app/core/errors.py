"""
Exception types raised across EdgeRes.
Each leaf also derives from the closest builtin so callers can catch either.
"""

from typing import Optional


class EdgeResError(Exception):
    """Base class for all library errors."""


class InvalidConfigError(EdgeResError, ValueError):
    pass


class InvalidArgumentError(EdgeResError, ValueError):
    pass


class DimensionError(EdgeResError, ValueError):
    pass


class ConvergenceError(EdgeResError, RuntimeError):
    pass


class ConstructionError(EdgeResError, RuntimeError):
    pass


class SolveError(EdgeResError, RuntimeError):
    pass


class UndefinedMetricError(EdgeResError, ValueError):
    pass


class GenerationError(EdgeResError, RuntimeError):
    pass


class TrainingAbortedError(EdgeResError, RuntimeError):
    """Raised when the Lyapunov exponent becomes non-finite during adaptation."""

    def __init__(self, message: str, epoch: int, step: int):
        super().__init__(message)
        self.epoch = epoch
        self.step = step


class ExperimentError(EdgeResError, RuntimeError):
    """Component failure with the run context attached."""

    def __init__(self, message: str, task: str, model: str, seed: Optional[int] = None):
        context = f"task={task} model={model}" + (f" seed={seed}" if seed is not None else "")
        super().__init__(f"{message} [{context}]")
        self.task = task
        self.model = model
        self.seed = seed


class OutputError(EdgeResError, OSError):
    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path
