"""
Pydantic models for experiment configuration and results.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field


# ─── Enums ───

class Topology(str, Enum):
    dense = "dense"
    ring = "ring"


class TaskName(str, Enum):
    mc = "mc"
    nlm = "nlm"
    narma20 = "narma20"
    mg = "mg"


class ModelName(str, Enum):
    esn = "esn"
    scr = "scr"
    pta = "pta"


class RunStatus(str, Enum):
    running = "running"
    completed = "completed"
    incomplete = "incomplete"
    interrupted = "interrupted"


# ─── Reservoir ───

class ReservoirConfig(BaseModel):
    n_units: int = Field(100, gt=0)
    input_dim: int = Field(1, gt=0)
    spectral_radius: float = Field(0.5, gt=0)
    input_scaling: float = Field(0.1, ge=0)
    bias_scaling: float = Field(0.0, ge=0)
    topology: Topology = Topology.dense
    ring_weight: float = 1.0
    seed: int = Field(0, ge=0)


class PTAHyper(BaseModel):
    learning_rate: float = Field(1e-5, gt=0)
    momentum: float = Field(0.9, ge=0, le=1)
    max_epochs: int = Field(50, ge=0)
    lambda_threshold: float = Field(-0.1, lt=0)
    washout: int = Field(100, ge=0)
    eta_floor: float = Field(1e-12, gt=0)


# ─── Experiments ───

class ExperimentConfig(BaseModel):
    task: TaskName = TaskName.mc
    model: ModelName = ModelName.pta
    reservoir: ReservoirConfig = Field(default_factory=ReservoirConfig)
    pta_hyper: PTAHyper = Field(default_factory=PTAHyper)
    kappa: float = Field(1e-8, ge=0)
    repetitions: int = Field(20, ge=1)
    # None → calibrated against one PTA repetition
    search_budget: Optional[int] = Field(None, ge=1)
    base_seed: int = Field(0, ge=0)
    # None → task default (2N for mc, 100 otherwise)
    washout: Optional[int] = Field(None, ge=0)
    length: int = Field(20000, ge=8)
    output_path: str = "./results"


class MetricValues(BaseModel):
    """Metrics for one repetition. `metric` is MC for the mc task, mean NMSE otherwise."""
    metric: float
    nmse: list[float] = []
    r_squared: list[float] = []
    mc: Optional[float] = None
    test_lambda: Optional[float] = None
    nmse_normalization: str = "variance"


class SelectedHyper(BaseModel):
    spectral_radius: float
    bias_scaling: float
    validation_score: float


class EpochRecord(BaseModel):
    epoch: int
    mean_lambda: float
    test_mc: Optional[float] = None


class RepetitionResult(BaseModel):
    index: int
    seed: int
    status: str = "done"  # done | error
    metrics: Optional[MetricValues] = None
    selected: Optional[SelectedHyper] = None
    epochs_run: Optional[int] = None
    trace: list[EpochRecord] = []
    duration_s: float = 0.0
    error: Optional[str] = None


class ExperimentResult(BaseModel):
    run_id: Optional[str] = None
    task: TaskName
    model: ModelName
    config: ExperimentConfig
    metric_name: str
    repetitions: list[RepetitionResult] = []
    mean: Optional[float] = None
    std: Optional[float] = None
    complete: bool = True
    search_budget: Optional[int] = None
    calibration: dict[str, float] = {}
    wall_clock_s: float = 0.0
    started_at: str = ""
    finished_at: Optional[str] = None
