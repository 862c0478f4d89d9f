"""
Application configuration: process-wide settings from environment variables,
plus the flat `key = value` experiment file used by the CLI.
"""

from functools import lru_cache
from typing import Optional

from dotenv import dotenv_values
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import InvalidConfigError


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="EDGERES_",
        env_file=".env",
        extra="ignore",
        case_sensitive=False,
    )

    # ── Execution ──
    workers: int = 1

    # ── Storage ──
    output_dir: str = "./results"
    db_path: str = "./results/edgeres.db"
    comparison_file: str = "comparison.csv"

    # ── Logging ──
    log_dir: str = "./logs"
    log_level: str = "INFO"

    # ── Experiment defaults ──
    default_kappa: float = 1e-8
    default_repetitions: int = 20


@lru_cache()
def get_settings() -> Settings:
    return Settings()


# Keys accepted in an experiment config file, mapped onto ExperimentConfig paths.
CONFIG_FILE_KEYS: dict[str, tuple[str, ...]] = {
    "task": ("task",),
    "model": ("model",),
    "units": ("reservoir", "n_units"),
    "n_units": ("reservoir", "n_units"),
    "input_scaling": ("reservoir", "input_scaling"),
    "rho": ("reservoir", "spectral_radius"),
    "spectral_radius": ("reservoir", "spectral_radius"),
    "bias_scaling": ("reservoir", "bias_scaling"),
    "ring_weight": ("reservoir", "ring_weight"),
    "kappa": ("kappa",),
    "repetitions": ("repetitions",),
    "seed": ("base_seed",),
    "base_seed": ("base_seed",),
    "epochs": ("pta_hyper", "max_epochs"),
    "max_epochs": ("pta_hyper", "max_epochs"),
    "learning_rate": ("pta_hyper", "learning_rate"),
    "momentum": ("pta_hyper", "momentum"),
    "lambda_threshold": ("pta_hyper", "lambda_threshold"),
    "washout": ("washout",),
    "budget": ("search_budget",),
    "search_budget": ("search_budget",),
    "length": ("length",),
    "out": ("output_path",),
    "output_path": ("output_path",),
}


def read_config_file(path: str) -> dict[str, str]:
    """
    Parse a flat `key = value` experiment file.
    Dashes in keys are normalised to underscores; unknown keys are rejected.
    """
    raw = dotenv_values(path)
    parsed: dict[str, str] = {}
    for key, value in raw.items():
        norm = key.strip().lower().replace("-", "_")
        if norm not in CONFIG_FILE_KEYS:
            raise InvalidConfigError(f"Unknown key '{key}' in config file {path}")
        if value is None or value == "":
            continue
        parsed[norm] = value
    return parsed


def merge_overrides(file_values: dict[str, str], cli_values: dict[str, Optional[object]]) -> dict:
    """
    Fold file values and CLI flags (CLI wins) into a nested dict
    ready for ExperimentConfig validation.
    """
    flat: dict[str, object] = dict(file_values)
    for key, value in cli_values.items():
        if value is not None:
            flat[key] = value

    nested: dict = {}
    for key, value in flat.items():
        path = CONFIG_FILE_KEYS.get(key)
        if path is None:
            raise InvalidConfigError(f"Unknown option '{key}'")
        node = nested
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return nested
