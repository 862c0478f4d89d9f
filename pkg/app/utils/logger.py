"""
Structured Logger for EdgeRes
Provides console logging plus structured JSON log files
carrying experiment context (task, model, seed, epoch, ...).
"""

import json
import logging
import os
import sys
from datetime import datetime, timezone
from typing import Optional


_EXTRA_KEYS = (
    "task", "model", "seed", "repetition", "epoch", "mean_lambda", "metric",
    "duration_s", "budget", "step", "status", "error", "run_id", "eta_s",
    "progress",
)


class JsonFormatter(logging.Formatter):
    """Formats log records as single-line JSON for structured log files."""

    def format(self, record: logging.LogRecord) -> str:
        log_entry = {
            "ts": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "msg": record.getMessage(),
        }
        for key in _EXTRA_KEYS:
            val = getattr(record, key, None)
            if val is not None:
                log_entry[key] = val
        if record.exc_info and record.exc_info[0]:
            log_entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(log_entry, default=str)


def setup_logger(
    name: str = "edgeres",
    log_dir: Optional[str] = None,
    level: int = logging.DEBUG,
) -> logging.Logger:
    """
    Configure and return a logger.
    - Console: human-readable, level from settings
    - File:    structured JSON, one file per day
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger  # already configured

    from app.core.config import get_settings

    settings = get_settings()
    log_dir = log_dir or settings.log_dir

    logger.setLevel(level)
    logger.propagate = False

    # ── Console handler ──
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(getattr(logging, settings.log_level.upper(), logging.INFO))
    console.setFormatter(logging.Formatter(
        "\033[90m%(asctime)s\033[0m │ %(levelname)-7s │ %(message)s",
        datefmt="%H:%M:%S",
    ))
    logger.addHandler(console)

    # ── JSON file handler ──
    try:
        os.makedirs(log_dir, exist_ok=True)
        today = datetime.now().strftime("%Y-%m-%d")
        file_handler = logging.FileHandler(
            os.path.join(log_dir, f"edgeres_{today}.log"),
            encoding="utf-8",
        )
    except OSError as e:
        logger.warning(f"File logging disabled ({log_dir}): {e}")
    else:
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(JsonFormatter())
        logger.addHandler(file_handler)

    return logger
