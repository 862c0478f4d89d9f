"""
Time Estimator
Tracks per-repetition durations, provides live ETAs for experiment logging,
and times single calls for search-budget calibration.
"""

import time
from collections import deque
from dataclasses import dataclass
from threading import Lock
from typing import Any, Callable, Optional


@dataclass
class TimingRecord:
    """Timing of one unit of work (a repetition or a calibration call)."""
    label: str
    index: int
    start_time: float
    end_time: Optional[float] = None
    duration_s: Optional[float] = None
    status: str = "running"  # running | done | error


def measure(fn: Callable[..., Any], *args, **kwargs) -> tuple[Any, float]:
    """Call fn and return (result, wall-clock seconds)."""
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start


class TimeEstimator:
    """
    Rolling average of recent repetition durations; recent entries weigh more.
    Safe to share between worker threads.
    """

    def __init__(self, window_size: int = 20, default_seconds: float = 60.0):
        self.window_size = window_size
        self.default_seconds = default_seconds
        self._history: deque[TimingRecord] = deque(maxlen=window_size)
        self._lock = Lock()
        self._run_start: Optional[float] = None
        self._total = 0
        self._completed = 0

    def start_run(self, total: int):
        self._run_start = time.time()
        self._total = total
        self._completed = 0

    def start(self, label: str, index: int) -> TimingRecord:
        return TimingRecord(label=label, index=index, start_time=time.time())

    def finish(self, record: TimingRecord, status: str = "done"):
        record.end_time = time.time()
        record.duration_s = round(record.end_time - record.start_time, 3)
        record.status = status
        with self._lock:
            self._history.append(record)
            self._completed += 1

    @property
    def avg_seconds(self) -> float:
        with self._lock:
            done = [r for r in self._history if r.duration_s is not None]
        if not done:
            return self.default_seconds
        total_weight = 0.0
        weighted_sum = 0.0
        for i, rec in enumerate(done):
            weight = 1.0 + i * 0.5
            weighted_sum += rec.duration_s * weight
            total_weight += weight
        return weighted_sum / total_weight

    def estimate_remaining(self, workers: int = 1) -> float:
        remaining = max(self._total - self._completed, 0)
        return remaining * self.avg_seconds / max(workers, 1)

    def get_stats(self, workers: int = 1) -> dict:
        elapsed = time.time() - self._run_start if self._run_start else 0.0
        return {
            "total": self._total,
            "completed": self._completed,
            "elapsed_seconds": round(elapsed, 1),
            "eta_seconds": round(self.estimate_remaining(workers), 1),
            "avg_seconds": round(self.avg_seconds, 2),
            "progress_pct": round(self._completed / self._total * 100, 1) if self._total else 0.0,
        }

    @staticmethod
    def format_eta(seconds: float) -> str:
        if seconds <= 0:
            return "Done"
        if seconds < 60:
            return f"{int(seconds)}s"
        minutes = int(seconds // 60)
        secs = int(seconds % 60)
        if minutes < 60:
            return f"{minutes}m {secs}s"
        return f"{minutes // 60}h {minutes % 60}m"
