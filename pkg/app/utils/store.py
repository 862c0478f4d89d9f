"""
Run Ledger: SQLite-backed record of experiment runs and their repetitions.
Every repetition is persisted as it finishes, so an interrupted experiment
can be resumed without redoing completed repetitions.
"""

import json
import os
import sqlite3
import threading
from contextlib import contextmanager
from datetime import datetime
from typing import Optional

from app.core.config import get_settings


class RunStore:
    """Thread-safe SQLite store for experiment runs and repetition queues."""

    def __init__(self, db_path: str):
        self.db_path = db_path
        os.makedirs(os.path.dirname(os.path.abspath(db_path)), exist_ok=True)
        self._local = threading.local()
        self._init_tables()

    def _get_conn(self) -> sqlite3.Connection:
        """Get a thread-local connection."""
        if getattr(self._local, "conn", None) is None:
            self._local.conn = sqlite3.connect(self.db_path, timeout=30)
            self._local.conn.row_factory = sqlite3.Row
            self._local.conn.execute("PRAGMA journal_mode=WAL")
            self._local.conn.execute("PRAGMA busy_timeout=5000")
        return self._local.conn

    @contextmanager
    def _cursor(self):
        conn = self._get_conn()
        cur = conn.cursor()
        try:
            yield cur
            conn.commit()
        except Exception:
            conn.rollback()
            raise

    def _init_tables(self):
        with self._cursor() as cur:
            cur.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    id          TEXT PRIMARY KEY,
                    task        TEXT NOT NULL,
                    model       TEXT NOT NULL,
                    status      TEXT NOT NULL DEFAULT 'running',
                    repetitions INTEGER NOT NULL,
                    config      TEXT NOT NULL,
                    extra       TEXT,
                    started_at  TEXT NOT NULL,
                    finished_at TEXT
                )
            """)
            cur.execute("""
                CREATE TABLE IF NOT EXISTS repetitions (
                    run_id      TEXT NOT NULL,
                    idx         INTEGER NOT NULL,
                    seed        INTEGER NOT NULL,
                    status      TEXT NOT NULL DEFAULT 'pending',
                    metric      REAL,
                    payload     TEXT,
                    error       TEXT,
                    duration_s  REAL,
                    PRIMARY KEY (run_id, idx),
                    FOREIGN KEY (run_id) REFERENCES runs(id)
                )
            """)
            cur.execute("CREATE INDEX IF NOT EXISTS idx_rep_status ON repetitions(run_id, status)")

    # ─────────────────────────────────────
    # RUNS
    # ─────────────────────────────────────

    def create_run(self, run_id: str, task: str, model: str, config: dict,
                   seeds: list[int], extra: Optional[dict] = None) -> str:
        """Create a run with one pending queue entry per repetition seed."""
        with self._cursor() as cur:
            cur.execute("""
                INSERT INTO runs (id, task, model, status, repetitions, config, extra, started_at)
                VALUES (?, ?, ?, 'running', ?, ?, ?, ?)
            """, (run_id, task, model, len(seeds), json.dumps(config),
                  json.dumps(extra or {}), datetime.now().isoformat()))
            cur.executemany(
                "INSERT INTO repetitions (run_id, idx, seed, status) VALUES (?, ?, ?, 'pending')",
                [(run_id, idx, seed) for idx, seed in enumerate(seeds)],
            )
        return run_id

    def get_run(self, run_id: str) -> Optional[dict]:
        with self._cursor() as cur:
            cur.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
            row = cur.fetchone()
        if not row:
            return None
        d = dict(row)
        d["config"] = json.loads(d["config"])
        d["extra"] = json.loads(d["extra"]) if d.get("extra") else {}
        return d

    def list_runs(self) -> list[dict]:
        with self._cursor() as cur:
            cur.execute("""
                SELECT r.id, r.task, r.model, r.status, r.repetitions, r.started_at, r.finished_at,
                       SUM(CASE WHEN q.status = 'done' THEN 1 ELSE 0 END) AS done
                FROM runs r LEFT JOIN repetitions q ON q.run_id = r.id
                GROUP BY r.id ORDER BY r.started_at DESC
            """)
            return [dict(r) for r in cur.fetchall()]

    def set_status(self, run_id: str, status: str):
        with self._cursor() as cur:
            cur.execute("UPDATE runs SET status = ? WHERE id = ?", (status, run_id))

    def finish_run(self, run_id: str, status: str = "completed"):
        with self._cursor() as cur:
            cur.execute(
                "UPDATE runs SET status = ?, finished_at = ? WHERE id = ?",
                (status, datetime.now().isoformat(), run_id),
            )

    def interrupt_active_runs(self) -> int:
        """Mark runs left 'running' by a dead process as interrupted."""
        with self._cursor() as cur:
            cur.execute("UPDATE runs SET status = 'interrupted' WHERE status = 'running'")
            return cur.rowcount

    # ─────────────────────────────────────
    # REPETITIONS
    # ─────────────────────────────────────

    def mark_repetition(self, run_id: str, idx: int, status: str, metric: Optional[float],
                        payload: Optional[str], error: Optional[str], duration_s: float):
        with self._cursor() as cur:
            cur.execute("""
                UPDATE repetitions SET status = ?, metric = ?, payload = ?, error = ?, duration_s = ?
                WHERE run_id = ? AND idx = ?
            """, (status, metric, payload, error, duration_s, run_id, idx))

    def get_pending_repetitions(self, run_id: str) -> list[dict]:
        """Repetitions not yet completed successfully (pending or errored)."""
        with self._cursor() as cur:
            cur.execute(
                "SELECT idx, seed FROM repetitions WHERE run_id = ? AND status != 'done' ORDER BY idx",
                (run_id,),
            )
            return [dict(r) for r in cur.fetchall()]

    def get_repetitions(self, run_id: str) -> list[dict]:
        with self._cursor() as cur:
            cur.execute("SELECT * FROM repetitions WHERE run_id = ? ORDER BY idx", (run_id,))
            return [dict(r) for r in cur.fetchall()]


# ─── Singleton ───
_store_instance: Optional[RunStore] = None
_store_lock = threading.Lock()


def get_store() -> RunStore:
    """Get or create the singleton store at the configured path."""
    global _store_instance
    with _store_lock:
        if _store_instance is None:
            _store_instance = RunStore(get_settings().db_path)
        return _store_instance
