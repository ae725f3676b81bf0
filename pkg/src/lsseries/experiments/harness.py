"""Replication runner and the Monte Carlo report container."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from ..errors import NumericalError, TooManyFailures

MAX_FAILURE_RATE = 0.01


def _guarded(fn: Callable, task) -> tuple[bool, Any]:
    try:
        return True, fn(task)
    except NumericalError as exc:
        return False, f"{type(exc).__name__}: {exc}"


def run_reps(fn: Callable, tasks: Sequence, workers: int = 1) -> list[tuple[bool, Any]]:
    """Evaluate ``fn`` on every task, in task order, optionally across worker processes.

    Each task carries its own derived random stream, so results do not depend
    on ``workers``.
    """
    g = partial(_guarded, fn)
    if workers <= 1 or len(tasks) < 2:
        return [g(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(g, tasks, chunksize=chunk))


def successes(results: list[tuple[bool, Any]], label: str) -> tuple[list, int]:
    """Keep successful replications; abort when more than 1% failed."""
    ok = [r for good, r in results if good]
    failed = len(results) - len(ok)
    if failed > MAX_FAILURE_RATE * len(results):
        first = next(r for good, r in results if not good)
        raise TooManyFailures(f"{label}: {failed}/{len(results)} replications failed (first: {first})")
    return ok, failed


def binomial_se(p: float, reps: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / reps) if reps else float("nan")


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class McReport:
    """Per-cell rows plus a summary and the full settings (seeds included) for exact reruns."""

    study: str
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> None:
        keys: list[str] = []
        for r in self.rows:
            keys += [k for k in r if k not in keys]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(keys)
            for r in self.rows:
                w.writerow([_cell(r.get(k, "")) for k in keys])

    def to_dict(self) -> dict:
        return _plain({"study": self.study, "settings": self.settings, "summary": self.summary, "rows": self.rows})

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
