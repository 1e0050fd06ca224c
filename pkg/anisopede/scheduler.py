"""
Scheduler Module
================
Worker pool for independent jobs: eps-sweep members and lab ensembles.

Features:
- Runs jobs on a thread pool capped by ANISOPEDE_THREADS
- Returns outcomes in submission order, whatever the completion order
- Records failures per job instead of aborting the batch
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Iterable, Optional, TypeVar

from anisopede.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class TaskOutcome:
    """Result or failure message of one job."""
    ok: bool
    result: Any = None
    error: Optional[str] = None


class WorkerPool:
    """
    Runs independent jobs and keeps per-job failure bookkeeping.

    Jobs must not share mutable state; their results are collected in
    submission order so batch output is independent of scheduling.
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = max(1, workers or settings.workers())
        self.failures: dict[Hashable, str] = {}

    def run(self, tasks: dict[Hashable, Callable[[], Any]]) -> dict[Hashable, TaskOutcome]:
        """Run every job; a failing job is recorded and the others continue."""
        logger.info(f"Running {len(tasks)} jobs on {self.workers} worker(s)")
        if self.workers == 1:
            outcomes = {key: self._execute(key, job) for key, job in tasks.items()}
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                futures = {key: executor.submit(self._execute, key, job) for key, job in tasks.items()}
                outcomes = {key: future.result() for key, future in futures.items()}

        failed = sum(1 for o in outcomes.values() if not o.ok)
        if failed:
            logger.warning(f"{failed}/{len(tasks)} jobs failed")
        else:
            logger.info(f"✓ All {len(tasks)} jobs completed")
        return outcomes

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
        """Ordered map; the first failure is re-raised."""
        items = list(items)
        if self.workers == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(fn, items))

    def _execute(self, key: Hashable, job: Callable[[], Any]) -> TaskOutcome:
        try:
            return TaskOutcome(ok=True, result=job())
        except Exception as e:
            self._handle_failure(key, e)
            return TaskOutcome(ok=False, error=str(e))

    def _handle_failure(self, key: Hashable, error: Exception):
        self.failures[key] = f"{type(error).__name__}: {error}"
        logger.error(f"✗ Job {key} failed: {error}")
