"""Parallel evaluation of independent tasks with order-independent assembly."""

import logging
import time
from collections.abc import Callable, Hashable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from joblib import Parallel, delayed, parallel_config
from rich.progress import track
from threadpoolctl import threadpool_limits

from src.console import console
from src.errors import RabiChaosError

logger = logging.getLogger("scan")

# numerical failures inside a task; LinAlgError is a ValueError, QhullError a RuntimeError
TASK_ERRORS = (RabiChaosError, ValueError, ArithmeticError, RuntimeError)


@dataclass(frozen=True)
class Task:
    key: Hashable
    """Stable sort key; results are assembled in key order."""
    func: Callable[..., Any]
    args: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class TaskResult:
    key: Hashable
    value: Any
    elapsed: float


@dataclass(frozen=True)
class TaskFailure:
    key: Hashable
    kind: str
    message: str
    exit_code: int = 1


def _run_one(task: Task) -> TaskResult | TaskFailure:
    started = time.perf_counter()
    try:
        value = task.func(*task.args)
    except TASK_ERRORS as e:
        if isinstance(e, RabiChaosError):
            exit_code = e.exit_code
        elif isinstance(e, ValueError) and not isinstance(e, np.linalg.LinAlgError):
            exit_code = 1
        else:
            exit_code = 2
        return TaskFailure(
            key=task.key, kind=type(e).__name__, message=str(e), exit_code=exit_code
        )
    return TaskResult(key=task.key, value=value, elapsed=time.perf_counter() - started)


def run_tasks(
    tasks: Sequence[Task],
    workers: int = 1,
    description: str | None = None,
) -> tuple[list[TaskResult], list[TaskFailure]]:
    """Run tasks on ``workers`` processes; per-task failures are collected, not raised.

    Each worker is limited to one BLAS thread so results do not depend on how
    tasks are spread across processes.
    """
    # workers=1 runs in-process, so the parent is limited too
    with (
        threadpool_limits(limits=1),
        parallel_config(backend="loky", inner_max_num_threads=1),
    ):
        outcomes = Parallel(n_jobs=workers, return_as="generator")(
            delayed(_run_one)(task) for task in tasks
        )
        if description is not None:
            outcomes = track(
                outcomes, total=len(tasks), description=description, console=console
            )
        collected = []
        for outcome in outcomes:
            collected.append(outcome)
            if isinstance(outcome, TaskResult):
                logger.debug(
                    {
                        "function": "run_tasks",
                        "description": description,
                        "task": str(outcome.key),
                        "elapsed": outcome.elapsed,
                    }
                )

    results = sorted(
        (o for o in collected if isinstance(o, TaskResult)), key=lambda r: r.key
    )
    failures = sorted(
        (o for o in collected if isinstance(o, TaskFailure)),
        key=lambda f: f.key,
    )
    for failure in failures:
        logger.warning(
            {
                "function": "run_tasks",
                "task": str(failure.key),
                "kind": failure.kind,
                "message": failure.message,
            }
        )
    return results, failures
