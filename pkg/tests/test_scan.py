"""Tests for src.scan — task fan-out, failure collection, ordered assembly."""

import numpy as np

from src.errors import CutoffError, DomainError
from src.scan import Task, TaskFailure, run_tasks


def _square(x: float) -> float:
    return x * x


def _checked(x: float) -> float:
    if x < 0:
        raise DomainError(f"negative input {x}")
    if x > 100:
        raise CutoffError(f"input {x} beyond cutoff")
    return float(np.sqrt(x))


def _invert(size: int) -> np.ndarray:
    return np.linalg.inv(np.zeros((size, size)))


def _ratio(x: float) -> float:
    return 1.0 / x


def _eigenvalues(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(40, 40))
    return np.linalg.eigvalsh(a + a.T)


class TestRunTasks:
    def test_results_sorted_by_key(self):
        tasks = [Task(key=k, func=_square, args=(float(k),)) for k in (3, 1, 2, 0)]
        results, failures = run_tasks(tasks)
        assert not failures
        assert [r.key for r in results] == [0, 1, 2, 3]
        assert [r.value for r in results] == [0.0, 1.0, 4.0, 9.0]
        assert all(r.elapsed >= 0 for r in results)

    def test_failures_collected(self):
        tasks = [
            Task(key="a", func=_checked, args=(4.0,)),
            Task(key="b", func=_checked, args=(-1.0,)),
            Task(key="c", func=_checked, args=(200.0,)),
        ]
        results, failures = run_tasks(tasks)
        assert [r.key for r in results] == ["a"]
        assert results[0].value == 2.0
        assert failures == [
            TaskFailure("b", "DomainError", "negative input -1.0", 1),
            TaskFailure("c", "CutoffError", "input 200.0 beyond cutoff", 2),
        ]

    def test_empty(self):
        assert run_tasks([]) == ([], [])

    def test_worker_count_does_not_change_values(self):
        tasks = [Task(key=s, func=_eigenvalues, args=(s,)) for s in range(6)]
        one, _ = run_tasks(tasks, workers=1)
        two, _ = run_tasks(list(reversed(tasks)), workers=2, description="eig")
        assert [r.key for r in one] == [r.key for r in two]
        for a, b in zip(one, two):
            assert np.array_equal(a.value, b.value)

    def test_numerical_exceptions_collected(self):
        tasks = [
            Task(key=0, func=_invert, args=(3,)),
            Task(key=1, func=_ratio, args=(0.0,)),
            Task(key=2, func=_ratio, args=(4.0,)),
        ]
        results, failures = run_tasks(tasks)
        assert [r.value for r in results] == [0.25]
        assert [(f.key, f.kind, f.exit_code) for f in failures] == [
            (0, "LinAlgError", 2),
            (1, "ZeroDivisionError", 2),
        ]
