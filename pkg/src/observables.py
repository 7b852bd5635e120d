"""Atomic-subsystem diagnostics: reduced density matrix, linear entropy, inversion."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.ndimage import uniform_filter1d

from src.dynamics import (
    QuantumSystem,
    SpectralDecomposition,
    TimeSeries,
    evolve,
    expectation_series,
    sample_times,
)
from src.errors import DomainError
from src.model import (
    BLOCH_LIMIT,
    ModelParams,
    PhasePoint,
    QuantumState,
    coherent_state,
    on_shell_point,
)
from src.scan import Task, TaskFailure, run_tasks

logger = logging.getLogger("observables")


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """Atomic 2x2 density matrix in (e, g) ordering."""

    entries: NDArray[np.complex128]

    def __post_init__(self) -> None:
        rho = np.asarray(self.entries, dtype=np.complex128)
        if rho.shape != (2, 2):
            raise DomainError(f"atomic density matrix must be 2x2, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise DomainError(f"density matrix trace {np.trace(rho).real:.15g} != 1")
        eigenvalues = np.linalg.eigvalsh(rho)
        if eigenvalues[0] < -1e-10 or eigenvalues[-1] > 1.0 + 1e-10:
            raise DomainError(f"density matrix eigenvalues {eigenvalues} outside [0, 1]")
        object.__setattr__(self, "entries", rho)

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))


def reduce_to_atom(state: QuantumState) -> ReducedDensityMatrix:
    blocks = state.blocks()
    return ReducedDensityMatrix(blocks @ blocks.conj().T)


def linear_entropy(rho: ReducedDensityMatrix) -> float:
    return 1.0 - rho.purity


def entropy_series(states: NDArray[np.complex128]) -> NDArray[np.float64]:
    """S(t) for every row of a (T, dim) array of evolved states."""
    blocks = states.reshape(states.shape[0], 2, -1)
    excited, ground = blocks[:, 0, :], blocks[:, 1, :]
    rho_ee = np.einsum("ti,ti->t", excited, excited.conj()).real
    rho_gg = np.einsum("ti,ti->t", ground, ground.conj()).real
    rho_eg = np.einsum("ti,ti->t", excited, ground.conj())
    purity = rho_ee**2 + rho_gg**2 + 2.0 * np.abs(rho_eg) ** 2
    return 1.0 - purity


def entropy_time_series(
    state0: QuantumState, spec: SpectralDecomposition, times: ArrayLike
) -> TimeSeries:
    times = np.asarray(times, dtype=float)
    return TimeSeries(times, entropy_series(evolve(state0, spec, times)), "entropy")


def time_averaged_entropy(
    point: PhasePoint,
    params: ModelParams,
    window: tuple[float, float] = (0.0, 50.0),
    dt: float = 0.01,
    system: QuantumSystem | None = None,
) -> float:
    """Trapezoidal average of S(t) over the window."""
    system = system or QuantumSystem.build(params)
    state0 = coherent_state(point, params)
    series = entropy_time_series(state0, system.spectrum, sample_times(*window, dt))
    return series.time_average()


@dataclass
class EntropyMap:
    q1_axis: NDArray[np.float64]
    p1_axis: NDArray[np.float64]
    values: NDArray[np.float64]
    """Shape (len(p1_axis), len(q1_axis)); NaN marks inadmissible points."""
    failures: list[TaskFailure] = field(default_factory=list)

    def rows(self) -> list[tuple[float, float, float | None]]:
        out = []
        for j, p1 in enumerate(self.p1_axis):
            for i, q1 in enumerate(self.q1_axis):
                value = self.values[j, i]
                out.append(
                    (float(q1), float(p1), None if math.isnan(value) else float(value))
                )
        return out

    @property
    def admissible(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.values)))


def disk_axes(resolution: int) -> NDArray[np.float64]:
    """Uniform axis spanning the Bloch disk |q1|, |p1| <= sqrt(2)."""
    limit = math.sqrt(BLOCH_LIMIT)
    return np.linspace(-limit, limit, resolution)


def _map_point(
    q1: float,
    p1: float,
    energy: float,
    system: QuantumSystem,
    window: tuple[float, float],
    dt: float,
) -> float:
    point = on_shell_point(q1, p1, 0.0, energy, system.params)
    return time_averaged_entropy(point, system.params, window, dt, system)


def entropy_map(
    q1_axis: ArrayLike,
    p1_axis: ArrayLike,
    params: ModelParams,
    energy: float,
    window: tuple[float, float] = (0.0, 50.0),
    dt: float = 0.01,
    workers: int = 1,
    system: QuantumSystem | None = None,
) -> EntropyMap:
    """S_m over a (q1, p1) grid on the q2 = 0 section, p2 solved on the shell."""
    q1_axis = np.asarray(q1_axis, dtype=float)
    p1_axis = np.asarray(p1_axis, dtype=float)
    system = system or QuantumSystem.build(params)
    tasks = [
        Task(key=(j, i), func=_map_point, args=(q1, p1, energy, system, window, dt))
        for j, p1 in enumerate(p1_axis)
        for i, q1 in enumerate(q1_axis)
        if q1 * q1 + p1 * p1 < BLOCH_LIMIT
    ]
    logger.info(
        {
            "function": "entropy_map",
            "type": "start",
            "grid": [int(q1_axis.size), int(p1_axis.size)],
            "tasks": len(tasks),
            "workers": workers,
        }
    )
    results, failures = run_tasks(tasks, workers, description="entropy map")
    values = np.full((p1_axis.size, q1_axis.size), np.nan)
    for result in results:
        values[result.key] = result.value
    emap = EntropyMap(q1_axis, p1_axis, values, failures)
    logger.info(
        {
            "function": "entropy_map",
            "type": "end",
            "admissible": emap.admissible,
            "failures": len(failures),
        }
    )
    return emap


def population_inversion(
    state0: QuantumState,
    spec: SpectralDecomposition,
    times: ArrayLike,
    sigma_z: NDArray[np.complex128],
) -> TimeSeries:
    """W(t) = P_e(t) - P_g(t) = <sigma_z>(t)."""
    times = np.asarray(times, dtype=float)
    w = expectation_series(evolve(state0, spec, times), sigma_z)
    return TimeSeries(times, np.clip(w, -1.0, 1.0), "inversion")


def moving_std(series: TimeSeries, window: float) -> TimeSeries:
    """Centered rolling standard deviation over ``window`` time units."""
    dt = series.times[1] - series.times[0]
    size = max(1, int(round(window / dt)))
    mean = uniform_filter1d(series.values, size, mode="nearest")
    mean_sq = uniform_filter1d(series.values**2, size, mode="nearest")
    std = np.sqrt(np.clip(mean_sq - mean**2, 0.0, None))
    return TimeSeries(series.times, std, f"{series.label}_moving_std")


def collapse_windows(
    series: TimeSeries, window: float, threshold: float
) -> list[tuple[float, float]]:
    """Time spans where the rolling standard deviation stays below ``threshold``."""
    quiet = moving_std(series, window).values < threshold
    spans: list[tuple[float, float]] = []
    start: int | None = None
    for k, flag in enumerate(quiet):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            if k - 1 > start:
                spans.append((float(series.times[start]), float(series.times[k - 1])))
            start = None
    if start is not None and len(quiet) - 1 > start:
        spans.append((float(series.times[start]), float(series.times[-1])))
    return spans


def window_overlap(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Length of the intersection as a fraction of the shorter window."""
    shorter = min(a[1] - a[0], b[1] - b[0])
    if shorter <= 0:
        return 0.0
    inter = min(a[1], b[1]) - max(a[0], b[0])
    return max(0.0, inter) / shorter


def best_overlap(
    window: tuple[float, float], candidates: list[tuple[float, float]]
) -> tuple[tuple[float, float] | None, float]:
    best: tuple[tuple[float, float] | None, float] = (None, 0.0)
    for span in candidates:
        frac = window_overlap(window, span)
        if frac > best[1]:
            best = (span, frac)
    return best

