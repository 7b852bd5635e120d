"""Exact unitary propagation by spectral decomposition, and the correlators built on it."""

import logging
from dataclasses import dataclass
from typing import Self

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from src.errors import DomainError, NumericalGateError
from src.model import (
    HERMITIAN_TOL,
    ModelParams,
    OperatorMatrix,
    Operators,
    PhasePoint,
    QuantumState,
    build_hamiltonian,
    build_operators,
    coherent_state,
)

logger = logging.getLogger("dynamics")

# time samples propagated per block in evolve()
CHUNK = 1024
IMAG_TOL = 1e-8
VARIANCE_FLOOR = -1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: NDArray[np.float64]
    """Ascending."""
    eigenvectors: NDArray[np.complex128]
    """Unitary matrix, one eigenvector per column."""

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self) -> OperatorMatrix:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def unitarity_residual(self) -> float:
        v = self.eigenvectors
        return float(np.max(np.abs(v.conj().T @ v - np.eye(self.dim))))

    def coefficients(self, state: QuantumState) -> NDArray[np.complex128]:
        _check_dim(state, self.dim)
        return self.eigenvectors.conj().T @ state.amplitudes


@dataclass(frozen=True)
class TimeSeries:
    times: NDArray[np.float64]
    values: NDArray[np.float64]
    label: str = ""

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise DomainError(
                f"times {times.shape} and values {values.shape} must be equal-length 1-D"
            )
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise DomainError("sample times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.size

    def window(self, t1: float, t2: float) -> Self:
        mask = (self.times >= t1) & (self.times <= t2)
        return type(self)(self.times[mask], self.values[mask], self.label)

    def time_average(self) -> float:
        span = self.times[-1] - self.times[0]
        return float(np.trapezoid(self.values, self.times) / span)


@dataclass(frozen=True)
class QuantumSystem:
    """Operators, Hamiltonian and its eigensystem for one parameter set."""

    params: ModelParams
    ops: Operators
    hamiltonian: OperatorMatrix
    spectrum: SpectralDecomposition

    @classmethod
    def build(cls, params: ModelParams) -> "QuantumSystem":
        ops = build_operators(params)
        h = build_hamiltonian(params, ops)
        return cls(params=params, ops=ops, hamiltonian=h, spectrum=decompose(h))


def sample_times(t_start: float, t_end: float, dt: float) -> NDArray[np.float64]:
    """Uniform grid from t_start to t_end inclusive; dt must divide the span."""
    if dt <= 0 or t_end <= t_start:
        raise DomainError(f"invalid sampling window [{t_start}, {t_end}] step {dt}")
    steps = int(round((t_end - t_start) / dt))
    return np.linspace(t_start, t_end, steps + 1)


def _check_dim(state: QuantumState, dim: int) -> None:
    if state.dim != dim:
        raise DomainError(f"state dimension {state.dim} does not match operator {dim}")


def decompose(h: OperatorMatrix) -> SpectralDecomposition:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL * scale:
        raise DomainError("cannot decompose a non-Hermitian operator")
    eigenvalues, eigenvectors = scipy.linalg.eigh(h)
    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def propagate(
    state: QuantumState, t: float, spec: SpectralDecomposition
) -> QuantumState:
    coeffs = spec.coefficients(state)
    return QuantumState(spec.eigenvectors @ (np.exp(-1j * spec.eigenvalues * t) * coeffs))


def evolve(
    state: QuantumState, spec: SpectralDecomposition, times: ArrayLike
) -> NDArray[np.complex128]:
    """States at every sample time as rows of a (len(times), dim) array."""
    times = np.asarray(times, dtype=float)
    coeffs = spec.coefficients(state)
    out = np.empty((times.size, spec.dim), dtype=np.complex128)
    v_t = spec.eigenvectors.T
    for start in range(0, times.size, CHUNK):
        block = times[start : start + CHUNK]
        phases = np.exp(-1j * np.outer(block, spec.eigenvalues))
        out[start : start + block.size] = (phases * coeffs) @ v_t
    return out


def expectation(state: QuantumState, op: OperatorMatrix) -> float:
    _check_dim(state, op.shape[0])
    psi = state.amplitudes
    value = np.vdot(psi, op @ psi)
    if abs(value.imag) > IMAG_TOL:
        raise DomainError(
            f"expectation has imaginary part {value.imag:.3g}; operator is not Hermitian"
        )
    return float(value.real)


def expectation_series(
    states: NDArray[np.complex128], op: OperatorMatrix
) -> NDArray[np.float64]:
    values = np.einsum("ti,ti->t", states.conj(), states @ op.T)
    worst = float(np.max(np.abs(values.imag), initial=0.0))
    if worst > IMAG_TOL:
        raise DomainError(
            f"expectation has imaginary part {worst:.3g}; operator is not Hermitian"
        )
    return values.real


def variance_series(
    states: NDArray[np.complex128], op: OperatorMatrix
) -> NDArray[np.float64]:
    """<W psi|W psi> - <psi|W psi>^2 per row, without forming W^2."""
    w_psi = states @ op.T
    mean = np.einsum("ti,ti->t", states.conj(), w_psi).real
    second = np.einsum("ti,ti->t", w_psi.conj(), w_psi).real
    var = second - mean**2
    low = float(np.min(var, initial=0.0))
    if low < VARIANCE_FLOOR:
        raise NumericalGateError(f"negative variance {low:.3g}")
    return var


def otoc_components(
    state0: QuantumState,
    spec: SpectralDecomposition,
    w_ops: dict[str, OperatorMatrix],
    times: ArrayLike,
) -> dict[str, TimeSeries]:
    times = np.asarray(times, dtype=float)
    states = evolve(state0, spec, times)
    return {
        name: TimeSeries(times, variance_series(states, op), f"var_{name}")
        for name, op in w_ops.items()
    }


def otoc_variance(
    state0: QuantumState,
    spec: SpectralDecomposition,
    w_ops: dict[str, OperatorMatrix],
    times: ArrayLike,
) -> TimeSeries:
    """OTOC with V the initial-state projector: the summed variances of w_ops."""
    parts = otoc_components(state0, spec, w_ops, times)
    first = next(iter(parts.values()))
    total = np.sum([p.values for p in parts.values()], axis=0)
    return TimeSeries(first.times, total, "otoc")


def quadrature_otoc(
    point: PhasePoint, system: QuantumSystem, times: ArrayLike
) -> dict[str, TimeSeries]:
    """Var[q2(t)], Var[p2(t)] and their sum for a coherent seed."""
    state0 = coherent_state(point, system.params)
    parts = otoc_components(
        state0, system.spectrum, {"q2": system.ops.q2, "p2": system.ops.p2}, times
    )
    q2, p2 = parts["q2"], parts["p2"]
    parts["sum"] = TimeSeries(q2.times, q2.values + p2.values, "otoc")
    return parts


def otoc_convergence(
    point: PhasePoint,
    params: ModelParams,
    np_check: int,
    times: ArrayLike,
    rel_tol: float = 1e-4,
    reference: TimeSeries | None = None,
) -> tuple[bool, float]:
    """Compare the OTOC at the configured cutoff with one at ``np_check``.

    Returns (converged, worst relative difference).
    """
    if reference is None:
        reference = quadrature_otoc(point, QuantumSystem.build(params), times)["sum"]
    check = quadrature_otoc(
        point, QuantumSystem.build(params.with_cutoff(np_check)), times
    )["sum"]
    worst = float(np.max(np.abs(reference.values - check.values) / np.abs(check.values)))
    converged = worst <= rel_tol
    log = logger.info if converged else logger.warning
    log(
        {
            "function": "otoc_convergence",
            "np": params.cutoff,
            "np_check": np_check,
            "max_relative_difference": worst,
            "converged": converged,
        }
    )
    return converged, worst


def loschmidt_echo(
    state0: QuantumState,
    params: ModelParams,
    delta: float,
    times: ArrayLike,
    spec: SpectralDecomposition | None = None,
) -> TimeSeries:
    """L(t) = |<psi(t; omega)|psi(t; omega + delta)>|^2 from two forward propagations."""
    times = np.asarray(times, dtype=float)
    if state0.dim != params.dim:
        raise DomainError(
            f"state dimension {state0.dim} does not match model dimension {params.dim}"
        )
    spec = spec or decompose(build_hamiltonian(params))
    spec_perturbed = spec if delta == 0 else decompose(
        build_hamiltonian(params.perturbed(delta))
    )
    echo = np.empty(times.size)
    for start in range(0, times.size, CHUNK):
        block = times[start : start + CHUNK]
        psi = evolve(state0, spec, block)
        psi_p = evolve(state0, spec_perturbed, block)
        overlap = np.einsum("ti,ti->t", psi.conj(), psi_p)
        echo[start : start + block.size] = np.abs(overlap) ** 2
    # both evolutions start from the same normalized state
    echo[times == 0.0] = 1.0
    return TimeSeries(times, echo, "loschmidt_echo")

