"""Anisotropic quantum Rabi model on a truncated Fock space.

The product space is laid out atom-major: index ``s * (cutoff + 1) + n`` with
``s = 0`` the excited level ``|e>`` and ``s = 1`` the ground level ``|g>``, so the
state splits into two contiguous Fock blocks.
"""

import logging
import math
from dataclasses import dataclass
from typing import Self

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import poisson

from src.errors import CutoffError, DomainError

logger = logging.getLogger("model")

OperatorMatrix = NDArray[np.complex128]

BLOCH_LIMIT = 2.0
HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10
TAIL_MASS_LIMIT = 1e-8


class ModelParams(BaseModel):
    """Physical constants of one Hamiltonian instance (hbar = 1)."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    omega: float = Field(gt=0, description="atomic transition frequency")
    omega0: float = Field(ge=0, description="cavity frequency")
    g1: float = Field(default=0.0, description="rotating-wave coupling")
    g2: float = Field(default=0.0, description="counter-rotating coupling")
    cutoff: int = Field(default=150, ge=1, alias="np", description="Fock cutoff")

    @property
    def g_plus(self) -> float:
        return self.g1 + self.g2

    @property
    def g_minus(self) -> float:
        return self.g1 - self.g2

    @property
    def fock_dim(self) -> int:
        return self.cutoff + 1

    @property
    def dim(self) -> int:
        return 2 * (self.cutoff + 1)

    def perturbed(self, delta: float) -> "ModelParams":
        """Same model with the atomic frequency shifted by ``delta``."""
        return self.model_copy(update={"omega": self.omega + delta})

    def with_cutoff(self, cutoff: int) -> "ModelParams":
        return self.model_copy(update={"cutoff": cutoff})


class PhasePoint(BaseModel):
    """Semiclassical coordinates: atomic (q1, p1) and field (q2, p2) quadratures."""

    model_config = ConfigDict(frozen=True)

    q1: float = 0.0
    p1: float = 0.0
    q2: float = 0.0
    p2: float = 0.0

    @model_validator(mode="after")
    def _check_bloch_domain(self) -> Self:
        if self.q1**2 + self.p1**2 >= BLOCH_LIMIT:
            raise ValueError(
                f"q1^2 + p1^2 = {self.q1**2 + self.p1**2:.6g} is outside the "
                f"Bloch domain q1^2 + p1^2 < {BLOCH_LIMIT:g}"
            )
        return self

    @property
    def radius2(self) -> float:
        return self.q1**2 + self.p1**2

    @property
    def tau(self) -> complex:
        return complex(self.q1, self.p1) / math.sqrt(BLOCH_LIMIT - self.radius2)

    @property
    def beta(self) -> complex:
        return complex(self.q2, self.p2) / math.sqrt(2.0)

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.q1, self.p1, self.q2, self.p2], dtype=float)

    @classmethod
    def from_array(cls, x: ArrayLike) -> "PhasePoint":
        q1, p1, q2, p2 = (float(v) for v in np.asarray(x, dtype=float))
        return cls(q1=q1, p1=p1, q2=q2, p2=p2)


@dataclass(frozen=True)
class Operators:
    a: OperatorMatrix
    a_dag: OperatorMatrix
    q2: OperatorMatrix
    p2: OperatorMatrix
    sigma_z: OperatorMatrix
    sigma_plus: OperatorMatrix
    sigma_minus: OperatorMatrix
    number: OperatorMatrix
    """Photon number a^dag a."""
    excitation: OperatorMatrix
    """Jaynes-Cummings excitation number a^dag a + sigma_plus sigma_minus."""

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class QuantumState:
    amplitudes: NDArray[np.complex128]

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size % 2 or amps.size < 4:
            raise DomainError(
                f"state vector must be 1-D with dimension 2*(np+1), got {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state norm {norm:.15g} deviates from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def cutoff(self) -> int:
        return self.dim // 2 - 1

    def blocks(self) -> NDArray[np.complex128]:
        """Amplitudes as a (2, cutoff + 1) array: rows are |e> and |g>."""
        return self.amplitudes.reshape(2, -1)

    @classmethod
    def normalized(cls, amplitudes: ArrayLike) -> "QuantumState":
        amps = np.asarray(amplitudes, dtype=np.complex128)
        return cls(amps / np.linalg.norm(amps))


def is_hermitian(op: NDArray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) < tol)


def build_operators(params: ModelParams) -> Operators:
    if params.cutoff < 1:
        raise DomainError("Fock cutoff np must be at least 1")
    fock_dim = params.fock_dim
    a_field = np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), k=1).astype(
        np.complex128
    )
    id_field = np.eye(fock_dim, dtype=np.complex128)
    id_atom = np.eye(2, dtype=np.complex128)
    # (e, g) ordering: sigma_plus = |e><g|
    sp = np.array([[0, 1], [0, 0]], dtype=np.complex128)
    sz = np.diag([1.0, -1.0]).astype(np.complex128)

    a = np.kron(id_atom, a_field)
    a_dag = a.conj().T
    sigma_plus = np.kron(sp, id_field)
    sigma_minus = sigma_plus.conj().T
    number = a_dag @ a
    return Operators(
        a=a,
        a_dag=a_dag,
        q2=(a_dag + a) / math.sqrt(2.0),
        p2=1j * (a_dag - a) / math.sqrt(2.0),
        sigma_z=np.kron(sz, id_field),
        sigma_plus=sigma_plus,
        sigma_minus=sigma_minus,
        number=number,
        excitation=number + sigma_plus @ sigma_minus,
    )


def build_hamiltonian(
    params: ModelParams, ops: Operators | None = None
) -> OperatorMatrix:
    ops = ops or build_operators(params)
    h = (
        0.5 * params.omega * ops.sigma_z
        + params.omega0 * ops.number
        + params.g1 * (ops.a_dag @ ops.sigma_minus + ops.a @ ops.sigma_plus)
        + params.g2 * (ops.a_dag @ ops.sigma_plus + ops.a @ ops.sigma_minus)
    )
    if not is_hermitian(h):
        raise DomainError("assembled Hamiltonian is not Hermitian")
    return h


def fock_coherent_amplitudes(beta: ArrayLike, cutoff: int) -> NDArray[np.complex128]:
    """Glauber amplitudes c_n = exp(-|beta|^2/2) beta^n / sqrt(n!) for n <= cutoff.

    ``beta`` may be an array; the Fock index is appended as the last axis.
    """
    b = np.asarray(beta, dtype=np.complex128)
    out = np.empty(b.shape + (cutoff + 1,), dtype=np.complex128)
    out[..., 0] = np.exp(-0.5 * np.abs(b) ** 2)
    for n in range(cutoff):
        out[..., n + 1] = out[..., n] * b / math.sqrt(n + 1)
    return out


def check_cutoff(beta: complex, cutoff: int) -> float:
    """Return the discarded Poisson tail mass, raising past the hard limit."""
    mean = abs(beta) ** 2
    if mean + 6.0 * abs(beta) > cutoff:
        logger.warning(
            {
                "function": "check_cutoff",
                "mean_photons": mean,
                "cutoff": cutoff,
                "message": "coherent amplitude close to the Fock cutoff",
            }
        )
    tail = float(poisson.sf(cutoff, mean))
    if tail > TAIL_MASS_LIMIT:
        raise CutoffError(
            f"Fock tail mass {tail:.3g} above np={cutoff} exceeds {TAIL_MASS_LIMIT:g}"
            f" (|beta|^2 = {mean:.6g})"
        )
    return tail


def coherent_state(point: PhasePoint, params: ModelParams) -> QuantumState:
    """Product of a Bloch coherent atom state and a Glauber field state."""
    beta = point.beta
    check_cutoff(beta, params.cutoff)
    tau = point.tau
    atom = np.array([tau, 1.0], dtype=np.complex128) / math.sqrt(1.0 + abs(tau) ** 2)
    field = fock_coherent_amplitudes(beta, params.cutoff)
    field /= np.linalg.norm(field)
    return QuantumState(np.kron(atom, field))


def coordinates(point: PhasePoint | ArrayLike) -> NDArray[np.float64]:
    if isinstance(point, PhasePoint):
        return point.as_array()
    x = np.asarray(point, dtype=float)
    if x.shape != (4,):
        raise DomainError(f"phase point needs 4 coordinates, got shape {x.shape}")
    if x[0] ** 2 + x[1] ** 2 >= BLOCH_LIMIT:
        raise DomainError("q1^2 + p1^2 is outside the Bloch domain")
    return x


def classical_energy(point: PhasePoint | ArrayLike, params: ModelParams) -> float:
    q1, p1, q2, p2 = coordinates(point)
    r2 = q1 * q1 + p1 * p1
    f = math.sqrt(1.0 - 0.5 * r2)
    return (
        0.5 * params.omega * (r2 - 1.0)
        + 0.5 * params.omega0 * (q2 * q2 + p2 * p2)
        + f * (params.g_plus * q1 * q2 + params.g_minus * p1 * p2)
    )


def solve_p2_on_shell(
    q1: float, p1: float, q2: float, energy: float, params: ModelParams
) -> float:
    """Positive p2 placing (q1, p1, q2, p2) on the energy shell."""
    r2 = q1 * q1 + p1 * p1
    if r2 >= BLOCH_LIMIT:
        raise DomainError(f"q1^2 + p1^2 = {r2:.6g} is outside the Bloch domain")
    f = math.sqrt(1.0 - 0.5 * r2)
    a = 0.5 * params.omega0
    b = f * params.g_minus * p1
    c = (
        0.5 * params.omega * (r2 - 1.0)
        + 0.5 * params.omega0 * q2 * q2
        + f * params.g_plus * q1 * q2
        - energy
    )
    if a == 0.0:
        if b == 0.0:
            raise DomainError("energy shell does not constrain p2 (omega0 = 0, b = 0)")
        roots = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            raise DomainError(
                f"point (q1={q1}, p1={p1}, q2={q2}) has no real p2 on the E={energy}"
                " shell"
            )
        # cancellation-free quadratic roots
        s = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        roots = [s / a, c / s] if s != 0.0 else [0.0]
    positive = sorted(r for r in roots if r > 0.0)
    if not positive:
        raise DomainError(
            f"point (q1={q1}, p1={p1}, q2={q2}) has no positive p2 on the E={energy}"
            " shell"
        )
    if len(positive) > 1:
        logger.warning(
            {
                "function": "solve_p2_on_shell",
                "roots": positive,
                "message": "two positive roots, returning the larger",
            }
        )
    return positive[-1]


def on_shell_point(
    q1: float, p1: float, q2: float, energy: float, params: ModelParams
) -> PhasePoint:
    p2 = solve_p2_on_shell(q1, p1, q2, energy, params)
    return PhasePoint(q1=q1, p1=p1, q2=q2, p2=p2)
