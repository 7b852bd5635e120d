"""Semiclassical flow of the mean-field Hamiltonian.

Points are given in the chart (q1, p1, q2, p2) with dq/dt = dH/dp and
dp/dt = -dH/dq. The chart is singular on q1^2 + p1^2 = 2, which is the excited
pole of the Bloch sphere, so orbits are integrated on the embedding
(X, Y, Z, q2, p2) with X + iY = (q1 + ip1) sqrt(2 - q1^2 - p1^2) and
Z = q1^2 + p1^2 - 1 on the unit sphere. There the energy reads

    H = (omega/2) Z + (omega0/2)(q2^2 + p2^2) + (G+ q2 X + G- p2 Y) / sqrt(2)

and the spin moves as ds/dt = 2 s x dH/ds.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp
from scipy.spatial import ConvexHull, QhullError

from src.errors import DomainError, NumericalGateError, SingularityError
from src.model import BLOCH_LIMIT, ModelParams, PhasePoint, classical_energy, coordinates
from src.model import on_shell_point

logger = logging.getLogger("classical")

GUARD = 1e-9
DEFAULT_TOL = 1e-11
MAX_DRIFT = 1e-8
POLISH_ITERATIONS = 3
POLISH_TOL = 1e-13
METHOD = "DOP853"
SQRT2 = math.sqrt(2.0)


def _bloch_factor(q1: float, p1: float) -> float:
    r2 = q1 * q1 + p1 * p1
    if r2 > BLOCH_LIMIT - GUARD:
        raise SingularityError(
            f"q1^2 + p1^2 = {r2:.12g} entered the guard band of the Bloch boundary"
        )
    return math.sqrt(1.0 - 0.5 * r2)


def equations_of_motion(x: ArrayLike, params: ModelParams) -> NDArray[np.float64]:
    """Chart velocity (dq1, dp1, dq2, dp2)/dt."""
    q1, p1, q2, p2 = x
    f = _bloch_factor(q1, p1)
    gp, gm = params.g_plus, params.g_minus
    v = gp * q1 * q2 + gm * p1 * p2
    return np.array(
        [
            params.omega * p1 + f * gm * p2 - p1 / (2.0 * f) * v,
            -params.omega * q1 - f * gp * q2 + q1 / (2.0 * f) * v,
            params.omega0 * p2 + f * gm * p1,
            -params.omega0 * q2 - f * gp * q1,
        ]
    )


# ── Embedding coordinates ─────────────────────────────────────────────


def to_bloch(x: ArrayLike) -> NDArray[np.float64]:
    q1, p1, q2, p2 = coordinates(x)
    c = math.sqrt(BLOCH_LIMIT - q1 * q1 - p1 * p1)
    return np.array([q1 * c, p1 * c, q1 * q1 + p1 * p1 - 1.0, q2, p2])


def from_bloch(u: ArrayLike) -> NDArray[np.float64]:
    """Chart coordinates of one embedding point or of a (K, 5) array of them."""
    u = np.asarray(u, dtype=float)
    r2 = 1.0 + u[..., 2]
    worst = float(np.max(r2, initial=-np.inf))
    if worst > BLOCH_LIMIT - GUARD:
        raise SingularityError(
            f"q1^2 + p1^2 = {worst:.12g} entered the guard band of the Bloch boundary"
        )
    c = np.sqrt(BLOCH_LIMIT - r2)
    return np.stack([u[..., 0] / c, u[..., 1] / c, u[..., 3], u[..., 4]], axis=-1)


def chart_differential(x: ArrayLike) -> NDArray[np.float64]:
    """d(to_bloch)/dx, shape (5, 4)."""
    q1, p1, _, _ = coordinates(x)
    c = math.sqrt(BLOCH_LIMIT - q1 * q1 - p1 * p1)
    d = np.zeros((5, 4))
    d[0, :2] = (c - q1 * q1 / c, -q1 * p1 / c)
    d[1, :2] = (-q1 * p1 / c, c - p1 * p1 / c)
    d[2, :2] = (2.0 * q1, 2.0 * p1)
    d[3, 2] = d[4, 3] = 1.0
    return d


def bloch_energy(u: ArrayLike, params: ModelParams) -> float:
    x, y, z, q2, p2 = u
    return (
        0.5 * params.omega * z
        + 0.5 * params.omega0 * (q2 * q2 + p2 * p2)
        + (params.g_plus * q2 * x + params.g_minus * p2 * y) / SQRT2
    )


def bloch_velocity(u: ArrayLike, params: ModelParams) -> NDArray[np.float64]:
    x, y, z, q2, p2 = u
    hx = params.g_plus * q2 / SQRT2
    hy = params.g_minus * p2 / SQRT2
    hz = 0.5 * params.omega
    return np.array(
        [
            2.0 * (y * hz - z * hy),
            2.0 * (z * hx - x * hz),
            2.0 * (x * hy - y * hx),
            params.omega0 * p2 + params.g_minus * y / SQRT2,
            -params.omega0 * q2 - params.g_plus * x / SQRT2,
        ]
    )


def bloch_jacobian(u: ArrayLike, params: ModelParams) -> NDArray[np.float64]:
    """Jacobian of bloch_velocity, the generator of the tangent flow."""
    x, y, z, q2, p2 = u
    gp, gm = params.g_plus, params.g_minus
    w, w0 = params.omega, params.omega0
    return np.array(
        [
            [0.0, w, -SQRT2 * gm * p2, 0.0, -SQRT2 * gm * z],
            [-w, 0.0, SQRT2 * gp * q2, SQRT2 * gp * z, 0.0],
            [SQRT2 * gm * p2, -SQRT2 * gp * q2, 0.0, -SQRT2 * gp * y, SQRT2 * gm * x],
            [0.0, gm / SQRT2, 0.0, 0.0, w0],
            [-gp / SQRT2, 0.0, 0.0, -w0, 0.0],
        ]
    )


def _rhs(t: float, y: NDArray, params: ModelParams) -> NDArray:
    return bloch_velocity(y, params)


def _tangent_rhs(t: float, y: NDArray, params: ModelParams) -> NDArray:
    u, du = y[:5], y[5:]
    return np.concatenate([bloch_velocity(u, params), bloch_jacobian(u, params) @ du])


def _q2_crossing(t: float, y: NDArray, params: ModelParams) -> float:
    return y[3]


def _solve(fun, t_span, y0, params, tol, **kwargs):
    sol = solve_ivp(
        fun, t_span, y0, method=METHOD, rtol=tol, atol=tol, args=(params,), **kwargs
    )
    if sol.status != 0:
        raise NumericalGateError(
            f"integration stopped at t={sol.t[-1]:.6g}: {sol.message}"
        )
    return sol


def relative_drift(energies: NDArray, energy0: float) -> NDArray:
    scale = abs(energy0) or 1.0
    return np.abs(energies - energy0) / scale


@dataclass(frozen=True)
class Orbit:
    times: NDArray[np.float64]
    states: NDArray[np.float64]
    """Shape (len(times), 4)."""
    energy0: float
    params: ModelParams

    def energies(self) -> NDArray[np.float64]:
        return np.array([classical_energy(x, self.params) for x in self.states])

    def max_drift(self) -> float:
        return float(np.max(relative_drift(self.energies(), self.energy0)))

    @property
    def final(self) -> NDArray[np.float64]:
        return self.states[-1]


def integrate(
    x0: PhasePoint | ArrayLike,
    params: ModelParams,
    t_end: float,
    tol: float = DEFAULT_TOL,
    t_eval: ArrayLike | None = None,
    max_drift: float = MAX_DRIFT,
) -> Orbit:
    """Adaptive DOP853 orbit from t = 0 to t_end (negative t_end runs backwards)."""
    y0 = coordinates(x0)
    energy0 = classical_energy(y0, params)
    sol = _solve(_rhs, (0.0, t_end), to_bloch(y0), params, tol, t_eval=t_eval)
    drift = relative_drift(
        np.array([bloch_energy(u, params) for u in sol.y.T]), energy0
    )
    worst = int(np.argmax(drift))
    if drift[worst] > max_drift:
        raise NumericalGateError(
            f"relative energy drift {drift[worst]:.3g} at t={sol.t[worst]:.6g}"
            f" exceeds {max_drift:g} (E0={energy0:.12g})"
        )
    orbit = Orbit(
        times=sol.t, states=from_bloch(sol.y.T), energy0=energy0, params=params
    )
    logger.debug(
        {
            "function": "integrate",
            "t_end": t_end,
            "steps": int(sol.t.size),
            "max_drift": float(drift[worst]),
        }
    )
    return orbit


@dataclass(frozen=True)
class SectionPoints:
    points: NDArray[np.float64]
    """Shape (K, 3): (q1, p1, p2) at each crossing of q2 = 0 with p2 > 0."""
    times: NDArray[np.float64]
    energy: float

    def __len__(self) -> int:
        return self.points.shape[0]

    def rows(self) -> list[tuple[float, float, float]]:
        return [tuple(float(v) for v in row) for row in self.points]


def _polish(
    t: float, y: NDArray, params: ModelParams
) -> tuple[float, NDArray[np.float64]]:
    """Newton iterations on q2(t) = 0, stepping the flow exactly to each iterate."""
    for _ in range(POLISH_ITERATIONS):
        q2_dot = bloch_velocity(y, params)[3]
        if q2_dot == 0.0:
            break
        h = -y[3] / q2_dot
        if abs(h) < 1e-15:
            break
        y = _solve(_rhs, (0.0, h), y, params, POLISH_TOL).y[:, -1]
        t += h
    return t, y


def poincare_section(
    x0: PhasePoint | ArrayLike,
    params: ModelParams,
    t_end: float,
    max_points: int = 2000,
    tol: float = DEFAULT_TOL,
    chunk: float = 200.0,
    max_drift: float = MAX_DRIFT,
) -> SectionPoints:
    """Crossings of q2 = 0 with p2 > 0 until t_end or max_points."""
    x = coordinates(x0)
    energy0 = classical_energy(x, params)
    y = to_bloch(x)
    t = 0.0
    points: list[NDArray] = []
    times: list[float] = []
    while t < t_end and len(points) < max_points:
        t_next = min(t + chunk, t_end)
        sol = _solve(_rhs, (t, t_next), y, params, tol, events=_q2_crossing)
        for te, ye in zip(sol.t_events[0], sol.y_events[0]):
            if ye[4] <= 0.0 or te == t:
                continue
            tp, yp = _polish(float(te), ye, params)
            if yp[4] > 0.0:
                points.append(yp)
                times.append(tp)
        y = sol.y[:, -1]
        t = float(sol.t[-1])

    states = from_bloch(np.array(points[:max_points]).reshape(-1, 5))
    if states.size:
        energies = np.array([classical_energy(s, params) for s in states])
        worst = float(np.max(relative_drift(energies, energy0)))
        if worst > max_drift:
            raise NumericalGateError(
                f"section point energy drift {worst:.3g} exceeds {max_drift:g}"
            )
    logger.debug(
        {"function": "poincare_section", "crossings": int(states.shape[0]), "t": t}
    )
    return SectionPoints(
        points=states[:, [0, 1, 3]],
        times=np.array(times[:max_points]),
        energy=energy0,
    )


def shell_seeds(
    params: ModelParams, energy: float, count: int
) -> list[tuple[str, PhasePoint]]:
    """Seeds on the line q1 = q2 = 0 across the Bloch disk, p2 solved on the shell."""
    limit = math.sqrt(BLOCH_LIMIT)
    seeds: list[tuple[str, PhasePoint]] = []
    for k, p1 in enumerate(np.linspace(-limit, limit, count + 2)[1:-1]):
        try:
            seeds.append((f"seed{k:03d}", on_shell_point(0.0, float(p1), 0.0, energy, params)))
        except DomainError as e:
            logger.info({"function": "shell_seeds", "p1": float(p1), "skipped": str(e)})
    return seeds


def section_hull_area(section: SectionPoints) -> float:
    """Area of the convex hull of the (q1, p1) section points; 0 when they span no area."""
    pts = section.points[:, :2]
    if len(section) < 3 or np.linalg.matrix_rank(pts - pts.mean(axis=0)) < 2:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:
        return 0.0


@dataclass(frozen=True)
class LyapunovEstimate:
    exponent: float
    times: NDArray[np.float64]
    history: NDArray[np.float64]
    """Running estimate at each renormalization time."""
    renorm_interval: float
    converged: bool


def history_converged(history: NDArray, rel_spread: float = 0.1) -> bool:
    """Last-quarter standard deviation below ``rel_spread`` of its mean."""
    tail = history[-max(1, history.size // 4) :]
    mean = float(np.mean(tail))
    return mean != 0.0 and float(np.std(tail)) < rel_spread * abs(mean)


def lyapunov_exponent(
    x0: PhasePoint | ArrayLike,
    params: ModelParams,
    t_end: float = 2000.0,
    renorm_interval: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_drift: float = MAX_DRIFT,
) -> LyapunovEstimate:
    """Maximal exponent by Benettin renormalization of one tangent vector."""
    if renorm_interval <= 0 or t_end < renorm_interval:
        raise DomainError(
            f"need 0 < renorm_interval <= t_end, got {renorm_interval}, {t_end}"
        )
    x = coordinates(x0)
    energy0 = classical_energy(x, params)
    u = to_bloch(x)
    du = chart_differential(x) @ np.full(4, 0.5)
    du /= np.linalg.norm(du)
    steps = int(round(t_end / renorm_interval))
    times = renorm_interval * np.arange(1, steps + 1)
    history = np.empty(steps)
    log_sum = 0.0
    worst = 0.0
    for k in range(steps):
        t0 = k * renorm_interval
        sol = _solve(
            _tangent_rhs, (t0, t0 + renorm_interval), np.concatenate([u, du]), params, tol
        )
        u, du = sol.y[:5, -1], sol.y[5:, -1]
        stretch = float(np.linalg.norm(du))
        log_sum += math.log(stretch)
        du /= stretch
        history[k] = log_sum / times[k]
        worst = max(worst, abs(bloch_energy(u, params) - energy0) / (abs(energy0) or 1.0))
    if worst > max_drift:
        raise NumericalGateError(
            f"relative energy drift {worst:.3g} during Lyapunov run exceeds {max_drift:g}"
        )

    converged = history_converged(history)
    estimate = LyapunovEstimate(
        exponent=float(history[-1]),
        times=times,
        history=history,
        renorm_interval=renorm_interval,
        converged=converged,
    )
    log = logger.info if converged else logger.warning
    log(
        {
            "function": "lyapunov_exponent",
            "exponent": estimate.exponent,
            "t_end": t_end,
            "renorm_interval": renorm_interval,
            "converged": converged,
            "max_drift": worst,
        }
    )
    return estimate
