"""Full-size reproduction runs at np = 150 on the bundled parameter sets.

The named points are classified by their classical exponent first; every
quantum check then compares the chaotic point against the regular one.
Deselected by default; run with ``pytest -m slow``.
"""

import numpy as np
import pytest

from src.classical import (
    LyapunovEstimate,
    integrate,
    lyapunov_exponent,
    poincare_section,
    section_hull_area,
)
from src.config import RunConfig, load_config
from src.dynamics import (
    QuantumSystem,
    evolve,
    expectation_series,
    loschmidt_echo,
    otoc_convergence,
    quadrature_otoc,
    sample_times,
)
from src.fitting import fit_early_growth
from src.husimi import HusimiGridSpec, count_local_maxima, husimi_q
from src.model import QuantumState, coherent_state
from src.observables import (
    best_overlap,
    collapse_windows,
    population_inversion,
    time_averaged_entropy,
)

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def rabi() -> RunConfig:
    return load_config("fig1.cfg")


@pytest.fixture(scope="module")
def system(rabi: RunConfig) -> QuantumSystem:
    return QuantumSystem.build(rabi.params)


@pytest.fixture(scope="module")
def times():
    return sample_times(0.0, 50.0, 0.01)


@pytest.fixture(scope="module")
def exponents(rabi: RunConfig) -> dict[str, LyapunovEstimate]:
    return {
        name: lyapunov_exponent(point, rabi.params, t_end=rabi.lyapunov_t_end)
        for name, point in rabi.points.items()
    }


@pytest.fixture(scope="module")
def roles(exponents: dict[str, LyapunovEstimate]) -> dict[str, str]:
    ranked = sorted(exponents, key=lambda name: exponents[name].exponent)
    return {"regular": ranked[0], "chaotic": ranked[-1]}


# ── Classical ─────────────────────────────────────────────────────────


class TestLyapunov:
    def test_points_separate(self, exponents, roles):
        assert exponents[roles["chaotic"]].exponent > 0.05
        assert exponents[roles["regular"]].exponent < 0.02

    def test_chaotic_point_under_bundled_conventions(self, roles):
        assert roles == {"regular": "C", "chaotic": "R"}

    def test_integrable_limit(self, rabi: RunConfig):
        params = rabi.params.model_copy(update={"g1": 0.0, "g2": 0.0})
        est = lyapunov_exponent(rabi.points["C"], params, t_end=2000.0)
        assert abs(est.exponent) < 1e-2


class TestSections:
    def test_chaotic_section_covers_more_area(self, rabi: RunConfig, roles):
        area = {
            role: section_hull_area(
                poincare_section(rabi.points[name], rabi.params, 5000.0, max_points=300)
            )
            for role, name in roles.items()
        }
        assert area["chaotic"] > 10.0 * area["regular"]


class TestEnergyDrift:
    @pytest.mark.parametrize("name", ["C", "R"])
    def test_drift_over_long_run(self, rabi: RunConfig, name: str):
        orbit = integrate(rabi.points[name], rabi.params, 1000.0)
        assert orbit.max_drift() < 1e-8


# ── Quantum ───────────────────────────────────────────────────────────


class TestOtoc:
    def test_starts_at_one(self, rabi: RunConfig, system: QuantumSystem):
        times = sample_times(0.0, 1.0, 0.01)
        for point in rabi.points.values():
            total = quadrature_otoc(point, system, times)["sum"]
            assert total.values[0] == pytest.approx(1.0, abs=1e-8)

    def test_chaotic_point_grows(
        self, rabi: RunConfig, system: QuantumSystem, times, roles
    ):
        total = quadrature_otoc(rabi.points[roles["chaotic"]], system, times)["sum"]
        assert fit_early_growth(total).rate > 0

    def test_cutoff_convergence(self, rabi: RunConfig):
        times = sample_times(0.0, 20.0, 0.05)
        for point in rabi.points.values():
            converged, worst = otoc_convergence(point, rabi.params, 200, times)
            assert converged, worst


class TestEntropyAndEcho:
    def test_entropy_higher_at_chaotic_point(
        self, rabi: RunConfig, system: QuantumSystem, roles
    ):
        s = {
            role: time_averaged_entropy(
                rabi.points[name], rabi.params, (0.0, 50.0), 0.01, system
            )
            for role, name in roles.items()
        }
        assert s["chaotic"] > s["regular"]

    def test_echo_lower_at_chaotic_point(
        self, rabi: RunConfig, system: QuantumSystem, times, roles
    ):
        means = {}
        for role, name in roles.items():
            state0 = coherent_state(rabi.points[name], rabi.params)
            echo = loschmidt_echo(
                state0, rabi.params, rabi.delta, times, spec=system.spectrum
            )
            assert echo.values[0] == pytest.approx(1.0, abs=1e-12)
            means[role] = echo.time_average()
        assert means["chaotic"] < means["regular"]


class TestHusimi:
    def test_packet_splits(self, rabi: RunConfig, system: QuantumSystem):
        snapshots = rabi.husimi_times[1:]
        spec = HusimiGridSpec(extent=rabi.husimi_extent, points=rabi.husimi_points)
        maxima = []
        for point in rabi.points.values():
            state0 = coherent_state(point, rabi.params)
            for t, psi in zip(snapshots, evolve(state0, system.spectrum, snapshots)):
                grid = husimi_q(QuantumState(psi), spec, timestamp=t)
                assert grid.normalization() == pytest.approx(1.0, abs=1e-3)
                maxima.append(count_local_maxima(grid))
        assert max(maxima) >= 2


# ── Jaynes-Cummings limit ─────────────────────────────────────────────


class TestJaynesCummings:
    @pytest.fixture(scope="class")
    def jc(self) -> RunConfig:
        return load_config("jc.cfg")

    @pytest.fixture(scope="class")
    def jc_system(self, jc: RunConfig) -> QuantumSystem:
        return QuantumSystem.build(jc.params)

    def test_excitation_conserved(self, jc: RunConfig, jc_system: QuantumSystem):
        times = sample_times(0.0, 50.0, 0.05)
        for point in jc.points.values():
            state0 = coherent_state(point, jc.params)
            states = evolve(state0, jc_system.spectrum, times)
            n = expectation_series(states, jc_system.ops.excitation)
            assert np.max(np.abs(n - n[0])) < 1e-8

    def test_sections_are_closed_curves(self, jc: RunConfig):
        for point in jc.points.values():
            section = poincare_section(point, jc.params, 1000.0, max_points=500)
            q1, p1, p2 = section.points.T
            n = 0.5 * (q1**2 + p1**2 + p2**2)
            assert np.ptp(n) < 1e-7

    def test_growth_coincides_with_collapse(
        self, jc: RunConfig, jc_system: QuantumSystem
    ):
        times = sample_times(0.0, 50.0, 0.01)
        for point in jc.points.values():
            fit = fit_early_growth(quadrature_otoc(point, jc_system, times)["sum"])
            assert fit.rate > 0
            state0 = coherent_state(point, jc.params)
            w = population_inversion(
                state0, jc_system.spectrum, times, jc_system.ops.sigma_z
            )
            spans = collapse_windows(w, jc.inversion_window, jc.collapse_threshold)
            _, overlap = best_overlap(fit.window, spans)
            assert overlap > 0.5
