"""Tests for src.model — parameters, operators, coherent states, energy shell."""

import math

import numpy as np
import pytest

from src.errors import CutoffError, DomainError
from src.model import (
    ModelParams,
    PhasePoint,
    QuantumState,
    build_hamiltonian,
    build_operators,
    check_cutoff,
    classical_energy,
    coherent_state,
    fock_coherent_amplitudes,
    on_shell_point,
    solve_p2_on_shell,
)


@pytest.fixture
def rabi_params() -> ModelParams:
    return ModelParams(omega=1.0, omega0=0.2, g1=0.9, g2=0.5, np=150)


@pytest.fixture
def jc_params() -> ModelParams:
    return ModelParams(omega=1.0, omega0=1.0, g1=1.0, g2=0.0, np=150)


# ── ModelParams / PhasePoint ──────────────────────────────────────────


class TestModelParams:
    def test_dimension(self):
        p = ModelParams(omega=1.0, omega0=0.2, np=150)
        assert p.dim == 302
        assert p.fock_dim == 151

    def test_couplings(self, rabi_params: ModelParams):
        assert rabi_params.g_plus == pytest.approx(1.4)
        assert rabi_params.g_minus == pytest.approx(0.4)

    def test_cutoff_by_field_name(self):
        assert ModelParams(omega=1.0, omega0=1.0, cutoff=12).cutoff == 12

    def test_zero_cutoff_rejected(self):
        with pytest.raises(ValueError):
            ModelParams(omega=1.0, omega0=0.2, np=0)

    def test_nonpositive_omega_rejected(self):
        with pytest.raises(ValueError):
            ModelParams(omega=0.0, omega0=0.2)

    def test_perturbed_shifts_omega_only(self, rabi_params: ModelParams):
        shifted = rabi_params.perturbed(0.1)
        assert shifted.omega == pytest.approx(1.1)
        assert shifted.omega0 == rabi_params.omega0
        assert shifted.cutoff == rabi_params.cutoff

    def test_with_cutoff(self, rabi_params: ModelParams):
        assert rabi_params.with_cutoff(200).dim == 402


class TestPhasePoint:
    def test_outside_bloch_domain_rejected(self):
        with pytest.raises(ValueError, match="Bloch"):
            PhasePoint(q1=1.5, p1=0.5)

    def test_boundary_rejected(self):
        with pytest.raises(ValueError):
            PhasePoint(q1=0.0, p1=math.sqrt(2.0) + 1e-12)

    def test_tau_and_beta(self):
        pt = PhasePoint(q1=0.5, p1=-0.5, q2=1.0, p2=2.0)
        assert pt.tau == pytest.approx(complex(0.5, -0.5) / math.sqrt(1.5))
        assert pt.beta == pytest.approx(complex(1.0, 2.0) / math.sqrt(2.0))

    def test_array_roundtrip(self):
        pt = PhasePoint(q1=0.1, p1=0.2, q2=0.3, p2=0.4)
        assert PhasePoint.from_array(pt.as_array()) == pt


# ── Operators and Hamiltonian ─────────────────────────────────────────


class TestOperators:
    def test_canonical_commutator_below_cutoff(self):
        ops = build_operators(ModelParams(omega=1.0, omega0=1.0, np=10))
        comm = ops.a @ ops.a_dag - ops.a_dag @ ops.a
        diag = np.real(np.diag(comm)).reshape(2, -1)
        # truncation spoils only the top Fock level
        assert np.allclose(diag[:, :-1], 1.0)

    def test_quadratures_hermitian(self):
        ops = build_operators(ModelParams(omega=1.0, omega0=1.0, np=10))
        assert np.allclose(ops.q2, ops.q2.conj().T)
        assert np.allclose(ops.p2, ops.p2.conj().T)

    def test_sigma_z_ordering(self):
        ops = build_operators(ModelParams(omega=1.0, omega0=1.0, np=3))
        assert np.allclose(np.diag(ops.sigma_z).real, [1] * 4 + [-1] * 4)

    def test_sigma_plus_raises_ground_to_excited(self):
        ops = build_operators(ModelParams(omega=1.0, omega0=1.0, np=3))
        ground_vacuum = np.zeros(8)
        ground_vacuum[4] = 1.0
        excited_vacuum = np.zeros(8)
        excited_vacuum[0] = 1.0
        assert np.allclose(ops.sigma_plus @ ground_vacuum, excited_vacuum)

    def test_hamiltonian_hermitian(self, rabi_params: ModelParams):
        h = build_hamiltonian(rabi_params.with_cutoff(20))
        assert np.max(np.abs(h - h.conj().T)) < 1e-12

    def test_jc_conserves_excitation(self):
        params = ModelParams(omega=1.0, omega0=1.0, g1=1.0, g2=0.0, np=20)
        ops = build_operators(params)
        h = build_hamiltonian(params, ops)
        assert np.max(np.abs(h @ ops.excitation - ops.excitation @ h)) < 1e-12

    def test_anisotropic_breaks_excitation(self):
        params = ModelParams(omega=1.0, omega0=1.0, g1=1.0, g2=0.5, np=20)
        ops = build_operators(params)
        h = build_hamiltonian(params, ops)
        assert np.max(np.abs(h @ ops.excitation - ops.excitation @ h)) > 0.1


# ── Coherent states ───────────────────────────────────────────────────


class TestCoherentState:
    def test_fock_amplitudes_vacuum(self):
        amps = fock_coherent_amplitudes(0.0, 5)
        assert np.allclose(amps, [1, 0, 0, 0, 0, 0])

    def test_fock_amplitudes_poisson(self):
        beta = 1.5 + 0.5j
        amps = fock_coherent_amplitudes(beta, 60)
        probs = np.abs(amps) ** 2
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.dot(np.arange(61), probs) == pytest.approx(abs(beta) ** 2)

    def test_normalized(self, rabi_params: ModelParams):
        state = coherent_state(PhasePoint(q1=0.0, p1=-0.95, p2=6.14757), rabi_params)
        assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-12)
        assert state.dim == 302

    def test_quadrature_means(self):
        params = ModelParams(omega=1.0, omega0=1.0, np=60)
        ops = build_operators(params)
        pt = PhasePoint(q1=0.3, p1=0.2, q2=1.2, p2=-0.7)
        psi = coherent_state(pt, params).amplitudes
        assert np.vdot(psi, ops.q2 @ psi).real == pytest.approx(1.2, abs=1e-10)
        assert np.vdot(psi, ops.p2 @ psi).real == pytest.approx(-0.7, abs=1e-10)

    def test_atomic_inversion_matches_radius(self):
        params = ModelParams(omega=1.0, omega0=1.0, np=10)
        ops = build_operators(params)
        pt = PhasePoint(q1=0.6, p1=-0.8)
        psi = coherent_state(pt, params).amplitudes
        assert np.vdot(psi, ops.sigma_z @ psi).real == pytest.approx(pt.radius2 - 1.0)

    @pytest.mark.parametrize(
        "point",
        [
            (0.0, -0.95, 0.0, 6.14757),
            (-0.86413, 0.92136, 0.0, 3.37955),
            (0.4, -0.3, 1.1, 2.0),
        ],
        ids=["C", "R", "generic"],
    )
    def test_energy_expectation_is_classical_energy(self, rabi_params, point):
        h = build_hamiltonian(rabi_params)
        psi = coherent_state(PhasePoint.from_array(point), rabi_params).amplitudes
        expected = classical_energy(point, rabi_params)
        assert np.vdot(psi, h @ psi).real == pytest.approx(expected, abs=1e-5)

    def test_cutoff_tail_rejected(self):
        params = ModelParams(omega=1.0, omega0=1.0, np=10)
        with pytest.raises(CutoffError):
            coherent_state(PhasePoint(q2=6.0, p2=6.0), params)

    def test_check_cutoff_returns_tail(self):
        assert check_cutoff(0.5, 40) < 1e-20


class TestQuantumState:
    def test_unnormalized_rejected(self):
        with pytest.raises(DomainError):
            QuantumState(np.array([1.0, 1.0, 0.0, 0.0]))

    def test_odd_dimension_rejected(self):
        with pytest.raises(DomainError):
            QuantumState(np.array([1.0, 0.0, 0.0]))

    def test_read_only(self):
        state = QuantumState.normalized([1.0, 1.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            state.amplitudes[0] = 0.0

    def test_blocks(self):
        state = QuantumState.normalized([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        assert state.blocks().shape == (2, 3)
        assert state.cutoff == 2


# ── Classical energy and the shell ────────────────────────────────────


class TestEnergyShell:
    @pytest.mark.parametrize(
        "point",
        [(0.0, -0.95, 0.0, 6.14757), (-0.86413, 0.92136, 0.0, 3.37955)],
        ids=["C", "R"],
    )
    def test_chaotic_and_regular_points_on_shell(self, rabi_params, point):
        assert classical_energy(point, rabi_params) == pytest.approx(2.0, abs=1e-4)

    @pytest.mark.parametrize(
        "p1, p2",
        [(0.7, 2.69024), (0.3, 3.02284), (-0.4, 3.69836), (-0.6, 3.85016)],
        ids=["R1", "R2", "R3", "R4"],
    )
    def test_jc_points_on_shell(self, jc_params, p1, p2):
        energy = classical_energy((0.0, p1, 0.0, p2), jc_params)
        assert energy == pytest.approx(5.0, abs=1e-4)

    def test_solve_recovers_point_c(self, rabi_params: ModelParams):
        p2 = solve_p2_on_shell(0.0, -0.95, 0.0, 2.0, rabi_params)
        assert p2 == pytest.approx(6.14757, abs=1e-4)

    @pytest.mark.parametrize("energy", [-0.4, 0.0, 2.0, 7.5])
    def test_origin_closed_form(self, rabi_params: ModelParams, energy: float):
        p2 = solve_p2_on_shell(0.0, 0.0, 0.0, energy, rabi_params)
        p = rabi_params
        expected = math.sqrt(2.0 * (energy + 0.5 * p.omega) / p.omega0)
        assert p2 == pytest.approx(expected, rel=1e-12)

    def test_on_shell_point_energy(self, rabi_params: ModelParams):
        pt = on_shell_point(0.4, 0.3, 0.5, 2.0, rabi_params)
        assert pt.p2 > 0
        assert classical_energy(pt, rabi_params) == pytest.approx(2.0, abs=1e-10)

    def test_linear_case_without_cavity_frequency(self):
        params = ModelParams(omega=1.0, omega0=0.0, g1=1.0, g2=0.0)
        pt = on_shell_point(0.0, 0.5, 0.0, 1.0, params)
        assert classical_energy(pt, params) == pytest.approx(1.0, abs=1e-12)

    def test_no_real_root(self, rabi_params: ModelParams):
        with pytest.raises(DomainError, match="no real p2"):
            solve_p2_on_shell(0.0, -0.95, 0.0, -5.0, rabi_params)

    def test_outside_domain(self, rabi_params: ModelParams):
        with pytest.raises(DomainError):
            solve_p2_on_shell(1.2, 1.2, 0.0, 2.0, rabi_params)

    def test_array_outside_domain(self, rabi_params: ModelParams):
        with pytest.raises(DomainError):
            classical_energy(np.array([1.5, 0.5, 0.0, 0.0]), rabi_params)
