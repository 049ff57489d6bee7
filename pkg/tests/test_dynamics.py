import numpy as np
import pytest

from buschain.circuit import make_chain
from buschain.control import flattop_trajectory
from buschain.dynamics import (
    CZ_TARGET,
    AccuracyError,
    NoiseSpec,
    NotPhaseLikeError,
    _dissipator_halfstep,
    _ModeDissipator,
    average_gate_error,
    computational_basis,
    computational_energies,
    computational_unitary,
    conditional_phase,
    gate_report,
    propagate_channel,
    propagate_unitary,
    remove_local_phases,
    step_unitaries,
    subspace_leakage,
)

DEVICE_FREQS = (5.0, 7.0, 5.65, 7.2, 5.2)


def device_chain(g_ref=0.170):
    return make_chain(DEVICE_FREQS, -0.3, g_ref, nu_ref=6.0, levels=3)


IDLE = 5.518774  # zeta zero for g = 170 MHz, precomputed


def idle_hold_pulse(gate_time=16.0):
    return flattop_trajectory(gate_time, 0.0, IDLE, IDLE)


class TestConditionalPhase:
    def test_cz_gives_pi(self):
        assert conditional_phase(np.diag([1, 1, 1, -1]).astype(complex)) == pytest.approx(np.pi)

    def test_identity_gives_zero(self):
        assert conditional_phase(np.eye(4, dtype=complex)) == pytest.approx(0.0)

    def test_reads_corner_phase(self):
        for theta in (0.3, -1.2, 2.9):
            u = np.diag([1, 1, 1, np.exp(1j * theta)])
            assert conditional_phase(u) == pytest.approx(theta)

    def test_rejects_non_dominant_block(self):
        u = np.eye(4, dtype=complex)
        u[1, 1] = 0.3
        with pytest.raises(NotPhaseLikeError):
            conditional_phase(u)


class TestRemoveLocalPhases:
    def test_pure_local_z_maps_to_identity(self):
        alpha, beta = 0.7, -0.4
        m = np.diag([1, np.exp(1j * beta), np.exp(1j * alpha), np.exp(1j * (alpha + beta))])
        np.testing.assert_allclose(remove_local_phases(m), np.eye(4), atol=1e-12)

    def test_cz_unchanged(self):
        np.testing.assert_allclose(remove_local_phases(CZ_TARGET.copy()), CZ_TARGET, atol=1e-12)

    def test_conditional_phase_invariant(self):
        # the phase is defined modulo 2*pi; re-phasing may move the branch
        rng = np.random.default_rng(7)
        for _ in range(100):
            phases = np.exp(1j * rng.uniform(-np.pi, np.pi, 4))
            m = np.diag(phases) + 0.12 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
            if np.any(np.abs(np.diag(m)) <= 0.5):
                continue
            delta = conditional_phase(remove_local_phases(m)) - conditional_phase(m)
            delta = (delta + np.pi) % (2 * np.pi) - np.pi
            assert abs(delta) < 1e-10


class TestAverageGateError:
    def test_perfect_cz_has_zero_error(self):
        assert average_gate_error(CZ_TARGET.copy()) == pytest.approx(0.0, abs=1e-14)

    def test_identity_against_cz_closed_form(self):
        # F = (4 + |1+1+1-1|^2)/20 = 0.4 without phase removal
        assert average_gate_error(np.eye(4, dtype=complex)) == pytest.approx(0.6)

    def test_leaky_block_penalised(self):
        m = CZ_TARGET * 0.9
        assert average_gate_error(m) > 0.0


class TestNoiseSpec:
    def test_kappa_definition(self):
        chain = device_chain()
        noise = NoiseSpec((5e3, 5e3))
        k1, k2 = noise.kappas(chain)
        assert k1 == pytest.approx(2 * np.pi * 7.0 / 5e3)
        assert k2 == pytest.approx(2 * np.pi * 7.2 / 5e3)

    def test_infinite_q_is_lossless(self):
        noise = NoiseSpec((np.inf, np.inf))
        assert noise.lossless
        assert noise.kappas(device_chain()) == (0.0, 0.0)

    def test_rejects_nonpositive_q(self):
        with pytest.raises(ValueError):
            NoiseSpec((0.0, 1e3))


class TestUnitaryPropagation:
    def test_zero_duration_limit_is_identity(self):
        chain = device_chain()
        pulse = flattop_trajectory(1e-9, 0.3, IDLE, 5.30)
        u = propagate_unitary(chain, pulse, dt=0.25, min_steps=1)
        assert np.abs(u - np.eye(chain.total_dim)).max() < 1e-6

    def test_unitarity_residual(self):
        chain = device_chain()
        pulse = flattop_trajectory(40.0, 0.3, IDLE, 5.30)
        u = propagate_unitary(chain, pulse, dt=0.5)
        assert np.abs(u.conj().T @ u - np.eye(chain.total_dim)).max() < 1e-8

    def test_static_hold_accumulates_dressed_phases(self):
        chain = device_chain()
        gate_time = 16.0
        block = computational_unitary(chain, idle_hold_pulse(gate_time), dt=0.25)
        energies = computational_energies(chain, IDLE)
        for k in range(4):
            expected = -2 * np.pi * energies[k] * gate_time
            delta = np.angle(block[k, k]) - expected
            delta = (delta + np.pi) % (2 * np.pi) - np.pi
            assert abs(delta) < 1e-6

    def test_step_count_guard(self):
        chain = device_chain()
        pulse = flattop_trajectory(8.0, 0.3, IDLE, 5.30)
        with pytest.raises(ValueError):
            computational_unitary(chain, pulse, dt=0.5)  # only 16 steps

    def test_verify_dt_accepts_converged_step(self):
        chain = device_chain()
        u = propagate_unitary(chain, idle_hold_pulse(32.0), dt=0.5, verify_dt=True)
        assert u.shape == (243, 243)

    def test_block_matches_full_propagator(self):
        chain = device_chain()
        pulse = flattop_trajectory(40.0, 0.3, IDLE, 5.35)
        u = propagate_unitary(chain, pulse, dt=0.5)
        b = computational_basis(chain, IDLE)
        np.testing.assert_allclose(computational_unitary(chain, pulse, dt=0.5),
                                   b.conj().T @ u @ b, atol=1e-10)


class TestDissipatorSemigroup:
    def test_single_mode_analytic_decay(self):
        kappa = 0.02
        mode = _ModeDissipator((3,), 0, kappa)
        rho = np.zeros((1, 3, 3), dtype=complex)
        rho[0, 1, 1] = 1.0
        t_total = 1.0 / kappa
        n = 200
        for _ in range(n):
            rho = _dissipator_halfstep(rho, [mode], t_total / n)
        assert rho[0, 1, 1].real == pytest.approx(np.exp(-1.0), abs=1e-4)
        assert np.trace(rho[0]).real == pytest.approx(1.0, abs=1e-12)

    def test_two_photon_decays_twice_as_fast(self):
        kappa = 0.01
        mode = _ModeDissipator((3,), 0, kappa)
        rho = np.zeros((1, 3, 3), dtype=complex)
        rho[0, 2, 2] = 1.0
        t_total = 10.0
        for _ in range(100):
            rho = _dissipator_halfstep(rho, [mode], t_total / 100)
        assert rho[0, 2, 2].real == pytest.approx(np.exp(-2 * kappa * t_total), abs=1e-4)


class TestChannel:
    def test_lossless_channel_matches_unitary_block(self):
        chain = device_chain()
        pulse = flattop_trajectory(40.0, 0.3, IDLE, 5.32)
        block = computational_unitary(chain, pulse, dt=0.5)
        channel = propagate_channel(chain, pulse, NoiseSpec((np.inf, np.inf)), dt=0.5)
        expected = np.kron(block, block.conj())
        assert np.abs(channel.superop - expected).max() < 1e-8
        assert abs(average_gate_error(channel)
                   - average_gate_error(remove_local_phases(block))) < 1e-8

    def test_trace_preserved_and_positive(self):
        chain = device_chain()
        pulse = flattop_trajectory(40.0, 0.3, IDLE, 5.32)
        channel = propagate_channel(chain, pulse, NoiseSpec((5e3, 5e3)), dt=0.5)
        assert channel.trace_drift < 1e-6
        assert channel.min_population_eigenvalue > -1e-8

    def test_decay_strictly_increases_error(self):
        chain = device_chain()
        pulse = flattop_trajectory(40.0, 0.3, IDLE, 5.32)
        steps, _ = step_unitaries(chain, pulse, dt=0.5)
        err_hi_q = average_gate_error(
            propagate_channel(chain, pulse, NoiseSpec((1e6, 1e6)), dt=0.5, steps=steps))
        err_lo_q = average_gate_error(
            propagate_channel(chain, pulse, NoiseSpec((1e3, 1e3)), dt=0.5, steps=steps))
        baseline = average_gate_error(
            remove_local_phases(computational_unitary(chain, pulse, dt=0.5)))
        assert baseline - 1e-8 <= err_hi_q < err_lo_q


class TestGateReport:
    def test_report_without_noise(self):
        chain = device_chain()
        pulse = flattop_trajectory(40.0, 0.3, IDLE, 5.32)
        report = gate_report(chain, pulse, dt=0.5)
        assert report.error_avg == report.unitary_baseline
        assert 0.0 <= report.leakage <= 1.0
        assert report.solver.unitarity_residual < 1e-8

    def test_report_with_noise_bounds_baseline(self):
        chain = device_chain()
        pulse = flattop_trajectory(40.0, 0.3, IDLE, 5.32)
        report = gate_report(chain, pulse, noise=NoiseSpec((5e3, 5e3)), dt=0.5)
        assert report.error_avg >= report.unitary_baseline - 1e-8
        assert report.solver.trace_drift < 1e-6
