import numpy as np
import pytest

from buschain.circuit import build_hamiltonian, lowering_operator, make_chain
from buschain.spectrum import (
    COMPUTATIONAL_LABELS,
    NoZeroCrossingError,
    dressed_spectrum,
    find_idle_frequency,
    sweep_zz,
    zz_coupling,
)

DEVICE_FREQS = (5.0, 7.0, 5.65, 7.2, 5.2)


def device_chain(g_ref=0.170, levels=3, scaling="sqrt-frequency"):
    return make_chain(DEVICE_FREQS, -0.3, g_ref, nu_ref=6.0, levels=levels, scaling=scaling)


def two_mode_hamiltonian(nu_q, eta, nu_r, g, dims=(3, 3)):
    """Transmon coupled to one resonator with full (a+a+)(b+b+) coupling."""
    dq, dr = dims
    aq = np.kron(lowering_operator(dq), np.eye(dr))
    br = np.kron(np.eye(dq), lowering_operator(dr))
    nq, nr = aq.conj().T @ aq, br.conj().T @ br
    h = (nu_q * nq + 0.5 * eta * (nq @ nq - nq) + nu_r * nr
         + g * (aq + aq.conj().T) @ (br + br.conj().T))
    return h


def second_order_shift(h_free_diag, v, state):
    """Independent second-order perturbation oracle by enumeration."""
    e0 = h_free_diag[state]
    shift = 0.0
    for m in range(len(h_free_diag)):
        if m == state:
            continue
        coupling = v[m, state]
        if coupling != 0.0:
            shift += abs(coupling) ** 2 / (e0 - h_free_diag[m])
    return shift


class TestDressedSpectrum:
    def test_uncoupled_labels_are_exact(self):
        chain = device_chain(g_ref=0.0)
        spec = dressed_spectrum(build_hamiltonian(chain, 5.65), chain.dims)
        assert not spec.ambiguous
        for label in [(0, 0, 0, 0, 0), (1, 0, 0, 0, 1), (2, 2, 2, 2, 2)]:
            assert spec.overlap_of[label] == pytest.approx(1.0, abs=1e-10)
        assert spec.energy((1, 0, 0, 0, 0)) == pytest.approx(5.0, abs=1e-12)
        assert spec.energy((0, 0, 0, 0, 1)) == pytest.approx(5.2, abs=1e-12)

    def test_label_map_is_injective(self):
        chain = device_chain()
        spec = dressed_spectrum(build_hamiltonian(chain, 5.65), chain.dims)
        indices = list(spec.label_of.values())
        assert len(indices) == len(set(indices)) == chain.total_dim

    def test_energies_sorted_and_residuals_small(self):
        chain = device_chain()
        h = build_hamiltonian(chain, 5.5)
        spec = dressed_spectrum(h, chain.dims)
        assert np.all(np.diff(spec.energies) >= 0)
        hnorm = np.linalg.norm(h, 2)
        for label in COMPUTATIONAL_LABELS:
            idx = spec.label_of[label]
            v = spec.vectors[:, idx]
            residual = np.linalg.norm(h @ v - spec.energies[idx] * v)
            assert residual <= 1e-9 * hnorm

    def test_rejects_non_hermitian(self):
        h = np.array([[0.0, 1.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError):
            dressed_spectrum(h, (2,))

    def test_far_detuned_computational_labels_clean(self):
        chain = device_chain()
        spec = dressed_spectrum(build_hamiltonian(chain, 6.5), chain.dims)
        for label in COMPUTATIONAL_LABELS:
            assert spec.overlap_of[label] > 0.9
            assert label not in spec.ambiguous

    def test_qubit_resonator_pair_matches_perturbation_oracle(self):
        nu_q, eta, nu_r, g = 5.0, -0.3, 7.0, 0.02
        h = two_mode_hamiltonian(nu_q, eta, nu_r, g)
        h0 = np.diag(np.real(np.diag(two_mode_hamiltonian(nu_q, eta, nu_r, 0.0))))
        v = h - h0
        spec = dressed_spectrum(h, (3, 3))
        e10 = spec.energy((1, 0)) - spec.energy((0, 0))
        shift = e10 - nu_q

        i10 = int(np.ravel_multi_index((1, 0), (3, 3)))
        i00 = 0
        oracle = (second_order_shift(np.diag(h0), v, i10)
                  - second_order_shift(np.diag(h0), v, i00))
        assert shift == pytest.approx(oracle, rel=0.05)
        # the co-/counter-rotating closed form quoted for this check
        closed_form = g**2 / (nu_q - nu_r) - g**2 / (nu_q + nu_r)
        assert shift == pytest.approx(closed_form, rel=0.05)

    def test_continuity_tracking_follows_previous_point(self):
        chain = device_chain()
        spec_a = dressed_spectrum(build_hamiltonian(chain, 6.00), chain.dims)
        spec_b = dressed_spectrum(build_hamiltonian(chain, 5.99), chain.dims, previous=spec_a)
        for label in COMPUTATIONAL_LABELS:
            assert spec_b.overlap_of[label] > 0.99


class TestZZ:
    def test_zero_coupling_gives_zero_zeta(self):
        point = zz_coupling(device_chain(g_ref=0.0), 5.65)
        assert abs(point.zeta) < 1e-9
        assert not point.ambiguous

    def test_single_point_sweep_matches_zz(self):
        chain = device_chain()
        [point] = sweep_zz(chain, [5.65])
        direct = zz_coupling(chain, 5.65)
        assert point.zeta == pytest.approx(direct.zeta, abs=1e-15)
        assert point.nu_bus == direct.nu_bus

    def test_sweep_requires_monotone_nonempty_grid(self):
        chain = device_chain()
        with pytest.raises(ValueError):
            sweep_zz(chain, [])
        with pytest.raises(ValueError):
            sweep_zz(chain, [5.4, 5.6, 5.5])

    def test_reversed_grid_reverses_points_and_keeps_values(self):
        chain = device_chain()
        grid = np.linspace(5.35, 6.1, 16)
        fwd = sweep_zz(chain, grid)
        rev = sweep_zz(chain, grid[::-1])
        for p, q in zip(fwd, rev[::-1]):
            assert p.nu_bus == pytest.approx(q.nu_bus)
            if not (p.ambiguous or q.ambiguous):
                assert abs(p.zeta - q.zeta) < 1e-6  # 1 kHz

    def test_qubit_relabeling_symmetry(self):
        nu = 5.47
        z_fwd = zz_coupling(device_chain(), nu).zeta
        mirrored = make_chain((5.2, 7.2, 5.65, 7.0, 5.0), -0.3, 0.170)
        z_rev = zz_coupling(mirrored, nu).zeta
        assert abs(z_fwd - z_rev) < 1e-9  # 1 Hz

    def test_strong_hybridisation_is_flagged(self):
        chain = device_chain()
        point = zz_coupling(chain, 5.2625)  # at the two-photon anti-crossing
        assert point.ambiguous


class TestIdleFinding:
    def test_idle_found_with_small_residual(self):
        chain = device_chain()
        nu_idle = find_idle_frequency(chain, (5.3, 6.0))
        assert 5.3 < nu_idle < 6.0
        assert abs(zz_coupling(chain, nu_idle).zeta) <= 1e-5

    def test_agrees_with_brute_force_grid(self):
        chain = device_chain()
        nu_idle = find_idle_frequency(chain, (5.46, 5.58), tol=1e-5)
        grid = np.linspace(5.46, 5.58, 1001)
        best = min((abs(p.zeta) for p in sweep_zz(chain, grid)))
        assert abs(zz_coupling(chain, nu_idle).zeta) <= best + 2e-5

    def test_zero_coupling_raises(self):
        with pytest.raises(NoZeroCrossingError):
            find_idle_frequency(device_chain(g_ref=0.0), (5.3, 6.0))

    def test_no_crossing_in_bracket_raises(self):
        with pytest.raises(NoZeroCrossingError):
            find_idle_frequency(device_chain(), (5.29, 5.36), tol=1e-7, scan_points=9)
