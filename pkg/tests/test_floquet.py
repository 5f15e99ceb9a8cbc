"""Replica-space construction, quasienergies, and propagation oracles."""

import numpy as np
import pytest

from floqdyn.floquet import (
    ConstructionError,
    FourierHamiltonian,
    assemble_floquet_hamiltonian,
    converge_n_max,
    floquet_density_components,
    floquet_evolution,
    floquet_observable,
    quasi_eigensystem,
    reference_propagate,
    unitarity_defect,
)

SZ = np.diag([1.0, -1.0]).astype(complex)
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def driven_two_level(delta=2.0, b=1.0, omega=1.0):
    return FourierHamiltonian({0: delta * SZ, 1: (b / 2) * SX}, omega=omega)


class TestFourierHamiltonian:
    def test_negative_harmonic_autofilled(self):
        m = np.array([[0.0, 1.0 + 0.5j], [0.0, 0.0]])
        h = FourierHamiltonian({0: SZ, 1: m}, omega=1.0)
        assert np.allclose(h.components[-1], m.conj().T)

    def test_inconsistent_pair_rejected(self):
        with pytest.raises(ConstructionError):
            FourierHamiltonian({1: SX, -1: 2 * SX}, omega=1.0)

    def test_at_time_is_hermitian_and_periodic(self):
        h = driven_two_level()
        for t in [0.0, 0.3, 1.7]:
            ht = h.at_time(t)
            assert np.allclose(ht, ht.conj().T)
            assert np.allclose(ht, h.at_time(t + h.period), atol=1e-12)

    def test_cosine_driving_value(self):
        # H^{(+-1)} = (B/2) sx represents B cos(wt) sx
        h = driven_two_level(b=0.8)
        assert np.allclose(h.at_time(0.0), 2.0 * SZ + 0.8 * SX)

    def test_nonpositive_omega_rejected(self):
        with pytest.raises(ConstructionError):
            FourierHamiltonian({0: SZ}, omega=0.0)


class TestAssembly:
    def test_block_contract(self):
        h = driven_two_level(delta=1.5, b=0.6, omega=0.7)
        f = assemble_floquet_hamiltonian(h, 3)
        for n in range(-3, 4):
            for m in range(-3, 4):
                expected = h.components.get(n - m, np.zeros((2, 2))).copy()
                if n == m:
                    expected = expected + n * h.omega * np.eye(2)
                assert np.allclose(f.block(n, m), expected)

    def test_hermitian(self):
        f = assemble_floquet_hamiltonian(driven_two_level(), 4)
        assert f.is_hermitian()

    def test_truncation_warning(self):
        h = FourierHamiltonian({0: SZ, 2: 0.1 * SX}, omega=1.0)
        with pytest.warns(UserWarning, match="truncates"):
            assemble_floquet_hamiltonian(h, 1)


class TestQuasienergies:
    def test_undriven_ladder(self):
        """Static spectrum replicates as {E_alpha + n omega}, exactly."""
        h0 = np.array([[1.0, 0.3], [0.3, -0.7]])
        omega = 0.9
        f = assemble_floquet_hamiltonian(FourierHamiltonian({0: h0}, omega=omega), 5)
        eig = quasi_eigensystem(f)
        e = np.linalg.eigvalsh(h0)
        expected = np.sort(np.concatenate([e + n * omega for n in range(-5, 6)]))
        assert np.max(np.abs(eig.quasienergies - expected)) <= 1e-12

    def test_reconstruction_and_unitarity(self):
        f = assemble_floquet_hamiltonian(driven_two_level(), 6)
        eig = quasi_eigensystem(f)
        rebuilt = (eig.Y * eig.quasienergies[np.newaxis, :]) @ eig.Y.conj().T
        assert np.max(np.abs(rebuilt - f.blocks)) <= 1e-10
        gram = eig.Y.conj().T @ eig.Y
        assert np.max(np.abs(gram - np.eye(eig.size))) <= 1e-10

    def test_deterministic_gauge(self):
        f = assemble_floquet_hamiltonian(driven_two_level(), 4)
        a = quasi_eigensystem(f)
        b = quasi_eigensystem(f)
        assert np.array_equal(a.Y, b.Y)


class TestEvolution:
    def test_undriven_exact(self):
        h0 = np.array([[0.4, 0.1], [0.1, -0.4]])
        h = FourierHamiltonian({0: h0}, omega=1.0)
        eig = quasi_eigensystem(assemble_floquet_hamiltonian(h, 3))
        from scipy.linalg import expm

        t = 2.7
        u = floquet_evolution(eig, t)
        assert np.max(np.abs(u - expm(-1j * h0 * t))) <= 1e-10

    def test_against_direct_reference(self):
        """Replica propagation reproduces the direct integrator for a driven
        two-level system over several periods."""
        h = driven_two_level(delta=2.0, b=1.0, omega=1.0)
        eig = quasi_eigensystem(assemble_floquet_hamiltonian(h, 12))
        rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        t_grid = np.linspace(0.0, 3 * h.period, 16)
        ref = reference_propagate(h, rho0, t_grid)
        worst = 0.0
        for t, r in zip(t_grid[1:], ref[1:]):
            u = floquet_evolution(eig, t)
            worst = max(worst, np.max(np.abs(u @ rho0 @ u.conj().T - r)))
        assert worst <= 1e-7

    def test_unitarity_defect_shrinks_with_n_max(self):
        h = driven_two_level()
        t = 1.5 * h.period
        defects = []
        for nm in (4, 8, 12):
            eig = quasi_eigensystem(assemble_floquet_hamiltonian(h, nm))
            defects.append(unitarity_defect(floquet_evolution(eig, t)))
        assert defects[2] < defects[1] < defects[0]


class TestObservables:
    def test_components_at_t0(self):
        h = driven_two_level()
        eig = quasi_eigensystem(assemble_floquet_hamiltonian(h, 5))
        rho0 = 0.5 * np.eye(2) + 0.1 * SX
        comps = floquet_density_components(eig, rho0, 0.0)
        assert np.allclose(comps[0], rho0, atol=1e-12)
        for n in comps:
            if n != 0:
                assert np.max(np.abs(comps[n])) <= 1e-12

    def test_static_observable_matches_direct(self):
        h = driven_two_level(b=0.5)
        eig = quasi_eigensystem(assemble_floquet_hamiltonian(h, 10))
        rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        t_grid = np.linspace(0.0, 2 * h.period, 9)
        ref = reference_propagate(h, rho0, t_grid)
        for t, r in zip(t_grid, ref):
            comps = floquet_density_components(eig, rho0, t)
            val = floquet_observable({0: SZ}, comps, t, h.omega)
            assert abs(val - np.trace(SZ @ r).real) <= 1e-6

    def test_imag_residue_warning(self):
        # a non-Hermitian "observable" harmonic forces a complex total
        comps = {0: np.array([[0.6, 0.0], [0.0, 0.4]], dtype=complex)}
        bad_obs = {1: 1j * SZ}
        with pytest.warns(UserWarning, match="imaginary residue"):
            floquet_observable(bad_obs, comps, 0.3, 1.0)


class TestReferencePropagate:
    def test_trace_and_purity_preserved(self):
        h = driven_two_level()
        rho0 = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)  # pure
        out = reference_propagate(h, rho0, np.linspace(0.0, 5.0, 6))
        for r in out:
            assert abs(np.trace(r).real - 1.0) <= 1e-10
            assert abs(np.trace(r @ r).real - 1.0) <= 1e-8

    def test_rejects_bad_density(self):
        h = driven_two_level()
        with pytest.raises(ValueError):
            reference_propagate(h, np.diag([2.0, 0.0]), np.linspace(0, 1, 3))


def test_converge_n_max_returns_adequate_truncation():
    h = driven_two_level(b=0.5)
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    nm = converge_n_max(h, rho0, {0: SZ}, t_check=2 * h.period, tol=1e-8)
    eig = quasi_eigensystem(assemble_floquet_hamiltonian(h, nm))
    ref = reference_propagate(h, rho0, np.array([0.0, 2 * h.period]))[-1]
    comps = floquet_density_components(eig, rho0, 2 * h.period)
    val = floquet_observable({0: SZ}, comps, 2 * h.period, h.omega)
    assert abs(val - np.trace(SZ @ ref).real) <= 1e-6
