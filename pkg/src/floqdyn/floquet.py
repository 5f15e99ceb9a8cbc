"""Floquet representations of time-periodic Hamiltonians.

Builds the extended (replica-space) Hamiltonian of a time-periodic system
from its Fourier harmonics, diagonalizes it, and reconstructs real-time
propagators and observables.  Also provides a direct fixed-step integrator
of the Liouville von-Neumann equation that serves as the numerical
reference for everything built on top of the replica machinery.

Replica-basis convention (binary contract): the extended matrix is indexed
with the harmonic index n ascending from -n_max to +n_max as the outer
index and the Hilbert index as the inner index.  Block (n, m) of the
extended Hamiltonian is H^(n-m) + delta_nm * n * omega * 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "FourierHamiltonian",
    "FloquetOperator",
    "FloquetEigensystem",
    "assemble_floquet_hamiltonian",
    "quasi_eigensystem",
    "floquet_evolution",
    "floquet_density_components",
    "floquet_observable",
    "reference_propagate",
    "unitarity_defect",
    "converge_n_max",
]

HERMITICITY_TOL = 1e-10


class ConstructionError(ValueError):
    """Raised when a Hamiltonian or operator violates a structural invariant."""


def _as_matrix(m, dim=None):
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConstructionError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ConstructionError(f"dimension mismatch: {a.shape[0]} != {dim}")
    return a


@dataclass(frozen=True)
class FourierHamiltonian:
    """Finite set of Fourier harmonics H^(n) of a time-periodic Hamiltonian.

    H(t) = sum_n H^(n) exp(i n omega t), with H^(-n) = H^(n)^dagger so that
    H(t) is Hermitian at every time.  A missing negative harmonic is filled
    in from its partner; an inconsistent stored pair is rejected.

    Parameters
    ----------
    components : mapping int -> (d, d) array
        Fourier harmonics.  The n = 0 entry is always present after
        construction (zero matrix if not supplied).
    omega : float
        Driving angular frequency (> 0, energy units, hbar = 1).
    """

    components: Mapping[int, np.ndarray]
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ConstructionError(f"omega must be positive, got {self.omega}")
        comps = {int(n): _as_matrix(m) for n, m in self.components.items()}
        if not comps:
            raise ConstructionError("at least one Fourier component is required")
        dim = next(iter(comps.values())).shape[0]
        for n, m in comps.items():
            _as_matrix(m, dim)
        if 0 not in comps:
            comps[0] = np.zeros((dim, dim), dtype=complex)
        # enforce H^(-n) = H^(n)^dagger, filling missing partners
        for n in sorted(comps):
            if n < 0:
                continue
            partner = comps[n].conj().T
            if -n in comps:
                if not np.allclose(comps[-n], partner, atol=HERMITICITY_TOL):
                    raise ConstructionError(
                        f"components {n} and {-n} are not Hermitian partners"
                    )
            else:
                comps[-n] = partner
        object.__setattr__(self, "components", {n: comps[n] for n in sorted(comps)})

    @property
    def dim(self) -> int:
        return self.components[0].shape[0]

    @property
    def max_harmonic(self) -> int:
        return max(abs(n) for n in self.components)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def at_time(self, t: float) -> np.ndarray:
        """Evaluate H(t) = sum_n H^(n) exp(i n omega t)."""
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for n, m in self.components.items():
            h += m * np.exp(1j * n * self.omega * t)
        return h

    def norm_bound(self) -> float:
        """Upper bound on ||H(t)|| (spectral norm), uniform in t."""
        return sum(np.linalg.norm(m, 2) for m in self.components.values())


@dataclass(frozen=True)
class FloquetOperator:
    """Block matrix over (replica index, Hilbert index).

    ``blocks`` is the dense ((2 n_max + 1) d) square matrix with replica
    index ascending outer, Hilbert index inner.
    """

    n_max: int
    dim: int
    omega: float
    blocks: np.ndarray

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError(f"n_max must be non-negative, got {self.n_max}")
        size = (2 * self.n_max + 1) * self.dim
        if self.blocks.shape != (size, size):
            raise ConstructionError(
                f"blocks has shape {self.blocks.shape}, expected {(size, size)}"
            )

    @property
    def size(self) -> int:
        return (2 * self.n_max + 1) * self.dim

    def block(self, n: int, m: int) -> np.ndarray:
        """Return the (n, m) replica block, n, m in [-n_max, n_max]."""
        i = (n + self.n_max) * self.dim
        j = (m + self.n_max) * self.dim
        return self.blocks[i : i + self.dim, j : j + self.dim]

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return bool(np.max(np.abs(self.blocks - self.blocks.conj().T)) <= tol)


@dataclass(frozen=True)
class FloquetEigensystem:
    """Eigenvectors Y and ascending quasienergies of a replica-space matrix."""

    Y: np.ndarray
    quasienergies: np.ndarray
    n_max: int
    dim: int
    omega: float

    @property
    def size(self) -> int:
        return (2 * self.n_max + 1) * self.dim


def assemble_floquet_hamiltonian(h: FourierHamiltonian, n_max: int) -> FloquetOperator:
    """Assemble the static replica-space Hamiltonian from Fourier harmonics.

    Block (n, m) = H^(n-m) + delta_nm * n * omega * identity.  Harmonics
    beyond the stored window contribute zero blocks.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    if n_max < h.max_harmonic:
        warnings.warn(
            f"n_max={n_max} truncates stored harmonics up to {h.max_harmonic}",
            stacklevel=2,
        )
    d = h.dim
    nrep = 2 * n_max + 1
    big = np.zeros((nrep * d, nrep * d), dtype=complex)
    eye = np.eye(d)
    for i, n in enumerate(range(-n_max, n_max + 1)):
        for j, m in enumerate(range(-n_max, n_max + 1)):
            blk = h.components.get(n - m)
            if blk is not None:
                big[i * d : (i + 1) * d, j * d : (j + 1) * d] = blk
        big[i * d : (i + 1) * d, i * d : (i + 1) * d] += n * h.omega * eye
    return FloquetOperator(n_max=n_max, dim=d, omega=h.omega, blocks=big)


def quasi_eigensystem(f: FloquetOperator) -> FloquetEigensystem:
    """Diagonalize a Hermitian replica-space operator.

    Eigenvalues come out ascending; each eigenvector's phase is fixed by
    making its largest-magnitude entry real and positive, so the output is
    deterministic for identical input.
    """
    if not f.is_hermitian():
        raise ValueError("replica-space operator is not Hermitian")
    evals, evecs = np.linalg.eigh(f.blocks)
    # deterministic gauge: largest-|.| entry of each column real positive
    idx = np.argmax(np.abs(evecs), axis=0)
    anchors = evecs[idx, np.arange(evecs.shape[1])]
    phases = anchors / np.abs(anchors)
    evecs = evecs / phases[np.newaxis, :]
    return FloquetEigensystem(
        Y=evecs, quasienergies=evals, n_max=f.n_max, dim=f.dim, omega=f.omega
    )


def _central_column_blocks(eig: FloquetEigensystem, big: np.ndarray):
    """Split the central block-column of a replica-square matrix into d x d blocks.

    Returns a dict n -> block (n, 0) of ``big``.
    """
    d = eig.dim
    j = eig.n_max * d
    col = big[:, j : j + d]
    return {
        n: col[(n + eig.n_max) * d : (n + eig.n_max + 1) * d, :]
        for n in range(-eig.n_max, eig.n_max + 1)
    }


def floquet_evolution(eig: FloquetEigensystem, t: float, t0: float = 0.0) -> np.ndarray:
    """Real-time evolution operator U(t, t0) from the replica eigensystem.

    U(t, t0) = sum_k <k| Y exp(-i Lambda (t - t0)) Y^dagger |0> exp(i k omega t),
    where <k|.|0> extracts the (k, 0) replica block.  Exactly unitary only in
    the untruncated limit; use :func:`unitarity_defect` as the diagnostic.
    """
    if t < t0:
        raise ValueError("t must be >= t0")
    phase = np.exp(-1j * eig.quasienergies * (t - t0))
    big = (eig.Y * phase[np.newaxis, :]) @ eig.Y.conj().T
    u = np.zeros((eig.dim, eig.dim), dtype=complex)
    for k, blk in _central_column_blocks(eig, big).items():
        u += blk * np.exp(1j * k * eig.omega * t)
    return u


def unitarity_defect(u: np.ndarray) -> float:
    """Frobenius norm of U^dagger U - 1 (replica-truncation diagnostic)."""
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def floquet_density_components(
    eig: FloquetEigensystem, rho0: np.ndarray, t: float, t0: float = 0.0
):
    """Fourier components rho^(n)(t) of the density propagated in replica space.

    The initial density enters as the replica-diagonal lift (identity in
    replica space tensor rho0); the components are read off the central
    block-column of the evolved replica-square density.
    """
    rho0 = _as_matrix(rho0, eig.dim)
    phase = np.exp(-1j * eig.quasienergies * (t - t0))
    uf = (eig.Y * phase[np.newaxis, :]) @ eig.Y.conj().T
    lift = np.kron(np.eye(2 * eig.n_max + 1), rho0)
    big = uf @ lift @ uf.conj().T
    return _central_column_blocks(eig, big)


def floquet_observable(
    o_components: Mapping[int, np.ndarray],
    rho_components: Mapping[int, np.ndarray],
    t: float,
    omega: float,
    residue_tol: float = 1e-8,
) -> float:
    """Observable expectation from Fourier components of operator and density.

    <O(t)> = Re sum_m Tr( sum_n O^(m-n) rho^(n)(t) ) exp(i m omega t).
    The imaginary residue is a consistency diagnostic for Hermitian
    observables against physical density components; a warning is emitted
    when it exceeds ``residue_tol``.
    """
    o_comps = {int(k): np.asarray(v, dtype=complex) for k, v in o_components.items()}
    r_comps = {int(k): np.asarray(v, dtype=complex) for k, v in rho_components.items()}
    d = next(iter(r_comps.values())).shape[0]
    for v in list(o_comps.values()) + list(r_comps.values()):
        if v.shape != (d, d):
            raise ValueError(f"component shape {v.shape} != {(d, d)}")
    total = 0.0 + 0.0j
    m_values = {k + n for k in o_comps for n in r_comps}
    for m in m_values:
        acc = 0.0 + 0.0j
        for n, rho_n in r_comps.items():
            o = o_comps.get(m - n)
            if o is not None:
                acc += np.trace(o @ rho_n)
        total += acc * np.exp(1j * m * omega * t)
    if abs(total.imag) > residue_tol:
        warnings.warn(
            f"imaginary residue {abs(total.imag):.2e} exceeds {residue_tol:.1e}",
            stacklevel=2,
        )
    return float(total.real)


def _check_density(rho: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("initial density is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("initial density does not have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ValueError("initial density is not positive semidefinite")
    return rho


def rk4_step(f, t, y, dt):
    """One classical 4th-order step of dy/dt = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def reference_propagate(
    h: FourierHamiltonian,
    rho0: np.ndarray,
    t_grid: np.ndarray,
    max_h_dt: float = 0.01,
) -> np.ndarray:
    """Directly integrate d rho / dt = -i [H(t), rho] on a time grid.

    Fixed-step classical 4th-order integration with per-step
    re-Hermitization rho <- (rho + rho^dagger)/2.  Each grid interval is
    subdivided so that ||H|| * dt <= ``max_h_dt``.  This is the oracle the
    replica-space machinery is validated against.

    Returns an array of shape (len(t_grid), d, d); t_grid[0] maps to rho0.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly ascending")
    rho = _check_density(rho0)
    dt_max = max_h_dt / max(h.norm_bound(), 1e-300)

    def rhs(t, r):
        ht = h.at_time(t)
        return -1j * (ht @ r - r @ ht)

    out = np.empty((len(t_grid), h.dim, h.dim), dtype=complex)
    out[0] = rho
    for i in range(1, len(t_grid)):
        t, t_next = t_grid[i - 1], t_grid[i]
        nsub = max(1, int(np.ceil((t_next - t) / dt_max)))
        dt = (t_next - t) / nsub
        for k in range(nsub):
            rho = rk4_step(rhs, t + k * dt, rho, dt)
            rho = 0.5 * (rho + rho.conj().T)
        out[i] = rho
    return out


def converge_n_max(
    h: FourierHamiltonian,
    rho0: np.ndarray,
    o_components: Mapping[int, np.ndarray],
    t_check: float,
    n_max_start: int = 2,
    tol: float = 1e-8,
    n_max_cap: int = 64,
) -> int:
    """Double n_max until the monitored observable at t_check moves by < tol."""
    n_max = max(n_max_start, h.max_harmonic)
    prev = None
    while n_max <= n_max_cap:
        eig = quasi_eigensystem(assemble_floquet_hamiltonian(h, n_max))
        comps = floquet_density_components(eig, rho0, t_check)
        val = floquet_observable(o_components, comps, t_check, h.omega)
        if prev is not None and abs(val - prev) < tol:
            return n_max
        prev = val
        n_max *= 2
    warnings.warn(f"observable not converged at n_max cap {n_max_cap}", stacklevel=2)
    return min(n_max, n_max_cap)
