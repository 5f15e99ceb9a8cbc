"""Redfield master equations for a driven quadratic system coupled to leads.

Two flavors of the same Born-Markov dissipation are provided for a
time-periodic quadratic Hamiltonian h_{ab}(t) in the wide-band limit:

* Hilbert flavor: the density lives in the Fock space of the system
  orbitals and the dressed lead operators carry explicit exp(i k omega t)
  phase factors.
* Replica (Floquet) flavor: the density lives in the replica-extended Fock
  space and the dissipator is static.

The dressing weights both flavors share: a creation-type operator picks up
f(E_N - E_M, mu) between quasienergy states N, M, an annihilation-type
operator picks up 1 - f(-(E_N - E_M), mu).  The full set of terms
generated by the double-commutator expansion is kept (the dissipator is
assembled as a half plus its Hermitian conjugate, and each term pair is
individually trace-free).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .floquet import (
    FloquetEigensystem,
    FourierHamiltonian,
    assemble_floquet_hamiltonian,
    quasi_eigensystem,
    rk4_step,
)

__all__ = [
    "LeadSpec",
    "DissipatorContext",
    "ReducedDensityMatrix",
    "fermi",
    "fock_operators",
    "fock_fourier_hamiltonian",
    "build_context",
    "dissipator_hilbert",
    "dissipator_floquet",
    "propagate_qme",
    "QMEResult",
]

PSD_FLOOR = -1e-12


def fermi(eps, mu, beta):
    """Fermi occupation 1 / (exp(beta (eps - mu)) + 1), overflow-safe."""
    x = beta * (np.asarray(eps, dtype=float) - mu)
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = np.exp(-x[pos]) / (1.0 + np.exp(-x[pos]))
    out[~pos] = 1.0 / (1.0 + np.exp(x[~pos]))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LeadSpec:
    """Wide-band lead: hybridization matrix, chemical potential, temperature."""

    gamma: np.ndarray
    mu: float
    beta: float

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=complex)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"gamma must be square, got shape {g.shape}")
        if np.max(np.abs(g - g.conj().T)) > 1e-10:
            raise ValueError("gamma must be Hermitian")
        if np.min(np.linalg.eigvalsh(g)) < PSD_FLOOR:
            raise ValueError("gamma must be positive semidefinite")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "gamma", g)

    @property
    def n_orbitals(self) -> int:
        return self.gamma.shape[0]


def fock_operators(n_orb: int):
    """Jordan-Wigner annihilation matrices for n_orb fermionic orbitals.

    Basis ordering: occupation of orbital 0 is the fastest index; the Fock
    dimension is 2**n_orb.
    """
    sm = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|
    sz = np.diag([1.0, -1.0])
    eye = np.eye(2)
    ops = []
    for j in range(n_orb):
        factors = [sz] * j + [sm] + [eye] * (n_orb - j - 1)
        m = np.array([[1.0]])
        for f in factors:
            m = np.kron(f, m)
        ops.append(m.astype(complex))
    return ops


def fock_fourier_hamiltonian(h: FourierHamiltonian) -> FourierHamiltonian:
    """Lift one-body Fourier harmonics h^(n) to Fock space, sum h^(n)_{ab} c_a^+ c_b."""
    cs = fock_operators(h.dim)
    comps = {}
    for n, m in h.components.items():
        big = np.zeros((2**h.dim, 2**h.dim), dtype=complex)
        for a in range(h.dim):
            for b in range(h.dim):
                if m[a, b] != 0:
                    big += m[a, b] * (cs[a].conj().T @ cs[b])
        comps[n] = big
    return FourierHamiltonian(comps, omega=h.omega)


def _band_sums(n_max: int, dim: int, big: np.ndarray):
    """Collapse a replica-square matrix into per-offset block sums.

    Returns dict k -> sum_n block(n, n - k); the time-dependent operator is
    then sum_k S_k exp(i k omega t).
    """
    out = {}
    for k in range(-2 * n_max, 2 * n_max + 1):
        acc = np.zeros((dim, dim), dtype=complex)
        hit = False
        for n in range(-n_max, n_max + 1):
            m = n - k
            if -n_max <= m <= n_max:
                i = (n + n_max) * dim
                j = (m + n_max) * dim
                acc += big[i : i + dim, j : j + dim]
                hit = True
        if hit and np.any(acc):
            out[k] = acc
    return out


@dataclass(frozen=True)
class _LeadChannels:
    """Per-lead precomputed dissipation operators (both flavors)."""

    a_ops: list  # a_b = sum_a Gamma_{ab} c_a              (Fock space)
    b_ops: list  # b_b = sum_a Gamma_{ba} c_a^+            (Fock space)
    ctilde_bands: list  # band sums of dressed c_b^+, weight f(Omega)
    cbar_bands: list  # band sums of dressed c_b, weight 1 - f(-Omega)
    A_ops: list  # replica-lifted a_b
    B_ops: list  # replica-lifted b_b
    Ctilde: list  # dressed replica-lifted c_b^+
    Cbar: list  # dressed replica-lifted c_b


@dataclass(frozen=True)
class DissipatorContext:
    """Precomputed, time-independent data for both dissipator flavors."""

    h_one_body: FourierHamiltonian
    h_fock: FourierHamiltonian
    eig: FloquetEigensystem
    leads: tuple
    channels: tuple = field(repr=False)

    @property
    def fock_dim(self) -> int:
        return self.h_fock.dim

    @property
    def floquet_dim(self) -> int:
        return self.eig.size

    @property
    def n_max(self) -> int:
        return self.eig.n_max

    @property
    def omega(self) -> float:
        return self.h_one_body.omega


@dataclass
class ReducedDensityMatrix:
    """System density matrix, Hilbert (Fock-space) or replica-extended flavor."""

    flavor: str  # "hilbert" | "floquet"
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.flavor not in ("hilbert", "floquet"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        self.data = np.asarray(self.data, dtype=complex)
        if np.max(np.abs(self.data - self.data.conj().T)) > 1e-10:
            raise ValueError("density matrix must be Hermitian")


def _dress(eig: FloquetEigensystem, op: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Y (Y^+ op Y  elementwise-weighted) Y^+ in the replica-square space."""
    m = eig.Y.conj().T @ op @ eig.Y
    return eig.Y @ (m * weights) @ eig.Y.conj().T


def build_context(
    h_s: FourierHamiltonian, leads: Sequence[LeadSpec], n_max: int
) -> DissipatorContext:
    """Precompute the dressed dissipation operators for a quadratic model.

    ``h_s`` holds the one-body harmonics h^(n)_{ab}; the context carries the
    Fock-space lift, the replica eigensystem of the lifted Hamiltonian, and
    the Fermi-weight-dressed lead operators for every lead, ready for both
    dissipator flavors.
    """
    leads = tuple(leads)
    for lead in leads:
        if lead.n_orbitals != h_s.dim:
            raise ValueError("lead gamma dimension does not match the system")
    h_fock = fock_fourier_hamiltonian(h_s)
    eig = quasi_eigensystem(assemble_floquet_hamiltonian(h_fock, n_max))
    cs = fock_operators(h_s.dim)
    d_f = h_fock.dim
    nrep = 2 * n_max + 1
    # Fermi weights at quasienergy differences Omega_NM = E_N - E_M
    omega_nm = eig.quasienergies[:, None] - eig.quasienergies[None, :]
    central = np.zeros((nrep, nrep))
    central[n_max, n_max] = 1.0
    eye_rep = np.eye(nrep)

    channels = []
    for lead in leads:
        w_f = fermi(omega_nm, lead.mu, lead.beta)
        w_fb = 1.0 - fermi(-omega_nm, lead.mu, lead.beta)
        a_ops = [sum(lead.gamma[a, b] * cs[a] for a in range(h_s.dim)) for b in range(h_s.dim)]
        b_ops = [
            sum(lead.gamma[b, a] * cs[a].conj().T for a in range(h_s.dim))
            for b in range(h_s.dim)
        ]
        ctilde_bands, cbar_bands, Ctilde, Cbar, A_ops, B_ops = [], [], [], [], [], []
        for b in range(h_s.dim):
            cdag_00 = np.kron(central, cs[b].conj().T)
            c_00 = np.kron(central, cs[b])
            ctilde_bands.append(_band_sums(n_max, d_f, _dress(eig, cdag_00, w_f)))
            cbar_bands.append(_band_sums(n_max, d_f, _dress(eig, c_00, w_fb)))
            cdag_lift = np.kron(eye_rep, cs[b].conj().T)
            c_lift = np.kron(eye_rep, cs[b])
            Ctilde.append(_dress(eig, cdag_lift, w_f))
            Cbar.append(_dress(eig, c_lift, w_fb))
            A_ops.append(np.kron(eye_rep, a_ops[b]))
            B_ops.append(np.kron(eye_rep, b_ops[b]))
        channels.append(
            _LeadChannels(a_ops, b_ops, ctilde_bands, cbar_bands, A_ops, B_ops, Ctilde, Cbar)
        )
    return DissipatorContext(h_s, h_fock, eig, leads, tuple(channels))


def _bands_at(bands, omega, t, dim):
    op = np.zeros((dim, dim), dtype=complex)
    for k, s in bands.items():
        op += s * np.exp(1j * k * omega * t)
    return op


def _dissipator_half(ops_pairs, rho):
    """-(1/2) sum over (a, x) of (a x rho - x rho a); each pair is trace-free."""
    half = np.zeros_like(rho)
    for a, x in ops_pairs:
        ax = a @ x
        half -= 0.5 * (ax @ rho - x @ rho @ a)
    return half


def dissipator_hilbert(
    rho: ReducedDensityMatrix, t: float, ctx: DissipatorContext
) -> np.ndarray:
    """Time-dependent Fock-space dissipator contribution to d rho / dt."""
    if rho.flavor != "hilbert":
        raise ValueError("expected a hilbert-flavor density")
    r = rho.data
    if r.shape != (ctx.fock_dim, ctx.fock_dim):
        raise ValueError(f"density shape {r.shape} != Fock dimension {ctx.fock_dim}")
    d_f = ctx.fock_dim
    pairs = []
    for ch in ctx.channels:
        for b in range(ctx.h_one_body.dim):
            ctilde = _bands_at(ch.ctilde_bands[b], ctx.omega, t, d_f)
            cbar = _bands_at(ch.cbar_bands[b], ctx.omega, t, d_f)
            pairs.append((ch.a_ops[b], ctilde))
            pairs.append((ch.b_ops[b], cbar))
    half = _dissipator_half(pairs, r)
    return half + half.conj().T


def dissipator_floquet(rho: ReducedDensityMatrix, ctx: DissipatorContext) -> np.ndarray:
    """Static replica-space dissipator contribution to d rho^F / dt."""
    if rho.flavor != "floquet":
        raise ValueError("expected a floquet-flavor density")
    r = rho.data
    if r.shape != (ctx.floquet_dim, ctx.floquet_dim):
        raise ValueError(
            f"density shape {r.shape} != replica dimension {ctx.floquet_dim}"
        )
    pairs = []
    for ch in ctx.channels:
        for b in range(ctx.h_one_body.dim):
            pairs.append((ch.A_ops[b], ch.Ctilde[b]))
            pairs.append((ch.B_ops[b], ch.Cbar[b]))
    half = _dissipator_half(pairs, r)
    return half + half.conj().T


@dataclass
class QMEResult:
    """Observable time series plus the final density of a QME propagation."""

    t_grid: np.ndarray
    observables: dict
    rho_final: ReducedDensityMatrix
    min_eigenvalue: float  # most negative density eigenvalue seen (positivity log)
    trace_drift: float


def _floquet_observable_value(ctx, rho_big, op, t):
    """Physical-window observable sum_m Tr(O rho^F_{m,0}) exp(i m omega t)."""
    d_f = ctx.fock_dim
    n_max = ctx.n_max
    j = n_max * d_f
    total = 0.0 + 0.0j
    for m in range(-n_max, n_max + 1):
        i = (m + n_max) * d_f
        blk = rho_big[i : i + d_f, j : j + d_f]
        total += np.trace(op @ blk) * np.exp(1j * m * ctx.omega * t)
    return total.real


def propagate_qme(
    flavor: str,
    rho0: np.ndarray,
    t_grid: np.ndarray,
    ctx: DissipatorContext,
    observables: dict | None = None,
    dt_max: float | None = None,
) -> QMEResult:
    """Propagate either QME flavor with fixed-step 4th-order integration.

    ``rho0`` is a Fock-space density; for the floquet flavor it is lifted to
    the replica-diagonal form internally.  ``observables`` maps names to
    static Fock-space operators; floquet-flavor values are extracted through
    the central block-column phase sum.

    The raw matrix trace is conserved exactly by both generators, so a raw
    drift above 1e-4 means the step size is unstable and the run aborts.
    The reported ``trace_drift`` is the physical one (for the floquet
    flavor, the central-window trace), which for truncated replica spaces
    also carries the truncation error and shrinks as n_max grows.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly ascending")
    observables = observables or {}
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (ctx.fock_dim, ctx.fock_dim):
        raise ValueError("rho0 must be a Fock-space density")
    if abs(np.trace(rho0).real - 1.0) > 1e-8:
        raise ValueError("rho0 must have unit trace")

    gamma_scale = max(
        float(np.max(np.abs(np.linalg.eigvalsh(l.gamma)))) for l in ctx.leads
    )
    h_scale = ctx.h_fock.norm_bound() + (ctx.n_max + 1) * ctx.omega + gamma_scale
    if dt_max is None:
        dt_max = 0.05 / max(h_scale, 1e-300)

    if flavor == "hilbert":
        y = rho0.copy()

        def rhs(t, r):
            ht = ctx.h_fock.at_time(t)
            wrapped = ReducedDensityMatrix("hilbert", 0.5 * (r + r.conj().T), t)
            return -1j * (ht @ r - r @ ht) + dissipator_hilbert(wrapped, t, ctx)

        def phys_trace(r):
            return float(np.trace(r).real)

        def obs_value(op, r, t):
            return float(np.trace(op @ r).real)

    elif flavor == "floquet":
        y = np.kron(np.eye(2 * ctx.n_max + 1), rho0)
        hf = assemble_floquet_hamiltonian(ctx.h_fock, ctx.n_max).blocks

        def rhs(t, r):
            wrapped = ReducedDensityMatrix("floquet", 0.5 * (r + r.conj().T), t)
            return -1j * (hf @ r - r @ hf) + dissipator_floquet(wrapped, ctx)

        def phys_trace(r):
            # physical-window trace: identity observable through the window
            return _floquet_observable_value(ctx, r, np.eye(ctx.fock_dim), 0.0)

        def obs_value(op, r, t):
            return _floquet_observable_value(ctx, r, op, t)

    else:
        raise ValueError(f"unknown flavor {flavor!r}")

    series = {name: np.empty(len(t_grid)) for name in observables}
    min_eig = np.inf
    trace0 = phys_trace(y)
    raw_trace0 = float(np.trace(y).real)
    worst_drift = 0.0
    for name, op in observables.items():
        series[name][0] = obs_value(op, y, t_grid[0])
    for i in range(1, len(t_grid)):
        t, t_next = t_grid[i - 1], t_grid[i]
        nsub = max(1, int(np.ceil((t_next - t) / dt_max)))
        dt = (t_next - t) / nsub
        for k in range(nsub):
            y = rk4_step(rhs, t + k * dt, y, dt)
            y = 0.5 * (y + y.conj().T)
        worst_drift = max(worst_drift, abs(phys_trace(y) - trace0))
        raw_drift = abs(float(np.trace(y).real) - raw_trace0)
        if raw_drift > 1e-4:
            raise RuntimeError(
                f"raw trace drift {raw_drift:.2e} at t={t_next:g}: step size unstable"
            )
        for name, op in observables.items():
            series[name][i] = obs_value(op, y, t_next)
        if flavor == "hilbert":
            min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(y))))
    if flavor == "floquet":
        d_f = ctx.fock_dim
        j = ctx.n_max * d_f
        central = y[j : j + d_f, j : j + d_f]
        min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (central + central.conj().T))))
    return QMEResult(
        t_grid=t_grid,
        observables=series,
        rho_final=ReducedDensityMatrix(flavor, y, float(t_grid[-1])),
        min_eigenvalue=min_eig,
        trace_drift=worst_drift,
    )
