"""Surface-hopping Monte Carlo for a periodically driven resonant level
coupled to one oscillator mode (driven Anderson-Holstein model).

Two diabatic surfaces in dimensionless oscillator coordinates,
H0 = (omega/2)(x^2 + p^2) and H1 = H0 + sqrt(2) g x + E_d, exchanged with
Markovian rates built from the driving-averaged (Bessel-weighted) Fermi
function.  Trajectories hop without momentum rescaling; each step performs
exactly one rate test against one uniform draw, so ensembles are
bit-reproducible from (seed, trajectory index).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .redfield import fermi

__all__ = [
    "AHParams",
    "TrajectoryState",
    "EnsembleSeries",
    "bessel_fermi",
    "hop_rates",
    "sh_step",
    "run_ensemble",
    "analytic_population",
    "trajectory_rng",
]

MAX_RATE_DT = 0.02  # enforced bounds on Gamma*dt and omega*dt


def default_n_bessel(A: float, Omega: float) -> int:
    return int(np.ceil(abs(A) / Omega)) + 20


@dataclass(frozen=True)
class AHParams:
    """Driven resonant-level model parameters (energies share one unit)."""

    E_d: float
    A: float
    Omega: float
    g: float
    hbar_omega: float
    kT: float
    Gamma: float
    mu: float = 0.0
    n_bessel: int | None = None

    def __post_init__(self):
        if not self.hbar_omega > 0:
            raise ValueError("hbar_omega must be positive")
        if not self.Gamma > 0:
            raise ValueError("Gamma must be positive")
        if not self.kT > 0:
            raise ValueError("kT must be positive")
        if not self.Omega > 0:
            raise ValueError("Omega must be positive")
        n_min = default_n_bessel(self.A, self.Omega)
        if self.n_bessel is None:
            object.__setattr__(self, "n_bessel", n_min)
        elif self.n_bessel < n_min:
            raise ValueError(f"n_bessel must be >= {n_min} for A/Omega={self.A / self.Omega:g}")

    @property
    def beta(self) -> float:
        return 1.0 / self.kT

    def bessel_weights(self):
        """(harmonic indices, squared Bessel weights J_n(A/Omega)^2)."""
        ns = np.arange(-self.n_bessel, self.n_bessel + 1)
        w = jv(ns, self.A / self.Omega) ** 2
        return ns, w


@dataclass
class TrajectoryState:
    """Single walker: oscillator coordinate, momentum, active surface, time."""

    x: float
    p: float
    surface: int
    t: float = 0.0

    def __post_init__(self):
        if self.surface not in (0, 1):
            raise ValueError(f"surface must be 0 or 1, got {self.surface}")
        if not (np.isfinite(self.x) and np.isfinite(self.p)):
            raise ValueError("x and p must be finite")


@dataclass(frozen=True)
class EnsembleSeries:
    """Ensemble means with standard errors on a shared output grid."""

    t_grid: np.ndarray
    N_mean: np.ndarray
    N_stderr: np.ndarray
    Ek_mean: np.ndarray
    Ek_stderr: np.ndarray
    n_traj: int
    seed: int


def bessel_fermi(eps, prm: AHParams):
    """Driving-averaged occupation sum_n J_n(A/Omega)^2 f(eps - n Omega).

    Accepts scalars or arrays.  If the truncated weight sum falls short of
    one by more than 1e-10 a warning is emitted and the result is clamped
    to [0, 1].
    """
    ns, w = prm.bessel_weights()
    defect = abs(1.0 - float(np.sum(w)))
    eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
    occ = fermi(eps_arr[None, :] - (ns * prm.Omega)[:, None], prm.mu, prm.beta)
    out = w @ occ
    if defect > 1e-10:
        warnings.warn(
            f"Bessel truncation defect {defect:.2e}; clamping to [0, 1]", stacklevel=2
        )
        out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(eps) else float(out[0])


def hop_rates(x, prm: AHParams):
    """(empty->occupied, occupied->empty) rates at oscillator coordinate x.

    The surface gap is sqrt(2) g x + E_d; the two rates sum to Gamma
    exactly.
    """
    dv = np.sqrt(2.0) * prm.g * np.asarray(x, dtype=float) + prm.E_d
    occ = bessel_fermi(dv, prm)
    return prm.Gamma * occ, prm.Gamma * (1.0 - occ)


def _check_dt(dt: float, prm: AHParams):
    if dt * prm.Gamma > MAX_RATE_DT * (1 + 1e-12) or dt * prm.hbar_omega > MAX_RATE_DT * (
        1 + 1e-12
    ):
        raise ValueError(
            f"dt={dt:g} violates dt*Gamma <= {MAX_RATE_DT} and dt*omega <= {MAX_RATE_DT}"
        )


def _verlet(x, p, surface, dt, prm: AHParams):
    """One velocity-Verlet step on the active diabatic surface (vectorized)."""
    w = prm.hbar_omega
    shift = np.sqrt(2.0) * prm.g * surface
    p = p - 0.5 * dt * (w * x + shift)
    x = x + dt * w * p
    p = p - 0.5 * dt * (w * x + shift)
    return x, p


def _hop(x, surface, zeta, dt, prm: AHParams):
    """Apply the single per-step rate test; returns the new surfaces."""
    up, down = hop_rates(x, prm)
    exit_rate = np.where(surface == 1, down, up)
    flip = zeta < exit_rate * dt
    return np.where(flip, 1 - surface, surface)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Deterministic per-trajectory random stream, independent of n_traj."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(index))))


def sh_step(s: TrajectoryState, dt: float, prm: AHParams, rng) -> TrajectoryState:
    """Advance one walker by dt: Verlet drift, then one hop test.

    Consumes exactly one uniform from ``rng``; the surface flips without
    momentum rescaling when the draw falls below exit_rate * dt.
    """
    _check_dt(dt, prm)
    x = np.array([s.x])
    p = np.array([s.p])
    surf = np.array([s.surface])
    x, p = _verlet(x, p, surf, dt, prm)
    zeta = rng.random(1)
    surf = _hop(x, surf, zeta, dt, prm)
    return TrajectoryState(float(x[0]), float(p[0]), int(surf[0]), s.t + dt)


def analytic_population(prm: AHParams, t):
    """Closed-form occupied-surface population for the decoupled (g = 0) model.

    Starting empty, N(t) = f_avg(E_d) (1 - exp(-Gamma t)) with f_avg the
    driving-averaged occupation.
    """
    if prm.g != 0.0:
        raise ValueError("analytic population requires g = 0")
    occ = bessel_fermi(prm.E_d, prm)
    return occ * (1.0 - np.exp(-prm.Gamma * np.asarray(t, dtype=float)))


def run_ensemble(
    prm: AHParams,
    n_traj: int,
    t_max: float,
    dt: float,
    init: str = "origin",
    seed: int = 0,
    n_out: int = 201,
    block_steps: int = 512,
) -> EnsembleSeries:
    """Propagate an ensemble of walkers and accumulate means on a time grid.

    ``init`` is "origin" ((x, p) = (0, 0), surface 0) or "boltzmann"
    (Gaussian phase-space sample of the empty surface at kT, surface 0; the
    two draws come first in each trajectory's stream).  Stepping is
    vectorized across trajectories but each trajectory consumes its own
    stream exactly as :func:`sh_step` would, so results are bit-identical
    for fixed (seed, n_traj, dt, t_max, init).
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    _check_dt(dt, prm)
    n_steps = int(np.ceil(t_max / dt))
    out_every = max(1, n_steps // max(n_out - 1, 1))
    out_steps = np.arange(0, n_steps + 1, out_every)
    if out_steps[-1] != n_steps:
        out_steps = np.append(out_steps, n_steps)
    t_grid = out_steps * dt

    rngs = [trajectory_rng(seed, i) for i in range(n_traj)]
    x = np.zeros(n_traj)
    p = np.zeros(n_traj)
    surf = np.zeros(n_traj, dtype=int)
    if init == "boltzmann":
        sigma = np.sqrt(prm.kT / prm.hbar_omega)
        for i, rng in enumerate(rngs):
            x[i], p[i] = sigma * rng.standard_normal(2)
    elif init != "origin":
        raise ValueError(f"unknown init {init!r}")

    n_rec = len(out_steps)
    N_mean = np.empty(n_rec)
    N_err = np.empty(n_rec)
    Ek_mean = np.empty(n_rec)
    Ek_err = np.empty(n_rec)

    def record(k):
        occ = surf.astype(float)
        ek = 0.5 * prm.hbar_omega * p**2
        N_mean[k] = occ.mean()
        N_err[k] = occ.std(ddof=1) / np.sqrt(n_traj) if n_traj > 1 else 0.0
        Ek_mean[k] = ek.mean()
        Ek_err[k] = ek.std(ddof=1) / np.sqrt(n_traj) if n_traj > 1 else 0.0

    record(0)
    next_rec = 1
    step = 0
    while step < n_steps:
        k = min(block_steps, n_steps - step)
        zetas = np.empty((n_traj, k))
        for i, rng in enumerate(rngs):
            zetas[i] = rng.random(k)
        for j in range(k):
            x, p = _verlet(x, p, surf, dt, prm)
            surf = _hop(x, surf, zetas[:, j], dt, prm)
            step += 1
            if next_rec < n_rec and step == out_steps[next_rec]:
                record(next_rec)
                next_rec += 1
    return EnsembleSeries(
        t_grid=t_grid,
        N_mean=N_mean,
        N_stderr=N_err,
        Ek_mean=Ek_mean,
        Ek_stderr=Ek_err,
        n_traj=n_traj,
        seed=seed,
    )
