"""Floquet toolkit for periodically driven open quantum systems.

Four engines behind one CLI: replica-space (Floquet) propagation of
time-periodic Hamiltonians, Redfield master equations for wide-band
fermionic baths in both a time-dependent and a static replica flavor,
electronic-friction tensors from Floquet Green's functions, and
surface-hopping trajectory ensembles for a driven resonant level coupled
to an oscillator.
"""

__version__ = "0.1.0"

from .floquet import (
    ConstructionError,
    FloquetEigensystem,
    FloquetOperator,
    FourierHamiltonian,
    assemble_floquet_hamiltonian,
    floquet_density_components,
    floquet_evolution,
    floquet_observable,
    quasi_eigensystem,
    reference_propagate,
)
from .redfield import (
    LeadSpec,
    build_context,
    dissipator_floquet,
    dissipator_hilbert,
    fermi,
    fock_operators,
    propagate_qme,
)
from .friction import (
    EnergyGrid,
    FrictionTensor,
    JunctionModel,
    floquet_greens,
    friction_scan,
    friction_split,
    friction_tensor,
    langevin_trajectory,
    model_fourier,
)
from .hopping import (
    AHParams,
    EnsembleSeries,
    TrajectoryState,
    analytic_population,
    bessel_fermi,
    hop_rates,
    run_ensemble,
    sh_step,
)
from .config import PRESETS, RunConfig, parse_config, preset_config

__all__ = [
    "__version__",
    "ConstructionError",
    "FourierHamiltonian",
    "FloquetOperator",
    "FloquetEigensystem",
    "assemble_floquet_hamiltonian",
    "quasi_eigensystem",
    "floquet_evolution",
    "floquet_density_components",
    "floquet_observable",
    "reference_propagate",
    "LeadSpec",
    "fermi",
    "fock_operators",
    "build_context",
    "dissipator_hilbert",
    "dissipator_floquet",
    "propagate_qme",
    "JunctionModel",
    "FrictionTensor",
    "EnergyGrid",
    "model_fourier",
    "floquet_greens",
    "friction_tensor",
    "friction_split",
    "friction_scan",
    "langevin_trajectory",
    "AHParams",
    "TrajectoryState",
    "EnsembleSeries",
    "bessel_fermi",
    "hop_rates",
    "sh_step",
    "run_ensemble",
    "analytic_population",
    "RunConfig",
    "parse_config",
    "preset_config",
    "PRESETS",
]
