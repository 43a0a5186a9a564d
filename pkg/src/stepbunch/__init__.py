"""Continuum and discrete models of elastic step bunching on vicinal surfaces.

Submodules
----------
special      zeta, eta, the constant ``S_m`` and parameter conversion
kernel       the periodic interaction kernel ``K_m``
profile      grid and spectral densities, rearrangement, CSV I/O
energy       energy functional, chemical potential, Euler-Lagrange residual
minimize     constrained minimization and continuum gradient flow
discrete     periodic step trains and step-flow dynamics
asymptotics  singular Euler-Maclaurin sums and discrete/continuum consistency
experiments  scaling sweeps and symmetry evidence
cli          command-line entry point
"""
from .errors import (
    AnsatzError,
    ConfigurationError,
    DegenerateSlopeError,
    DivergenceError,
    DomainError,
    InfeasibleError,
    NumericalFailure,
    ResolutionError,
    SingularityError,
    StepBunchError,
    SurfaceInversionError,
    TopologyError,
)
from .special import ModelParams, PhysicalParams, derive_model_params, equilibrium_spacing, eta, s_constant, zeta
from .kernel import KernelTable, build_kernel_table, kernel_derivative, kernel_value
from .profile import GridProfile, SpectralProfile
from .energy import EnergyBreakdown, total_energy
from .minimize import MinimizeOptions, MinimizeResult, minimize_energy

__version__ = "0.1.0"
