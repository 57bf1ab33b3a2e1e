"""Spectral Galerkin solver for the Cahn-Hilliard-Hele-Shaw system on Neumann boxes."""

from .spectral import (
    COSINE,
    SINE,
    Domain,
    ScalarField,
    SpectralField,
    VectorField,
    divergence,
    forward_transform,
    gradient,
    helmholtz_leray_project,
    inverse_transform,
    laplacian,
    poincare_constant,
    sobolev_norm,
)
from .model import ModelParams, chemical_potential, ginzburg_landau_energy, pressure, rhs, velocity
from .integrator import IntegratorConfig, State, Trajectory, run, step_imex, step_rk4
from .diagnostics import (
    DecayFit,
    DiagnosticsRecord,
    check_theorem_conditions,
    fit_exponential_decay,
    gevrey_fit,
    record,
    smoothing_monitor,
    stored_energy_distance,
)

__version__ = "0.1.0"
