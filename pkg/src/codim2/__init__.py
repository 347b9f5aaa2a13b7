"""Spectral diffusion-generated motion of codimension-two objects on the
torus: filaments in T^3 and point vortices in T^2, with the energy
functionals, monotonicity laws, and Euler-Lagrange diagnostics that govern
the scheme, plus convergence harnesses against closed-form references."""

__version__ = "0.1.0"

from .grid import (ScalarField, TorusGrid, VectorField, dot_integral,
                   integrate, sample, sample_scalar)
from .spectral import (GaussianMultiplier, commutator, grad_heat_convolve,
                       heat_convolve)
from .mbo import (PinningPotential, StepOutcome, delta_h, dirichlet_step,
                  hmhf_step, mbo_step, neumann_step, pinning_step,
                  project_unit)
from .energy import (EnergyReport, dirichlet_mollified, dissipation_ledger,
                     e_h, e_h_fourier, e_h_localized, el_inner_residual,
                     el_outer_weak_residual, finite_difference_form,
                     gronwall_monitor, metric_term, monotonicity_check)
from .geometry import (Curve, ExtractionResult, LocalizationProfile,
                       PinningTrajectory, analytic_filament_field,
                       circle_filament_field, circle_reference,
                       distance_to_curve, dipole_field, extract_vorticity,
                       load_curve, periodic_filament_field, phi_sigma,
                       pinning_ode, save_curve, vortex_lattice_field,
                       winding_number)
from .harness import (LedgerViolation, RunRecord, SimulationConfig,
                      convergence_study, load_field, run, save_field)

__all__ = [
    "TorusGrid", "VectorField", "ScalarField", "sample", "sample_scalar",
    "integrate", "dot_integral",
    "GaussianMultiplier", "heat_convolve", "grad_heat_convolve", "commutator",
    "StepOutcome", "PinningPotential", "project_unit", "mbo_step", "delta_h",
    "neumann_step", "dirichlet_step", "pinning_step", "hmhf_step",
    "EnergyReport", "e_h", "e_h_localized", "e_h_fourier",
    "finite_difference_form", "dirichlet_mollified", "metric_term",
    "monotonicity_check", "dissipation_ledger", "el_outer_weak_residual",
    "el_inner_residual", "gronwall_monitor",
    "Curve", "LocalizationProfile", "PinningTrajectory", "distance_to_curve",
    "phi_sigma", "analytic_filament_field", "circle_filament_field",
    "periodic_filament_field", "vortex_lattice_field", "dipole_field",
    "winding_number", "extract_vorticity", "ExtractionResult",
    "circle_reference", "pinning_ode", "save_curve", "load_curve",
    "SimulationConfig", "RunRecord", "LedgerViolation", "run",
    "convergence_study", "save_field", "load_field",
]
