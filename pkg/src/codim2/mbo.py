"""One time step of each thresholding scheme.

All variants share the same two-operation core: diffuse for time ``h`` with
the exact spectral heat kernel, then project pointwise onto the unit sphere.
Nodes where the diffused magnitude falls below a floor keep their previous
value (the unique choice that keeps fixed points fixed) and are reported in
``zero_nodes``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, TorusGrid, VectorField
from .spectral import convolve_values

__all__ = [
    "StepOutcome",
    "PinningPotential",
    "project_unit",
    "mbo_step",
    "delta_h",
    "neumann_step",
    "dirichlet_step",
    "pinning_step",
    "hmhf_step",
    "PROJECTION_FLOOR",
]

PROJECTION_FLOOR = 1e-12


@dataclass(frozen=True)
class StepOutcome:
    """Result of one thresholding step.

    ``u_next`` is the projected state, ``v`` the diffused pre-projection
    field, ``zero_nodes`` the flat node indices where |v| was below the
    projection floor and the fallback was used.
    """

    u_next: VectorField
    v: VectorField
    zero_nodes: np.ndarray


@dataclass(frozen=True)
class PinningPotential:
    """Spatial weight a(x) bounded below by a positive constant."""

    a: ScalarField

    def __post_init__(self):
        if float(np.min(self.a.values)) <= 0.0:
            raise ValueError(
                f"pinning potential must be positive, min = {np.min(self.a.values):.3e}")

    @property
    def a0(self) -> float:
        return float(np.min(self.a.values))


def _project(grid: TorusGrid, v: np.ndarray, floor: float,
             fallback: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mag = np.sqrt(np.sum(v**2, axis=-1))
    degenerate = mag < floor
    safe = np.where(degenerate, 1.0, mag)
    out = v / safe[..., None]
    if np.any(degenerate):
        out = np.where(degenerate[..., None], fallback, out)
    zero_nodes = np.flatnonzero(degenerate.ravel())
    return out, zero_nodes


def project_unit(v: VectorField, floor: float = PROJECTION_FLOOR,
                 fallback: VectorField | np.ndarray | None = None) -> StepOutcome:
    """Pointwise projection v / |v| with a fallback below the floor.

    ``fallback`` defaults to the first basis vector; the MBO steps pass the
    previous state so degenerate nodes simply keep their value.
    """
    if not (floor > 0):
        raise ValueError("projection floor must be positive")
    if fallback is None:
        fb = np.zeros(v.codomain)
        fb[0] = 1.0
    elif isinstance(fallback, VectorField):
        fb = fallback.values
    else:
        fb = np.asarray(fallback, dtype=np.float64)
    out, zero_nodes = _project(v.grid, v.values, floor, fb)
    return StepOutcome(VectorField(v.grid, out, unit_flag=True), v, zero_nodes)


def _require_unit(u: VectorField, what: str):
    if not u.unit_flag:
        raise ValueError(f"{what} requires a unit field (unit_flag=True)")


def mbo_step(u: VectorField, h: float) -> StepOutcome:
    """Diffuse for time h, project onto the sphere."""
    _require_unit(u, "mbo_step")
    if not (h > 0):
        raise ValueError(f"time step must be positive, got {h}")
    v = VectorField(u.grid, convolve_values(u.grid, u.values, h), unit_flag=False)
    out, zero_nodes = _project(u.grid, v.values, PROJECTION_FLOOR, u.values)
    return StepOutcome(VectorField(u.grid, out, unit_flag=True), v, zero_nodes)


def hmhf_step(u: VectorField, h: float) -> StepOutcome:
    """Harmonic-map-heat-flow splitting step; same rule for any codomain."""
    return mbo_step(u, h)


def delta_h(u: VectorField, h: float) -> VectorField:
    """Kernel-averaged second difference, equal to (G_h*u - u)/h."""
    if not (h > 0):
        raise ValueError(f"time step must be positive, got {h}")
    conv = convolve_values(u.grid, u.values, h)
    return VectorField(u.grid, (conv - u.values) / h, unit_flag=False)


def neumann_step(u: VectorField, chi: ScalarField, h: float) -> StepOutcome:
    """Step with natural boundary conditions: diffuse the zero-extension.

    ``chi`` is a {0,1} mask for the domain.  Projection is applied only on
    the mask; outside, the output is zero filler excluded from energies.
    """
    if not (h > 0):
        raise ValueError(f"time step must be positive, got {h}")
    if chi.grid != u.grid:
        raise ValueError("neumann_step: grid mismatch")
    cvals = chi.values
    if not np.all((cvals == 0.0) | (cvals == 1.0)):
        raise ValueError("mask must be {0,1} valued")
    if not np.any(cvals):
        raise ValueError("mask is empty")
    inside = cvals > 0
    norms = np.sqrt(np.sum(u.values**2, axis=-1))
    if np.max(np.abs(norms[inside] - 1.0)) > 1e-10:
        raise ValueError("field must be unit on the mask")
    v = convolve_values(u.grid, cvals[..., None] * u.values, h)
    projected, zero_nodes = _project(u.grid, v, PROJECTION_FLOOR, u.values)
    out = np.where(inside[..., None], projected, 0.0)
    inside_flat = inside.ravel()
    zero_nodes = zero_nodes[inside_flat[zero_nodes]]
    return StepOutcome(VectorField(u.grid, out, unit_flag=False),
                       VectorField(u.grid, v, unit_flag=False), zero_nodes)


def dirichlet_step(u: VectorField, chi: ScalarField, ubar: VectorField,
                   h: float) -> StepOutcome:
    """Step with prescribed exterior values: diffuse chi*u + (1-chi)*ubar."""
    if not (h > 0):
        raise ValueError(f"time step must be positive, got {h}")
    if chi.grid != u.grid or ubar.grid != u.grid:
        raise ValueError("dirichlet_step: grid mismatch")
    cvals = chi.values
    if not np.all((cvals == 0.0) | (cvals == 1.0)):
        raise ValueError("mask must be {0,1} valued")
    outside = cvals == 0.0
    if np.any(outside):
        bnorm = np.sqrt(np.sum(ubar.values**2, axis=-1))
        dev = float(np.max(np.abs(bnorm[outside] - 1.0)))
        if dev > 1e-10:
            raise ValueError(f"boundary data not unit on the exterior (max dev {dev:.3e})")
    ext = cvals[..., None] * u.values + (1.0 - cvals)[..., None] * ubar.values
    v = convolve_values(u.grid, ext, h)
    projected, zero_nodes = _project(u.grid, v, PROJECTION_FLOOR, u.values)
    out = np.where(outside[..., None], ubar.values, projected)
    inside_flat = (~outside).ravel()
    zero_nodes = zero_nodes[inside_flat[zero_nodes]]
    unit = bool(np.max(np.abs(np.sqrt(np.sum(out**2, axis=-1)) - 1.0)) <= 1e-12)
    return StepOutcome(VectorField(u.grid, out, unit_flag=unit),
                       VectorField(u.grid, v, unit_flag=False), zero_nodes)


def pinning_step(u: VectorField, a: PinningPotential, h: float) -> StepOutcome:
    """Vortex step with a chemical potential: v = G_h*(a u) + a G_h*u."""
    _require_unit(u, "pinning_step")
    if u.grid.dim != 2:
        raise ValueError("pinning_step is a planar (d=2) scheme")
    if not (h > 0):
        raise ValueError(f"time step must be positive, got {h}")
    if a.a.grid != u.grid:
        raise ValueError("pinning_step: grid mismatch")
    avals = a.a.values[..., None]
    v = convolve_values(u.grid, avals * u.values, h) \
        + avals * convolve_values(u.grid, u.values, h)
    out, zero_nodes = _project(u.grid, v, PROJECTION_FLOOR, u.values)
    return StepOutcome(VectorField(u.grid, out, unit_flag=True),
                       VectorField(u.grid, v, unit_flag=False), zero_nodes)
