"""Periodic uniform grids on the d-torus and dense fields over them.

Nodes are cell-centered, ``x_j = (j + 1/2) * spacing``, so no node ever lies
on a coordinate plane through cell boundaries (where filament initial data
would be singular).  Integration is the plain Riemann mean times the volume,
which is spectrally exact for trigonometric polynomials below the Nyquist
mode.  All reductions use numpy's pairwise summation over the C-order
layout, so results are deterministic and independent of any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TorusGrid",
    "VectorField",
    "ScalarField",
    "sample",
    "sample_scalar",
    "integrate",
    "dot_integral",
]

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on ``[0, period_0) x ... x [0, period_{d-1})``.

    Parameters
    ----------
    resolution : tuple of int
        Nodes per axis.  Each entry must be even and at least 8.
    period : tuple of float
        Side length per axis (defaults to 1 per axis).
    """

    resolution: tuple[int, ...]
    period: tuple[float, ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolution)
        object.__setattr__(self, "resolution", res)
        if self.period is None:
            object.__setattr__(self, "period", (1.0,) * len(res))
        else:
            object.__setattr__(self, "period", tuple(float(p) for p in self.period))
        if len(res) not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {len(res)}")
        if len(self.period) != len(res):
            raise ValueError("period and resolution dimension mismatch")
        for n in res:
            if n < 8 or n % 2 != 0:
                raise ValueError(f"resolution entries must be even and >= 8, got {n}")
        for p in self.period:
            if not (p > 0 and np.isfinite(p)):
                raise ValueError(f"period entries must be positive, got {p}")

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(p / n for p, n in zip(self.period, self.resolution))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def volume(self) -> float:
        return float(np.prod(self.period))

    def axes(self) -> list[np.ndarray]:
        """Cell-centered node coordinates per axis."""
        return [
            (np.arange(n) + 0.5) * (p / n)
            for n, p in zip(self.resolution, self.period)
        ]

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Wrap points into the fundamental domain."""
        return np.mod(points, np.asarray(self.period))

    def min_image(self, delta: np.ndarray) -> np.ndarray:
        """Shortest periodic representative of a displacement."""
        per = np.asarray(self.period)
        return (delta + per / 2) % per - per / 2


def _check_values(grid: TorusGrid, values: np.ndarray, ncomp: int | None):
    expected = grid.resolution if ncomp is None else grid.resolution + (ncomp,)
    if values.shape != expected:
        raise ValueError(f"value table shape {values.shape} != expected {expected}")
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(f"non-finite value at index {tuple(bad)}")


@dataclass(frozen=True)
class VectorField:
    """Dense field of N-component real vectors over a TorusGrid.

    ``values`` has shape ``resolution + (codomain,)`` in C order
    (component-interleaved).  Arrays are frozen after construction.
    """

    grid: TorusGrid
    values: np.ndarray
    unit_flag: bool = field(default=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != self.grid.dim + 1 or vals.shape[-1] < 2:
            raise ValueError(f"vector values must have shape res + (N>=2,), got {vals.shape}")
        _check_values(self.grid, vals, vals.shape[-1])
        if self.unit_flag:
            norms = np.sqrt(np.sum(vals**2, axis=-1))
            dev = float(np.max(np.abs(norms - 1.0)))
            if dev > UNIT_TOL:
                raise ValueError(f"unit_flag set but max ||u|-1| = {dev:.3e}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def codomain(self) -> int:
        return self.values.shape[-1]

    def component(self, i: int) -> np.ndarray:
        return self.values[..., i]

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=-1))


@dataclass(frozen=True)
class ScalarField:
    """Dense real field over a TorusGrid (shape = resolution)."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        _check_values(self.grid, vals, None)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def sample(grid: TorusGrid, f, codomain: int | None = None) -> VectorField:
    """Sample a vector-valued function at the cell-centered nodes.

    ``f`` receives the meshgrid coordinate arrays and must return the stacked
    components, either as a sequence of arrays or an array with the component
    axis last.  Non-finite outputs are rejected with the offending node index.
    """
    coords = grid.meshgrid()
    out = f(*coords)
    if isinstance(out, (list, tuple)):
        out = np.stack(out, axis=-1)
    out = np.asarray(out, dtype=np.float64)
    if out.shape[: grid.dim] != grid.resolution:
        raise ValueError(f"sampled shape {out.shape} incompatible with grid {grid.resolution}")
    if codomain is not None and out.shape[-1] != codomain:
        raise ValueError(f"sampled codomain {out.shape[-1]} != requested {codomain}")
    norms = np.sqrt(np.sum(out**2, axis=-1))
    unit = bool(np.max(np.abs(norms - 1.0)) <= UNIT_TOL)
    return VectorField(grid, out, unit_flag=unit)


def sample_scalar(grid: TorusGrid, f) -> ScalarField:
    coords = grid.meshgrid()
    return ScalarField(grid, np.asarray(f(*coords), dtype=np.float64))


def integrate(f: ScalarField) -> float:
    """Integral over the torus: mean of node values times the volume."""
    return float(np.mean(f.values)) * f.grid.volume


def integrate_values(grid: TorusGrid, values: np.ndarray) -> float:
    """Same quadrature applied to a raw array (helper for hot loops)."""
    return float(np.mean(values)) * grid.volume


def dot_integral(u: VectorField, w: VectorField) -> float:
    """Integral of the pointwise dot product ``u . w``."""
    if u.grid != w.grid:
        raise ValueError("dot_integral: grid mismatch")
    if u.codomain != w.codomain:
        raise ValueError(
            f"dot_integral: codomain mismatch ({u.codomain} vs {w.codomain})")
    return float(np.mean(np.sum(u.values * w.values, axis=-1))) * u.grid.volume
