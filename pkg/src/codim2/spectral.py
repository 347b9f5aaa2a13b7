"""Exact Gaussian convolution on the torus and spectral derivatives.

The heat kernel of variance ``2t`` acts mode-by-mode as the multiplier
``exp(-4 pi^2 t sum_i (k_i / L_i)^2)``; no real-space truncation is involved,
so semigroup and self-adjointness identities hold to roundoff.  Transforms
are unscaled forward / ``1/prod(n)`` inverse.  The Nyquist mode keeps the
same multiplier formula; its spectral derivative is set to zero so that
gradients of real fields stay real.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.fft as _fft

from .grid import ScalarField, TorusGrid, VectorField

__all__ = [
    "GaussianMultiplier",
    "heat_convolve",
    "grad_heat_convolve",
    "commutator",
    "fft_workers",
]


def fft_workers() -> int:
    """Worker cap for scipy.fft, from CODIM2_THREADS (default 1).

    pocketfft output is bit-identical for any worker count; the cap only
    bounds CPU usage.
    """
    env = os.environ.get("CODIM2_THREADS", "")
    try:
        w = int(env)
    except ValueError:
        w = 0
    return max(1, w) if w > 0 else 1


def mode_numbers(grid: TorusGrid) -> list[np.ndarray]:
    """Integer Fourier mode arrays (broadcastable), one per axis."""
    out = []
    for ax, n in enumerate(grid.resolution):
        k = _fft.fftfreq(n, d=1.0 / n)
        shape = [1] * grid.dim
        shape[ax] = n
        out.append(k.reshape(shape))
    return out


def _ksq_physical(grid: TorusGrid) -> np.ndarray:
    ks = mode_numbers(grid)
    total = np.zeros(grid.resolution)
    for k, L in zip(ks, grid.period):
        total = total + (k / L) ** 2
    return total


class GaussianMultiplier:
    """Per-mode weights of the heat semigroup at time ``t`` on a grid.

    Weights are cached per (grid, t); tables are immutable and shareable.
    """

    def __init__(self, grid: TorusGrid, t: float):
        if not (t > 0 and np.isfinite(t)):
            raise ValueError(f"diffusion time must be positive, got {t}")
        self.grid = grid
        self.t = float(t)
        self.weights = np.exp(-4.0 * np.pi**2 * self.t * _ksq_physical(grid))
        self.weights.setflags(write=False)
        # half-spectrum table for real transforms (last axis truncated)
        n_last = grid.resolution[-1]
        self.weights_half = np.ascontiguousarray(self.weights[..., : n_last // 2 + 1])
        self.weights_half.setflags(write=False)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Convolve one scalar component (real array of grid shape)."""
        w = fft_workers()
        spec = _fft.rfftn(values, workers=w)
        return _fft.irfftn(spec * self.weights_half, s=values.shape, workers=w)


_mult_cache: dict[tuple, GaussianMultiplier] = {}


def _multiplier(grid: TorusGrid, t: float) -> GaussianMultiplier:
    key = (grid.resolution, grid.period, float(t))
    m = _mult_cache.get(key)
    if m is None:
        m = GaussianMultiplier(grid, t)
        if len(_mult_cache) > 64:
            _mult_cache.clear()
        _mult_cache[key] = m
    return m


def convolve_values(grid: TorusGrid, values: np.ndarray, t: float) -> np.ndarray:
    """Heat convolution of a raw array; last axis = components if ndim > d."""
    m = _multiplier(grid, t)
    if values.ndim == grid.dim:
        return m.apply(values)
    out = np.empty_like(values)
    for c in range(values.shape[-1]):
        out[..., c] = m.apply(values[..., c])
    return out


def heat_convolve(u: VectorField, t: float) -> VectorField:
    """Exact convolution with the heat kernel at time ``t``.

    Constants are preserved exactly (the k=0 weight is exp(0) = 1); the
    output is generally no longer unit length.
    """
    if not (t > 0):
        raise ValueError(f"diffusion time must be positive, got {t}")
    return VectorField(u.grid, convolve_values(u.grid, u.values, t), unit_flag=False)


def heat_convolve_scalar(f: ScalarField, t: float) -> ScalarField:
    if not (t > 0):
        raise ValueError(f"diffusion time must be positive, got {t}")
    return ScalarField(f.grid, convolve_values(f.grid, f.values, t))


def _deriv_factors(grid: TorusGrid) -> list[np.ndarray]:
    """Spectral derivative symbols 2*pi*i*k/L with the Nyquist mode zeroed."""
    out = []
    for ax, (n, L) in enumerate(zip(grid.resolution, grid.period)):
        k = _fft.fftfreq(n, d=1.0 / n)
        k[np.abs(k) == n // 2] = 0.0
        shape = [1] * grid.dim
        shape[ax] = n
        out.append((2j * np.pi * k / L).reshape(shape))
    return out


def _deriv_factors_half(grid: TorusGrid) -> list[np.ndarray]:
    out = []
    for d in _deriv_factors(grid):
        if d.shape[-1] > 1:
            d = d[..., : grid.resolution[-1] // 2 + 1]
        out.append(np.ascontiguousarray(d))
    return out


def grad_heat_convolve(u: VectorField, t: float) -> list[VectorField]:
    """Per-axis gradients of the mollified field, d(G_t * u)/dx_i."""
    if not (t > 0):
        raise ValueError(f"diffusion time must be positive, got {t}")
    m = _multiplier(u.grid, t)
    derivs = _deriv_factors_half(u.grid)
    w = fft_workers()
    shape = u.values.shape[:-1]
    out = []
    specs = [
        _fft.rfftn(u.values[..., c], workers=w) * m.weights_half
        for c in range(u.codomain)
    ]
    for ax in range(u.grid.dim):
        comps = np.empty_like(u.values)
        for c in range(u.codomain):
            comps[..., c] = _fft.irfftn(specs[c] * derivs[ax], s=shape, workers=w)
        out.append(VectorField(u.grid, comps, unit_flag=False))
    return out


def grad_scalar(f: ScalarField) -> list[ScalarField]:
    """Spectral gradient of a smooth periodic scalar field."""
    derivs = _deriv_factors_half(f.grid)
    w = fft_workers()
    spec = _fft.rfftn(f.values, workers=w)
    return [
        ScalarField(f.grid, _fft.irfftn(spec * d, s=f.values.shape, workers=w))
        for d in derivs
    ]


def commutator(psi: ScalarField, u: VectorField, t: float) -> VectorField:
    """Convolution-multiplication commutator ``G_t*(psi u) - psi (G_t*u)``."""
    if psi.grid != u.grid:
        raise ValueError("commutator: grid mismatch")
    lhs = convolve_values(u.grid, psi.values[..., None] * u.values, t)
    rhs = psi.values[..., None] * convolve_values(u.grid, u.values, t)
    return VectorField(u.grid, lhs - rhs, unit_flag=False)
