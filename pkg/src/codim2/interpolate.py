"""Periodic multilinear interpolation of grid fields at arbitrary points."""

from __future__ import annotations

import itertools

import numpy as np

from .grid import TorusGrid

__all__ = ["interp_periodic"]


def interp_periodic(grid: TorusGrid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Interpolate node values (shape = resolution or resolution + (N,))
    at points of shape (..., d), with periodic wrap.

    Bilinear for d=2, trilinear for d=3.
    """
    d = grid.dim
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-1] != d:
        raise ValueError(f"points last axis {pts.shape[-1]} != grid dim {d}")
    spacing = np.asarray(grid.spacing)
    res = np.asarray(grid.resolution)
    frac_idx = pts / spacing - 0.5
    base = np.floor(frac_idx).astype(np.int64)
    w1 = frac_idx - base
    w0 = 1.0 - w1

    vector = values.ndim == d + 1
    out_shape = pts.shape[:-1] + ((values.shape[-1],) if vector else ())
    out = np.zeros(out_shape)
    for corner in itertools.product((0, 1), repeat=d):
        weight = np.ones(pts.shape[:-1])
        idx = []
        for ax, c in enumerate(corner):
            weight = weight * (w1[..., ax] if c else w0[..., ax])
            idx.append((base[..., ax] + c) % res[ax])
        vals = values[tuple(idx)]
        out += weight[..., None] * vals if vector else weight * vals
    return out
