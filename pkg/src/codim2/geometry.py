"""Curves, truncated squared-distance localization, well-prepared initial
data, vorticity extraction via plaquette winding numbers, and closed-form
reference flows.

Initial data comes in two flavors.  ``periodic_filament_field`` realizes a
prescribed integer plaquette-crossing field exactly: the curve system is
traced through the lattice faces, the minimal edge-increment field with that
discrete curl is solved spectrally, line holonomies are rounded to whole
turns, and the phase is accumulated along a spanning tree.  The analytic
constructors (``analytic_filament_field``, ``circle_filament_field``) sample
the rotated-offset ansatz directly; the circle variant winds in the
meridional half-plane and implicitly pairs the ring with an opposite image
ring at the far wrap plane, which keeps every torus holonomy at zero turns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft
from scipy.ndimage import maximum_filter1d
from scipy.spatial import cKDTree

from .grid import ScalarField, TorusGrid, VectorField
from .interpolate import interp_periodic
from .spectral import fft_workers, grad_scalar

__all__ = [
    "Curve",
    "LocalizationProfile",
    "PinningTrajectory",
    "distance_to_curve",
    "phi_sigma",
    "analytic_filament_field",
    "circle_filament_field",
    "periodic_filament_field",
    "vortex_lattice_field",
    "dipole_field",
    "winding_number",
    "WindingResult",
    "extract_vorticity",
    "ExtractionResult",
    "circle_reference",
    "circle_curve",
    "line_curve",
    "pinning_ode",
    "save_curve",
    "load_curve",
]


@dataclass(frozen=True)
class Curve:
    """Closed periodic polyline. Vertices are wrapped into [0, period) by the
    caller; consecutive vertices must stay within half a period per axis so
    the shortest periodic segment is unambiguous."""

    vertices: np.ndarray
    closed: bool = True
    orientation: int = 1

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        if verts.ndim != 2 or verts.shape[0] < 8:
            raise ValueError("curve needs >= 8 vertices, shape (m, d)")
        if self.orientation not in (-1, 1):
            raise ValueError("orientation must be +-1")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def segments(self, period) -> tuple[np.ndarray, np.ndarray]:
        """Start points and minimum-image edge vectors (closing edge included)."""
        per = np.asarray(period, dtype=np.float64)
        a = self.vertices
        b = np.roll(self.vertices, -1, axis=0)
        e = (b - a + per / 2) % per - per / 2
        if np.any(np.abs(e) > per / 2 * (1 + 1e-12)):
            raise ValueError("consecutive vertices farther than half a period")
        if not self.closed:
            a, e = a[:-1], e[:-1]
        if self.orientation < 0:
            a = (a + e)
            e = -e
        return a, e

    def length(self, period) -> float:
        _, e = self.segments(period)
        total = float(np.sum(np.sqrt(np.sum(e**2, axis=1))))
        if total <= 0:
            raise ValueError("degenerate curve of zero length")
        return total

    def resample(self, period, max_spacing: float) -> np.ndarray:
        """Dense points along the polyline, spacing <= max_spacing."""
        a, e = self.segments(period)
        pts = []
        for start, edge in zip(a, e):
            seg_len = float(np.sqrt(np.sum(edge**2)))
            if seg_len == 0.0:
                continue
            m = max(1, int(np.ceil(seg_len / max_spacing)))
            ts = np.arange(m) / m
            pts.append(start + ts[:, None] * edge)
        per = np.asarray(period)
        return np.concatenate(pts, axis=0) % per


@dataclass(frozen=True)
class LocalizationProfile:
    """Truncated squared-distance profile: rho^2 below sigma, constant
    4 sigma^2 beyond 2 sigma, quintic Hermite blend in between (C^2 and
    monotone for this data)."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValueError("sigma must be positive")

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        s = self.sigma
        rho = np.asarray(rho, dtype=np.float64)
        out = np.where(rho < s, rho**2, 4.0 * s**2)
        mid = (rho >= s) & (rho <= 2.0 * s)
        if np.any(mid):
            x = (rho[mid] - s) / s
            # quintic Hermite: value/slope/curvature (1, 2, 2) -> (4, 0, 0) in
            # units of sigma^2 per normalized coordinate
            p = 1.0 + 2.0 * x + x**2 + 15.0 * x**3 - 26.0 * x**4 + 11.0 * x**5
            out[mid] = s**2 * p
        return out


def _min_image(delta: np.ndarray, period) -> np.ndarray:
    per = np.asarray(period, dtype=np.float64)
    return (delta + per / 2) % per - per / 2


def distance_to_curve(x: np.ndarray, c: Curve, period) -> np.ndarray:
    """Minimum periodic point-to-segment distance, vectorized over points."""
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    a, e = c.segments(period)
    elen2 = np.sum(e**2, axis=1)
    elen2 = np.where(elen2 == 0.0, 1.0, elen2)
    best = np.full(pts.shape[0], np.inf)
    chunk = max(1, int(2e6 // max(len(a), 1)))
    for lo in range(0, pts.shape[0], chunk):
        p = pts[lo : lo + chunk]
        delta = _min_image(p[:, None, :] - a[None, :, :], period)
        t = np.clip(np.einsum("psd,sd->ps", delta, e) / elen2, 0.0, 1.0)
        diff = delta - t[..., None] * e[None, :, :]
        d2 = np.sum(diff**2, axis=-1)
        best[lo : lo + chunk] = np.sqrt(np.min(d2, axis=1))
    return best if np.asarray(x).ndim > 1 else float(best[0])


def _distance_field(grid: TorusGrid, curves: list[Curve], cutoff: float) -> np.ndarray:
    """Distances at all nodes, exact inside a dilated tube; values beyond the
    cutoff are clamped to cutoff (sufficient for the truncated profile)."""
    dx_min = min(grid.spacing)
    samples = np.concatenate(
        [c.resample(grid.period, 0.5 * dx_min) for c in curves], axis=0)
    occ = np.zeros(grid.resolution, dtype=bool)
    idx = tuple(
        (np.floor(samples[:, ax] / grid.spacing[ax] - 0.5).astype(int) % grid.resolution[ax])
        for ax in range(grid.dim))
    occ[idx] = True
    tube = occ.astype(np.uint8)
    for ax in range(grid.dim):
        K = int(np.ceil(cutoff / grid.spacing[ax])) + 2
        tube = maximum_filter1d(tube, size=2 * K + 1, axis=ax, mode="wrap")
    tube = tube.astype(bool)
    dist = np.full(grid.resolution, cutoff)
    coords = np.stack(grid.meshgrid(), axis=-1)
    pts = coords[tube]
    if len(pts):
        tree = cKDTree(samples % np.asarray(grid.period), boxsize=np.asarray(grid.period))
        d, _ = tree.query(pts, workers=fft_workers())
        dist[tube] = np.minimum(d, cutoff)
    return dist


def phi_sigma(grid: TorusGrid, curves: Curve | list[Curve], sigma: float) -> ScalarField:
    """Localization weight phi = (1/2) f_sigma(distance to the curve set)."""
    if not (sigma > 0):
        raise ValueError("sigma must be positive")
    if isinstance(curves, Curve):
        curves = [curves]
    prof = LocalizationProfile(sigma)
    dist = _distance_field(grid, curves, cutoff=2.0 * sigma + 2.0 * min(grid.spacing))
    return ScalarField(grid, 0.5 * prof(dist))


def analytic_filament_field(grid: TorusGrid, gamma, sign: int = 1) -> VectorField:
    """Rotated-offset ansatz around a graph filament x3 -> gamma(x3).

    The field winds once around the curve; it is unit everywhere but not
    exactly periodic in the transverse directions (documented seam).
    """
    if grid.dim != 3:
        raise ValueError("analytic filament data lives on a 3-torus")
    if sign not in (-1, 1):
        raise ValueError("sign must be +-1")
    X, Y, Z = grid.meshgrid()
    g = np.asarray(gamma(Z[0, 0, :]), dtype=np.float64)
    if g.shape != (grid.resolution[2], 2):
        raise ValueError("gamma must map the x3 axis to shape (n3, 2)")
    ox = X - g[None, None, :, 0]
    oy = Y - g[None, None, :, 1]
    r = np.hypot(ox, oy)
    if np.min(r) < 1e-12:
        j = np.unravel_index(np.argmin(r), r.shape)
        raise ValueError(f"node {j} lies on the filament")
    # rotate the offset by 90 degrees: (a, b) -> (-b, a)
    u = np.stack([-oy / r, ox / r], axis=-1) * float(sign)
    return VectorField(grid, u, unit_flag=True)


def circle_filament_field(grid: TorusGrid, r0: float, center, plane_axis: int = 2,
                          sign: int = 1) -> VectorField:
    """Rotated-offset ansatz around a circle, built in the meridional plane.

    The offset is (rho - r0, z) where rho is the in-plane distance to the
    circle axis and z the minimum-image offset along the plane normal.  The
    wrap seam at half a period behind the ring carries the oppositely
    oriented image ring required by periodicity; it is itself a legitimate
    filament and is reported by extraction.
    """
    if grid.dim != 3:
        raise ValueError("circle filament data lives on a 3-torus")
    if sign not in (-1, 1):
        raise ValueError("sign must be +-1")
    if not (0 < r0 < min(grid.period) / 2):
        raise ValueError("radius must fit inside half the torus")
    center = np.asarray(center, dtype=np.float64)
    coords = grid.meshgrid()
    inplane = [ax for ax in range(3) if ax != plane_axis]
    da = _min_image(coords[inplane[0]] - center[inplane[0]], grid.period[inplane[0]])
    db = _min_image(coords[inplane[1]] - center[inplane[1]], grid.period[inplane[1]])
    rho = np.hypot(da, db)
    z = _min_image(coords[plane_axis] - center[plane_axis], grid.period[plane_axis])
    alpha = np.arctan2(z, rho - r0) * float(sign)
    u = np.stack([np.cos(alpha), np.sin(alpha)], axis=-1)
    return VectorField(grid, u, unit_flag=True)


# ---------------------------------------------------------------------------
# exact lattice circulation synthesis


def _plaquette_crossings(grid: TorusGrid, curves: list[Curve]) -> list[np.ndarray]:
    """Signed crossing counts of lattice plaquettes, one array per normal
    axis.  The plaquette normal to axis c based at node j lies in the plane
    x_c = (j_c + 1/2 + 1/2) spacing; crossings are counted exactly per
    polyline segment."""
    d = grid.dim
    res = grid.resolution
    if d == 2:
        W = [np.zeros(res, dtype=np.int64)]
        normals = [(0, 1, 0)]
    else:
        W = [np.zeros(res, dtype=np.int64) for _ in range(3)]
        normals = [(1, 2, 0), (2, 0, 1), (0, 1, 2)]
    spc = grid.spacing
    for curve in curves:
        a, e = curve.segments(grid.period)
        for (ax_a, ax_b, ax_c) in normals:
            dc = e[:, ax_c]
            moving = np.nonzero(dc != 0.0)[0]
            for s in moving:
                p, edge = a[s], e[s]
                lo = min(p[ax_c], p[ax_c] + edge[ax_c])
                hi = max(p[ax_c], p[ax_c] + edge[ax_c])
                j0 = int(np.ceil(lo / spc[ax_c] - 0.5))
                j1 = int(np.floor(hi / spc[ax_c] - 0.5))
                for jc in range(j0, j1 + 1):
                    xc = (jc + 0.5) * spc[ax_c]
                    t = (xc - p[ax_c]) / edge[ax_c]
                    if not (0.0 <= t < 1.0):
                        continue
                    xa = (p[ax_a] + t * edge[ax_a]) % grid.period[ax_a]
                    xb = (p[ax_b] + t * edge[ax_b]) % grid.period[ax_b]
                    ja = int(np.floor(xa / spc[ax_a] - 0.5)) % res[ax_a]
                    jb = int(np.floor(xb / spc[ax_b] - 0.5)) % res[ax_b]
                    idx = [0] * d
                    idx[ax_a], idx[ax_b], idx[ax_c] = ja, jb, jc % res[ax_c]
                    k = ax_c if d == 3 else 0
                    # segments() already folds the curve orientation into
                    # the edge directions
                    W[k][tuple(idx)] += int(np.sign(dc[s]))
    return W


def _check_net_flux(grid: TorusGrid, W: list[np.ndarray]):
    # a net strand along axis c crosses every one of the n_c levels once
    for ax_c, Wc in enumerate(W):
        strands = float(np.sum(Wc)) / grid.resolution[ax_c]
        if abs(strands) > 0.5:
            raise ValueError(
                f"nonzero net circulation through cross-sections normal to "
                f"axis {ax_c} ({strands:+.1f} strands); the torus admits "
                f"no periodic unit field for this curve system")


def _lattice_increments(grid: TorusGrid, W: list[np.ndarray]) -> list[np.ndarray]:
    """Minimal-norm edge increments with discrete curl 2*pi*W and all line
    holonomies rounded to whole turns."""
    d = grid.dim
    res = grid.resolution
    w = fft_workers()
    symbols = []
    for ax, n in enumerate(res):
        k = _fft.fftfreq(n)
        shape = [1] * d
        shape[ax] = n
        symbols.append((np.exp(2j * np.pi * k) - 1.0).reshape(shape))
    lam = sum(np.abs(s)**2 for s in symbols)
    lam = np.where(lam == 0, 1.0, lam)
    if d == 2:
        om = _fft.fftn(2.0 * np.pi * W[0].astype(np.float64), workers=w)
        gh = [-np.conj(symbols[1]) * om / lam, np.conj(symbols[0]) * om / lam]
    else:
        oms = [_fft.fftn(2.0 * np.pi * Wc.astype(np.float64), workers=w) for Wc in W]
        conj = [np.conj(s) for s in symbols]
        gh = [
            (oms[1] * conj[2] - oms[2] * conj[1]) / lam,
            (oms[2] * conj[0] - oms[0] * conj[2]) / lam,
            (oms[0] * conj[1] - oms[1] * conj[0]) / lam,
        ]
    G = []
    for g in gh:
        g[(0,) * d] = 0.0
        G.append(_fft.ifftn(g, workers=w).real)
    # round line holonomies: parallel lines differ by whole turns and share
    # one fractional part, extracted as a circular mean (robust at the
    # half-turn tie of symmetric configurations)
    for ax in range(d):
        tot = G[ax].sum(axis=ax, keepdims=True)
        turns = tot / (2.0 * np.pi)
        z = np.mean(np.exp(2j * np.pi * turns))
        if np.abs(z) < 0.5:
            raise ValueError("holonomy fractions disagree between lines; "
                             "curve system is inconsistent with a periodic phase")
        frac = float(np.angle(z)) / (2.0 * np.pi)
        G[ax] = G[ax] - 2.0 * np.pi * frac / res[ax]
        tot = G[ax].sum(axis=ax, keepdims=True)
        defect = tot - 2.0 * np.pi * np.round(tot / (2.0 * np.pi))
        if np.max(np.abs(defect)) > 1e-6:
            raise ValueError("holonomy rounding failed; curve system is "
                             "inconsistent with a periodic phase")
        G[ax] = G[ax] - defect / res[ax]
    return G


def _integrate_tree(grid: TorusGrid, G: list[np.ndarray]) -> np.ndarray:
    """Phase by cumulative sums along a lexicographic spanning tree."""
    d = grid.dim
    res = grid.resolution
    if d == 2:
        theta = np.zeros(res)
        theta[:, 0] = np.concatenate([[0.0], np.cumsum(G[0][:-1, 0])])
        theta = theta[:, 0:1] + np.concatenate(
            [np.zeros((res[0], 1)), np.cumsum(G[1][:, :-1], axis=1)], axis=1)
        return theta
    theta = np.zeros(res)
    theta[:, 0, 0] = np.concatenate([[0.0], np.cumsum(G[0][:-1, 0, 0])])
    theta[:, :, 0] = theta[:, 0:1, 0] + np.concatenate(
        [np.zeros((res[0], 1)), np.cumsum(G[1][:, :-1, 0], axis=1)], axis=1)
    theta = theta[:, :, 0:1] + np.concatenate(
        [np.zeros((res[0], res[1], 1)), np.cumsum(G[2][:, :, :-1], axis=2)], axis=2)
    return theta


def periodic_filament_field(grid: TorusGrid, curves: list[Curve]) -> VectorField:
    """Exactly periodic unit field winding once around each given curve.

    Empty input returns the constant field (1, 0).  Curve systems with a net
    strand count through any cross-section are rejected (topological
    obstruction), naming the offending axis.
    """
    if grid.dim != 3:
        raise ValueError("filament synthesis lives on a 3-torus")
    if not curves:
        vals = np.zeros(grid.resolution + (2,))
        vals[..., 0] = 1.0
        return VectorField(grid, vals, unit_flag=True)
    W = _plaquette_crossings(grid, curves)
    _check_net_flux(grid, W)
    G = _lattice_increments(grid, W)
    theta = _integrate_tree(grid, G)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return VectorField(grid, u, unit_flag=True)


def vortex_lattice_field(grid: TorusGrid, charges: list[tuple]) -> VectorField:
    """Planar unit field with prescribed integer vortex charges.

    ``charges`` is a list of (position, q).  The total charge must vanish.
    """
    if grid.dim != 2:
        raise ValueError("vortex synthesis lives on a 2-torus")
    if not charges:
        vals = np.zeros(grid.resolution + (2,))
        vals[..., 0] = 1.0
        return VectorField(grid, vals, unit_flag=True)
    total = sum(int(q) for _, q in charges)
    if total != 0:
        raise ValueError(f"net vortex charge {total:+d}; no periodic unit field exists")
    W = np.zeros(grid.resolution, dtype=np.int64)
    for pos, q in charges:
        idx = tuple(
            int(np.floor(float(pos[ax]) / grid.spacing[ax] - 0.5)) % grid.resolution[ax]
            for ax in range(2))
        W[idx] += int(q)
    G = _lattice_increments(grid, [W])
    theta = _integrate_tree(grid, G)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return VectorField(grid, u, unit_flag=True)


def dipole_field(grid: TorusGrid, p, q, balanced: bool = True) -> VectorField:
    """Vortex dipole (+1 at p, -1 at q), image-balanced by default.

    The balancing image pair at a half-period shift cancels the holonomy
    twist that a lone dipole forces on the torus, so the configuration feels
    only external forcing (pinning), not a background phase current.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    charges = [(p, +1), (q, -1)]
    if balanced:
        sep = np.abs(_min_image(p - q, grid.period))
        shift_axis = int(np.argmin(sep))
        shift = np.zeros(2)
        shift[shift_axis] = grid.period[shift_axis] / 2
        charges += [((p + shift) % np.asarray(grid.period), -1),
                    ((q + shift) % np.asarray(grid.period), +1)]
    return vortex_lattice_field(grid, charges)


# ---------------------------------------------------------------------------
# winding numbers and extraction


@dataclass(frozen=True)
class WindingResult:
    turns: int
    defect: float
    ambiguous: bool


def winding_number(u: VectorField, loop: np.ndarray) -> WindingResult:
    """Winding of the first two components along a closed loop.

    ``loop`` is either an integer array of node multi-indices or a float
    array of positions (sampled by periodic multilinear interpolation).
    Any phase increment of magnitude >= pi flags the result as ambiguous;
    the caller must refine the loop.
    """
    loop = np.asarray(loop)
    if loop.ndim != 2 or loop.shape[1] != u.grid.dim:
        raise ValueError("loop must have shape (k, dim)")
    if np.issubdtype(loop.dtype, np.integer):
        vals = u.values[tuple(loop[:, ax] % u.grid.resolution[ax]
                              for ax in range(u.grid.dim))]
    else:
        vals = interp_periodic(u.grid, u.values, loop.astype(np.float64))
    phase = np.arctan2(vals[:, 1], vals[:, 0])
    inc = np.diff(np.concatenate([phase, phase[:1]]))
    inc = (inc + np.pi) % (2 * np.pi) - np.pi
    ambiguous = bool(np.any(np.abs(inc) >= np.pi - 1e-12))
    total = float(np.sum(inc)) / (2 * np.pi)
    turns = int(np.rint(total))
    return WindingResult(turns=turns, defect=abs(total - turns), ambiguous=ambiguous)


def _plaquette_windings(u: VectorField):
    """Integer winding of every elementary plaquette, per orientation."""
    phase = np.arctan2(u.values[..., 1], u.values[..., 0])

    def dwrap(axis):
        d = np.roll(phase, -1, axis=axis) - phase
        return (d + np.pi) % (2 * np.pi) - np.pi

    d = u.grid.dim
    diffs = [dwrap(ax) for ax in range(d)]
    pairs = [(0, 1)] if d == 2 else [(1, 2), (2, 0), (0, 1)]
    out = []
    for (a, b) in pairs:
        raw = (diffs[a] + np.roll(diffs[b], -1, axis=a)
               - np.roll(diffs[a], -1, axis=b) - diffs[b]) / (2 * np.pi)
        out.append(((a, b), np.rint(raw).astype(np.int64)))
    return out


@dataclass(frozen=True)
class ExtractionResult:
    curves: list
    points: np.ndarray
    turns: np.ndarray
    complete: bool
    message: str = ""


def extract_vorticity(u: VectorField, refine_field: ScalarField | None = None,
                      chain_tolerance_cells: float = 2.0) -> ExtractionResult:
    """Locate the vorticity set from plaquette windings.

    Pierced plaquette centers are refined (optionally, by a quadratic fit of
    ``refine_field`` minima in the plaquette plane), merged per dual cell,
    and chained into closed polylines by periodic nearest-neighbor walking.
    If chaining fails the raw marked set is returned with ``complete=False``.
    """
    grid = u.grid
    spc = np.asarray(grid.spacing)
    marks = []
    turns = []
    for (a, b), W in _plaquette_windings(u):
        idx = np.argwhere(W != 0)
        if len(idx) == 0:
            continue
        ctr = (idx + 0.5) * spc
        ctr[:, a] += 0.5 * spc[a]
        ctr[:, b] += 0.5 * spc[b]
        if refine_field is not None:
            ctr = _refine_marks(refine_field, idx, ctr, a, b)
        marks.append(ctr)
        turns.append(W[tuple(idx.T)])
    if not marks:
        return ExtractionResult([], np.zeros((0, grid.dim)), np.zeros(0, np.int64),
                                True, "no vorticity")
    points = np.concatenate(marks) % np.asarray(grid.period)
    turn_arr = np.concatenate(turns)
    if grid.dim == 2:
        return ExtractionResult([], points, turn_arr, True, "point vortices")
    merged = _merge_marks(grid, points)
    curves, ok, msg = _chain_points(grid, merged, chain_tolerance_cells)
    return ExtractionResult(curves, points, turn_arr, ok, msg)


def _refine_marks(f: ScalarField, idx: np.ndarray, ctr: np.ndarray,
                  a: int, b: int) -> np.ndarray:
    vals = f.values
    res = f.grid.resolution
    spc = f.grid.spacing
    out = ctr.copy()
    base = tuple(idx.T)
    for ax_ref, other in ((a, b), (b, a)):
        m = {}
        for shift in (-1, 0, 1):
            sl = list(base)
            sl[ax_ref] = (idx[:, ax_ref] + shift) % res[ax_ref]
            # average over the plaquette edge parallel to the other axis
            sl2 = list(sl)
            sl2[other] = (idx[:, other] + 1) % res[other]
            m[shift] = 0.5 * (vals[tuple(sl)] + vals[tuple(sl2)])
        denom = m[-1] - 2.0 * m[0] + m[1]
        denom = np.where(np.abs(denom) < 1e-30, 1e-30, denom)
        delta = np.clip(0.5 * (m[-1] - m[1]) / denom, -0.5, 0.5)
        out[:, ax_ref] += delta * spc[ax_ref]
    return out


def _merge_marks(grid: TorusGrid, points: np.ndarray) -> np.ndarray:
    """Average marks that fall into the same dual cell (periodic mean)."""
    spc = np.asarray(grid.spacing)
    res = np.asarray(grid.resolution)
    cells = np.floor(points / spc).astype(np.int64) % res
    keys = cells[:, 0]
    for ax in range(1, grid.dim):
        keys = keys * res[ax] + cells[:, ax]
    order = np.argsort(keys, kind="stable")
    merged = []
    per = np.asarray(grid.period)
    lo = 0
    keys_sorted = keys[order]
    while lo < len(order):
        hi = lo
        while hi < len(order) and keys_sorted[hi] == keys_sorted[lo]:
            hi += 1
        group = points[order[lo:hi]]
        ref = group[0]
        rel = _min_image(group - ref, per)
        merged.append((ref + rel.mean(axis=0)) % per)
        lo = hi
    return np.asarray(merged)


def _chain_points(grid: TorusGrid, pts: np.ndarray, tol_cells: float):
    if len(pts) < 8:
        return [], False, f"too few marks ({len(pts)}) to chain"
    per = np.asarray(grid.period)
    max_step = tol_cells * max(grid.spacing)
    tree = cKDTree(pts, boxsize=per)
    unused = np.ones(len(pts), dtype=bool)
    curves = []
    while np.any(unused):
        start = int(np.argmax(unused))
        chain = [start]
        unused[start] = False
        current = start
        while True:
            dists, nbrs = tree.query(pts[current], k=min(8, len(pts)),
                                     distance_upper_bound=max_step)
            nxt = -1
            for dist, nb in zip(np.atleast_1d(dists), np.atleast_1d(nbrs)):
                if nb < len(pts) and unused[nb] and np.isfinite(dist):
                    nxt = nb
                    break
            if nxt < 0:
                break
            chain.append(nxt)
            unused[nxt] = False
            current = nxt
        if len(chain) < 8:
            return [], False, f"chain of length {len(chain)} too short"
        closing = np.sqrt(np.sum(_min_image(pts[chain[-1]] - pts[chain[0]], per)**2))
        if closing > 2 * max_step:
            return [], False, "open chain; filament may branch or exit resolution"
        curves.append(Curve(pts[chain], closed=True))
    return curves, True, ""


# ---------------------------------------------------------------------------
# reference flows


def circle_reference(r0: float, t: float) -> float:
    """Radius of the shrinking circle, sqrt(r0^2 - 2 t)."""
    if t < 0:
        raise ValueError("time must be non-negative")
    if t >= r0**2 / 2:
        raise ValueError(
            f"circle extinct: t = {t} >= extinction time {r0**2 / 2}")
    return float(np.sqrt(r0**2 - 2.0 * t))


def circle_curve(r0: float, center, plane_axis: int = 2, n_vertices: int = 256,
                 orientation: int = 1) -> Curve:
    """Polyline circle in a coordinate plane."""
    th = np.linspace(0.0, 2.0 * np.pi, n_vertices, endpoint=False)
    center = np.asarray(center, dtype=np.float64)
    d = len(center)
    inplane = [ax for ax in range(d) if ax != plane_axis]
    verts = np.tile(center, (n_vertices, 1))
    verts[:, inplane[0]] += r0 * np.cos(th)
    verts[:, inplane[1]] += r0 * np.sin(th)
    return Curve(verts, closed=True, orientation=orientation)


def line_curve(position, axis: int, period, n_vertices: int = 64,
               orientation: int = 1) -> Curve:
    """Straight closed line along a torus generator at a transverse position."""
    per = np.asarray(period, dtype=np.float64)
    d = len(per)
    ts = np.arange(n_vertices) / n_vertices * per[axis]
    verts = np.zeros((n_vertices, d))
    pos = np.asarray(position, dtype=np.float64)
    trans = [ax for ax in range(d) if ax != axis]
    for k, ax in enumerate(trans):
        verts[:, ax] = pos[k]
    verts[:, axis] = ts
    return Curve(verts, closed=True, orientation=orientation)


@dataclass(frozen=True)
class PinningTrajectory:
    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")


def pinning_ode(x0, a, T: float, dt: float) -> PinningTrajectory:
    """Reference vortex trajectory dX/dt = -grad(a)(X) / a(X), classical RK4.

    ``a`` is a PinningPotential (or ScalarField); its gradient is spectral,
    sampled off-grid with periodic bilinear interpolation.
    """
    from .mbo import PinningPotential

    if not (dt > 0):
        raise ValueError("dt must be positive")
    af = a.a if isinstance(a, PinningPotential) else a
    grid = af.grid
    grads = grad_scalar(af)
    gvals = np.stack([g.values for g in grads], axis=-1)
    avals = af.values[..., None]

    def rhs(x):
        g = interp_periodic(grid, gvals, x[None, :])[0]
        aval = interp_periodic(grid, avals, x[None, :])[0, 0]
        return -g / aval

    steps = max(1, int(np.ceil(T / dt)))
    x = np.asarray(x0, dtype=np.float64)
    times = [0.0]
    positions = [x.copy()]
    per = np.asarray(grid.period)
    for nstep in range(steps):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        k3 = rhs(x + 0.5 * dt * k2)
        k4 = rhs(x + dt * k3)
        x = (x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)) % per
        times.append((nstep + 1) * dt)
        positions.append(x.copy())
    return PinningTrajectory(np.asarray(times), np.asarray(positions))


# ---------------------------------------------------------------------------
# curve exchange format


def save_curve(curve: Curve, path):
    """CSV with header axis0,axis1[,axis2]; one vertex per row; the closing
    edge is implied and orientation follows row order."""
    verts = curve.vertices
    if curve.orientation < 0:
        verts = verts[::-1]
    header = ",".join(f"axis{i}" for i in range(curve.dim))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in verts:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_curve(path) -> Curve:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if not all(c == f"axis{i}" for i, c in enumerate(cols)):
            raise ValueError(f"unexpected curve header: {header!r}")
        rows = [[float(v) for v in line.strip().split(",")]
                for line in fh if line.strip()]
    verts = np.asarray(rows, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != len(cols):
        raise ValueError("curve rows inconsistent with header")
    return Curve(verts, closed=True, orientation=1)
