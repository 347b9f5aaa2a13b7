"""Named invariant-check suites, shared by the CLI and the test suite.

Each suite returns a list of (name, passed, detail) triples; a suite passes
when every entry does.  The identity suites run at machine precision on
desk-size grids in seconds.
"""

from __future__ import annotations

import numpy as np

from .energy import (dirichlet_mollified, e_h, e_h_fourier, metric_term,
                     monotonicity_check)
from .grid import TorusGrid, VectorField, dot_integral, sample
from .mbo import (PinningPotential, delta_h, dirichlet_step, hmhf_step,
                  mbo_step, neumann_step, pinning_step)
from .grid import ScalarField
from .spectral import convolve_values, heat_convolve

__all__ = ["run_suite", "SUITES", "random_unit_field"]


def random_unit_field(grid: TorusGrid, seed: int, codomain: int = 2) -> VectorField:
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(grid.resolution + (codomain,))
    norms = np.sqrt(np.sum(raw**2, axis=-1))
    if np.min(norms) < 1e-3:
        raw[norms < 1e-3] = 1.0 / np.sqrt(codomain)
        norms = np.sqrt(np.sum(raw**2, axis=-1))
    return VectorField(grid, raw / norms[..., None], unit_flag=True)


def plane_wave(grid: TorusGrid, axis: int = 0, mode: int = 1) -> VectorField:
    def f(*coords):
        ph = 2 * np.pi * mode * coords[axis] / grid.period[axis]
        return np.stack([np.cos(ph), np.sin(ph)], axis=-1)
    return sample(grid, f)


def _grids():
    return [TorusGrid((64, 64, 64)), TorusGrid((128, 128))]


def suite_identities(seed: int = 1234) -> list[tuple]:
    """Machine-precision identities of the spectral energy calculus."""
    out = []
    for grid in _grids():
        tag = "x".join(map(str, grid.resolution))
        pw = plane_wave(grid)
        for h in (1e-3, 1e-2, 1e-1):
            expected = (1.0 - np.exp(-4 * np.pi**2 * h)) / h
            got = e_h(pw, h)
            out.append((f"[{tag}] plane-wave energy h={h:g}",
                        abs(got - expected) <= 1e-10 * expected,
                        f"{got:.12e} vs {expected:.12e}"))
        h = 1e-2
        for k in range(4):
            u = random_unit_field(grid, seed + k)
            a, b = e_h(u, h), e_h_fourier(u, h)
            out.append((f"[{tag}] Plancherel form seed={seed + k}",
                        abs(a - b) <= 1e-10 * abs(a), f"{a:.12e} vs {b:.12e}"))
            # strong outer Euler-Lagrange identity after one step
            res = _outer_el_residual(u, h)
            out.append((f"[{tag}] outer EL identity seed={seed + k}",
                        res <= 1e-11, f"max residual {res:.3e}"))
            w = random_unit_field(grid, seed + 100 + k)
            m1 = metric_term(u, w, h)
            m2 = _metric_half(u, w, h)
            out.append((f"[{tag}] metric-term identity seed={seed + k}",
                        abs(m1 - m2) <= 1e-12 * abs(m1),
                        f"{m1:.12e} vs {m2:.12e}"))
        u = random_unit_field(grid, seed + 7)
        s, t = 3e-3, 7e-3
        both = heat_convolve(heat_convolve(u, s), t)
        once = heat_convolve(u, s + t)
        semi = float(np.max(np.abs(both.values - once.values)))
        out.append((f"[{tag}] semigroup", semi <= 1e-12, f"max dev {semi:.3e}"))
        f = random_unit_field(grid, seed + 8)
        g = random_unit_field(grid, seed + 9)
        lhs = dot_integral(f, heat_convolve(g, h))
        rhs = dot_integral(heat_convolve(f, h), g)
        out.append((f"[{tag}] self-adjointness",
                    abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs)),
                    f"{lhs:.12e} vs {rhs:.12e}"))
    return out


def _outer_el_residual(u: VectorField, h: float) -> float:
    outcome = mbo_step(u, h)
    u1 = outcome.u_next
    gdiff = convolve_values(u.grid, (u1.values - u.values) / h, h)
    dh = delta_h(u1, h)
    vec = gdiff - dh.values
    proj = vec - u1.values * np.sum(u1.values * vec, axis=-1, keepdims=True)
    mask = np.ones(u.grid.resolution, dtype=bool)
    if len(outcome.zero_nodes):
        flat = mask.ravel()
        flat[outcome.zero_nodes] = False
        mask = flat.reshape(u.grid.resolution)
    return float(np.max(np.abs(proj[mask])))


def _metric_half(u: VectorField, w: VectorField, h: float) -> float:
    diff = u.values - w.values
    half = convolve_values(u.grid, diff, h / 2)
    return float(np.mean(np.sum(half**2, axis=-1))) * u.grid.volume / h


def suite_monotonicity(seed: int = 1234) -> list[tuple]:
    """Monotonicity in h, per-mode inequality, and the sharp bound."""
    out = []
    grid = TorusGrid((64, 64, 64))
    fields = [("plane-wave", plane_wave(grid))] + [
        (f"random-{k}", random_unit_field(grid, seed + k)) for k in range(5)]
    hs = [1e-3 * 2**j for j in range(12)]
    for name, u in fields:
        energies = [e_h(u, h) for h in hs]
        diffs = np.diff(energies)
        out.append((f"dE/dh <= 0 ({name})", bool(np.all(diffs <= 1e-9)),
                    f"max increase {np.max(diffs):.3e}"))
        res = monotonicity_check(u, 1e-2, N=2)
        out.append((f"E_4h <= E_h ({name})", res.monotone,
                    f"{res.e_coarse:.6e} vs {res.e_fine:.6e}"))
        out.append((f"per-mode inequality ({name})", res.per_mode_ok,
                    f"worst {res.worst_mode_value:.3e}"))
        for h in (1e-3, 1e-2, 1e-1):
            d = dirichlet_mollified(u, h)
            e = e_h(u, h)
            out.append((f"sharp bound h={h:g} ({name})", d <= e + 1e-11,
                        f"{d:.6e} <= {e:.6e}"))
    return out


def suite_el(seed: int = 1234) -> list[tuple]:
    """Pointwise optimality and minimizing-movements inequality per step."""
    out = []
    grid = TorusGrid((32, 32, 32))
    rng = np.random.default_rng(seed)
    h = 1e-2
    for k in range(4):
        u = random_unit_field(grid, seed + k)
        outcome = mbo_step(u, h)
        u1 = outcome.u_next
        conv = convolve_values(grid, u.values, h)
        best = np.sum(u1.values * conv, axis=-1)
        ok = True
        worst = 0.0
        for _ in range(16):
            w = rng.standard_normal(2)
            w = w / np.sqrt(np.sum(w**2))
            cand = conv[..., 0] * w[0] + conv[..., 1] * w[1]
            gap = float(np.max(cand - best))
            worst = max(worst, gap)
            ok = ok and gap <= 1e-12
        out.append((f"pointwise optimality seed={seed + k}", ok,
                    f"worst competitor gap {worst:.3e}"))
        drop = e_h(u1, h) + metric_term(u1, u, h) - e_h(u, h)
        out.append((f"per-step ledger seed={seed + k}", drop <= 1e-11,
                    f"E + metric - E_prev = {drop:.3e}"))
        bit = hmhf_step(u, h)
        out.append((f"hmhf coincides bitwise seed={seed + k}",
                    np.array_equal(bit.u_next.values, u1.values), ""))
    return out


def suite_variants(seed: int = 1234) -> list[tuple]:
    """Smoke identities of the bounded, pinned, and sphere-valued steps."""
    out = []
    grid3 = TorusGrid((32, 32, 32))
    grid2 = TorusGrid((64, 64))
    h = 1e-3
    u3 = random_unit_field(grid3, seed)
    full = ScalarField(grid3, np.ones(grid3.resolution))
    a = mbo_step(u3, h).u_next.values
    b = neumann_step(u3, full, h).u_next.values
    out.append(("neumann with full mask reduces to the plain step",
                float(np.max(np.abs(a - b))) <= 1e-12,
                f"max dev {np.max(np.abs(a - b)):.3e}"))
    c = dirichlet_step(u3, full, random_unit_field(grid3, seed + 1), h)
    out.append(("dirichlet with full mask reduces to the plain step",
                float(np.max(np.abs(a - c.u_next.values))) <= 1e-12, ""))
    X, _ = grid2.meshgrid()
    pot = PinningPotential(ScalarField(grid2, np.full(grid2.resolution, 1.7)))
    u2 = random_unit_field(grid2, seed + 2)
    p1 = pinning_step(u2, pot, h).u_next.values
    p2 = mbo_step(u2, h).u_next.values
    out.append(("constant potential cancels in the projection",
                float(np.max(np.abs(p1 - p2))) <= 1e-12, ""))
    const = sample(grid2, lambda x, y: np.stack(
        [np.ones_like(x), np.zeros_like(x)], axis=-1))
    varying = PinningPotential(ScalarField(grid2, 1.0 + 0.25 * np.cos(2 * np.pi * X)))
    pc = pinning_step(const, varying, h).u_next.values
    out.append(("constant state is a pinned fixed point",
                float(np.max(np.abs(pc - const.values))) <= 1e-13, ""))
    uS = random_unit_field(TorusGrid((32, 32)), seed + 3, codomain=3)
    energies = []
    state = uS
    for _ in range(10):
        state = hmhf_step(state, h).u_next
        energies.append(e_h(state, h))
    out.append(("sphere-valued energy non-increasing",
                bool(np.all(np.diff(energies) <= 1e-11)), ""))
    return out


SUITES = {
    "identities": suite_identities,
    "monotonicity": suite_monotonicity,
    "el": suite_el,
    "variants": suite_variants,
}


def run_suite(name: str, seed: int = 1234) -> tuple[bool, list[tuple]]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = SUITES[name](seed)
    return all(ok for _, ok, _ in results), results
