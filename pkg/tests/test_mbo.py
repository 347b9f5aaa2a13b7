import numpy as np
import pytest

from codim2.checks import plane_wave, random_unit_field
from codim2.energy import e_h, gauss_hermite_offsets, metric_term
from codim2.grid import ScalarField, TorusGrid, VectorField, sample
from codim2.interpolate import interp_periodic
from codim2.mbo import (PinningPotential, delta_h, dirichlet_step, hmhf_step,
                        mbo_step, neumann_step, pinning_step, project_unit)
from codim2.spectral import convolve_values


def constant_field(grid, vec):
    vals = np.broadcast_to(np.asarray(vec, float), grid.resolution + (len(vec),))
    return VectorField(grid, vals.copy(), unit_flag=abs(np.linalg.norm(vec) - 1) < 1e-12)


def test_project_unit_basics():
    g = TorusGrid((8, 8))
    vals = np.zeros((8, 8, 2))
    vals[..., 0] = 3.0
    vals[..., 1] = 4.0
    vals[0, 0] = 0.0
    out = project_unit(VectorField(g, vals))
    assert np.allclose(out.u_next.values[1, 1], [0.6, 0.8], atol=1e-15)
    assert out.u_next.unit_flag
    assert list(out.zero_nodes) == [0]
    # fallback vector used at the degenerate node
    assert np.allclose(out.u_next.values[0, 0], [1.0, 0.0])


def test_project_unit_idempotent_on_unit():
    g = TorusGrid((16, 16))
    u = random_unit_field(g, 0)
    out = project_unit(u)
    assert np.max(np.abs(out.u_next.values - u.values)) <= 1e-15


def test_mbo_constant_fixed_point():
    g = TorusGrid((16, 16, 16))
    u = constant_field(g, [0.6, 0.8])
    out = mbo_step(u, 1e-2)
    assert np.array_equal(out.u_next.values, u.values) or \
        np.max(np.abs(out.u_next.values - u.values)) <= 1e-15
    assert len(out.zero_nodes) == 0


def test_mbo_plane_wave_stationary():
    g = TorusGrid((32, 32, 32))
    u = plane_wave(g)
    h = 2e-3
    out = mbo_step(u, h)
    # diffusion scales the single mode by exp(-4 pi^2 h); projection undoes it
    assert np.allclose(out.v.values, np.exp(-4 * np.pi**2 * h) * u.values,
                       atol=1e-14)
    assert np.max(np.abs(out.u_next.values - u.values)) <= 1e-13


def test_mbo_validation():
    g = TorusGrid((8, 8))
    u = random_unit_field(g, 1)
    with pytest.raises(ValueError):
        mbo_step(u, 0.0)
    not_unit = VectorField(g, 2.0 * np.ones((8, 8, 2)))
    with pytest.raises(ValueError, match="unit"):
        mbo_step(not_unit, 1e-3)


def test_delta_h_matches_convolution_quotient():
    g = TorusGrid((16, 16, 16))
    u = random_unit_field(g, 2)
    h = 3e-3
    d = delta_h(u, h)
    expected = (convolve_values(g, u.values, h) - u.values) / h
    assert np.array_equal(d.values, expected)
    c = constant_field(g, [1.0, 0.0])
    assert np.max(np.abs(delta_h(c, h).values)) <= 1e-12


def test_delta_h_plane_wave_factor():
    g = TorusGrid((32, 32, 32))
    u = plane_wave(g)
    h = 4e-3
    d = delta_h(u, h)
    factor = (np.exp(-4 * np.pi**2 * h) - 1.0) / h
    assert np.allclose(d.values, factor * u.values, atol=1e-10 * abs(factor))


def test_delta_h_kernel_average_identity():
    """The defining kernel average (second differences against the standard
    Gaussian) agrees with (G_h*u - u)/h by the symmetry of the kernel.
    Checked on a plane wave whose shifts are evaluated in closed form, so the
    only error left is the Gauss-Hermite quadrature tail."""
    g = TorusGrid((16, 16, 16))
    u = plane_wave(g)
    h = 2e-3
    d = delta_h(u, h)
    offs, wts = gauss_hermite_offsets(1, points=16)
    X = g.meshgrid()[0]
    rh = np.sqrt(h)
    acc = np.zeros_like(u.values)
    for z, wz in zip(offs[:, 0], wts):
        for s in (+1.0, -1.0):
            ph = 2 * np.pi * (X + s * rh * z)
            shifted = np.stack([np.cos(ph), np.sin(ph)], axis=-1)
            acc += wz * shifted / (2.0 * h)
    acc -= u.values / h
    scale = float(np.max(np.abs(d.values)))
    assert np.max(np.abs(acc - d.values)) <= 1e-8 * scale


def test_neumann_full_mask_reduces_to_plain_step():
    g = TorusGrid((16, 16, 16))
    u = random_unit_field(g, 3)
    full = ScalarField(g, np.ones(g.resolution))
    a = mbo_step(u, 1e-3)
    b = neumann_step(u, full, 1e-3)
    assert np.array_equal(a.u_next.values, b.u_next.values)


def test_neumann_constant_direction_preserved_on_ball():
    g = TorusGrid((32, 32, 32))
    X, Y, Z = g.meshgrid()
    chi = ScalarField(g, (((X - 0.5) ** 2 + (Y - 0.5) ** 2 + (Z - 0.5) ** 2)
                          < 0.3**2).astype(float))
    u = constant_field(g, [0.6, 0.8])
    out = neumann_step(u, chi, 1e-3)
    inside = chi.values > 0
    # v = u * (G_h * chi): a positive scalar multiple inside, so the
    # projected direction is exactly u there
    assert np.max(np.abs(out.u_next.values[inside] - u.values[inside])) <= 1e-13
    outside = ~inside
    assert np.max(np.abs(out.u_next.values[outside])) == 0.0


def test_neumann_validation():
    g = TorusGrid((8, 8, 8))
    u = random_unit_field(g, 4)
    with pytest.raises(ValueError, match="empty"):
        neumann_step(u, ScalarField(g, np.zeros(g.resolution)), 1e-3)
    with pytest.raises(ValueError, match="0,1|\\{0,1\\}"):
        neumann_step(u, ScalarField(g, 0.5 * np.ones(g.resolution)), 1e-3)


def test_dirichlet_reductions_and_validation():
    g = TorusGrid((16, 16, 16))
    u = random_unit_field(g, 5)
    full = ScalarField(g, np.ones(g.resolution))
    ubar = random_unit_field(g, 6)
    a = dirichlet_step(u, full, ubar, 1e-3)
    b = mbo_step(u, 1e-3)
    assert np.array_equal(a.u_next.values, b.u_next.values)
    const = constant_field(g, [1.0, 0.0])
    X, _, _ = g.meshgrid()
    half = ScalarField(g, (X < 0.5).astype(float))
    out = dirichlet_step(const, half, const, 1e-3)
    assert np.max(np.abs(out.u_next.values - const.values)) <= 1e-13
    bad = VectorField(g, 0.5 * np.ones(g.resolution + (2,)))
    with pytest.raises(ValueError, match="unit"):
        dirichlet_step(u, half, bad, 1e-3)


def test_pinning_constant_potential_cancels():
    g = TorusGrid((32, 32))
    u = random_unit_field(g, 7)
    pot = PinningPotential(ScalarField(g, np.full(g.resolution, 2.3)))
    a = pinning_step(u, pot, 1e-3).u_next.values
    b = mbo_step(u, 1e-3).u_next.values
    assert np.max(np.abs(a - b)) <= 1e-12


def test_pinning_constant_state_fixed():
    g = TorusGrid((32, 32))
    X, _ = g.meshgrid()
    pot = PinningPotential(ScalarField(g, 1.0 + 0.25 * np.cos(2 * np.pi * X)))
    u = constant_field(g, [0.0, 1.0])
    out = pinning_step(u, pot, 1e-3)
    assert np.max(np.abs(out.u_next.values - u.values)) <= 1e-13


def test_pinning_validation():
    g3 = TorusGrid((8, 8, 8))
    u3 = random_unit_field(g3, 8)
    pot3 = ScalarField(g3, np.ones(g3.resolution))
    with pytest.raises(ValueError, match="planar"):
        pinning_step(u3, PinningPotential(pot3), 1e-3)
    g2 = TorusGrid((8, 8))
    with pytest.raises(ValueError, match="positive"):
        PinningPotential(ScalarField(g2, np.zeros(g2.resolution)))


def test_hmhf_matches_mbo_bitwise():
    g = TorusGrid((16, 16, 16))
    u = random_unit_field(g, 9)
    a = mbo_step(u, 2e-3)
    b = hmhf_step(u, 2e-3)
    assert np.array_equal(a.u_next.values, b.u_next.values)
    assert np.array_equal(a.v.values, b.v.values)


def test_hmhf_equator_plane_wave_stationary():
    g = TorusGrid((32, 32))
    def f(x, y):
        ph = 2 * np.pi * x
        return np.stack([np.cos(ph), np.sin(ph), np.zeros_like(x)], axis=-1)
    u = sample(g, f)
    out = hmhf_step(u, 1e-3)
    assert np.max(np.abs(out.u_next.values - u.values)) <= 1e-13


def test_hmhf_sphere_energy_monotone():
    g = TorusGrid((32, 32))
    u = random_unit_field(g, 10, codomain=3)
    h = 1e-3
    energies = []
    for _ in range(20):
        u = hmhf_step(u, h).u_next
        energies.append(e_h(u, h))
    assert np.all(np.diff(energies) <= 1e-11)


def test_strong_outer_el_identity():
    g = TorusGrid((24, 24, 24))
    h = 1e-2
    for seed in range(3):
        u = random_unit_field(g, 20 + seed)
        out = mbo_step(u, h)
        u1 = out.u_next
        gdiff = convolve_values(g, (u1.values - u.values) / h, h)
        dh = delta_h(u1, h).values
        vec = gdiff - dh
        proj = vec - u1.values * np.sum(u1.values * vec, axis=-1, keepdims=True)
        assert float(np.max(np.abs(proj))) <= 1e-11


def test_minimizing_movements_ledger_per_step():
    g = TorusGrid((24, 24, 24))
    h = 1e-2
    for seed in range(3):
        u = random_unit_field(g, 30 + seed)
        u1 = mbo_step(u, h).u_next
        assert e_h(u1, h) + metric_term(u1, u, h) <= e_h(u, h) + 1e-11


def test_pointwise_optimality_of_projection():
    g = TorusGrid((16, 16, 16))
    h = 1e-2
    rng = np.random.default_rng(99)
    u = random_unit_field(g, 40)
    u1 = mbo_step(u, h).u_next
    conv = convolve_values(g, u.values, h)
    best = np.sum(u1.values * conv, axis=-1)
    for _ in range(16):
        w = rng.standard_normal(2)
        w /= np.linalg.norm(w)
        cand = conv[..., 0] * w[0] + conv[..., 1] * w[1]
        assert float(np.max(cand - best)) <= 1e-12
