import numpy as np
import pytest

from codim2.grid import (ScalarField, TorusGrid, VectorField, dot_integral,
                         integrate, sample, sample_scalar)


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid((7, 8, 8))       # odd
    with pytest.raises(ValueError):
        TorusGrid((8, 8, 6))       # too small
    with pytest.raises(ValueError):
        TorusGrid((8,))            # dimension
    with pytest.raises(ValueError):
        TorusGrid((8, 8), period=(1.0, -1.0))
    g = TorusGrid((16, 32), period=(2.0, 1.0))
    assert g.spacing == (2.0 / 16, 1.0 / 32)
    assert g.num_nodes == 16 * 32
    assert g.volume == 2.0


def test_nodes_are_cell_centered():
    g = TorusGrid((8, 8))
    ax = g.axes()[0]
    assert ax[0] == pytest.approx(0.5 / 8)
    assert ax[-1] == pytest.approx(7.5 / 8)


def test_sample_constant_and_plane_wave_unit():
    g = TorusGrid((16, 16, 16))
    const = sample(g, lambda x, y, z: np.stack(
        [np.ones_like(x), np.zeros_like(x)], axis=-1))
    assert const.unit_flag
    pw = sample(g, lambda x, y, z: np.stack(
        [np.cos(2 * np.pi * x), np.sin(2 * np.pi * x)], axis=-1))
    assert pw.unit_flag


def test_sample_rejects_non_finite():
    g = TorusGrid((8, 8))
    with pytest.raises(ValueError, match="non-finite"):
        sample(g, lambda x, y: np.stack([1.0 / (x - x[0, 0]), y], axis=-1))


def test_integrate_constant_and_modes():
    g = TorusGrid((16, 16, 16))
    one = sample_scalar(g, lambda x, y, z: np.ones_like(x))
    assert integrate(one) == pytest.approx(1.0, abs=1e-15)
    cosx = sample_scalar(g, lambda x, y, z: np.cos(2 * np.pi * x))
    assert integrate(cosx) == pytest.approx(0.0, abs=1e-14)
    # analytic integral of cos^2 over the unit torus is 1/2
    cos2 = sample_scalar(g, lambda x, y, z: np.cos(2 * np.pi * x) ** 2)
    assert integrate(cos2) == pytest.approx(0.5, abs=1e-13)


def test_integrate_linear_and_shift_invariant():
    g = TorusGrid((16, 16))
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(g.resolution)
    f = ScalarField(g, vals)
    g1 = ScalarField(g, 2.5 * vals)
    assert integrate(g1) == pytest.approx(2.5 * integrate(f), rel=1e-13)
    shifted = ScalarField(g, np.roll(vals, (3, 5), axis=(0, 1)))
    assert integrate(shifted) == pytest.approx(integrate(f), rel=1e-13)


def test_dot_integral_constants_and_symmetry():
    g = TorusGrid((16, 16, 16))
    e1 = sample(g, lambda x, y, z: np.stack(
        [np.ones_like(x), np.zeros_like(x)], axis=-1))
    e2 = sample(g, lambda x, y, z: np.stack(
        [np.zeros_like(x), np.ones_like(x)], axis=-1))
    assert dot_integral(e1, e1) == pytest.approx(1.0, abs=1e-15)
    assert dot_integral(e1, e2) == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(1)
    u = VectorField(g, rng.standard_normal(g.resolution + (2,)))
    w = VectorField(g, rng.standard_normal(g.resolution + (2,)))
    assert dot_integral(u, w) == dot_integral(w, u)  # exact as floating sums


def test_dot_integral_mismatch_errors():
    a = VectorField(TorusGrid((8, 8)), np.ones((8, 8, 2)))
    b = VectorField(TorusGrid((16, 16)), np.ones((16, 16, 2)))
    with pytest.raises(ValueError, match="grid"):
        dot_integral(a, b)
    c = VectorField(TorusGrid((8, 8)), np.ones((8, 8, 3)))
    with pytest.raises(ValueError, match="codomain"):
        dot_integral(a, c)


def test_unit_flag_enforced():
    g = TorusGrid((8, 8))
    with pytest.raises(ValueError, match="unit_flag"):
        VectorField(g, 2.0 * np.ones((8, 8, 2)), unit_flag=True)


def test_fields_are_immutable():
    g = TorusGrid((8, 8))
    u = VectorField(g, np.ones((8, 8, 2)))
    with pytest.raises(ValueError):
        u.values[0, 0, 0] = 3.0
