import numpy as np
import pytest

from mopde import morlicz as mo
from mopde import nfunction as nf

UNIT = mo.SpaceTimeGrid(((0.0, 1.0),), (8,), 1.0, 0.125)
UNIT2 = mo.SpaceTimeGrid(((0.0, 1.0), (0.0, 1.0)), (8, 8), 1.0, 0.125)


def families(dim):
    return {
        "quadratic": nf.quadratic(dim),
        "variable": nf.variable_exponent(lambda t, x: 1.5 + x[:, 0] + 0.5 * (t > 0.5), (1.5, 3.0), dim=dim,
                                         breakpoints=(0.5,)),
        "double-phase": nf.double_phase(2, 3, lambda t, x: x[:, 0] ** 2, 1.0, dim=dim),
    }


def random_field(grid, rng, scale=1.0):
    base = mo.DiscreteField.constant(grid, 0.0)
    return base.like(scale * rng.standard_normal(base.values.shape))


# ---- grid ------------------------------------------------------------------


def test_grid_snaps_breakpoints_into_time_nodes():
    g = mo.SpaceTimeGrid(((0, 1),), (4,), 1.0, 0.3, breakpoints=(0.5, 0.6 + 1e-12))
    np.testing.assert_allclose(g.times, [0.0, 0.3, 0.5, 0.6 + 1e-12, 0.9, 1.0])
    assert g.time_weights()[0] == 0.0
    assert g.time_weights().sum() == pytest.approx(1.0)


def test_grid_weights_and_boundary():
    assert UNIT2.node_weights().sum() == pytest.approx(1.0)
    mask = UNIT2.boundary_mask()
    assert mask.sum() == 4 * 8
    d = UNIT2.dist_to_boundary(UNIT2.nodes())
    assert np.all(d[mask] == 0.0) and np.all(d[~mask] > 0.0)


def test_grid_rejects_degenerate_axes():
    with pytest.raises(ValueError):
        mo.SpaceTimeGrid(((0, 1),), (1,), 1.0, 0.1)
    with pytest.raises(ValueError):
        mo.SpaceTimeGrid(((0, 1),), (4,), 0.0, 0.1)


# ---- modular / Luxemburg -----------------------------------------------------


def test_modular_examples():
    M = nf.constant_exponent(2.0)
    zero = mo.DiscreteField.constant(UNIT, 0.0)
    assert mo.modular(M, zero, 0.3) == 0.0
    c = mo.DiscreteField.constant(UNIT, 1.7)
    assert mo.modular(M, c, 1.0) == pytest.approx(1.7**2, rel=1e-14)
    with pytest.raises(ValueError):
        mo.modular(M, c, 0.0)


@pytest.mark.parametrize("name", ["quadratic", "variable", "double-phase"])
def test_modular_halves_under_doubled_lambda(name, rng):
    M = families(1)[name]
    xi = random_field(UNIT, rng, 3.0)
    for lam in (0.5, 1.0, 4.0):
        assert mo.modular(M, xi, 2 * lam) <= 0.5 * mo.modular(M, xi, lam) + 1e-14


def test_luxemburg_closed_form_and_homogeneity():
    for p in (1.5, 2.0, 3.0):
        M = nf.constant_exponent(p)
        c = mo.DiscreteField.constant(UNIT, 2.3)
        assert mo.luxemburg_norm(M, c) == pytest.approx(2.3, rel=1e-8)
        assert mo.luxemburg_norm(M, c.like(2 * c.values)) == pytest.approx(4.6, rel=1e-8)
    assert mo.luxemburg_norm(nf.quadratic(), mo.DiscreteField.constant(UNIT, 0.0)) == 0.0


@pytest.mark.parametrize("name", ["quadratic", "variable", "double-phase"])
def test_unit_ball_and_triangle_inequality(name):
    M = families(2)[name]
    rng = np.random.default_rng(7)
    for _ in range(50):
        a = random_field(UNIT2, rng, rng.uniform(0.01, 10))
        b = random_field(UNIT2, rng, rng.uniform(0.01, 10))
        na, nb = mo.luxemburg_norm(M, a), mo.luxemburg_norm(M, b)
        assert mo.modular(M, a, na) <= 1.0 + 1e-8
        nab = mo.luxemburg_norm(M, a.like(a.values + b.values))
        assert na + nb - nab >= -1e-8 * (na + nb)


def test_modular_distance_properties(rng):
    M = families(1)["variable"]
    a, b = random_field(UNIT, rng), random_field(UNIT, rng)
    assert mo.modular_distance(M, a, a) == 0.0
    assert mo.modular_distance(M, a, b) == pytest.approx(mo.modular_distance(M, b, a), rel=1e-14)
    sweep = mo.modular_distance_sweep(M, a, b)
    assert list(sweep) == [1.0, 0.5, 0.25]
    assert sweep[1.0] <= sweep[0.5] <= sweep[0.25]
    other = mo.DiscreteField.constant(UNIT.with_cells((9,)), 0.0)
    with pytest.raises(mo.GridMismatchError):
        mo.modular_distance(M, a, other)


def test_modular_distance_of_shrinking_perturbation():
    # a smooth field against its shifted copy; the shift shrinks like eps
    M = nf.constant_exponent(2.0)
    grid = mo.SpaceTimeGrid(((0.0, 1.0),), (256,), 1.0, 1 / 16)
    xi = mo.DiscreteField.on_cells(grid, lambda t, x: np.sin(np.pi * x)[:, :1])
    values = []
    for eps in (1 / 8, 1 / 32, 1 / 128):
        eta = mo.DiscreteField.on_cells(grid, lambda t, x: np.sin(np.pi * (x + eps))[:, :1])
        values.append(mo.modular_distance(M, xi, eta))
    assert values[-1] <= 1e-2 * values[0]


# ---- Hölder / Young ------------------------------------------------------------


def test_holder_examples(rng):
    M = nf.quadratic()
    xi = random_field(UNIT, rng)
    zero = xi.like(np.zeros_like(xi.values))
    rep = mo.holder_check(M, xi, zero)
    assert rep.lhs == 0.0 and rep.rhs_I1 == pytest.approx(mo.modular(M, xi))
    rep = mo.holder_check(M, xi, xi)
    assert rep.slack_I1 == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("name", ["quadratic", "variable", "double-phase"])
def test_holder_random_fields(name):
    M = families(2)[name]
    Mstar = nf.conjugate_of(M)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        xi = random_field(UNIT2, rng, rng.uniform(0.1, 5))
        eta = random_field(UNIT2, rng, rng.uniform(0.1, 5))
        rep = mo.holder_check(M, xi, eta, Mstar)
        assert rep.holds()
        assert rep.slack_I1 > 0 and rep.slack_I2 > 0


# ---- tail curve ------------------------------------------------------------------


def test_tail_curve_falls_with_fraction(rng):
    xi = random_field(UNIT2, rng)
    curve = mo.tail_mass_curve(xi)
    vals = [row["value"] for row in curve]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert [row["param"] for row in curve] == [0.2, 0.1, 0.05, 0.02, 0.01]
