import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mopde import nfunction as nf

YOUNG_FAMILIES = {
    "power1.5": lambda: nf.power_young(1.5),
    "power3": lambda: nf.power_young(3.0),
    "sum": lambda: nf.power_sum_young([(1.0, 4.0), (1.0, 2.0)]),
    "max": lambda: nf.max_power_young(1.5, 3.0),
    "envelope": lambda: nf.min_power_envelope_young(1.5, 3.0),
}


# ---- conjugate_young -------------------------------------------------------


def test_conjugate_examples():
    assert nf.conjugate_young(nf.power_young(2.0), 3.0) == pytest.approx(4.5, rel=1e-12)
    assert nf.conjugate_young(nf.power_young(4.0), 0.0) == 0.0
    assert nf.conjugate_young(nf.power_young(4.0), 8.0) == pytest.approx(8 ** (4 / 3) * 0.75, rel=1e-12)


def test_conjugate_without_derivative_uses_golden_section():
    base = nf.power_young(4.0)
    bare = nf.YoungFunction("s^4/4 (no derivative)", base.eval)
    s = np.array([0.0, 0.5, 3.0, 8.0])
    np.testing.assert_allclose(nf.conjugate_young(bare, s), nf.conjugate_young(base, s), rtol=1e-9)


def test_conjugate_with_derivative_only():
    base = nf.max_power_young(2.0, 3.0)
    s = np.linspace(0, 20, 41)
    # max(s^2, s^3) conjugate: s^2 branch below slope 2, s^3 branch above slope 3, kink in between
    expected = np.where(s <= 2, s**2 / 4, np.where(s >= 3, 2 * (s / 3) ** 1.5, s - 1.0))
    np.testing.assert_allclose(nf.conjugate_young(base, s), expected, rtol=1e-10, atol=1e-14)


def test_growth_mismatch():
    with pytest.raises(nf.GrowthMismatchError):
        nf.conjugate_young(nf.linear_young(), 2.0)
    assert nf.conjugate_young(nf.linear_young(), 0.5) == 0.0


def test_negative_argument_rejected():
    with pytest.raises(ValueError):
        nf.conjugate_young(nf.power_young(2.0), -1.0)


def test_biconjugate_examples():
    assert nf.biconjugate_young(nf.power_young(2.0), 5.0) == pytest.approx(12.5, rel=1e-10)
    assert nf.biconjugate_young(nf.power_young(3.0), 2.0) == pytest.approx(8 / 3, rel=1e-6)
    assert nf.biconjugate_young(nf.power_young(3.0), 0.0) == 0.0


@pytest.mark.parametrize("name", sorted(YOUNG_FAMILIES))
def test_biconjugate_fixed_point(name):
    m = YOUNG_FAMILIES[name]()
    s = np.geomspace(1e-2, 1e2, 60)
    np.testing.assert_allclose(nf.biconjugate_young(m, s), m(s), rtol=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(YOUNG_FAMILIES)), st.floats(0, 50), st.floats(0, 50))
def test_fenchel_young_inequality(name, s, t):
    m = YOUNG_FAMILIES[name]()
    lhs = s * t
    rhs = float(m(np.array([s]))[0]) + nf.conjugate_young(m, t)
    assert lhs <= rhs + 1e-10 * (1 + abs(lhs))


def test_conjugate_order_reversal():
    lo, hi = nf.min_power_envelope_young(1.5, 3.0), nf.max_power_young(1.5, 3.0)
    s = np.geomspace(1e-3, 1e2, 100)
    assert np.all(lo(s) <= hi(s))
    assert np.all(nf.conjugate_young(hi, s) <= nf.conjugate_young(lo, s) + 1e-12)


# ---- gradient_young ---------------------------------------------------------


def test_gradient_examples():
    np.testing.assert_allclose(nf.gradient_young(nf.power_young(2.0), [3.0, 4.0]), [3.0, 4.0])
    np.testing.assert_array_equal(nf.gradient_young(nf.power_young(2.0), [0.0, 0.0]), [0.0, 0.0])
    m = nf.power_young(4.0)
    g = nf.gradient_young(m, [1.0, 0.0])
    np.testing.assert_allclose(g, [1.0, 0.0])
    res = g @ np.array([1.0, 0.0]) - m(1.0) - nf.conjugate_young(m, np.linalg.norm(g))
    assert abs(res) <= 1e-8


def test_gradient_finite_difference_fallback():
    m = nf.YoungFunction("s^3", lambda s: np.asarray(s) ** 3)
    np.testing.assert_allclose(nf.gradient_young(m, [[2.0, 0.0]]), [[12.0, 0.0]], rtol=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(YOUNG_FAMILIES)), st.floats(1e-2, 1e2), st.floats(0, 2 * np.pi))
def test_fenchel_equality_at_gradient(name, r, angle):
    m = YOUNG_FAMILIES[name]()
    xi = r * np.array([np.cos(angle), np.sin(angle)])
    g = nf.gradient_young(m, xi)
    lhs = float(g @ xi)
    res = lhs - float(m(r)) - nf.conjugate_young(m, float(np.linalg.norm(g)))
    assert abs(res) <= 1e-8 * max(abs(lhs), 1e-300)


# ---- N-functions ------------------------------------------------------------


def test_conjugate_nfunction_examples():
    M = nf.quadratic(dim=2)
    assert nf.conjugate_nfunction(M, 0.3, [0.5, 0.5], [3.0, 4.0]) == pytest.approx(12.5, rel=1e-12)
    assert nf.conjugate_nfunction(M, 0.3, [0.5, 0.5], [0.0, 0.0]) == 0.0
    P = nf.young_nfunction(nf.power_young(4.0), dim=2)
    assert nf.conjugate_nfunction(P, 0.0, [0.1, 0.2], [8.0, 0.0]) == pytest.approx(12.0, rel=1e-12)


def test_conjugate_of_variable_exponent_is_pointwise():
    M = nf.variable_exponent(lambda t, x: 2.0 + x[:, 0], (2.0, 3.0))
    x = np.array([[0.0], [1.0]])
    eta = np.array([[2.0], [2.0]])
    got = nf.conjugate_nfunction(M, np.zeros(2), x, eta)
    # |xi|^p conjugate: (p-1) (s/p)^(p/(p-1))
    expected = [(1) * (2 / 2) ** 2, 2 * (2 / 3) ** 1.5]
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_anisotropic_conjugate_is_lower_bound_and_close():
    M = nf.anisotropic_power([2.0, 4.0])
    eta = np.array([3.0, 8.0])
    value = nf.conjugate_nfunction(M, 0.0, [0.5, 0.5], eta)
    exact = 3.0**2 / 2 + 8.0 ** (4 / 3) * 0.75
    assert value <= exact + 1e-12
    assert value == pytest.approx(exact, rel=1e-9)
    probe = np.array([2.9, 1.9])
    assert value >= probe @ eta - M(0.0, [0.5, 0.5], probe)[0]


def test_anisotropic_nonconvergence_reports_lower_bound():
    M = nf.anisotropic_power([2.0, 4.0])
    with pytest.raises(nf.ConjugateConvergenceError) as err:
        nf.conjugate_nfunction(M, 0.0, [0.5, 0.5], [3.0, 8.0], max_sweeps=0)
    assert err.value.best_lower_bound >= 0.0


def test_young_property_examples():
    assert nf.check_young_properties(nf.power_young(2.0)).passed
    rep = nf.check_young_properties(nf.linear_young())
    assert rep.failures() == ["superlinear_proxy"]
    rep = nf.check_young_properties(nf.power_sum_young([(1.0, 1.1)]))
    assert rep.passed
    assert rep.info["ratio_growth"] == pytest.approx((1e3 / 1e-3) ** 0.1, rel=1e-12)


def test_young_checker_catches_nonconvex():
    m = nf.YoungFunction("sqrt", lambda s: np.sqrt(np.asarray(s, dtype=float)))
    rep = nf.check_young_properties(m)
    assert not rep.entries["Y2"].passed and not rep.entries["N1"].passed


def test_nfunction_property_examples():
    assert nf.check_nfunction_properties(nf.constant_exponent(2.0)).passed
    dp = nf.double_phase(2, 3, lambda t, x: np.ones(np.shape(t)), 1.0)
    rep = nf.check_nfunction_properties(dp)
    assert rep.passed
    assert rep.info["lower"] == dp.lower.name and rep.info["upper"] == dp.upper.name
    odd = nf.check_nfunction_properties(nf.odd_counterexample())
    assert not odd.entries["M1"].passed


def test_variable_exponent_sandwich_2d():
    M = nf.variable_exponent(lambda t, x: 1.5 + x[:, 0] * x[:, 1] + 0.5 * (t > 0.5), (1.5, 3.0), dim=2,
                             breakpoints=(0.5,))
    spec = nf.SampleSpec(domain=((0, 1), (0, 1)))
    assert nf.check_nfunction_properties(M, spec).passed


def test_family_invariants_rejected():
    with pytest.raises(ValueError):
        nf.variable_exponent(lambda t, x: t, (1.0, 2.0))
    with pytest.raises(ValueError):
        nf.variable_exponent(lambda t, x: t, (2.0, 3.0), breakpoints=(0.5, 0.2))
    with pytest.raises(ValueError):
        nf.double_phase(3, 2, lambda t, x: t, 1.0)
    dp = nf.double_phase(2, 3, lambda t, x: -np.ones(np.shape(t)), 1.0)
    with pytest.raises(ValueError):
        dp(0.0, [0.5], [1.0])


# ---- Theta condition -----------------------------------------------------------


def test_theta_ratio_is_one_without_x_dependence():
    M = nf.variable_exponent(lambda t, x: np.where(t <= 0.5, 2.0, 4.0), (2.0, 4.0), breakpoints=(0.5,))
    rep = nf.check_theta_condition(M, [0.25, 0.125, 0.0625], times=[0.25, 0.5, 0.75])
    for d in rep.deltas:
        assert rep.max_ratio[d] == pytest.approx(1.0, abs=1e-9)
    assert rep.bounded


def test_theta_ratio_lipschitz_profile_bounded():
    # Lipschitz exponent: the ratio shrinks as the cubes refine
    M = nf.variable_exponent(lambda t, x: 2.0 + np.abs(x[:, 0] - 0.5), (2.0, 2.5))
    rep = nf.check_theta_condition(M, [0.25, 0.125, 0.0625, 0.03125])
    seq = [rep.max_ratio[d] for d in rep.deltas]
    assert all(r >= 1.0 for r in seq)
    assert all(b < a for a, b in zip(seq, seq[1:]))
    assert rep.bounded


def test_theta_degenerate_infimum():
    lin = nf.power_young(2.0)
    M = nf.NFunction("vanishing", lambda t, x, xi: np.where(x[:, 0] < 0.3, 0.0, 1.0) * np.sum(xi**2, axis=1),
                     lin, lin, radial=lambda t, x, r: np.where(x[:, 0] < 0.3, 0.0, 1.0) * r**2)
    with pytest.raises(nf.ThetaDegenerateError):
        nf.check_theta_condition(M, [0.25])


def test_lower_convex_envelope_of_convex_data_is_identity():
    r = np.linspace(0, 3, 31)
    np.testing.assert_allclose(nf.lower_convex_envelope(r, r**2), r**2)
    y = np.minimum(r, 1.0) ** 2
    env = nf.lower_convex_envelope(r, y)
    assert np.all(env <= y + 1e-15)
