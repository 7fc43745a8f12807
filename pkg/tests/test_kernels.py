"""The compiled and numpy kernels must agree on every input class."""
import numpy as np
import pytest

from mopde import _pykernels, kernels

compiled = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(compiled is None, reason="Cython extension not built")


def _power_sums(rng, n, k):
    coefs = rng.uniform(0.1, 2.0, (n, k))
    exps = rng.uniform(1.2, 5.0, (n, k))
    return coefs, exps


def test_backend_flag_names_active_module():
    assert kernels.BACKEND in ("cython", "python")
    if compiled is None:
        assert kernels.BACKEND == "python"


def test_legendre_matches_power_closed_form(backend):
    s = np.linspace(0.0, 10.0, 101)
    for p in (1.5, 2.0, 3.0, 4.0):
        q = p / (p - 1)
        coefs = np.full((s.size, 1), 1.0 / p)
        exps = np.full((s.size, 1), p)
        value, arg, status = backend.legendre_power_sum(s, coefs, exps)
        assert not status.any()
        np.testing.assert_allclose(value, s**q / q, rtol=1e-12, atol=0)
        np.testing.assert_allclose(arg, s ** (1 / (p - 1)), rtol=1e-9)


def test_legendre_flags_linear_growth(backend):
    s = np.array([0.5, 2.0])
    value, arg, status = backend.legendre_power_sum(s, np.ones((2, 1)), np.ones((2, 1)))
    assert list(status) == [0, 1]
    assert value[0] == 0.0


@needs_compiled
def test_legendre_parity(rng):
    s = rng.uniform(0, 50, 500)
    coefs, exps = _power_sums(rng, 500, 3)
    a = compiled.legendre_power_sum(s, coefs, exps)
    b = _pykernels.legendre_power_sum(s, coefs, exps)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-13)
    np.testing.assert_array_equal(a[2], b[2])


@needs_compiled
@pytest.mark.parametrize("dim", [1, 2])
def test_flux_and_jacobian_parity(rng, dim):
    xi = rng.standard_normal((400, dim))
    xi[:5] = 0.0
    coefs, exps = _power_sums(rng, 400, 2)
    exps[:, 0] = 1.5  # singular branch
    exps[::7, 1] = 2.0
    np.testing.assert_allclose(compiled.radial_power_flux(xi, coefs, exps),
                               _pykernels.radial_power_flux(xi, coefs, exps), rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(compiled.radial_power_jacobian(xi, coefs, exps, 1e-8),
                               _pykernels.radial_power_jacobian(xi, coefs, exps, 1e-8), rtol=1e-12, atol=1e-12)


def test_flux_zero_at_origin_and_jacobian_identity_for_quadratic(backend):
    xi = np.zeros((3, 2))
    c = np.ones((3, 1))
    assert not backend.radial_power_flux(xi, c, np.full((3, 1), 3.0)).any()
    J = backend.radial_power_jacobian(xi, c, np.full((3, 1), 2.0), 0.0)
    np.testing.assert_array_equal(J, np.broadcast_to(np.eye(2), (3, 2, 2)))


def test_jacobian_matches_finite_difference(backend, rng):
    xi = rng.standard_normal((50, 2)) + 0.5
    coefs, exps = _power_sums(rng, 50, 2)
    J = backend.radial_power_jacobian(xi, coefs, exps, 0.0)
    step = 1e-6
    for b in range(2):
        e = np.zeros(2)
        e[b] = step
        fd = (backend.radial_power_flux(xi + e, coefs, exps) - backend.radial_power_flux(xi - e, coefs, exps)) / (2 * step)
        np.testing.assert_allclose(J[:, :, b], fd, rtol=1e-6, atol=1e-8)
