"""Numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and results match the Cython module; these are used when the
extension is not built or when ``MOPDE_PURE_PYTHON`` is set.
"""
import numpy as np

GROWTH_GUARD = 1e150


def _dpow(t, coefs, exps):
    t = t[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        term = coefs * exps * np.where(t > 0.0, t, 1.0) ** (exps - 1.0)
    term = np.where((t == 0.0) & (exps != 1.0), 0.0, term)
    return term.sum(axis=1)


def legendre_power_sum(s, coefs, exps, tol=1e-12, max_iter=400):
    s = np.ascontiguousarray(s, dtype=np.float64)
    coefs = np.ascontiguousarray(coefs, dtype=np.float64)
    exps = np.ascontiguousarray(exps, dtype=np.float64)
    n = s.shape[0]
    value = np.zeros(n)
    arg = np.zeros(n)
    status = np.zeros(n, dtype=np.int8)

    active = s > 0.0
    active &= _dpow(np.zeros(n), coefs, exps) < s
    scale = np.maximum(s, 1.0)
    lo = np.zeros(n)
    hi = np.ones(n)
    growing = active.copy()
    while growing.any():
        d = _dpow(hi, coefs, exps)
        growing &= d < s
        lo = np.where(growing, hi, lo)
        hi = np.where(growing, 2.0 * hi, hi)
        over = growing & (hi > GROWTH_GUARD)
        status[over] = 1
        growing &= ~over
    active &= status == 0

    mid = 0.5 * (lo + hi)
    running = active.copy()
    for _ in range(max_iter):
        if not running.any():
            break
        new_mid = 0.5 * (lo + hi)
        mid = np.where(running, new_mid, mid)
        d = _dpow(mid, coefs, exps)
        done = np.abs(d - s) <= tol * scale
        lo = np.where(running & ~done & (d < s), mid, lo)
        hi = np.where(running & ~done & (d >= s), mid, hi)
        done |= hi - lo <= 2.2e-16 * hi
        running &= ~done

    m = (coefs * mid[:, None] ** exps).sum(axis=1)
    v = s * mid - m
    value = np.where(active, np.maximum(v, 0.0), 0.0)
    arg = np.where(active, mid, 0.0)
    return value, arg, status


def radial_power_flux(xi, coefs, exps):
    xi = np.asarray(xi, dtype=np.float64)
    r = np.sqrt((xi * xi).sum(axis=1))
    safe = np.where(r > 0.0, r, 1.0)
    g = (coefs * safe[:, None] ** (exps - 2.0)).sum(axis=1)
    g = np.where(r > 0.0, g, 0.0)
    return g[:, None] * xi


def radial_power_jacobian(xi, coefs, exps, delta):
    xi = np.asarray(xi, dtype=np.float64)
    n, dim = xi.shape
    r2 = (xi * xi).sum(axis=1)[:, None]
    rk2 = np.where(exps < 2.0, r2 + delta * delta, r2)
    safe = np.where(rk2 > 0.0, rk2, 1.0)
    g = coefs * safe ** (0.5 * (exps - 2.0))
    h = g * (exps - 2.0) / safe
    zero = rk2 == 0.0
    g = np.where(zero, np.where(exps == 2.0, coefs, 0.0), g)
    h = np.where(zero, 0.0, h)
    g = g.sum(axis=1)
    h = h.sum(axis=1)
    eye = np.eye(dim)[None, :, :]
    return g[:, None, None] * eye + h[:, None, None] * xi[:, :, None] * xi[:, None, :]
