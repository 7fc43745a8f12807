# cython: language_level=3
"""Compiled inner loops: Legendre transforms of power sums and radial power fluxes."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, fabs, sqrt

cnp.import_array()

cdef double GROWTH_GUARD = 1e150


cdef inline double _dpow(double t, double c, double e) nogil:
    # c * e * t**(e-1), with 0**0 == 1
    if e == 1.0:
        return c
    if t == 0.0:
        return 0.0
    return c * e * pow(t, e - 1.0)


def legendre_power_sum(const double[::1] s, const double[:, ::1] coefs, const double[:, ::1] exps,
                       double tol=1e-12, int max_iter=400):
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t nk = coefs.shape[1]
    cdef Py_ssize_t i, k
    cdef int it
    cdef double si, lo, hi, mid, d, t, m, scale
    value_arr = np.zeros(n, dtype=np.float64)
    arg_arr = np.zeros(n, dtype=np.float64)
    status_arr = np.zeros(n, dtype=np.int8)
    cdef double[::1] value = value_arr
    cdef double[::1] arg = arg_arr
    cdef cnp.int8_t[::1] status = status_arr

    with nogil:
        for i in range(n):
            si = s[i]
            if si <= 0.0:
                continue
            d = 0.0
            for k in range(nk):
                d += _dpow(0.0, coefs[i, k], exps[i, k])
            if d >= si:
                continue
            scale = si if si > 1.0 else 1.0
            lo = 0.0
            hi = 1.0
            while True:
                d = 0.0
                for k in range(nk):
                    d += _dpow(hi, coefs[i, k], exps[i, k])
                if d >= si:
                    break
                lo = hi
                hi = 2.0 * hi
                if hi > GROWTH_GUARD:
                    status[i] = 1
                    break
            if status[i] != 0:
                continue
            mid = 0.5 * (lo + hi)
            for it in range(max_iter):
                mid = 0.5 * (lo + hi)
                d = 0.0
                for k in range(nk):
                    d += _dpow(mid, coefs[i, k], exps[i, k])
                if fabs(d - si) <= tol * scale:
                    break
                if d < si:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 2.2e-16 * hi:
                    break
            t = mid
            m = 0.0
            for k in range(nk):
                m += coefs[i, k] * pow(t, exps[i, k])
            d = si * t - m
            value[i] = d if d > 0.0 else 0.0
            arg[i] = t
    return value_arr, arg_arr, status_arr


def radial_power_flux(const double[:, ::1] xi, const double[:, ::1] coefs, const double[:, ::1] exps):
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t dim = xi.shape[1]
    cdef Py_ssize_t nk = coefs.shape[1]
    cdef Py_ssize_t i, k, a
    cdef double r2, r, g
    out_arr = np.zeros((n, dim), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            r2 = 0.0
            for a in range(dim):
                r2 += xi[i, a] * xi[i, a]
            if r2 == 0.0:
                continue
            r = sqrt(r2)
            g = 0.0
            for k in range(nk):
                g += coefs[i, k] * pow(r, exps[i, k] - 2.0)
            for a in range(dim):
                out[i, a] = g * xi[i, a]
    return out_arr


def radial_power_jacobian(const double[:, ::1] xi, const double[:, ::1] coefs, const double[:, ::1] exps,
                          double delta):
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t dim = xi.shape[1]
    cdef Py_ssize_t nk = coefs.shape[1]
    cdef Py_ssize_t i, k, a, b
    cdef double r2, rk2, e, c, g, h
    out_arr = np.zeros((n, dim, dim), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for i in range(n):
            r2 = 0.0
            for a in range(dim):
                r2 += xi[i, a] * xi[i, a]
            for k in range(nk):
                c = coefs[i, k]
                e = exps[i, k]
                if c == 0.0:
                    continue
                if e < 2.0:
                    rk2 = r2 + delta * delta
                else:
                    rk2 = r2
                if rk2 == 0.0:
                    if e == 2.0:
                        for a in range(dim):
                            out[i, a, a] += c
                    continue
                g = c * pow(rk2, 0.5 * (e - 2.0))
                h = g * (e - 2.0) / rk2
                for a in range(dim):
                    out[i, a, a] += g
                    for b in range(dim):
                        out[i, a, b] += h * xi[i, a] * xi[i, b]
    return out_arr
