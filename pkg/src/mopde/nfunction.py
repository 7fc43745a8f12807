"""Young functions, N-functions and their convex conjugates.

A :class:`YoungFunction` is a scalar growth law ``m(s)`` on ``[0, inf)``;
an :class:`NFunction` is a space-time dependent law ``M(t, x, xi)``
sandwiched between two Young functions.  Conjugates are computed by
monotone bracketing of the stationarity condition ``m'(t) = s`` when a
derivative is available, and by golden-section search otherwise.

All evaluation maps are vectorized: ``t`` has shape ``(n,)``, ``x`` and
``xi`` have shape ``(n, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import kernels

GROWTH_GUARD = 1e150
DERIVATIVE_TOL = 1e-12


class GrowthMismatchError(ValueError):
    """The conjugate supremum is not attained below the overflow guard."""


class ConjugateConvergenceError(RuntimeError):
    """Anisotropic conjugate ascent did not settle; carries the best lower bound."""

    def __init__(self, message, best_lower_bound):
        super().__init__(message)
        self.best_lower_bound = best_lower_bound


class ThetaDegenerateError(ValueError):
    """The biconjugate of a cube infimum vanishes away from the origin."""


# --------------------------------------------------------------------------
# Young functions
# --------------------------------------------------------------------------


@dataclass(eq=False)
class YoungFunction:
    """Scalar growth law ``m(s)`` with optional first and second derivatives.

    ``terms`` holds a power-sum representation ``sum(c * s**e)`` when one
    exists; conjugates of such functions go through the compiled kernel.
    """

    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    second_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)
    terms: Optional[tuple] = None

    def __call__(self, s):
        return self.eval(np.asarray(s, dtype=float))

    def __repr__(self):
        return f"YoungFunction({self.name!r})"


def _pow(s, e):
    s = np.asarray(s, dtype=float)
    return np.where(s > 0.0, np.abs(s) ** e, 0.0) if e > 0 else np.ones_like(s)


def power_sum_young(terms: Sequence[tuple], name: Optional[str] = None) -> YoungFunction:
    """``m(s) = sum(c * s**e)`` for ``(c, e)`` pairs with ``e >= 1``."""
    terms = tuple((float(c), float(e)) for c, e in terms)
    if any(e < 1.0 for _, e in terms):
        raise ValueError("power-sum exponents must be >= 1")

    def m(s):
        s = np.asarray(s, dtype=float)
        return sum(c * _pow(s, e) for c, e in terms)

    def dm(s):
        s = np.asarray(s, dtype=float)
        return sum(c * e * _pow(s, e - 1.0) for c, e in terms)

    def d2m(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, e in terms:
            if e == 1.0:
                continue
            if e < 2.0:
                with np.errstate(divide="ignore"):
                    out = out + np.where(s > 0, c * e * (e - 1.0) * np.abs(s) ** (e - 2.0), np.inf)
            else:
                out = out + c * e * (e - 1.0) * _pow(s, e - 2.0)
        return out

    if name is None:
        name = " + ".join(f"{c:g}*s^{e:g}" for c, e in terms)
    return YoungFunction(name, m, dm, d2m, params={"terms": terms}, terms=terms)


def power_young(p: float, scale: Optional[float] = None) -> YoungFunction:
    """``m(s) = scale * s**p``; the default scale is ``1/p``."""
    if scale is None:
        scale = 1.0 / p
    f = power_sum_young([(scale, p)], name=f"{scale:g}*s^{p:g}")
    f.params.update(p=p, scale=scale)
    return f


def linear_young() -> YoungFunction:
    """``m(s) = s``; convex but not superlinear, used as a counterexample."""
    f = power_sum_young([(1.0, 1.0)], name="s")
    return f


def max_power_young(a: float, b: float) -> YoungFunction:
    """``max(s**a, s**b)`` for ``1 < a <= b``: ``s**b`` above 1, ``s**a`` below."""
    if a == b:
        return power_young(a, 1.0)

    def m(s):
        s = np.asarray(s, dtype=float)
        return np.maximum(_pow(s, a), _pow(s, b))

    def dm(s):
        s = np.asarray(s, dtype=float)
        return np.where(s < 1.0, a * _pow(s, a - 1.0), b * _pow(s, b - 1.0))

    return YoungFunction(
        f"max(s^{a:g}, s^{b:g})",
        m,
        dm,
        params={"a": a, "b": b},
    )


def min_power_envelope_young(a: float, b: float) -> YoungFunction:
    """Convex envelope of ``min(s**a, s**b)`` for ``1 < a <= b``.

    ``min`` itself has a concave kink at ``s = 1``; its envelope follows
    ``s**b`` up to ``s1``, the common tangent up to ``s2`` and ``s**a`` after.
    """
    if a == b:
        return power_young(a, 1.0)

    # common tangent: b s1^(b-1) = a s2^(a-1) = k and s1^b + k (s2 - s1) = s2^a
    def s2_of(s1):
        k = b * s1 ** (b - 1.0)
        return (k / a) ** (1.0 / (a - 1.0))

    def gap(s1):
        k = b * s1 ** (b - 1.0)
        s2 = s2_of(s1)
        return s1**b + k * (s2 - s1) - s2**a

    s1 = brentq(gap, 1e-12, 1.0, xtol=1e-15)
    s2 = s2_of(s1)
    k = b * s1 ** (b - 1.0)
    y1 = s1**b

    def m(s):
        s = np.asarray(s, dtype=float)
        return np.where(s <= s1, _pow(s, b), np.where(s >= s2, _pow(s, a), y1 + k * (s - s1)))

    def dm(s):
        s = np.asarray(s, dtype=float)
        return np.where(s <= s1, b * _pow(s, b - 1.0), np.where(s >= s2, a * _pow(s, a - 1.0), k))

    return YoungFunction(
        f"env(min(s^{a:g}, s^{b:g}))", m, dm, params={"a": a, "b": b, "s1": s1, "s2": s2}
    )


def conjugate_function(m: YoungFunction) -> YoungFunction:
    """``m*`` as a Young function; its derivative is the maximizer of ``s t - m(t)``."""

    def ev(s):
        return conjugate_young(m, s)

    def dev(s):
        return conjugate_young(m, s, return_argmax=True)[1]

    return YoungFunction(f"({m.name})*", ev, dev, params={"base": m})


# --------------------------------------------------------------------------
# Legendre transforms
# --------------------------------------------------------------------------


def _bisect_stationary(fun, dfun, s, tol=DERIVATIVE_TOL, max_iter=400):
    """Vectorized ``sup_t (s t - fun(t))`` by bisection on ``dfun(t) = s``.

    ``fun`` and ``dfun`` map an array aligned with ``s`` to an array of the
    same shape, so per-sample parameters can be captured in closures.
    """
    n = s.shape[0]
    zeros = np.zeros(n)
    active = (s > 0.0) & (dfun(zeros) < s)
    scale = np.maximum(s, 1.0)
    lo = np.zeros(n)
    hi = np.ones(n)
    growing = active.copy()
    while growing.any():
        d = dfun(hi)
        growing &= d < s
        lo = np.where(growing, hi, lo)
        hi = np.where(growing, 2.0 * hi, hi)
        if (growing & (hi > GROWTH_GUARD)).any():
            raise GrowthMismatchError(
                "conjugate bracket exceeded the overflow guard; the growth law is not "
                "superlinear enough at the queried argument"
            )
    mid = 0.5 * (lo + hi)
    running = active.copy()
    for _ in range(max_iter):
        if not running.any():
            break
        mid = np.where(running, 0.5 * (lo + hi), mid)
        d = dfun(mid)
        done = np.abs(d - s) <= tol * scale
        step_lo = running & ~done & (d < s)
        step_hi = running & ~done & (d >= s)
        lo = np.where(step_lo, mid, lo)
        hi = np.where(step_hi, mid, hi)
        done |= hi - lo <= 2.2e-16 * hi
        running &= ~done
    t = np.where(active, mid, 0.0)
    value = np.where(active, np.maximum(s * t - fun(t), 0.0), 0.0)
    return value, t


_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_stationary(fun, s, max_iter=300):
    """Vectorized ``sup_t (s t - fun(t))`` by golden-section search."""
    n = s.shape[0]
    g = lambda t: s * t - fun(t)
    hi = np.ones(n)
    growing = s > 0.0
    while growing.any():
        growing &= g(2.0 * hi) >= g(hi)
        hi = np.where(growing, 2.0 * hi, hi)
        if (growing & (hi > GROWTH_GUARD)).any():
            raise GrowthMismatchError("golden-section bracket exceeded the overflow guard")
    a = np.zeros(n)
    b = 2.0 * hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(max_iter):
        left = gc >= gd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        d_new = np.where(left, c, a + _INV_PHI * (b - a))
        c_new = np.where(left, b - _INV_PHI * (b - a), d)
        gc, gd = np.where(left, g(c_new), gd), np.where(left, gc, g(d_new))
        c, d = c_new, d_new
        if np.all(b - a <= 1e-13 * np.maximum(b, 1e-300)):
            break
    t = 0.5 * (a + b)
    value = np.maximum(g(t), 0.0)
    value = np.where(s > 0.0, value, 0.0)
    return value, np.where(s > 0.0, t, 0.0)


def _legendre_terms(s, coefs, exps):
    value, arg, status = kernels.legendre_power_sum(
        np.ascontiguousarray(s, dtype=float),
        np.ascontiguousarray(coefs, dtype=float),
        np.ascontiguousarray(exps, dtype=float),
    )
    if np.any(status):
        raise GrowthMismatchError(
            "conjugate bracket exceeded the overflow guard; the growth law is not "
            "superlinear enough at the queried argument"
        )
    return value, arg


def conjugate_young(m: YoungFunction, s, return_argmax: bool = False):
    """Convex conjugate ``m*(s) = sup_{t >= 0} (s t - m(t))``.

    Power sums use the compiled bisection kernel, functions with a
    derivative use vectorized bisection on ``m'(t) = s``, and everything
    else falls back to golden-section search on a doubling bracket.
    """
    s_arr = np.asarray(s, dtype=float)
    shape = s_arr.shape
    flat = s_arr.reshape(-1)
    if np.any(flat < 0):
        raise ValueError("conjugate_young expects s >= 0")
    if m.terms is not None:
        coefs = np.array([[c for c, _ in m.terms]] * flat.size).reshape(flat.size, -1)
        exps = np.array([[e for _, e in m.terms]] * flat.size).reshape(flat.size, -1)
        value, arg = _legendre_terms(flat, coefs, exps)
    elif m.derivative is not None:
        value, arg = _bisect_stationary(m, m.derivative, flat)
    else:
        value, arg = _golden_stationary(m, flat)
    value = value.reshape(shape)
    arg = arg.reshape(shape)
    if shape == ():
        value, arg = float(value), float(arg)
    return (value, arg) if return_argmax else value


def biconjugate_young(m: YoungFunction, s):
    """Second conjugate ``m**``; equals ``m`` for convex ``m``."""
    return conjugate_young(conjugate_function(m), s)


def gradient_young(m: YoungFunction, xi):
    """``grad_xi m(|xi|) = m'(|xi|) xi / |xi|``, zero at ``xi = 0``."""
    xi = np.asarray(xi, dtype=float)
    r = np.sqrt(np.sum(xi * xi, axis=-1))
    if m.derivative is not None:
        dm = m.derivative(r)
    else:
        step = 1e-6 * np.maximum(r, 1.0)
        dm = (m(r + step) - m(np.maximum(r - step, 0.0))) / (r + step - np.maximum(r - step, 0.0))
    safe = np.where(r > 0.0, r, 1.0)
    g = np.where(r > 0.0, dm / safe, 0.0)
    return g[..., None] * xi


# --------------------------------------------------------------------------
# N-functions
# --------------------------------------------------------------------------


def as_samples(t, x, xi, dim):
    """Broadcast ``(t, x, xi)`` to arrays of shapes ``(n,)``, ``(n, d)``, ``(n, d)``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.ndim == 1:
        xi = xi.reshape(-1, dim) if xi.size != dim else xi[None, :]
    n = xi.shape[0]
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = np.full((n, dim), float(x))
    elif x.ndim == 1:
        x = np.broadcast_to(x.reshape(-1, dim) if x.size != dim else x[None, :], (n, dim))
    t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1), (n,)) if np.ndim(t) else np.full(n, float(t))
    return np.asarray(t, dtype=float), np.asarray(x, dtype=float), xi


@dataclass(eq=False)
class NFunction:
    """Growth law ``M(t, x, xi)`` with sandwich bounds ``lower(|xi|) <= M <= upper(|xi|)``.

    Isotropic laws may supply ``radial(t, x, r)`` and its ``r``-derivative;
    ``power_terms(t, x)`` returns per-sample ``(coefs, exps)`` when
    ``M = sum(c * |xi|**e)``, enabling the compiled conjugate kernel.
    """

    name: str
    eval: Callable
    lower: YoungFunction
    upper: YoungFunction
    dim: int = 1
    isotropic: bool = True
    radial: Optional[Callable] = None
    radial_derivative: Optional[Callable] = None
    power_terms: Optional[Callable] = None
    breakpoints: tuple = ()
    params: dict = field(default_factory=dict)

    def __call__(self, t, x, xi):
        t, x, xi = as_samples(t, x, xi, self.dim)
        return self.eval(t, x, xi)

    def radial_eval(self, t, x, r):
        r = np.asarray(r, dtype=float)
        if self.radial is not None:
            return self.radial(t, x, r)
        e1 = np.zeros((r.shape[0], self.dim))
        e1[:, 0] = r
        return self.eval(t, x, e1)

    def __repr__(self):
        return f"NFunction({self.name!r}, dim={self.dim})"


def _norm(xi):
    return np.sqrt(np.sum(xi * xi, axis=-1))


def _check_breakpoints(breakpoints):
    bp = tuple(float(b) for b in breakpoints)
    if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
        raise ValueError("breakpoints must be strictly increasing")
    return bp


def radial_power_nfunction(name, terms_fn, lower, upper, dim=1, breakpoints=(), params=None):
    """Isotropic ``M = sum_k c_k(t,x) |xi|**e_k(t,x)`` from a per-sample terms map."""

    def radial(t, x, r):
        c, e = terms_fn(t, x)
        r = np.asarray(r, dtype=float)[:, None]
        return np.sum(c * np.where(r > 0, np.abs(r) ** e, 0.0), axis=1)

    def radial_derivative(t, x, r):
        c, e = terms_fn(t, x)
        r = np.asarray(r, dtype=float)[:, None]
        safe = np.where(r > 0, r, 1.0)
        return np.sum(np.where(r > 0, c * e * safe ** (e - 1.0), np.where(e == 1.0, c, 0.0)), axis=1)

    def ev(t, x, xi):
        return radial(t, x, _norm(xi))

    return NFunction(
        name,
        ev,
        lower,
        upper,
        dim=dim,
        isotropic=True,
        radial=radial,
        radial_derivative=radial_derivative,
        power_terms=terms_fn,
        breakpoints=_check_breakpoints(breakpoints),
        params=dict(params or {}),
    )


def variable_exponent(exponent, p_bounds, dim=1, breakpoints=()) -> NFunction:
    """``M(t, x, xi) = |xi|**p(t, x)`` with ``1 < p_minus <= p <= p_plus``.

    ``exponent`` maps ``(t, x)`` arrays to exponent values; ``breakpoints``
    lists the times at which it jumps.
    """
    p_minus, p_plus = map(float, p_bounds)
    if not 1.0 < p_minus <= p_plus < np.inf:
        raise ValueError("variable exponent requires 1 < p_minus <= p_plus < inf")

    def terms(t, x):
        p = np.broadcast_to(np.asarray(exponent(t, x), dtype=float), np.shape(t)).reshape(-1, 1)
        return np.ones_like(p), p

    return radial_power_nfunction(
        f"|xi|^p(t,x) [{p_minus:g}, {p_plus:g}]",
        terms,
        min_power_envelope_young(p_minus, p_plus),
        max_power_young(p_minus, p_plus),
        dim=dim,
        breakpoints=breakpoints,
        params={"family": "variable-exponent", "exponent": exponent, "p_minus": p_minus, "p_plus": p_plus},
    )


def constant_exponent(p: float, dim=1) -> NFunction:
    return variable_exponent(lambda t, x: np.full(np.shape(t), float(p)), (p, p), dim=dim)


def double_phase(p, q, weight, weight_max, dim=1, breakpoints=()) -> NFunction:
    """``M = |xi|**p + a(t, x) |xi|**q`` with ``1 < p <= q`` and ``0 <= a <= weight_max``."""
    p, q = float(p), float(q)
    if not 1.0 < p <= q:
        raise ValueError("double phase requires 1 < p <= q")

    def terms(t, x):
        a = np.broadcast_to(np.asarray(weight(t, x), dtype=float), np.shape(t))
        if np.any(a < 0):
            raise ValueError("double-phase weight must be nonnegative")
        n = a.shape[0]
        c = np.stack([np.ones(n), a], axis=1)
        e = np.tile([p, q], (n, 1))
        return c, e

    return radial_power_nfunction(
        f"|xi|^{p:g} + a(t,x)|xi|^{q:g}",
        terms,
        power_young(p, 1.0),
        power_sum_young([(1.0, p), (float(weight_max), q)]),
        dim=dim,
        breakpoints=breakpoints,
        params={"family": "double-phase", "p": p, "q": q, "weight": weight, "weight_max": float(weight_max)},
    )


def young_nfunction(m: YoungFunction, dim=1) -> NFunction:
    """Homogeneous isotropic ``M(t, x, xi) = m(|xi|)``."""
    if m.terms is not None:
        terms = m.terms

        def terms_fn(t, x):
            n = np.shape(t)[0]
            return (np.tile([c for c, _ in terms], (n, 1)), np.tile([e for _, e in terms], (n, 1)))

        return radial_power_nfunction(m.name, terms_fn, m, m, dim=dim, params={"family": "young", "young": m})

    return NFunction(
        m.name,
        lambda t, x, xi: m(_norm(xi)),
        m,
        m,
        dim=dim,
        radial=lambda t, x, r: m(r),
        radial_derivative=(lambda t, x, r: m.derivative(r)) if m.derivative else None,
        params={"family": "young", "young": m},
    )


def quadratic(dim=1) -> NFunction:
    """``|xi|**2 / 2``, its own conjugate."""
    return young_nfunction(power_young(2.0), dim=dim)


def anisotropic_power(exponents: Sequence[float]) -> NFunction:
    """``M(xi) = sum_i |xi_i|**p_i / p_i``; conjugate is ``sum_i |eta_i|**p_i' / p_i'``."""
    ps = np.asarray([float(p) for p in exponents])
    dim = ps.size
    lo, hi = ps.min(), ps.max()
    env = min_power_envelope_young(lo, hi)
    top = max_power_young(lo, hi)
    # convexity: sum_i m(|xi_i|) >= d m(|xi|_1 / d) >= d m(|xi| / d)
    lower = YoungFunction(
        "aniso-lower", lambda s: dim * env(np.asarray(s) / dim) / hi,
        lambda s: env.derivative(np.asarray(s) / dim) / hi,
    )
    upper = YoungFunction(
        "aniso-upper", lambda s: dim * top(s) / lo, lambda s: dim * top.derivative(s) / lo
    )

    def ev(t, x, xi):
        return np.sum(np.abs(xi) ** ps / ps, axis=-1)

    return NFunction(
        f"sum |xi_i|^{tuple(float(p) for p in ps)}/p_i", ev, lower, upper, dim=dim, isotropic=False,
        params={"family": "anisotropic-power", "exponents": tuple(float(p) for p in ps)},
    )


def odd_counterexample(dim=1) -> NFunction:
    """``M = xi_1``: violates symmetry and positivity, for checker tests."""
    lin = linear_young()
    return NFunction("xi_1 (odd)", lambda t, x, xi: xi[:, 0], lin, lin, dim=dim, isotropic=False,
                     params={"family": "odd"})


# --------------------------------------------------------------------------
# N-function conjugates
# --------------------------------------------------------------------------


def conjugate_nfunction(M: NFunction, t, x, eta, *, seed=0, max_sweeps=200):
    """``M*(t, x, eta) = sup_xi (xi . eta - M(t, x, xi))`` at each sample.

    Isotropic laws reduce to a one-dimensional Legendre transform of the
    radial profile at ``|eta|``.  Anisotropic laws use coordinate ascent
    from ``|eta|``-scaled seeds plus ``8 d`` random restarts; the result is
    a certified lower bound (the best probe value).
    """
    scalar = np.ndim(eta) <= 1 and np.size(eta) == M.dim and np.ndim(t) == 0
    t, x, eta = as_samples(t, x, eta, M.dim)
    r = _norm(eta)
    if M.isotropic:
        if M.power_terms is not None:
            coefs, exps = M.power_terms(t, x)
            value, _ = _legendre_terms(r, coefs, exps)
        elif M.radial_derivative is not None:
            value, _ = _bisect_stationary(
                lambda s: M.radial_eval(t, x, s), lambda s: M.radial_derivative(t, x, s), r
            )
        else:
            value, _ = _golden_stationary(lambda s: M.radial_eval(t, x, s), r)
    else:
        value = np.array(
            [_anisotropic_conjugate(M, t[i], x[i], eta[i], seed + i, max_sweeps) for i in range(r.size)]
        )
    return float(value[0]) if scalar else value


def _anisotropic_conjugate(M, t, x, eta, seed, max_sweeps):
    d = M.dim
    tt = np.array([t])
    xx = x[None, :]

    def phi(xi):
        return float(xi @ eta - M.eval(tt, xx, xi[None, :])[0])

    scale = max(float(np.linalg.norm(eta)), 1.0)
    rng = np.random.default_rng(seed)
    seeds = [np.zeros(d), eta.copy()]
    for i in range(d):
        e = np.zeros(d)
        e[i] = scale
        seeds += [e, -e]
    seeds += [scale * rng.standard_normal(d) for _ in range(8 * d)]

    best_val, best_xi = 0.0, np.zeros(d)
    converged_any = False
    for start in seeds:
        xi = np.array(start, dtype=float)
        val = phi(xi)
        for _ in range(max_sweeps):
            prev = val
            for i in range(d):
                def line(v, i=i):
                    trial = xi.copy()
                    trial[i] = v
                    return -phi(trial)

                res = minimize_scalar(line, bracket=(xi[i], xi[i] + scale), method="brent",
                                      options={"xtol": 1e-12})
                if -res.fun >= val:
                    xi[i] = res.x
                    val = -res.fun
            if val - prev <= 1e-14 * (1.0 + abs(val)):
                converged_any = True
                break
        if val > best_val:
            best_val, best_xi = val, xi.copy()
    if not converged_any:
        raise ConjugateConvergenceError("coordinate ascent did not converge", best_val)
    return best_val


def conjugate_of(M: NFunction) -> NFunction:
    """``M*`` as an N-function; bounds are ``upper*`` below and ``lower*`` above."""
    lower = conjugate_function(M.upper)
    upper = conjugate_function(M.lower)

    def ev(t, x, eta):
        return conjugate_nfunction(M, t, x, eta)

    radial = None
    if M.isotropic:
        def radial(t, x, r):
            eta = np.zeros((np.shape(r)[0], M.dim))
            eta[:, 0] = r
            return conjugate_nfunction(M, t, x, eta)

    return NFunction(f"({M.name})*", ev, lower, upper, dim=M.dim, isotropic=M.isotropic,
                     radial=radial, breakpoints=M.breakpoints, params={"base": M})


# --------------------------------------------------------------------------
# Property checkers
# --------------------------------------------------------------------------


@dataclass
class SampleSpec:
    """Sampling knobs shared by the structural checkers."""

    s_min: float = 1e-3
    s_max: float = 1e3
    n_grid: int = 200
    n_points: int = 2000
    tol: float = 1e-10
    seed: int = 42
    t_range: tuple = (0.0, 1.0)
    domain: tuple = ((0.0, 1.0),)

    def s_grid(self):
        return np.geomspace(self.s_min, self.s_max, self.n_grid)


@dataclass
class PropertyEntry:
    passed: bool
    worst: float
    tol: float
    detail: str = ""


@dataclass
class PropertyReport:
    subject: str
    entries: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(e.passed for e in self.entries.values())

    def add(self, name, worst, tol, detail=""):
        # worst is a violation magnitude: <= tol passes
        worst = float(worst)
        self.entries[name] = PropertyEntry(bool(worst <= tol), worst, float(tol), detail)

    def failures(self):
        return [k for k, e in self.entries.items() if not e.passed]


def check_young_properties(m: YoungFunction, spec: Optional[SampleSpec] = None) -> PropertyReport:
    """Y1 (zero only at zero), Y2 (midpoint convexity), N1 (monotone ratio) and
    the finite superlinearity proxy, each with its worst violation."""
    spec = spec or SampleSpec()
    s = spec.s_grid()
    rep = PropertyReport(m.name)
    ms = m(s)
    m0 = float(m(np.array([0.0]))[0])
    rep.add("Y1", max(abs(m0), float(np.max(np.maximum(-ms, 0.0))) if np.all(ms > 0) else np.inf), spec.tol)

    rng = np.random.default_rng(spec.seed)
    a = np.concatenate([s[:-1], rng.uniform(0, spec.s_max, spec.n_points)])
    b = np.concatenate([s[1:], rng.uniform(0, spec.s_max, spec.n_points)])
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    chord = 0.5 * (m(lo) + m(hi))
    viol = (m(0.5 * (lo + hi)) - chord) / (1.0 + chord)
    rep.add("Y2", max(float(viol.max()), 0.0), spec.tol)

    ratio = ms / s
    dec = (ratio[:-1] - ratio[1:]) / (1.0 + np.abs(ratio[:-1]))
    rep.add("N1", max(float(dec.max()), 0.0), spec.tol)

    growth = ratio[-1] / ratio[0] if ratio[0] > 0 else np.inf
    rep.info.update(ratio_min=float(ratio[0]), ratio_max=float(ratio[-1]), ratio_growth=float(growth))
    # strict growth of m(s)/s across the sampled range stands in for Y3
    rep.add("superlinear_proxy", 0.0 if growth > 1.0 + 1e-9 else 1.0, 0.0,
            detail=f"ratio grows by {growth:.6g}")
    return rep


def _sample_points(spec: SampleSpec, dim, n, rng):
    t = rng.uniform(*spec.t_range, size=n)
    dom = list(spec.domain) + [spec.domain[-1]] * (dim - len(spec.domain))
    x = np.stack([rng.uniform(lo, hi, size=n) for lo, hi in dom[:dim]], axis=1)
    direction = rng.standard_normal((n, dim))
    direction /= np.maximum(_norm(direction)[:, None], 1e-300)
    radius = np.exp(rng.uniform(np.log(spec.s_min), np.log(spec.s_max), size=n))
    return t, x, direction * radius[:, None]


def check_nfunction_properties(M: NFunction, spec: Optional[SampleSpec] = None) -> PropertyReport:
    """M1 symmetry, M3 segment convexity, M4 sandwich and the N4 finite proxy."""
    spec = spec or SampleSpec()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_points
    t, x, xi = _sample_points(spec, M.dim, n, rng)
    rep = PropertyReport(M.name, info={"lower": M.lower.name, "upper": M.upper.name})
    Mv = M.eval(t, x, xi)

    sym = np.abs(Mv - M.eval(t, x, -xi)) / (1.0 + np.abs(Mv))
    rep.add("M1", float(sym.max()), spec.tol)

    _, _, zeta = _sample_points(spec, M.dim, n, rng)
    worst = 0.0
    for lam in (0.25, 0.5, 0.75):
        mix = M.eval(t, x, lam * xi + (1 - lam) * zeta)
        chord = lam * Mv + (1 - lam) * M.eval(t, x, zeta)
        worst = max(worst, float(((mix - chord) / (1.0 + np.abs(chord))).max()))
    rep.add("M3", max(worst, 0.0), spec.tol)

    r = _norm(xi)
    lo = M.lower(r)
    hi = M.upper(r)
    below = (lo - Mv) / (1.0 + np.abs(Mv))
    above = (Mv - hi) / (1.0 + np.abs(hi))
    rep.add("M4", max(float(below.max()), float(above.max()), 0.0), spec.tol)

    # N4: M/|xi| small at the smallest radius, large at the largest
    k = min(n, 256)
    direction = xi[:k] / r[:k, None]
    small = M.eval(t[:k], x[:k], direction * spec.s_min) / spec.s_min
    large = M.eval(t[:k], x[:k], direction * spec.s_max) / spec.s_max
    sup_small, inf_large = float(small.max()), float(large.min())
    rep.info.update(n4_sup_small=sup_small, n4_inf_large=inf_large)
    rep.add("N4_proxy", 0.0 if sup_small < inf_large else 1.0, 0.0,
            detail=f"sup M/|xi| at {spec.s_min:g}: {sup_small:.3g}; inf at {spec.s_max:g}: {inf_large:.3g}")
    return rep


# --------------------------------------------------------------------------
# Theta condition
# --------------------------------------------------------------------------


def lower_convex_envelope(r, y):
    """Lower convex envelope of samples ``(r_i, y_i)`` (sorted ``r``), on the same grid.

    On a grid this is the discrete biconjugate.
    """
    hull = []
    for i in range(len(r)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (r[b] - r[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (r[i] - r[a])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    hull = np.array(hull)
    return np.interp(r, r[hull], y[hull])


@dataclass
class ThetaReport:
    deltas: list
    times: list
    max_ratio: dict  # delta -> max ratio over times
    ratios: dict  # (delta, t) -> max ratio
    bounded: bool
    C: float

    def curve(self):
        return [{"param": d, "value": self.max_ratio[d]} for d in self.deltas]


def check_theta_condition(
    M: NFunction,
    deltas: Sequence[float],
    *,
    C: float = 1.0,
    times: Optional[Sequence[float]] = None,
    domain: Sequence[tuple] = ((0.0, 1.0),),
    points_per_edge: int = 16,
    n_radial: int = 400,
    growth_tol: float = 1.5,
) -> ThetaReport:
    """Sampled ratio ``M(t, x, xi) / M_Q**(t, xi)`` over cubes of edge ``delta``.

    ``M_Q`` is the minimum of ``M`` over sample points of ``5Q`` intersected
    with the domain; its biconjugate is the lower convex envelope on a radial
    grid ``0 <= |xi| <= C / delta``.  Only isotropic laws are supported.
    """
    if not M.isotropic:
        raise ValueError("theta-condition diagnostic needs an isotropic N-function")
    deltas = [float(d) for d in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be decreasing")
    dom = [tuple(map(float, ab)) for ab in domain][: M.dim]
    if times is None:
        times = [0.5]
    times = [float(t) for t in times]

    ratios = {}
    max_ratio = {}
    for delta in deltas:
        r = np.linspace(0.0, C / delta, n_radial + 1)[1:]
        r_full = np.concatenate([[0.0], r])
        worst_delta = 0.0
        axes_cells = [np.arange(lo + 0.5 * delta, hi, delta) for lo, hi in dom]
        centers = np.stack([g.ravel() for g in np.meshgrid(*axes_cells, indexing="ij")], axis=1)
        for t in times:
            worst = 0.0
            for c in centers:
                big = _box_samples(c, 5.0 * delta, dom, points_per_edge * 5)
                own = _box_samples(c, delta, dom, points_per_edge)
                MQ = _radial_table(M, t, big, r).min(axis=0)
                env = lower_convex_envelope(r_full, np.concatenate([[0.0], MQ]))[1:]
                if np.any(env <= 0.0):
                    raise ThetaDegenerateError(f"M_Q** vanishes at |xi| > 0 for cube centred at {c}")
                ratio = _radial_table(M, t, own, r) / env[None, :]
                worst = max(worst, float(ratio.max()))
            ratios[(delta, t)] = worst
            worst_delta = max(worst_delta, worst)
        max_ratio[delta] = worst_delta
    seq = [max_ratio[d] for d in deltas]
    bounded = bool(np.all(np.isfinite(seq)) and seq[-1] <= growth_tol * max(seq[0], 1.0))
    return ThetaReport(deltas, times, max_ratio, ratios, bounded, C)


def _box_samples(center, edge, dom, count):
    axes = []
    for c, (lo, hi) in zip(center, dom):
        a, b = max(lo, c - 0.5 * edge), min(hi, c + 0.5 * edge)
        axes.append(np.linspace(a, b, max(int(count), 2)))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _radial_table(M, t, pts, r):
    """``M(t, x_i, r_j)`` as an array of shape ``(len(pts), len(r))``."""
    npts, nr = pts.shape[0], r.shape[0]
    xs = np.repeat(pts, nr, axis=0)
    rs = np.tile(r, npts)
    ts = np.full(npts * nr, t)
    return M.radial_eval(ts, xs, rs).reshape(npts, nr)
