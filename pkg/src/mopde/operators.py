"""Monotone flux laws ``A(t, x, xi)``, their structural checkers and the
theta-regularization ``A + theta * grad m(|xi|)``.

Every built-in flux is radial with a power-sum profile,
``A = sum_k c_k(t, x) |xi|**(e_k - 2) xi``, so flux and Jacobian go through
the compiled kernels.  Residuals always use the exact flux; the
``delta_reg`` smoothing of exponents below 2 only enters Jacobians.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .morlicz import DiscreteField, _check_same
from .nfunction import (
    NFunction,
    PropertyReport,
    SampleSpec,
    YoungFunction,
    _sample_points,
    as_samples,
    conjugate_nfunction,
    conjugate_young,
    double_phase,
    gradient_young,
    power_sum_young,
    variable_exponent,
)

DELTA_REG = 1e-8


@dataclass(eq=False)
class MonotoneOperator:
    """Flux ``A(t, x, xi)`` governed by ``M`` with constant ``c`` and bound field ``h``.

    ``flux_terms(t, x)`` returns per-sample ``(coefs, exps)`` of the radial
    power-sum profile when the flux has one.
    """

    name: str
    governing: NFunction
    c: float
    h: Callable
    flux_terms: Optional[Callable] = None
    flux: Optional[Callable] = None
    jacobian_fn: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.governing.dim

    def eval(self, t, x, xi):
        if self.flux_terms is not None:
            c, e = self.flux_terms(t, x)
            return kernels.radial_power_flux(np.ascontiguousarray(xi), _c(c), _c(e))
        return self.flux(t, x, xi)

    def jacobian(self, t, x, xi, delta=DELTA_REG):
        """``dA/dxi`` per sample, shape ``(n, d, d)``; finite differences if no formula."""
        if self.flux_terms is not None:
            c, e = self.flux_terms(t, x)
            return kernels.radial_power_jacobian(np.ascontiguousarray(xi), _c(c), _c(e), float(delta))
        if self.jacobian_fn is not None:
            return self.jacobian_fn(t, x, xi, delta)
        return _fd_jacobian(lambda z: self.eval(t, x, z), xi)

    def radial_coefficient(self, t, x, xi, delta=DELTA_REG):
        """Scalar ``k`` with ``A ~ k xi``, smoothed where the profile is singular (Picard)."""
        c, e = self.flux_terms(t, x)
        r2 = np.sum(xi * xi, axis=1)[:, None]
        rk2 = np.where(e < 2.0, r2 + delta * delta, r2)
        safe = np.where(rk2 > 0, rk2, 1.0)
        k = np.where(rk2 > 0, c * safe ** (0.5 * (e - 2.0)), np.where(e == 2.0, c, 0.0))
        return k.sum(axis=1)


def _c(a):
    return np.ascontiguousarray(a, dtype=float)


def _fd_jacobian(fn, xi, step=1e-7):
    n, d = xi.shape
    out = np.empty((n, d, d))
    for b in range(d):
        e = np.zeros(d)
        e[b] = step
        out[:, :, b] = (fn(xi + e) - fn(xi - e)) / (2 * step)
    return out


def eval_operator(A: MonotoneOperator, t, x, xi):
    """Exact flux at samples; ``xi = 0`` maps to 0."""
    t, x, xi = as_samples(t, x, xi, A.dim)
    return A.eval(t, x, xi)


# --------------------------------------------------------------------------
# Families
# --------------------------------------------------------------------------


def _zero_h(t, x):
    return np.zeros(np.shape(t))


def p_laplacian(M: NFunction, c: float = 2.0) -> MonotoneOperator:
    """``|xi|**(p-2) xi`` for ``M = |xi|**p(t,x)``.

    With ``r = |xi|``, ``M + M*(A) = r**p (1 + (p-1) p**(-p'))`` and the
    bracket never exceeds 2, so ``c = 2`` and ``h = 0`` certify A2.
    """
    if M.params.get("family") != "variable-exponent":
        raise ValueError("p_laplacian expects a variable-exponent N-function")

    def flux_terms(t, x):
        _, e = M.power_terms(t, x)
        return np.ones_like(e), e

    return MonotoneOperator(f"p-Laplacian[{M.name}]", M, c, _zero_h, flux_terms=flux_terms,
                            params={"family": "p-laplacian"})


def double_phase_operator(M: NFunction, c: float = 2.0) -> MonotoneOperator:
    """``A = grad M`` for ``M = |xi|**p + a |xi|**q``.

    Fenchel equality gives ``M + M*(grad M) = grad M . xi``, so any ``c >= 1``
    with ``h = 0`` satisfies A2; ``c = 2`` leaves a margin for quadrature of
    the conjugate.
    """
    if M.params.get("family") != "double-phase":
        raise ValueError("double_phase_operator expects a double-phase N-function")

    def flux_terms(t, x):
        coef, e = M.power_terms(t, x)
        return coef * e, e

    return MonotoneOperator(f"grad[{M.name}]", M, c, _zero_h, flux_terms=flux_terms,
                            params={"family": "double-phase"})


def anti_example(dim: int = 1) -> MonotoneOperator:
    """``A = -xi``: decreasing, violates A2 and A3."""
    M = variable_exponent(lambda t, x: np.full(np.shape(t), 2.0), (2.0, 2.0), dim=dim)

    def flux_terms(t, x):
        n = np.shape(t)[0]
        return -np.ones((n, 1)), np.full((n, 1), 2.0)

    return MonotoneOperator("anti(-xi)", M, 2.0, _zero_h, flux_terms=flux_terms, params={"family": "anti"})


def exponent_bounds(M: NFunction):
    """``(p_minus, p_plus, a_max)`` for the built-in power families."""
    fam = M.params.get("family")
    if fam == "variable-exponent":
        return M.params["p_minus"], M.params["p_plus"], 0.0
    if fam == "double-phase":
        return M.params["p"], M.params["q"], M.params["weight_max"]
    raise ValueError(f"no exponent bounds for family {fam!r}")


def _dominates(m: YoungFunction, top: YoungFunction, lead_m, lead_top):
    s = np.geomspace(1e-6, 1e6, 481)
    if np.any(m(s) < top(s) * (1.0 + 1e-12)):
        return False
    # leading power and coefficient decide the tail beyond the samples
    return lead_m[1] > lead_top[1] or (lead_m[1] == lead_top[1] and lead_m[0] >= lead_top[0])


def default_dominating_young(M: NFunction) -> YoungFunction:
    """Young function ``m >= M(t, x, .)`` used for the theta term.

    Prefers ``s**p_plus / p_plus + s**2`` when sampling plus the leading
    power certify it dominates the family's upper bound; otherwise
    ``(1 + a_max) s**p_plus + s**min(p_minus, 2)``, which always does.
    """
    p_minus, p_plus, a_max = exponent_bounds(M)
    top_lead = (1.0 + a_max, p_plus)
    preferred = power_sum_young([(1.0 / p_plus, p_plus), (1.0, 2.0)])
    if p_plus > 2.0:
        lead = (1.0 / p_plus, p_plus)
    else:
        lead = (1.0 + (1.0 / p_plus if p_plus == 2.0 else 0.0), 2.0)
    if _dominates(preferred, M.upper, lead, top_lead):
        return preferred
    q = min(p_minus, 2.0)
    if q == p_plus:
        return power_sum_young([(2.0 + a_max, p_plus)])
    return power_sum_young([(1.0 + a_max, p_plus), (1.0, q)])


@dataclass(eq=False)
class RegularizedOperator:
    """``A_theta = A + theta * grad m(|xi|)`` with ``m >= M`` certified on samples."""

    base: MonotoneOperator
    theta: float
    m: YoungFunction

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.m.terms is None:
            raise ValueError("the dominating Young function must be a power sum")

    @property
    def dim(self):
        return self.base.dim

    @property
    def governing(self):
        return self.base.governing

    def _m_terms(self, n):
        coefs = np.array([c * e for c, e in self.m.terms])
        exps = np.array([e for _, e in self.m.terms])
        return np.tile(coefs, (n, 1)), np.tile(exps, (n, 1))

    def flux_terms(self, t, x):
        c, e = self.base.flux_terms(t, x)
        if self.theta == 0.0:
            return c, e
        mc, me = self._m_terms(c.shape[0])
        return np.concatenate([c, self.theta * mc], axis=1), np.concatenate([e, me], axis=1)

    def eval(self, t, x, xi):
        return MonotoneOperator.eval(self, t, x, xi)

    def jacobian(self, t, x, xi, delta=DELTA_REG):
        return MonotoneOperator.jacobian(self, t, x, xi, delta)

    def radial_coefficient(self, t, x, xi, delta=DELTA_REG):
        return MonotoneOperator.radial_coefficient(self, t, x, xi, delta)

    # plain attribute lookups used by MonotoneOperator methods
    flux = None
    jacobian_fn = None

    def theta_term(self, xi):
        """``theta * grad m(|xi|)``."""
        return self.theta * gradient_young(self.m, xi)

    def with_theta(self, theta):
        return RegularizedOperator(self.base, theta, self.m)


def regularize(A: MonotoneOperator, theta: float, m: Optional[YoungFunction] = None) -> RegularizedOperator:
    m = m or default_dominating_young(A.governing)
    return RegularizedOperator(A, theta, m)


def eval_regularized(Ath: RegularizedOperator, t, x, xi):
    t, x, xi = as_samples(t, x, xi, Ath.dim)
    return Ath.base.eval(t, x, xi) + Ath.theta_term(xi)


def check_domination(m: YoungFunction, M: NFunction, spec: Optional[SampleSpec] = None) -> float:
    """Worst relative excess ``(M - m(|xi|)) / (1 + m)`` over samples (<= 0 means dominated)."""
    spec = spec or SampleSpec()
    rng = np.random.default_rng(spec.seed)
    t, x, xi = _sample_points(spec, M.dim, spec.n_points, rng)
    mv = m(np.sqrt(np.sum(xi * xi, axis=1)))
    return float(np.max((M.eval(t, x, xi) - mv) / (1.0 + mv)))


# --------------------------------------------------------------------------
# Assumption checks
# --------------------------------------------------------------------------


@dataclass
class OperatorSampleSpec(SampleSpec):
    s_min: float = 1e-3
    s_max: float = 1e2
    n_points: int = 100_000
    n_pairs: int = 100_000
    a2_tol: float = 1e-10
    a3_tol: float = 1e-12
    a4_tol: float = 0.0
    balls: tuple = (1.0, 10.0, 100.0)


def check_assumptions(A, spec: Optional[OperatorSampleSpec] = None) -> PropertyReport:
    """Worst violations of A2, A3 and A4, plus the maximum of ``|A|`` on balls.

    A2 is ``M + M*(A) <= c A . xi + h``, scored as the relative shortfall of
    the right side; A3 scores negative pairings relative to their scale.
    """
    spec = spec or OperatorSampleSpec()
    M = A.governing
    d = A.dim
    rng = np.random.default_rng(spec.seed)
    rep = PropertyReport(getattr(A, "name", "regularized"))

    t, x, xi = _sample_points(spec, d, spec.n_points, rng)
    Av = A.eval(t, x, xi)
    Ar = np.sqrt(np.sum(Av * Av, axis=1))
    eta = np.zeros_like(xi)
    eta[:, 0] = Ar
    Mstar = conjugate_nfunction(M, t, x, eta) if M.isotropic else conjugate_nfunction(M, t, x, Av)
    lhs = M.eval(t, x, xi) + Mstar
    c = A.base.c if isinstance(A, RegularizedOperator) else A.c
    h = (A.base.h if isinstance(A, RegularizedOperator) else A.h)(t, x)
    rhs = c * np.sum(Av * xi, axis=1) + h
    a2 = (lhs - rhs) / (1.0 + np.abs(rhs))
    rep.add("A2", max(float(a2.max()), 0.0), spec.a2_tol)
    rep.info["A2_min_slack"] = float(np.min(rhs - lhs))

    t2, x2, z1 = _sample_points(spec, d, spec.n_pairs, rng)
    _, _, z2 = _sample_points(spec, d, spec.n_pairs, rng)
    # mix in nearby pairs, where cancellation is hardest
    near = rng.random(spec.n_pairs) < 0.25
    z2[near] = z1[near] * (1.0 + 1e-3 * rng.standard_normal((near.sum(), 1)))
    dA = A.eval(t2, x2, z1) - A.eval(t2, x2, z2)
    dz = z1 - z2
    pairing = np.sum(dA * dz, axis=1)
    scale = np.sqrt(np.sum(dA * dA, axis=1) * np.sum(dz * dz, axis=1))
    a3 = -pairing / (1e-300 + scale)
    a3 = np.where(scale > 0, a3, 0.0)
    rep.add("A3", max(float(a3.max()), 0.0), spec.a3_tol)
    rep.info["A3_min_pairing"] = float(pairing.min())
    rep.info["A3_negative_count"] = int(np.sum(pairing < -spec.a3_tol * scale))

    zero = np.zeros_like(xi[: min(spec.n_points, 10_000)])
    a4 = np.sqrt(np.sum(A.eval(t[: zero.shape[0]], x[: zero.shape[0]], zero) ** 2, axis=1))
    rep.add("A4", float(a4.max()), spec.a4_tol)

    ball = []
    n_ball = min(spec.n_points, 20_000)
    for K in spec.balls:
        direction = rng.standard_normal((n_ball, d))
        direction /= np.sqrt(np.sum(direction**2, axis=1))[:, None]
        radius = K * rng.random(n_ball) ** (1.0 / d)
        radius[: n_ball // 10] = K
        vals = A.eval(t[:n_ball], x[:n_ball], direction * radius[:, None])
        ball.append(float(np.sqrt(np.sum(vals**2, axis=1)).max()))
    rep.info["ball_bounds"] = {float(K): b for K, b in zip(spec.balls, ball)}
    finite_monotone = all(np.isfinite(ball)) and all(b2 >= b1 for b1, b2 in zip(ball, ball[1:]))
    rep.add("ball_bound", 0.0 if finite_monotone else 1.0, 0.0)
    return rep


# --------------------------------------------------------------------------
# Monotonicity identification probe
# --------------------------------------------------------------------------


@dataclass
class ProbeReport:
    min_integral: float
    integrals: dict
    direct_residual_max: float
    direct_residual_l2: float

    def consistent(self, tol=1e-10):
        return self.min_integral >= -tol


def targeted_eta(alpha: DiscreteField, xi: DiscreteField, A, tau: float = 1e-3) -> DiscreteField:
    """``eta = xi + tau * (alpha - A(xi)) / max|alpha - A(xi)|``.

    This direction makes the pairing ``(alpha - A(eta)) . (xi - eta)``
    negative wherever ``alpha`` differs from ``A(xi)``.
    """
    d = alpha.values - _flux_field(A, xi)
    scale = np.max(np.sqrt(np.sum(d * d, axis=-1)))
    if scale == 0:
        return xi.like(xi.values.copy())
    return xi.like(xi.values + tau * d / scale)


def _flux_field(A, xi: DiscreteField):
    t, x, v, _ = xi.flat_samples()
    return A.eval(t, x, v).reshape(xi.vector().shape)


def monotonicity_identification_probe(alpha: DiscreteField, xi: DiscreteField, A,
                                      etas: Sequence = (), psis: Sequence = ()) -> ProbeReport:
    """Evaluate ``int (alpha - A(eta)) . (xi - eta) psi`` over test fields and cutoffs.

    ``etas`` holds fields on the same samples as ``xi`` (or constant
    vectors); ``psis`` holds arrays of nonnegative weights with the
    field's ``(n_t, n_s)`` shape (``None`` means 1).
    """
    _check_same(alpha, xi)
    a = alpha.vector()
    z = xi.vector()
    diff = a - _flux_field(A, xi)
    res = np.sqrt(np.sum(diff * diff, axis=-1))
    direct_max = float(res.max()) if res.size else 0.0
    direct_l2 = float(np.sqrt(xi.integral(res**2)))
    if not etas:
        etas = [xi]
    if not psis:
        psis = [None]
    integrals = {}
    for i, eta in enumerate(etas):
        if not isinstance(eta, DiscreteField):
            eta = xi.like(np.broadcast_to(np.asarray(eta, dtype=float), z.shape).copy())
        _check_same(eta, xi)
        Ae = _flux_field(A, eta)
        integrand = np.sum((a - Ae) * (z - eta.vector()), axis=-1)
        for j, psi in enumerate(psis):
            weight = 1.0 if psi is None else np.asarray(psi, dtype=float)
            integrals[(i, j)] = xi.integral(integrand * weight)
    return ProbeReport(min(integrals.values()), integrals, direct_max, direct_l2)
