"""Verification toolkit for computed solutions: truncations, mollifiers,
boundary cutoffs, energy balances and the uniqueness probe.

Time integrals use the right-endpoint rule (level ``n`` weighted by
``t_n - t_{n-1}``), the rule under which implicit Euler satisfies its
energy balance exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import correlate

from .morlicz import DiscreteField, luxemburg_norm, modular, modular_distance
from .nfunction import NFunction
from .solver import DiscreteGradient, ProblemSpec, Solution, SolverConfig, l2l2_difference, solve


class ResolutionError(ValueError):
    """A length scale is too small for the grid."""


# --------------------------------------------------------------------------
# Truncation
# --------------------------------------------------------------------------


def truncate_values(s, k):
    return np.clip(s, -k, k)


def truncate(u: DiscreteField, k: float) -> DiscreteField:
    """Pointwise ``T_k``."""
    if k < 0:
        raise ValueError("truncation level must be nonnegative")
    return u.like(truncate_values(u.values, k))


def g_k(s, k):
    """Primitive of ``T_k``: ``s**2/2`` inside ``[-k, k]``, ``k|s| - k**2/2`` outside."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    return np.where(a <= k, 0.5 * s * s, k * a - 0.5 * k * k)


# --------------------------------------------------------------------------
# Cutoffs
# --------------------------------------------------------------------------


def _smoothstep(y):
    y = np.clip(y, 0.0, 1.0)
    return y**3 * (10.0 + y * (-15.0 + 6.0 * y))


def _smoothstep_prime(y):
    inside = (y > 0.0) & (y < 1.0)
    y = np.clip(y, 0.0, 1.0)
    return np.where(inside, 30.0 * y * y * (1.0 - y) ** 2, 0.0)


@dataclass(frozen=True)
class CutoffFamily:
    """``psi_j``: 0 within ``1/(2j)`` of the boundary, 1 beyond ``1/j``.

    On a box it is the product over axes of quintic ramps in the distance to
    either face, so ``|grad psi_j| <= 1.875 * 2j`` per axis.
    """

    j: int
    extents: tuple

    def _ramp(self, x):
        j = self.j
        ramps, slopes = [], []
        for a, (lo, hi) in enumerate(self.extents):
            d_lo, d_hi = x[:, a] - lo, hi - x[:, a]
            y_lo, y_hi = 2 * j * d_lo - 1.0, 2 * j * d_hi - 1.0
            r = _smoothstep(y_lo) * _smoothstep(y_hi)
            s = 2 * j * (_smoothstep_prime(y_lo) * _smoothstep(y_hi) - _smoothstep(y_lo) * _smoothstep_prime(y_hi))
            ramps.append(r)
            slopes.append(s)
        return ramps, slopes

    def __call__(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, len(self.extents))
        ramps, _ = self._ramp(x)
        return np.prod(ramps, axis=0)

    def gradient(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, len(self.extents))
        ramps, slopes = self._ramp(x)
        out = np.empty((x.shape[0], len(ramps)))
        for a in range(len(ramps)):
            others = np.prod([r for b, r in enumerate(ramps) if b != a], axis=0) if len(ramps) > 1 else 1.0
            out[:, a] = slopes[a] * others
        return out

    @property
    def gradient_bound(self):
        return 1.875 * 2 * self.j * np.sqrt(len(self.extents))

    @property
    def support_distance(self):
        return 1.0 / (2 * self.j)


# --------------------------------------------------------------------------
# Mollification
# --------------------------------------------------------------------------


def bump(r):
    """Unnormalized ``exp(-1 / (1 - r**2))`` on ``|r| < 1``."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def kernel_weights(eps, spacing):
    """Discrete unit-mass kernel on offsets ``k * spacing`` within radius ``eps``.

    ``spacing`` is a tuple (one entry per axis); the result is a dense
    stencil with shape ``(2K_a + 1, ...)``.
    """
    if any(eps < 2.0 * h * (1.0 - 1e-12) for h in spacing):
        raise ResolutionError(f"mollifier radius {eps:g} is below two grid spacings")
    reach = [int(np.floor(eps / h * (1.0 + 1e-12))) for h in spacing]
    offs = [np.arange(-k, k + 1) * h for k, h in zip(reach, spacing)]
    mesh = np.meshgrid(*offs, indexing="ij")
    r = np.sqrt(sum(m * m for m in mesh)) / eps
    w = bump(r)
    return w / np.sum(w)


def _convolve_nodes(values, stencil, node_shape):
    """Zero-padded convolution over the spatial node array for each time level."""
    n_t = values.shape[0]
    arr = values.reshape((n_t,) + tuple(node_shape))
    k = stencil.reshape((1,) + stencil.shape)
    return correlate(arr, k, mode="constant", cval=0.0).reshape(values.shape)


def mollify_space(u: DiscreteField, grid, eps: float) -> DiscreteField:
    """Spatial mollification of a node field, kept on nodes at distance ``>= eps``
    from the boundary and set to zero elsewhere (``meta['mask']`` marks the kept nodes)."""
    stencil = kernel_weights(eps, grid.h)
    vals = _convolve_nodes(u.values, stencil, grid.node_shape)
    mask = grid.dist_to_boundary(grid.nodes()) >= eps * (1.0 - 1e-12)
    vals = np.where(mask[None, :], vals, 0.0)
    out = u.like(vals, mask=mask, eps=eps)
    return out


def mollify_time(u: DiscreteField, eps: float, extension: str = "initial", u0=None) -> DiscreteField:
    """Temporal mollification on a uniform time grid with an extension outside ``[t0, T]``.

    ``extension='initial'`` extends by ``u0`` (default: level 0) before the
    start and by 0 after the end; ``'zero'`` extends by 0 on both sides,
    as for fluxes and sources.
    """
    t = u.t
    dts = np.diff(t)
    if dts.size == 0 or not np.allclose(dts, dts[0], rtol=1e-9):
        raise ResolutionError("temporal mollification needs uniform time levels")
    dt = dts[0]
    stencil = kernel_weights(eps, (dt,))
    K = (stencil.size - 1) // 2
    if extension == "initial":
        before = np.asarray(u.values[0] if u0 is None else u0, dtype=float)
    elif extension == "zero":
        before = np.zeros_like(u.values[0])
    else:
        raise ValueError(f"unknown extension {extension!r}")
    pad_before = np.broadcast_to(before, (K,) + before.shape)
    pad_after = np.zeros((K,) + u.values.shape[1:])
    ext = np.concatenate([pad_before, u.values, pad_after], axis=0)
    out = np.zeros_like(u.values)
    for i, w in enumerate(stencil):
        out += w * ext[i : i + u.values.shape[0]]
    return u.like(out, eps_time=eps)


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------


@dataclass
class EnergyReport:
    times: list
    lhs: list
    rhs: list
    label: str = ""

    @property
    def residual(self):
        return [a - b for a, b in zip(self.lhs, self.rhs)]

    def rows(self):
        return [{"t": t, "lhs": a, "rhs": b, "residual": a - b} for t, a, b in zip(self.times, self.lhs, self.rhs)]


def _node_grad_fields(sol: Solution, node_values):
    """Gradient samples of arbitrary node fields (boundary values ignored)."""
    G = sol.gradient
    vals = np.asarray(node_values)[:, G.interior]
    return np.array([G(v) for v in vals])


def local_energy_residual(sol: Solution, psi, k: float, t_index: Optional[int] = None) -> EnergyReport:
    """Truncated, localized energy balance at every node up to ``t_index``.

    ``lhs(t) = int psi [G_k(u(t)) - G_k(u0)]``,
    ``rhs(t) = -int_0^t int alpha . grad(T_k(u) psi) + int_0^t int f T_k(u) psi``.
    """
    if sol.flux is None:
        raise ValueError("solution carries no flux")
    u = sol.u
    n_last = u.t.size - 1 if t_index is None else int(t_index)
    psi_nodes = np.asarray(psi(u.x) if callable(psi) else psi, dtype=float).reshape(-1)
    sw = u.space_weights
    Gk = g_k(u.values, k)
    lhs = np.sum(sw[None, :] * psi_nodes[None, :] * (Gk - Gk[0][None, :]), axis=1)

    test = truncate_values(u.values, k) * psi_nodes[None, :]
    grad_test = _node_grad_fields(sol, test)
    alpha = sol.flux.vector()
    diss = np.sum(sol.grad.space_weights[None, :] * np.sum(alpha * grad_test, axis=-1), axis=1)
    f = _source_nodes(sol)
    work = np.sum(sw[None, :] * f * test, axis=1)
    tw = u.time_weights
    rhs = np.cumsum(tw * (-diss + work))
    sel = slice(0, n_last + 1)
    return EnergyReport(list(map(float, u.t[sel])), list(map(float, lhs[sel])), list(map(float, rhs[sel])),
                        label=f"local k={k:g}")


def _source_nodes(sol: Solution):
    u = sol.u
    n_t, n_s = u.values.shape
    t = np.repeat(u.t, n_s)
    x = np.tile(u.x, (n_t, 1))
    return np.asarray(sol.spec.source(t, x), dtype=float).reshape(n_t, n_s)


def global_energy_residual(sol: Solution, t_index: Optional[int] = None) -> EnergyReport:
    """``lhs = 1/2 int [u(t)**2 - u0**2]`` against ``rhs = -int_0^t int A . grad u + int_0^t int f u``.

    Isotropic families are labeled "equality expected"; the scheme leaves a
    nonpositive gap of ``-1/2 sum |u^{n+1} - u^n|**2`` minus the theta work.
    """
    u = sol.u
    n_last = u.t.size - 1 if t_index is None else int(t_index)
    sw = u.space_weights
    sq = np.sum(sw[None, :] * u.values**2, axis=1)
    lhs = 0.5 * (sq - sq[0])
    g = sol.grad
    diss = np.sum(g.space_weights[None, :] * np.sum(sol.flux.vector() * g.vector(), axis=-1), axis=1)
    work = np.sum(sw[None, :] * _source_nodes(sol) * u.values, axis=1)
    rhs = np.cumsum(u.time_weights * (-diss + work))
    iso = sol.spec.operator.governing.isotropic
    sel = slice(0, n_last + 1)
    return EnergyReport(list(map(float, u.t[sel])), list(map(float, lhs[sel])), list(map(float, rhs[sel])),
                        label="equality expected" if iso else "inequality expected: lhs <= rhs + tol")


def energy_data_scale(sol: Solution) -> float:
    """``1/2 |u0|^2 + int |f| |u|``: the magnitude against which energy residuals are judged."""
    u = sol.u
    sw = u.space_weights
    work = np.sum(u.time_weights[:, None] * sw[None, :] * np.abs(_source_nodes(sol) * u.values))
    return float(0.5 * np.sum(sw * u.values[0] ** 2) + work)


# --------------------------------------------------------------------------
# Modular diagnostics
# --------------------------------------------------------------------------


def boundary_modular_decay(sol: Solution, M: NFunction, j_list: Sequence[int], *, C: float = 1.0,
                           t_index: Optional[int] = None):
    """Modular of ``u grad psi_j / C_u`` over ``(0, t) x Omega`` for each ``j``.

    ``C_u = C * luxemburg_norm(M, grad u)``.  Returns a list of
    ``{"param": j, "value": ...}``.
    """
    if not M.isotropic:
        raise ValueError("boundary decay needs an isotropic N-function")
    grid = sol.grid
    j_list = [int(j) for j in j_list]
    if any(b <= a for a, b in zip(j_list, j_list[1:])):
        raise ValueError("j_list must be increasing")
    hmax = max(grid.h)
    if 1.0 / (2 * j_list[-1]) < 2.0 * hmax * (1 - 1e-12):
        raise ResolutionError(f"grid spacing {hmax:g} cannot resolve the cutoff layer of j={j_list[-1]}")
    n_last = sol.u.t.size - 1 if t_index is None else int(t_index)
    grad = sol.grad.time_slice(n_last)
    u = sol.u.time_slice(n_last)
    norm = luxemburg_norm(M, grad)
    if norm == 0.0:
        return [{"param": j, "value": 0.0} for j in j_list]
    Cu = C * norm
    curve = []
    for j in j_list:
        psi = CutoffFamily(j, grid.extents)
        gpsi = psi.gradient(u.x)
        field = u.like(u.values[..., None] * gpsi[None, :, :] / Cu)
        curve.append({"param": j, "value": modular(M, field, 1.0)})
    return curve


def approximation_diagnostic(sol: Solution, k: float, psi, eps_list: Sequence[float], M: NFunction,
                             lams: Sequence[float] = (1.0, 0.5)):
    """Modular distance between ``grad (T_k(u^eps) psi)^eps`` and ``grad (T_k(u) psi)``.

    ``u^eps`` is spatial mollification.  Returns ``{lam: [{"param": eps, "value": d}]}``.
    Each ``eps`` must satisfy ``eps <= dist(supp psi, boundary) / 2``.
    """
    grid = sol.grid
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing")
    u = sol.u
    psi_nodes = np.asarray(psi(u.x) if callable(psi) else psi, dtype=float).reshape(-1)
    if isinstance(psi, CutoffFamily):
        limit = 0.5 * psi.support_distance
        if eps_list[0] > limit * (1 + 1e-12):
            raise ResolutionError(f"eps={eps_list[0]:g} exceeds half the cutoff's distance to the boundary")
    G = sol.gradient
    ref_nodes = truncate_values(u.values, k) * psi_nodes[None, :]
    ref = sol.grad.like(_node_grad_fields(sol, ref_nodes))
    out = {float(lam): [] for lam in lams}
    for eps in eps_list:
        inner = mollify_space(u, grid, eps)
        outer = mollify_space(u.like(truncate_values(inner.values, k) * psi_nodes[None, :]), grid, eps)
        approx = sol.grad.like(_node_grad_fields(sol, outer.values))
        for lam in lams:
            out[float(lam)].append({"param": eps, "value": modular_distance(M, approx, ref, lam)})
    return out


# --------------------------------------------------------------------------
# Uniqueness
# --------------------------------------------------------------------------


@dataclass
class UniquenessReport:
    l2l2: float
    linf: float
    pairing: float
    repeat_linf: Optional[float] = None
    runs: list = field(default_factory=list)


def monotone_pairing(a: Solution, b: Solution) -> float:
    """``int int [A(grad u) - A(grad v)] . [grad u - grad v]``."""
    dA = a.flux.vector() - b.flux.vector()
    dg = a.grad.vector() - b.grad.vector()
    return a.grad.integral(np.sum(dA * dg, axis=-1))


def uniqueness_probe(spec: ProblemSpec, config: SolverConfig, *, theta0_pair=(1e-2, 1e-3),
                     guesses=("previous", "zero"), repeat=False) -> UniquenessReport:
    """Solve twice with different Newton starts and theta schedules; compare."""
    cfg_a = replace(config, theta0=theta0_pair[0], initial_guess=guesses[0])
    cfg_b = replace(config, theta0=theta0_pair[1], initial_guess=guesses[1])
    a = solve(spec, cfg_a, traces=False)
    b = solve(spec, cfg_b, traces=False)
    diff = a.u.values - b.u.values
    rep = UniquenessReport(
        l2l2=l2l2_difference(a.u, b.u),
        linf=float(np.max(np.abs(diff))),
        pairing=monotone_pairing(a, b),
        runs=[{"theta0": cfg_a.theta0, "initial_guess": cfg_a.initial_guess},
              {"theta0": cfg_b.theta0, "initial_guess": cfg_b.initial_guess}],
    )
    if repeat:
        a2 = solve(spec, cfg_a, traces=False)
        rep.repeat_linf = float(np.max(np.abs(a2.u.values - a.u.values)))
    return rep
