"""Implicit Euler / summation-by-parts solver for ``u_t = div A(t, x, grad u) + f``
with homogeneous Dirichlet data, wrapped in the theta-regularization cascade.

Space: forward differences on cells.  In 1-D each cell carries one gradient
sample with weight ``h``; in 2-D each cell is split into two triangles with
weight ``hx * hy / 2`` and a piecewise-linear gradient.  The divergence is
defined as ``div_h = -W_n^{-1} G^T W_g``, which makes
``<div_h q, v> = -<q, grad_h v>`` an algebraic identity.

Time: each step solves ``R(u) = u - u_prev - dt (div_h A(t_next, grad_h u) + f(t_next)) = 0``
by damped Newton, with a Picard (frozen-coefficient) fallback.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .morlicz import DiscreteField, SpaceTimeGrid, modular
from .nfunction import YoungFunction, conjugate_of, conjugate_young, gradient_young
from .operators import MonotoneOperator, RegularizedOperator, default_dominating_young

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    """Newton and Picard both failed; carries the last iterate and residual history."""

    def __init__(self, message, t, iterate, history, partial=None):
        super().__init__(message)
        self.t = t
        self.iterate = iterate
        self.history = history
        self.partial = partial


class InvariantViolation(RuntimeError):
    """An asserted discrete identity failed."""


# --------------------------------------------------------------------------
# Discrete gradient
# --------------------------------------------------------------------------


class DiscreteGradient:
    """Forward-difference gradient from interior nodes to cell (or triangle) samples."""

    def __init__(self, grid: SpaceTimeGrid):
        self.grid = grid
        shape = grid.node_shape
        interior = ~grid.boundary_mask()
        self.interior = np.flatnonzero(interior)
        self.n_nodes = int(np.prod(shape))
        self.n = self.interior.size
        col_of = -np.ones(self.n_nodes, dtype=np.int64)
        col_of[self.interior] = np.arange(self.n)
        self.node_x = grid.nodes()
        h = grid.h

        if grid.dim == 1:
            (nx,) = grid.cells
            cells = np.arange(nx)
            self.sample_x = (0.5 * (self.node_x[cells, 0] + self.node_x[cells + 1, 0]))[:, None]
            self.sample_w = np.full(nx, h[0])
            self.G = [self._diff(col_of, cells + 1, cells, h[0], nx)]
        else:
            nx, ny = grid.cells
            ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
            ii, jj = ii.ravel(), jj.ravel()
            node = lambda i, j: i * (ny + 1) + j
            nc = ii.size
            # lower triangle: (i,j),(i+1,j),(i,j+1); upper: (i+1,j+1),(i,j+1),(i+1,j)
            gx = sp.vstack([
                self._diff(col_of, node(ii + 1, jj), node(ii, jj), h[0], nc),
                self._diff(col_of, node(ii + 1, jj + 1), node(ii, jj + 1), h[0], nc),
            ]).tocsr()
            gy = sp.vstack([
                self._diff(col_of, node(ii, jj + 1), node(ii, jj), h[1], nc),
                self._diff(col_of, node(ii + 1, jj + 1), node(ii + 1, jj), h[1], nc),
            ]).tocsr()
            self.G = [gx, gy]
            x0 = self.node_x[node(ii, jj)]
            lower = x0 + np.array([h[0], h[1]]) / 3.0
            upper = x0 + 2.0 * np.array([h[0], h[1]]) / 3.0
            self.sample_x = np.vstack([lower, upper])
            self.sample_w = np.full(2 * nc, 0.5 * h[0] * h[1])
        self.node_w = np.full(self.n, float(np.prod(h)))
        self.x_interior = self.node_x[self.interior]
        self.n_samples = self.sample_x.shape[0]
        # G^T W_g, per axis, cached for divergence and Jacobian assembly
        self._GtW = [(g.T @ sp.diags(self.sample_w)).tocsr() for g in self.G]

    def _diff(self, col_of, plus, minus, h, rows):
        r = np.arange(rows)
        data, ri, ci = [], [], []
        for nodes, sign in ((plus, 1.0 / h), (minus, -1.0 / h)):
            cols = col_of[nodes]
            keep = cols >= 0
            data.append(np.full(keep.sum(), sign))
            ri.append(r[keep])
            ci.append(cols[keep])
        return sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(rows, self.n)
        )

    def __call__(self, u):
        """Gradient samples ``(n_samples, d)`` of interior values ``u``."""
        return np.stack([g @ u for g in self.G], axis=1)

    def divergence(self, q):
        """``div_h q = -W_n^{-1} G^T W_g q`` on interior nodes."""
        out = np.zeros(self.n)
        for a, gtw in enumerate(self._GtW):
            out -= gtw @ q[:, a]
        return out / self.node_w

    def full(self, u_interior):
        out = np.zeros(self.n_nodes)
        out[self.interior] = u_interior
        return out

    def inner_nodes(self, a, b):
        return float(np.sum(self.node_w * a * b))

    def inner_samples(self, p, q):
        return float(np.sum(self.sample_w[:, None] * p * q))

    def stiffness(self, blocks):
        """``sum_ab G_a^T W_g diag(blocks[:, a, b]) G_b`` as a sparse matrix."""
        d = len(self.G)
        K = None
        for a in range(d):
            for b in range(d):
                term = self._GtW[a] @ sp.diags(blocks[:, a, b]) @ self.G[b]
                K = term if K is None else K + term
        return K.tocsc()

    def adjointness_residual(self, rng=None):
        """``|<div_h q, v> + <q, grad_h v>|`` on random fields."""
        rng = rng or np.random.default_rng(0)
        v = rng.standard_normal(self.n)
        q = rng.standard_normal((self.n_samples, len(self.G)))
        return abs(self.inner_nodes(self.divergence(q), v) + self.inner_samples(q, self(v)))


# --------------------------------------------------------------------------
# Problem and configuration
# --------------------------------------------------------------------------


@dataclass
class ProblemSpec:
    grid: SpaceTimeGrid
    operator: MonotoneOperator
    source: Callable  # f(t, x) with t: (n,), x: (n, d)
    initial: Callable  # u0(x) with x: (n, d)
    m: Optional[YoungFunction] = None  # dominating Young function for theta terms

    def __post_init__(self):
        if self.operator.dim != self.grid.dim:
            raise ValueError("operator dimension does not match the grid")
        if self.m is None:
            self.m = default_dominating_young(self.operator.governing)

    def u0_nodes(self):
        x = self.grid.nodes()
        u0 = np.asarray(self.initial(x), dtype=float).reshape(-1)
        if not np.all(np.isfinite(u0)):
            raise ValueError("initial datum must be bounded")
        bdry = self.grid.boundary_mask()
        if np.max(np.abs(u0[bdry]), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(u0))):
            raise ValueError("initial datum must vanish on the boundary")
        u0 = u0.copy()
        u0[bdry] = 0.0
        return u0

    def with_grid(self, grid):
        return replace(self, grid=grid)


@dataclass
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton: int = 50
    max_halvings: int = 20
    max_failed_searches: int = 3
    theta0: float = 1e-2
    theta_min: float = 1e-6
    picard_fallback: bool = True
    max_picard: int = 500
    delta_reg: float = 1e-8
    initial_guess: str = "warm"  # warm | previous | zero
    check_energy: bool = True
    energy_tol: float = 1e-10

    def __post_init__(self):
        if self.newton_tol <= 0 or self.max_newton < 1 or self.delta_reg < 0:
            raise ValueError("solver tolerances must be positive")
        if self.theta0 < 0 or self.theta_min < 0 or (self.theta0 > 0 and self.theta_min > self.theta0):
            raise ValueError("need 0 <= theta_min <= theta0")
        if self.initial_guess not in ("warm", "previous", "zero"):
            raise ValueError(f"unknown initial guess {self.initial_guess!r}")

    def theta_schedule(self):
        """``theta0 * 2**-k`` while above ``theta_min``, then ``theta_min`` itself."""
        if self.theta0 == 0.0:
            return [0.0]
        out = []
        th = self.theta0
        while th > self.theta_min:
            out.append(th)
            th *= 0.5
        out.append(self.theta_min)
        return out


@dataclass
class StepInfo:
    t: float
    newton_iterations: int
    picard_iterations: int
    residual: float
    history: list
    energy_defect: float
    energy_bound: float


@dataclass
class Solution:
    grid: SpaceTimeGrid
    u: DiscreteField  # nodes, all levels, boundary included
    grad: DiscreteField  # gradient samples, all levels
    flux: DiscreteField  # A(t, x, grad u)
    theta: float
    steps: list
    theta_trace: list = field(default_factory=list)
    spec: Optional[ProblemSpec] = None
    gradient: Optional[DiscreteGradient] = None

    @property
    def times(self):
        return self.u.t


# --------------------------------------------------------------------------
# One implicit step
# --------------------------------------------------------------------------


class _StepSystem:
    def __init__(self, G: DiscreteGradient, op, t, dt, f_nodes, prev, delta):
        self.G, self.op, self.t, self.dt = G, op, t, dt
        self.f = f_nodes
        self.prev = prev
        self.delta = delta
        self.ts = np.full(G.n_samples, t)
        self.terms = op.flux_terms(self.ts, G.sample_x)

    def flux(self, xi):
        c, e = self.terms
        return kernels.radial_power_flux(np.ascontiguousarray(xi), c, e)

    def residual(self, u):
        return u - self.prev - self.dt * (self.G.divergence(self.flux(self.G(u))) + self.f)

    def jacobian(self, u):
        c, e = self.terms
        J = kernels.radial_power_jacobian(np.ascontiguousarray(self.G(u)), c, e, self.delta)
        K = self.G.stiffness(J)
        return (sp.identity(self.G.n, format="csc") + self.dt * sp.diags(1.0 / self.G.node_w) @ K).tocsc()

    def picard_matrix(self, u):
        xi = self.G(u)
        k = self.op.radial_coefficient(self.ts, self.G.sample_x, xi, self.delta)
        blocks = np.zeros((xi.shape[0], xi.shape[1], xi.shape[1]))
        for a in range(xi.shape[1]):
            blocks[:, a, a] = k
        K = self.G.stiffness(blocks)
        return (sp.identity(self.G.n, format="csc") + self.dt * sp.diags(1.0 / self.G.node_w) @ K).tocsc()


def _inf(v):
    return float(np.max(np.abs(v))) if v.size else 0.0


def step(G: DiscreteGradient, prev, t_next, dt, op, f_nodes, config: SolverConfig, init=None):
    """Solve one implicit Euler step; returns ``(u, StepInfo)``."""
    sys = _StepSystem(G, op, t_next, dt, f_nodes, prev, config.delta_reg)
    u = np.array(prev if init is None else init, dtype=float)
    R = sys.residual(u)
    rn = _inf(R)
    history = [rn]
    failed = 0
    its = 0
    while rn > config.newton_tol and its < config.max_newton and failed < config.max_failed_searches:
        its += 1
        du = spla.spsolve(sys.jacobian(u), -R)
        alpha = 1.0
        accepted = False
        for _ in range(config.max_halvings + 1):
            trial = u + alpha * du
            Rt = sys.residual(trial)
            rt = _inf(Rt)
            if rt < rn:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            failed += 1
        u, R, rn = trial, Rt, rt
        history.append(rn)

    picard = 0
    if rn > config.newton_tol and config.picard_fallback:
        while rn > config.newton_tol and picard < config.max_picard:
            picard += 1
            u = spla.spsolve(sys.picard_matrix(u), prev + dt * f_nodes)
            R = sys.residual(u)
            rn = _inf(R)
            history.append(rn)
        # polish with Newton from the Picard iterate
        extra = 0
        while rn > config.newton_tol and extra < config.max_newton:
            extra += 1
            cand = u + spla.spsolve(sys.jacobian(u), -R)
            Rc = sys.residual(cand)
            if _inf(Rc) >= rn:
                break
            u, R, rn = cand, Rc, _inf(Rc)
            history.append(rn)

    if not rn <= config.newton_tol:
        raise StepFailure(f"step to t={t_next:.6g} did not converge (residual {rn:.3e})", t_next, u, history)

    defect, bound = energy_defect(G, sys, u, prev, R)
    info = StepInfo(t_next, its, picard, rn, history, defect, bound)
    if config.check_energy and defect > bound:
        raise InvariantViolation(f"per-step energy identity violated at t={t_next:.6g}: {defect:.3e} > {bound:.3e}")
    return u, info


def energy_defect(G: DiscreteGradient, sys: _StepSystem, u, prev, R):
    """Per-step energy balance and its admissible size ``|R| |u| + 1e-10``.

    Balance: ``1/2|u|^2 - 1/2|prev|^2 + 1/2|u-prev|^2 + dt <A(grad u), grad u> - dt <f, u>``,
    which equals ``<R, u>`` exactly.
    """
    xi = G(u)
    du = u - prev
    balance = (
        0.5 * G.inner_nodes(u, u)
        - 0.5 * G.inner_nodes(prev, prev)
        + 0.5 * G.inner_nodes(du, du)
        + sys.dt * G.inner_samples(sys.flux(xi), xi)
        - sys.dt * G.inner_nodes(sys.f, u)
    )
    bound = np.sqrt(G.inner_nodes(R, R)) * np.sqrt(G.inner_nodes(u, u)) + 1e-10
    return abs(balance), bound


# --------------------------------------------------------------------------
# Full solve with theta cascade
# --------------------------------------------------------------------------


def _march(spec: ProblemSpec, G: DiscreteGradient, op, config: SolverConfig, warm=None):
    grid = spec.grid
    times = grid.times
    u0 = spec.u0_nodes()[G.interior]
    levels = [u0]
    infos = []
    for n in range(1, times.size):
        t = times[n]
        dt = times[n] - times[n - 1]
        f = np.asarray(spec.source(np.full(G.n, t), G.x_interior), dtype=float).reshape(-1)
        if config.initial_guess == "zero":
            init = np.zeros(G.n)
        elif config.initial_guess == "warm" and warm is not None:
            init = warm[n]
        else:
            init = levels[-1]
        try:
            u, info = step(G, levels[-1], t, dt, op, f, config, init=init)
        except StepFailure as exc:
            exc.partial = np.array(levels)
            raise
        levels.append(u)
        infos.append(info)
    return np.array(levels), infos


def _fields(spec, G, levels, base):
    grid = spec.grid
    times = grid.times
    full = np.array([G.full(u) for u in levels])
    tw = grid.time_weights()
    u = DiscreteField(full, times, grid.nodes(), tw, grid.node_weights(), boundary_zero=True)
    grads = np.array([G(v) for v in levels])
    grad = DiscreteField(grads, times, G.sample_x, tw, G.sample_w)
    flux = np.array([base.eval(np.full(G.n_samples, t), G.sample_x, g) for t, g in zip(times, grads)])
    return u, grad, grad.like(flux)


def theta_term_norm(sol: Solution, theta: float, m: YoungFunction) -> float:
    """``int |theta grad m(|grad u|)|`` over the space-time samples."""
    g = sol.grad
    term = theta * gradient_young(m, g.values)
    return g.integral(np.sqrt(np.sum(term * term, axis=-1)))


def bound_traces(sol: Solution, theta: float, m: YoungFunction, Mstar=None) -> dict:
    """Uniform-bound quantities C1..C4 for one cascade level."""
    M = sol.spec.operator.governing
    Mstar = Mstar or conjugate_of(M)
    u = sol.u
    l2 = np.sqrt(np.sum(u.values**2 * u.space_weights[None, :], axis=1))
    g = sol.grad
    r = g.magnitude()
    dm = m.derivative(r)
    c4 = g.integral(theta * conjugate_young(m, dm)) if theta > 0 else 0.0
    return {
        "C1": float(l2.max()),
        "C2": modular(M, g, 1.0),
        "C3": modular(Mstar, sol.flux, 1.0),
        "C4": float(c4),
    }


def solve(spec: ProblemSpec, config: Optional[SolverConfig] = None, *, traces: bool = True) -> Solution:
    """Run every theta in the schedule, warm-starting each from the previous one.

    The returned solution is the last (smallest) theta.  ``theta_trace`` lists,
    per theta, the theta-term norm and the traces C1..C4.
    """
    config = config or SolverConfig()
    G = DiscreteGradient(spec.grid)
    base = spec.operator
    Mstar = conjugate_of(base.governing) if traces else None
    warm = None
    trace = []
    sol = None
    for theta in config.theta_schedule():
        op = RegularizedOperator(base, theta, spec.m)
        levels, infos = _march(spec, G, op, config, warm)
        u, grad, flux = _fields(spec, G, levels, base)
        sol = Solution(spec.grid, u, grad, flux, theta, infos, spec=spec, gradient=G)
        if traces:
            entry = {"theta": theta, "theta_term": theta_term_norm(sol, theta, spec.m)}
            entry.update(bound_traces(sol, theta, spec.m, Mstar))
            entry["newton_iterations"] = int(sum(i.newton_iterations for i in infos))
            entry["picard_iterations"] = int(sum(i.picard_iterations for i in infos))
            trace.append(entry)
        log.debug("theta=%g done, %d steps", theta, len(infos))
        warm = levels
    sol.theta_trace = trace
    return sol


def l2l2_difference(a: DiscreteField, b: DiscreteField) -> float:
    """Discrete ``L2(0,T; L2)`` norm of ``a - b`` with the right-endpoint time rule."""
    d = a.values - b.values
    return float(np.sqrt(a.integral(d * d)))
