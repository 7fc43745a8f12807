"""Discrete Musielak-Orlicz machinery on tensor-product space-time grids.

Fields carry their own sample locations and quadrature weights, so a
modular is simply ``sum(w * M(t, x, xi / lam))``.  Sums go through
``numpy.sum`` on contiguous arrays, which reduces pairwise and therefore
deterministically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .nfunction import NFunction, conjugate_of

LAMBDA_RTOL = 1e-10
LAMBDA_MAX_ITER = 200


class GridMismatchError(ValueError):
    """Two fields do not live on the same samples."""


# --------------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Axis-aligned box ``prod [lo_i, hi_i]`` (d = 1 or 2) times ``[t0, T]``.

    Time nodes are uniform with step ``dt`` plus every breakpoint in
    ``(t0, T)``; a uniform node closer than ``1e-9 * dt`` to a breakpoint is
    replaced by it.  ``T - t0`` need not be a multiple of ``dt``: the last
    step is shortened.
    """

    extents: tuple
    cells: tuple
    T: float
    dt: float
    breakpoints: tuple = ()
    t0: float = 0.0

    def __post_init__(self):
        ext = tuple((float(a), float(b)) for a, b in self.extents)
        cells = tuple(int(n) for n in self.cells)
        if len(ext) not in (1, 2) or len(cells) != len(ext):
            raise ValueError("grid needs one or two axes with matching cell counts")
        if any(b <= a for a, b in ext) or any(n < 2 for n in cells):
            raise ValueError("each axis needs hi > lo and at least two cells")
        if not (self.T > self.t0 and self.dt > 0):
            raise ValueError("need T > t0 and dt > 0")
        bp = tuple(sorted(float(b) for b in self.breakpoints))
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def dim(self):
        return len(self.cells)

    @property
    def h(self):
        return tuple((b - a) / n for (a, b), n in zip(self.extents, self.cells))

    @property
    def volume(self):
        return float(np.prod([b - a for a, b in self.extents]))

    @property
    def times(self):
        span = self.T - self.t0
        n = int(np.ceil(span / self.dt - 1e-9))
        uniform = self.t0 + self.dt * np.arange(n + 1)
        uniform[-1] = self.T
        snap = 1e-9 * self.dt
        inside = [b for b in self.breakpoints if self.t0 < b < self.T]
        keep = [t for t in uniform if all(abs(t - b) > snap for b in inside)]
        return np.array(sorted(keep + inside))

    @property
    def dts(self):
        return np.diff(self.times)

    @property
    def node_shape(self):
        return tuple(n + 1 for n in self.cells)

    def axes(self):
        return [np.linspace(a, b, n + 1) for (a, b), n in zip(self.extents, self.cells)]

    def nodes(self):
        """Node coordinates, shape ``(n_nodes, d)``, axis 0 varying slowest."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def node_weights(self):
        """Trapezoid weights per node; boundary nodes carry half (or quarter) cells."""
        per_axis = []
        for h, n in zip(self.h, self.cells):
            w = np.full(n + 1, h)
            w[0] = w[-1] = 0.5 * h
            per_axis.append(w)
        w = per_axis[0]
        for extra in per_axis[1:]:
            w = np.multiply.outer(w, extra)
        return w.ravel()

    def boundary_mask(self):
        mask = np.zeros(self.node_shape, dtype=bool)
        if self.dim == 1:
            mask[[0, -1]] = True
        else:
            mask[[0, -1], :] = True
            mask[:, [0, -1]] = True
        return mask.ravel()

    def dist_to_boundary(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        d = np.full(x.shape[0], np.inf)
        for a, (lo, hi) in enumerate(self.extents):
            d = np.minimum(d, np.minimum(x[:, a] - lo, hi - x[:, a]))
        return d

    def time_weights(self):
        """Right-endpoint rule: level ``n`` carries ``t_n - t_{n-1}``, level 0 nothing."""
        return np.concatenate([[0.0], self.dts])

    def with_time(self, *, t0=None, T=None, dt=None, breakpoints=None):
        return SpaceTimeGrid(
            self.extents,
            self.cells,
            self.T if T is None else T,
            self.dt if dt is None else dt,
            self.breakpoints if breakpoints is None else breakpoints,
            self.t0 if t0 is None else t0,
        )

    def with_cells(self, cells):
        return SpaceTimeGrid(self.extents, tuple(cells), self.T, self.dt, self.breakpoints, self.t0)


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------


@dataclass
class DiscreteField:
    """Samples of a scalar or vector quantity over time levels and spatial points.

    ``values`` has shape ``(n_t, n_s)`` (scalar) or ``(n_t, n_s, d)`` (vector);
    ``t`` has shape ``(n_t,)``, ``x`` shape ``(n_s, dim)``.  The quadrature
    weight of sample ``(i, j)`` is ``time_weights[i] * space_weights[j]``.
    """

    values: np.ndarray
    t: np.ndarray
    x: np.ndarray
    time_weights: np.ndarray
    space_weights: np.ndarray
    boundary_zero: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.time_weights = np.asarray(self.time_weights, dtype=float)
        self.space_weights = np.asarray(self.space_weights, dtype=float)
        n_t, n_s = self.t.shape[0], self.x.shape[0]
        if self.values.shape[:2] != (n_t, n_s):
            raise GridMismatchError(f"values shape {self.values.shape} does not match ({n_t}, {n_s})")
        if self.values.ndim == 3 and self.values.shape[2] != self.x.shape[1]:
            raise GridMismatchError("vector arity must match the spatial dimension")
        if self.time_weights.shape != (n_t,) or self.space_weights.shape != (n_s,):
            raise GridMismatchError("weight arrays do not match the samples")

    @property
    def is_vector(self):
        return self.values.ndim == 3

    @property
    def weights(self):
        return np.multiply.outer(self.time_weights, self.space_weights)

    def like(self, values, **meta):
        return DiscreteField(values, self.t, self.x, self.time_weights, self.space_weights,
                             self.boundary_zero, {**self.meta, **meta})

    def vector(self):
        """Vector view: scalar fields become one-component vectors."""
        return self.values if self.is_vector else self.values[..., None]

    def magnitude(self):
        v = self.vector()
        return np.sqrt(np.sum(v * v, axis=-1))

    def flat_samples(self):
        """``(t, x, xi, w)`` flattened over all samples."""
        n_t, n_s = self.values.shape[:2]
        t = np.repeat(self.t, n_s)
        x = np.tile(self.x, (n_t, 1))
        xi = self.vector().reshape(n_t * n_s, -1)
        return t, x, xi, self.weights.reshape(-1)

    def integral(self, values=None):
        vals = self.values if values is None else np.asarray(values, dtype=float)
        return float(np.sum(self.weights * vals))

    def time_slice(self, upto):
        """Levels ``0..upto`` inclusive."""
        s = slice(0, upto + 1)
        return DiscreteField(self.values[s], self.t[s], self.x, self.time_weights[s],
                             self.space_weights, self.boundary_zero, dict(self.meta))

    @classmethod
    def constant(cls, grid: SpaceTimeGrid, value, vector=True):
        """Constant field on cell midpoints with midpoint weights (sum ``T |Omega|``)."""
        mids = [0.5 * (a[1:] + a[:-1]) for a in grid.axes()]
        mesh = np.meshgrid(*mids, indexing="ij")
        x = np.stack([m.ravel() for m in mesh], axis=1)
        sw = np.full(x.shape[0], float(np.prod(grid.h)))
        times = grid.times
        t = 0.5 * (times[1:] + times[:-1])
        tw = grid.dts
        value = np.asarray(value, dtype=float)
        shape = (t.size, x.shape[0]) + ((grid.dim,) if vector else ())
        return cls(np.broadcast_to(value, shape).copy(), t, x, tw, sw)

    @classmethod
    def on_cells(cls, grid: SpaceTimeGrid, fn, vector=True):
        """Field sampled from ``fn(t, x)`` at space-time cell midpoints."""
        base = cls.constant(grid, 0.0, vector=vector)
        tt = np.repeat(base.t, base.x.shape[0])
        xx = np.tile(base.x, (base.t.size, 1))
        vals = np.asarray(fn(tt, xx), dtype=float).reshape(base.values.shape)
        return base.like(vals)


def _check_same(a: DiscreteField, b: DiscreteField):
    if a.values.shape != b.values.shape or not (
        np.array_equal(a.t, b.t) and np.array_equal(a.x, b.x)
        and np.array_equal(a.time_weights, b.time_weights)
        and np.array_equal(a.space_weights, b.space_weights)
    ):
        raise GridMismatchError("fields live on different samples")


# --------------------------------------------------------------------------
# Modulars and norms
# --------------------------------------------------------------------------


def modular(M: NFunction, xi: DiscreteField, lam: float = 1.0) -> float:
    """Quadrature of ``M(t, x, xi / lam)`` over the field's samples."""
    if not lam > 0:
        raise ValueError("modular scale lambda must be positive")
    t, x, v, w = xi.flat_samples()
    if v.shape[1] != M.dim:
        raise GridMismatchError(f"field arity {v.shape[1]} does not match N-function dimension {M.dim}")
    keep = w > 0
    if not keep.any():
        return 0.0
    vals = M.eval(t[keep], x[keep], v[keep] / lam)
    return float(np.sum(w[keep] * vals))


def luxemburg_norm(M: NFunction, xi: DiscreteField, *, rtol=LAMBDA_RTOL, max_iter=LAMBDA_MAX_ITER) -> float:
    """``inf{lam > 0 : modular(M, xi, lam) <= 1}`` by bisection on ``lam``.

    The returned value is the upper end of the final bracket, so the unit
    ball test ``modular(M, xi / norm) <= 1`` holds by construction.
    """
    if not np.any(xi.values):
        return 0.0
    hi = 1.0
    while modular(M, xi, hi) > 1.0:
        hi *= 2.0
    lo = 0.5 * hi
    while modular(M, xi, lo) <= 1.0:
        hi, lo = lo, 0.5 * lo
        if lo == 0.0:
            return hi
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if modular(M, xi, mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def modular_distance(M: NFunction, xi: DiscreteField, eta: DiscreteField, lam: float = 1.0) -> float:
    """``modular(M, xi - eta, lam)``, the modular-convergence functional."""
    _check_same(xi, eta)
    return modular(M, xi.like(xi.values - eta.values), lam)


def modular_distance_sweep(M, xi, eta, lams: Sequence[float] = (1.0, 0.5, 0.25)) -> dict:
    return {float(lam): modular_distance(M, xi, eta, lam) for lam in lams}


@dataclass
class InequalityReport:
    lhs: float
    rhs_I1: float
    rhs_I2: float
    norm_M: float
    norm_Mstar: float

    @property
    def slack_I1(self):
        return self.rhs_I1 - self.lhs

    @property
    def slack_I2(self):
        return self.rhs_I2 - self.lhs

    def holds(self, tol=1e-10):
        scale = 1.0 + abs(self.lhs)
        return self.slack_I1 >= -tol * scale and self.slack_I2 >= -tol * scale


def holder_check(M: NFunction, xi: DiscreteField, eta: DiscreteField, Mstar: Optional[NFunction] = None):
    """Young-type (I1) and Hölder-type (I2) bounds for ``int xi . eta``."""
    _check_same(xi, eta)
    Mstar = Mstar or conjugate_of(M)
    lhs = xi.integral(np.sum(xi.vector() * eta.vector(), axis=-1))
    rhs1 = modular(M, xi, 1.0) + modular(Mstar, eta, 1.0)
    nx = luxemburg_norm(M, xi)
    ny = luxemburg_norm(Mstar, eta)
    return InequalityReport(lhs, rhs1, 2.0 * nx * ny, nx, ny)


def tail_mass_curve(xi: DiscreteField, fractions: Sequence[float] = (0.2, 0.1, 0.05, 0.02, 0.01)):
    """Quadrature mass of ``|xi|`` on the given top fractions of samples by ``|xi|``.

    The finite analogue of equi-integrability: the curve should fall as
    the fraction shrinks.
    """
    mag = xi.magnitude().reshape(-1)
    w = xi.weights.reshape(-1)
    keep = w > 0
    mag, w = mag[keep], w[keep]
    order = np.argsort(-mag, kind="stable")
    out = []
    for s in fractions:
        k = max(1, int(round(s * mag.size)))
        idx = order[:k]
        out.append({"param": float(s), "value": float(np.sum(w[idx] * mag[idx]))})
    return out
