"""Epanechnikov kernel, boundary-corrected kernels and their s-integrals.

Two boundary corrections live here. :func:`boundary_kernel` renormalises
``k_h(u - v)`` by its exact integral over ``[lo, hi]``. :class:`GridKernel`
renormalises by the trapezoid sum over an evaluation grid instead, so that
every grid integral of the kernel in its evaluation argument is exactly one.
The estimators use the grid version; see the README for why.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .data import DimensionGrid

__all__ = [
    "KernelSpec",
    "kernel_value",
    "kernel_cdf",
    "boundary_normalizer",
    "boundary_kernel",
    "gauss_legendre",
    "kernel_moment_integral",
    "GridKernel",
]


def kernel_value(u):
    """Epanechnikov kernel ``0.75 (1 - u^2)`` on ``[-1, 1]``."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def kernel_cdf(u):
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    return 0.5 + 0.75 * (u - u ** 3 / 3.0)


@dataclass(frozen=True)
class KernelSpec:
    family: str = "epanechnikov"
    support_radius: float = 1.0

    def __post_init__(self):
        if self.family != "epanechnikov":
            raise ValueError(f"unsupported kernel family {self.family!r}")

    def __call__(self, u):
        return kernel_value(u)

    def cdf(self, u):
        return kernel_cdf(u)

    @property
    def second_moment(self) -> float:
        return 0.2


def boundary_normalizer(v, h, lo, hi):
    """``int_lo^hi k_h(s - v) ds`` in closed form."""
    v = np.asarray(v, dtype=float)
    return kernel_cdf((hi - v) / h) - kernel_cdf((lo - v) / h)


def boundary_kernel(u, v, h, lo, hi):
    """Boundary-corrected kernel ``k_h(u, v)``; integrates to one over ``u``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    inside = (u >= lo) & (u <= hi) & (v >= lo) & (v <= hi)
    norm = boundary_normalizer(v, h, lo, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = kernel_value((u - v) / h) / (h * norm)
    return np.where(inside & (norm > 0), out, 0.0)


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(int(order))
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _piecewise_gauss(func, breaks, order):
    """Integrate ``func`` over consecutive ``breaks`` with Gauss-Legendre per piece."""
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1], breaks[1:]
    keep = b > a
    if not keep.any():
        return 0.0
    a, b = a[keep], b[keep]
    gx, gw = gauss_legendre(order)
    half = 0.5 * (b - a)
    s = (0.5 * (a + b))[:, None] + half[:, None] * gx[None, :]
    return float(np.sum(func(s) * (half[:, None] * gw[None, :])))


def kernel_moment_integral(x, a, b, h, lo, hi, power=0, order=16):
    """``int_a^b ((x - s)/h)^power k_h(x, s) ds`` for the exact boundary kernel.

    The integrand is polynomial where the normaliser is one and rational
    within ``h`` of the boundary; splitting at ``lo + h``, ``hi - h`` and
    ``x -+ h`` makes each piece smooth, so Gauss-Legendre of ``order`` nodes
    is exact on the polynomial pieces and accurate to rounding elsewhere.
    """
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    if power not in (0, 1, 2):
        raise ValueError(f"power must be 0, 1 or 2, got {power}")
    a, b = max(a, lo, x - h), min(b, hi, x + h)
    if a >= b:
        return 0.0
    cuts = [c for c in (lo + h, hi - h) if a < c < b]
    breaks = np.array(sorted([a, b, *cuts]))

    def integrand(s):
        return ((x - s) / h) ** power * boundary_kernel(x, s, h, lo, hi)

    return _piecewise_gauss(integrand, breaks, order)


def _hat_matrix(v, nodes, lo, step):
    """Linear-interpolation weights of ``v`` on the grid, shape ``(len(v), g)``."""
    g = nodes.size
    t = (v - lo) / step
    i = np.clip(np.floor(t).astype(int), 0, g - 2)
    frac = t - i
    out = np.zeros((v.size, g))
    rows = np.arange(v.size)
    out[rows, i] = 1.0 - frac
    out[rows, i + 1] = frac
    inside = (v >= lo - 1e-12 * step) & (v <= nodes[-1] + 1e-12 * step)
    out[~inside] = 0.0
    return out


class _Antiderivative:
    """Tabulated ``G(u) = int_lo^u F(v) dv`` for a matrix-valued ``F``.

    ``F`` must be smooth between consecutive ``breaks``; values at the
    breaks are cached and the remainder of the last piece is integrated
    on demand with Gauss-Legendre.
    """

    def __init__(self, func, breaks, order, chunk=2048):
        self.func = func
        self.breaks = np.asarray(breaks, dtype=float)
        self.order = order
        self.chunk = chunk
        gx, gw = gauss_legendre(order)
        a, b = self.breaks[:-1], self.breaks[1:]
        half = 0.5 * (b - a)
        s = (0.5 * (a + b))[:, None] + half[:, None] * gx[None, :]
        vals = func(s.ravel())
        vals = vals.reshape(a.size, order, *vals.shape[1:])
        pieces = np.einsum("mq,mq...->m...", half[:, None] * gw[None, :], vals)
        cum = np.zeros((self.breaks.size, *pieces.shape[1:]))
        np.cumsum(pieces, axis=0, out=cum[1:])
        self.cum = cum

    def __call__(self, u):
        u = np.clip(np.asarray(u, dtype=float), self.breaks[0], self.breaks[-1])
        idx = np.clip(np.searchsorted(self.breaks, u, side="right") - 1, 0, self.breaks.size - 2)
        out = self.cum[idx].copy()
        left = self.breaks[idx]
        todo = np.flatnonzero(u > left)
        gx, gw = gauss_legendre(self.order)
        for start in range(0, todo.size, self.chunk):
            sel = todo[start:start + self.chunk]
            half = 0.5 * (u[sel] - left[sel])
            s = (0.5 * (u[sel] + left[sel]))[:, None] + half[:, None] * gx[None, :]
            vals = self.func(s.ravel())
            vals = vals.reshape(sel.size, self.order, *vals.shape[1:])
            out[sel] += np.einsum("mq,mq...->m...", half[:, None] * gw[None, :], vals)
        return out


class GridKernel:
    """Boundary-corrected kernel on one grid dimension, normalised by the grid.

    For a data value ``v`` in ``[lo, hi]`` the weights ``F0[x] = k_h(x - v) / N(v)``
    with ``N(v) = sum_x w_x k_h(x - v)`` satisfy ``sum_x w_x F0[x] = 1``
    exactly, where ``w`` are the trapezoid weights of the grid.

    Parameters
    ----------
    grid : DimensionGrid
    bandwidth : float
        Must exceed the grid step so every data value sees a grid node.
    order : int
        Gauss-Legendre nodes per smooth piece for s-integrals.
    """

    def __init__(self, grid: DimensionGrid, bandwidth: float, order: int = 16):
        if not bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
        if bandwidth < grid.step:
            raise ValueError(
                f"bandwidth {bandwidth} is smaller than the grid step {grid.step}; "
                "refine the grid or widen the bandwidth")
        self.grid = grid
        self.h = float(bandwidth)
        self.order = int(order)
        self.nodes = grid.nodes
        self.weights = grid.weights
        self._tables = {}

    @property
    def size(self) -> int:
        return self.nodes.size

    def _inside(self, v):
        return self.grid.contains(v)

    def normalizer(self, v):
        v = np.asarray(v, dtype=float).ravel()
        raw = kernel_value((self.nodes[None, :] - v[:, None]) / self.h) / self.h
        return raw @ self.weights

    def features(self, v, max_power=0):
        """Kernel weights times ``((x - v)/h)^p`` for ``p = 0..max_power``.

        Returns an array of shape ``(len(v), max_power + 1, g)``.
        """
        v = np.asarray(v, dtype=float).ravel()
        u = (self.nodes[None, :] - v[:, None]) / self.h
        raw = np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0) / self.h
        norm = raw @ self.weights
        ok = self._inside(v) & (norm > 0)
        scale = np.divide(1.0, norm, out=np.zeros_like(norm), where=ok)
        out = np.empty((v.size, max_power + 1, self.size))
        out[:, 0] = raw * scale[:, None]
        for p in range(1, max_power + 1):
            out[:, p] = out[:, p - 1] * u
        return out

    def hat(self, v, max_power=0):
        """Linear interpolation weights times ``((x - v)/h)^p``, shape ``(len(v), P + 1, g)``."""
        v = np.asarray(v, dtype=float).ravel()
        out = np.empty((v.size, max_power + 1, self.size))
        out[:, 0] = _hat_matrix(v, self.nodes, self.grid.lo, self.grid.step)
        if max_power:
            u = (self.nodes[None, :] - v[:, None]) / self.h
            for p in range(1, max_power + 1):
                out[:, p] = out[:, p - 1] * u
        return out

    def breakpoints(self, basis="kernel"):
        lo, hi = self.grid.lo, self.grid.hi
        if basis == "hat":
            return self.nodes.copy()
        pts = np.concatenate([self.nodes - self.h, self.nodes + self.h, [lo, hi]])
        pts = pts[(pts >= lo) & (pts <= hi)]
        return np.unique(pts)

    def evaluate(self, v, basis="kernel", max_power=0):
        if basis == "hat":
            return self.hat(v, max_power)
        return self.features(v, max_power)

    def _table(self, basis, max_power):
        key = (basis, max_power)
        if key not in self._tables:
            self._tables[key] = _Antiderivative(
                lambda v: self.evaluate(v, basis, max_power),
                self.breakpoints(basis), self.order)
        return self._tables[key]

    def integrate(self, a, b, basis="kernel", max_power=0):
        """``int_a^b F(v) dv`` for arrays of limits; shape ``(len(a), P, g)``."""
        a = np.asarray(a, dtype=float).ravel()
        b = np.asarray(b, dtype=float).ravel()
        table = self._table(basis, max_power)
        return table(b) - table(a)
