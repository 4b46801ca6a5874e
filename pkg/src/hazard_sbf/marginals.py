"""Kernel-weighted occurrence and exposure tables.

All tables are per-subject averages (divided by ``n``). One-dimensional
tables live on a single grid, pairwise tables on the product of two
grids. Local-linear tables carry the extra ``((x - X)/h)^p`` factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import EvaluationGrid, SurvivalDataset
from .kernel import GridKernel, gauss_legendre
from .model import FitConfig

__all__ = [
    "EXPOSURE_FLOOR",
    "DET_FLOOR",
    "LcMarginals",
    "LlMarginals",
    "Pilot",
    "build_lc_marginals",
    "build_ll_marginals",
    "build_classical_tables",
    "pilot_estimates",
    "lc_pilot",
    "ll_pilot",
    "TableBuilder",
]

EXPOSURE_FLOOR = 1e-10
DET_FLOOR = 1e-12


def supported_mask(exposure: np.ndarray) -> np.ndarray:
    top = float(np.max(exposure)) if exposure.size else 0.0
    if top <= 0:
        return np.zeros(exposure.shape, dtype=bool)
    return exposure >= EXPOSURE_FLOOR * top


@dataclass(frozen=True, eq=False)
class LcMarginals:
    """Local-constant tables ``O_k``, ``E_k`` and ``E_{j,k}``."""

    O: tuple[np.ndarray, ...]
    E: tuple[np.ndarray, ...]
    E_pair: dict
    alpha_star: float
    total_events: int
    total_exposure: float
    n: int
    grid: EvaluationGrid
    bandwidth: tuple[float, ...]

    def E_jk(self, j, k) -> np.ndarray:
        return self.E_pair[(j, k)]

    @property
    def supported(self) -> tuple[np.ndarray, ...]:
        return tuple(supported_mask(e) for e in self.E)


@dataclass(frozen=True, eq=False)
class LlMarginals:
    """Local-linear tables.

    ``pair[(l, j)][p, q]`` is the ``(g_l, g_j)`` table of
    ``n^-1 sum_i int ((x_l - X_il)/h)^p k_h(x_l, X_il) ((x_j - X_ij)/h)^q k_h(x_j, X_ij) Y_i ds``.
    """

    V00: tuple[np.ndarray, ...]
    Vj0: tuple[np.ndarray, ...]
    Vjj: tuple[np.ndarray, ...]
    U0: tuple[np.ndarray, ...]
    Uj: tuple[np.ndarray, ...]
    pair: dict
    alpha_star: float
    total_events: int
    total_exposure: float
    n: int
    grid: EvaluationGrid
    bandwidth: tuple[float, ...]

    def V00_lj(self, l, j):
        return self.pair[(l, j)][0, 0]

    def Vl0_lj(self, l, j):
        return self.pair[(l, j)][1, 0]

    def V0j_lj(self, l, j):
        return self.pair[(l, j)][0, 1]

    def Vlj_lj(self, l, j):
        return self.pair[(l, j)][1, 1]

    @property
    def supported(self) -> tuple[np.ndarray, ...]:
        return tuple(supported_mask(v) for v in self.V00)

    def M(self, j) -> np.ndarray:
        """The 2x2 local design matrices of dimension ``j``, shape ``(g, 2, 2)``."""
        return np.stack([np.stack([self.V00[j], self.Vj0[j]], -1),
                         np.stack([self.Vj0[j], self.Vjj[j]], -1)], -2)

    def to_lc(self) -> LcMarginals:
        return LcMarginals(
            O=self.U0, E=self.V00,
            E_pair={key: table[0, 0] for key, table in self.pair.items()},
            alpha_star=self.alpha_star, total_events=self.total_events,
            total_exposure=self.total_exposure, n=self.n, grid=self.grid,
            bandwidth=self.bandwidth)


def _outer_mean(a, b, n):
    """``n^-1 sum_i a[i] (x) b[i]`` for rows of shape ``(P, g_a)`` and ``(Q, g_b)``."""
    p, ga = a.shape[1:]
    q, gb = b.shape[1:]
    prod = a.reshape(a.shape[0], p * ga).T @ b.reshape(b.shape[0], q * gb)
    return prod.reshape(p, ga, q, gb).transpose(0, 2, 1, 3) / n


def _swap(table):
    return np.ascontiguousarray(np.transpose(table, (1, 0, 3, 2)))


class TableBuilder:
    """Computes and caches per-subject kernel rows for one dataset and grid.

    For each dimension the subject's channel is either static
    (``X_k(s) = x``) or moving (``X_k(s) = x + s``); moving channels are
    integrated exactly over the at-risk interval, static ones contribute
    ``exposure * F(x)``.
    """

    def __init__(self, dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig):
        if dataset.d != grid.d:
            raise ValueError("dataset and grid dimensions differ")
        self.dataset = dataset
        self.grid = grid
        self.bandwidth = config.bandwidths(grid)
        self.order = config.quadrature_order
        self.kernels = [GridKernel(dim, h, self.order) for dim, h in zip(grid.dims, self.bandwidth)]
        self.channels = [dataset.channel(k) for k in range(len(grid))]
        self.n = dataset.n
        self._rows = {}

    def _evaluate(self, k, v, basis, power):
        return self.kernels[k].evaluate(v, basis, power)

    def exposure_rows(self, k, basis="kernel", power=2):
        key = ("exposure", k, basis, power)
        if key not in self._rows:
            moving, x = self.channels[k]
            ds = self.dataset
            if moving:
                rows = self.kernels[k].integrate(x + ds.entry, x + ds.exit, basis, power)
            else:
                rows = ds.exposure[:, None, None] * self._evaluate(k, x, basis, power)
            self._rows[key] = rows
        return self._rows[key]

    def point_rows(self, k, basis="kernel", power=2):
        key = ("point", k, basis, power)
        if key not in self._rows:
            moving, x = self.channels[k]
            if moving:
                raise ValueError("point rows exist only for static channels")
            self._rows[key] = self._evaluate(k, x, basis, power)
        return self._rows[key]

    def occurrence(self, k, power=1) -> np.ndarray:
        ds = self.dataset
        at_exit = ds.covariate_at_exit(k)
        rows = self._evaluate(k, at_exit[ds.event], "kernel", power)
        return rows.sum(axis=0) / self.n

    def exposure(self, k, power=2) -> np.ndarray:
        return self.exposure_rows(k, "kernel", power).sum(axis=0) / self.n

    def pair(self, l, j, basis_l="kernel", power_l=1, basis_j="kernel", power_j=1):
        """Pairwise table of shape ``(power_l + 1, power_j + 1, g_l, g_j)``."""
        moving_l, _ = self.channels[l]
        moving_j, _ = self.channels[j]
        if moving_l and moving_j:
            return self._moving_pair(l, j, basis_l, power_l, basis_j, power_j)
        if moving_j:
            return _outer_mean(self.point_rows(l, basis_l, power_l),
                               self.exposure_rows(j, basis_j, power_j), self.n)
        return _outer_mean(self.exposure_rows(l, basis_l, power_l),
                           self.point_rows(j, basis_j, power_j), self.n)

    def _moving_pair(self, l, j, basis_l, power_l, basis_j, power_j):
        ds = self.dataset
        kl, kj = self.kernels[l], self.kernels[j]
        _, cl = self.channels[l]
        _, cj = self.channels[j]
        bl, bj = kl.breakpoints(basis_l), kj.breakpoints(basis_j)
        gx, gw = gauss_legendre(self.order)
        out = np.zeros((power_l + 1, power_j + 1, kl.size, kj.size))
        for i in range(ds.n):
            a = max(ds.entry[i], kl.grid.lo - cl[i], kj.grid.lo - cj[i])
            b = min(ds.exit[i], kl.grid.hi - cl[i], kj.grid.hi - cj[i])
            if a >= b:
                continue
            cuts = np.concatenate([bl - cl[i], bj - cj[i]])
            cuts = np.unique(np.concatenate([[a, b], cuts[(cuts > a) & (cuts < b)]]))
            half = 0.5 * np.diff(cuts)
            s = (0.5 * (cuts[:-1] + cuts[1:]))[:, None] + half[:, None] * gx[None, :]
            w = (half[:, None] * gw[None, :]).ravel()
            s = s.ravel()
            fl = kl.evaluate(cl[i] + s, basis_l, power_l)
            fj = kj.evaluate(cj[i] + s, basis_j, power_j)
            out += np.einsum("m,mpa,mqb->pqab", w, fl, fj, optimize=True)
        return out / ds.n

    def events_and_exposure(self):
        return self.dataset.total_events, self.dataset.total_exposure


def _alpha_star(total_events, total_exposure):
    return total_events / total_exposure if total_exposure > 0 else 0.0


def build_ll_marginals(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig,
                       builder: Optional[TableBuilder] = None) -> LlMarginals:
    """All local-linear tables; the local-constant ones are the power-0 slices."""
    builder = builder or TableBuilder(dataset, grid, config)
    dims = range(len(grid))
    expo = [builder.exposure(k, 2) for k in dims]
    occ = [builder.occurrence(k, 1) for k in dims]
    pair = {}
    for l in dims:
        for j in dims:
            if l < j:
                table = builder.pair(l, j, "kernel", 1, "kernel", 1)
                pair[(l, j)] = table
                pair[(j, l)] = _swap(table)
    events, exposure = builder.events_and_exposure()
    return LlMarginals(
        V00=tuple(e[0] for e in expo), Vj0=tuple(e[1] for e in expo),
        Vjj=tuple(e[2] for e in expo), U0=tuple(o[0] for o in occ),
        Uj=tuple(o[1] for o in occ), pair=pair,
        alpha_star=_alpha_star(events, exposure), total_events=events,
        total_exposure=exposure, n=dataset.n, grid=grid, bandwidth=builder.bandwidth)


def build_lc_marginals(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig,
                       builder: Optional[TableBuilder] = None) -> LcMarginals:
    builder = builder or TableBuilder(dataset, grid, config)
    dims = range(len(grid))
    E = tuple(builder.exposure(k, 0)[0] for k in dims)
    O = tuple(builder.occurrence(k, 0)[0] for k in dims)
    E_pair = {}
    for l in dims:
        for j in dims:
            if l < j:
                table = builder.pair(l, j, "kernel", 0, "kernel", 0)[0, 0]
                E_pair[(l, j)] = table
                E_pair[(j, l)] = np.ascontiguousarray(table.T)
    events, exposure = builder.events_and_exposure()
    return LcMarginals(O=O, E=E, E_pair=E_pair, alpha_star=_alpha_star(events, exposure),
                       total_events=events, total_exposure=exposure, n=dataset.n,
                       grid=grid, bandwidth=builder.bandwidth)


def build_classical_tables(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig,
                           local_linear: bool = False,
                           builder: Optional[TableBuilder] = None) -> dict:
    """Smoothers that evaluate other components at the observations.

    ``H[(k, j)][p, q]`` has shape ``(g_k, g_j)``. Applied to node values it
    gives ``n^-1 sum_i int ((x_k - X_ik)/h)^p k_h(x_k, X_ik) a_j(X_ij(s)) Y_i ds``
    where ``a_j`` interpolates linearly between nodes; ``q = 1`` carries the
    factor ``(x_j - X_ij)/h`` so a derivative curve enters as the local
    linear expansion around each node.
    """
    builder = builder or TableBuilder(dataset, grid, config)
    power = 1 if local_linear else 0
    H = {}
    for k in range(len(grid)):
        for j in range(len(grid)):
            if k != j:
                H[(k, j)] = builder.pair(k, j, "kernel", power, "hat", power)
    return H


@dataclass(frozen=True, eq=False)
class Pilot:
    """One-dimensional pilot fits per dimension.

    ``unsupported`` marks grid points whose exposure is below the floor;
    ``fallback`` marks local-linear points where the 2x2 system was
    near-singular and the local-constant ratio was used instead.
    """

    values: tuple[np.ndarray, ...]
    unsupported: tuple[np.ndarray, ...]
    derivatives: Optional[tuple[np.ndarray, ...]] = None
    fallback: Optional[tuple[np.ndarray, ...]] = None


def _ratio(num, den, ok):
    return np.divide(num, den, out=np.zeros_like(num), where=ok)


def lc_pilot(marginals: LcMarginals | LlMarginals) -> Pilot:
    if isinstance(marginals, LlMarginals):
        marginals = marginals.to_lc()
    ok = marginals.supported
    values = tuple(_ratio(o, e, s) for o, e, s in zip(marginals.O, marginals.E, ok))
    return Pilot(values=values, unsupported=tuple(~s for s in ok))


def ll_pilot(marginals: LlMarginals) -> Pilot:
    values, derivs, fallback = [], [], []
    for j, ok in enumerate(marginals.supported):
        v00, vj0, vjj = marginals.V00[j], marginals.Vj0[j], marginals.Vjj[j]
        u0, uj = marginals.U0[j], marginals.Uj[j]
        det = v00 * vjj - vj0 * vj0
        solvable = ok & (det > DET_FLOOR * v00 * vjj) & (det > 0)
        safe = np.where(solvable, det, 1.0)
        a = np.where(solvable, (vjj * u0 - vj0 * uj) / safe, _ratio(u0, v00, ok))
        b = np.where(solvable, (v00 * uj - vj0 * u0) / safe, 0.0)
        values.append(a)
        derivs.append(b)
        fallback.append(ok & ~solvable)
    return Pilot(values=tuple(values), unsupported=tuple(~s for s in marginals.supported),
                 derivatives=tuple(derivs), fallback=tuple(fallback))


def pilot_estimates(marginals: LcMarginals | LlMarginals) -> Pilot:
    """Local-constant ratios ``O_k / E_k`` or local-linear 2x2 solutions."""
    if isinstance(marginals, LlMarginals):
        return ll_pilot(marginals)
    return lc_pilot(marginals)
