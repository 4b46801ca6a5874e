"""Brute-force additive projection on the full product grid.

Builds the unstructured occurrence and exposure arrays and projects the
pilot ``O / E`` onto additive functions by a direct constrained least
squares solve. Intended for small instances only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .data import EvaluationGrid, SurvivalDataset
from .kernel import GridKernel, gauss_legendre
from .model import AdditiveFit, Estimator, FitConfig, Norming

__all__ = ["FullGridPilot", "build_full_pilot", "oracle_solve", "MAX_COVARIATES", "MAX_CELLS"]

MAX_COVARIATES = 3
MAX_CELLS = 2_000_000
_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class FullGridPilot:
    O_full: np.ndarray
    E_full: np.ndarray
    bandwidth: tuple[float, ...]
    n: int

    @property
    def alpha_full(self) -> np.ndarray:
        ok = self.E_full > _FLOOR * max(float(self.E_full.max()), 0.0)
        return np.divide(self.O_full, self.E_full, out=np.zeros_like(self.O_full), where=ok)


def _check_budget(grid: EvaluationGrid):
    if grid.d > MAX_COVARIATES:
        raise ValueError(f"full-grid pilot supports at most {MAX_COVARIATES} covariates, got {grid.d}")
    cells = int(np.prod([dim.n_points for dim in grid.dims]))
    if cells > MAX_CELLS:
        raise ValueError(f"full grid has {cells} cells; the limit is {MAX_CELLS}")


def build_full_pilot(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig) -> FullGridPilot:
    """Product-kernel occurrence and exposure on every cell of the grid."""
    _check_budget(grid)
    bws = config.bandwidths(grid)
    kernels = [GridKernel(dim, h, config.quadrature_order) for dim, h in zip(grid.dims, bws)]
    channels = [dataset.channel(k) for k in range(len(grid))]
    shape = tuple(dim.n_points for dim in grid.dims)
    O = np.zeros(shape)
    E = np.zeros(shape)
    gx, gw = gauss_legendre(config.quadrature_order)
    letters = "abcd"[:len(grid)]
    spec = "m," + ",".join("m" + c for c in letters) + "->" + letters
    for i in range(dataset.n):
        a, b = dataset.entry[i], dataset.exit[i]
        cuts = [a, b]
        for k, (moving, x) in enumerate(channels):
            if moving:
                dim = grid[k]
                a, b = max(a, dim.lo - x[i]), min(b, dim.hi - x[i])
                cuts.extend(kernels[k].breakpoints("kernel") - x[i])
        if dataset.event[i]:
            pts = [kernels[k].features([x[i] + dataset.exit[i] if moving else x[i]])[:, 0]
                   for k, (moving, x) in enumerate(channels)]
            O += reduce(np.multiply.outer, [p[0] for p in pts])
        if a >= b:
            continue
        cuts = np.asarray(cuts)
        cuts = np.unique(np.concatenate([[a, b], cuts[(cuts > a) & (cuts < b)]]))
        half = 0.5 * np.diff(cuts)
        s = ((0.5 * (cuts[:-1] + cuts[1:]))[:, None] + half[:, None] * gx[None, :]).ravel()
        w = (half[:, None] * gw[None, :]).ravel()
        facs = []
        for k, (moving, x) in enumerate(channels):
            v = x[i] + s if moving else np.full(s.size, x[i])
            facs.append(kernels[k].features(v)[:, 0])
        E += np.einsum(spec, w, *facs, optimize=True)
    return FullGridPilot(O_full=O / dataset.n, E_full=E / dataset.n, bandwidth=bws, n=dataset.n)


def _cell_weights(grid):
    return reduce(np.multiply.outer, [dim.weights for dim in grid.dims])


def _sum_except(arr, keep):
    axes = tuple(a for a in range(arr.ndim) if a not in keep)
    return arr.sum(axis=axes)


def oracle_solve(pilot: FullGridPilot, grid: EvaluationGrid, norming=Norming.EXPOSURE) -> AdditiveFit:
    """Exposure-weighted least-squares projection of ``O / E`` onto additive functions.

    Nodes whose marginal exposure is below ``1e-10`` of its maximum are
    pinned to zero; the fit is meant to be compared on supported nodes.
    """
    norming = Norming.parse(norming)
    d1 = len(grid)
    W = _cell_weights(grid)
    WE = W * pilot.E_full
    WO = W * pilot.O_full
    sizes = [dim.n_points for dim in grid.dims]
    offs = np.concatenate([[1], 1 + np.cumsum(sizes)])
    nv = int(offs[-1])
    marg = [_sum_except(WE, (k,)) / grid[k].weights for k in range(d1)]
    A = np.zeros((nv, nv))
    r = np.zeros(nv)
    A[0, 0] = WE.sum()
    r[0] = WO.sum()
    for k in range(d1):
        sk = slice(offs[k], offs[k + 1])
        col = _sum_except(WE, (k,))
        A[0, sk] = col
        A[sk, 0] = col
        A[sk, sk] = np.diag(col)
        r[sk] = _sum_except(WO, (k,))
        for j in range(k + 1, d1):
            sj = slice(offs[j], offs[j + 1])
            block = _sum_except(WE, (k, j))
            A[sk, sj] = block
            A[sj, sk] = block.T
    # centering constraints and pinned unsupported nodes
    rows = []
    for k in range(d1):
        c = np.zeros(nv)
        v = marg[k] if norming is Norming.EXPOSURE else np.ones(sizes[k])
        c[offs[k]:offs[k + 1]] = grid[k].weights * v
        rows.append(c)
    unsupported = []
    for k in range(d1):
        top = marg[k].max()
        bad = marg[k] < _FLOOR * top if top > 0 else np.ones(sizes[k], bool)
        unsupported.append(bad)
        for idx in np.flatnonzero(bad):
            c = np.zeros(nv)
            c[offs[k] + idx] = 1.0
            rows.append(c)
    C = np.array(rows)
    kkt = np.block([[A, C.T], [C, np.zeros((C.shape[0], C.shape[0]))]])
    rhs = np.concatenate([r, np.zeros(C.shape[0])])
    diag = np.abs(np.diag(kkt))
    scale = np.where(diag > 0, np.sqrt(diag), 1.0)
    scale[nv:] = 1.0
    scaled = kkt / scale[:, None] / scale[None, :]
    sol = None
    if np.linalg.cond(scaled) < 1e14:
        sol = np.linalg.solve(scaled, rhs / scale) / scale
    if sol is None or not np.all(np.isfinite(sol)):
        for k in range(d1):
            if np.all(unsupported[k]):
                raise ValueError(f"normal equations are singular: no exposure in dimension {k}")
        raise ValueError("normal equations are singular: degenerate exposure")
    comps = tuple(sol[offs[k]:offs[k + 1]].copy() for k in range(d1))
    weights = tuple(marg) if norming is Norming.EXPOSURE else tuple(np.ones(s) for s in sizes)
    return AdditiveFit(intercept=float(sol[0]), components=comps, grid=grid, weights=weights,
                       estimator=Estimator.LC_SBF, bandwidth=tuple(pilot.bandwidth),
                       unsupported=tuple(unsupported), norming=norming)
