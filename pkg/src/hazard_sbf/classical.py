"""Classical backfitting baselines.

Only the updated component is smoothed; the other components enter through
their values at the observed covariate paths (linear interpolation of the
node values), not through a second kernel smoothing. In the local-linear
version a component is evaluated through its local linear expansions
``a_l(x) + b_l(x) (x - X)/h`` at the two nodes around ``X``.
"""

from __future__ import annotations

import numpy as np

from .data import EvaluationGrid, SurvivalDataset
from .local_constant import _lc_iterate
from .local_linear import _ll_iterate
from .marginals import TableBuilder, build_classical_tables, build_lc_marginals, build_ll_marginals
from .model import AdditiveFit, Estimator, FitConfig

__all__ = ["classic_lc_fit", "classic_ll_fit"]


def _hat_cross_lc(H, grid):
    def cross(k, alphas):
        out = np.zeros(grid[k].n_points)
        for j in range(len(grid)):
            if j != k:
                out += H[(k, j)][0, 0] @ alphas[j]
        return out
    return cross


def _hat_cross_ll(H, grid):
    def cross(j, alphas, betas):
        r0 = np.zeros(grid[j].n_points)
        r1 = np.zeros(grid[j].n_points)
        for l in range(len(grid)):
            if l != j:
                r0 += H[(j, l)][0, 0] @ alphas[l] + H[(j, l)][0, 1] @ betas[l]
                r1 += H[(j, l)][1, 0] @ alphas[l] + H[(j, l)][1, 1] @ betas[l]
        return r0, r1
    return cross


def classic_lc_fit(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig) -> AdditiveFit:
    builder = TableBuilder(dataset, grid, config)
    marginals = build_lc_marginals(dataset, grid, config, builder)
    H = build_classical_tables(dataset, grid, config, local_linear=False, builder=builder)
    return _lc_iterate(marginals, grid, config, _hat_cross_lc(H, grid), Estimator.LC_BF)


def classic_ll_fit(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig) -> AdditiveFit:
    builder = TableBuilder(dataset, grid, config)
    marginals = build_ll_marginals(dataset, grid, config, builder)
    H = build_classical_tables(dataset, grid, config, local_linear=True, builder=builder)
    return _ll_iterate(marginals, grid, config, _hat_cross_ll(H, grid), Estimator.LL_BF)
