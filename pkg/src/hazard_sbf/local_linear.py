"""Local-linear smooth backfitting with value and derivative curves.

Derivative curves are coefficients of ``(x - X)/h``. The intercept is
re-solved after every sweep from the time-integrated occurrence balance,
which makes the converged curves an exact solution of the first-order
conditions; with zero derivatives it reduces to ``events / exposure``.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .data import EvaluationGrid, SurvivalDataset
from .local_constant import DIVERGENCE_LIMIT, _center, _criterion_parts, centering_weights
from .marginals import LlMarginals, build_ll_marginals
from .model import AdditiveFit, Estimator, FitConfig, Norming

__all__ = ["ll_backfit_update", "ll_fit", "ll_fit_from_marginals", "ll_intercept",
           "foc_residuals", "foc_relative_residual"]


def _sbf_cross(m: LlMarginals, grid):
    """Cross terms of both equations for dimension ``j``."""
    def cross(j, alphas, betas):
        r0 = np.zeros(grid[j].n_points)
        r1 = np.zeros(grid[j].n_points)
        for l in range(len(grid)):
            if l == j:
                continue
            P = m.pair[(l, j)]
            wa = grid[l].weights * alphas[l]
            wb = grid[l].weights * betas[l]
            r0 += wa @ P[0, 0] + wb @ P[1, 0]
            r1 += wa @ P[0, 1] + wb @ P[1, 1]
        return r0, r1
    return cross


def ll_intercept(m: LlMarginals, grid, alphas, betas) -> float:
    exposure = m.total_exposure / m.n
    if exposure <= 0:
        return 0.0
    explained = 0.0
    for k in range(len(grid)):
        w = grid[k].weights
        explained += float(np.sum(w * alphas[k] * m.V00[k]) + np.sum(w * betas[k] * m.Vj0[k]))
    return (m.total_events / m.n - explained) / exposure


def _ll_step(j, alphas, betas, intercept, m, cross, cw, masks, value_only=False):
    ok = masks[j]
    v00, vj0, vjj = m.V00[j], m.Vj0[j], m.Vjj[j]
    c0, _ = cross(j, alphas, betas)
    num = m.U0[j] - c0 - betas[j] * vj0 - intercept * v00
    value = np.divide(num, v00, out=np.zeros_like(num), where=ok)
    value, mu = _center(value, cw[j])
    intercept += mu
    alphas[j] = value
    if value_only:
        return intercept
    _, c1 = cross(j, alphas, betas)
    num = m.Uj[j] - c1 - (value + intercept) * vj0
    okj = ok & (vjj > 0)
    betas[j] = np.divide(num, vjj, out=np.zeros_like(num), where=okj)
    return intercept


def ll_backfit_update(current, marginals: LlMarginals, j: int, grid: EvaluationGrid,
                      config: FitConfig, intercept: Optional[float] = None):
    """Update the value curve of dimension ``j`` and then its derivative curve.

    ``current`` is an :class:`AdditiveFit` with derivatives or a pair
    ``(values, derivatives)`` of curve sequences. Returns
    ``(value_j, derivative_j, intercept)``.
    """
    if isinstance(current, AdditiveFit):
        alphas = [c.copy() for c in current.components]
        betas = [c.copy() for c in current.derivatives] if current.derivatives is not None \
            else [np.zeros_like(c) for c in alphas]
        intercept = current.intercept if intercept is None else intercept
    else:
        alphas = [np.asarray(c, dtype=float).copy() for c in current[0]]
        betas = [np.asarray(c, dtype=float).copy() for c in current[1]]
    if intercept is None:
        intercept = marginals.alpha_star
    cw = centering_weights(grid, marginals.V00, config.norming)
    masks = marginals.supported
    intercept = _ll_step(j, alphas, betas, intercept, marginals, _sbf_cross(marginals, grid),
                         cw, masks)
    return alphas[j], betas[j], intercept


def _ll_iterate(m: LlMarginals, grid: EvaluationGrid, config: FitConfig, cross: Callable,
                estimator: Estimator, intercept_fn: Callable = ll_intercept) -> AdditiveFit:
    d1 = len(grid)
    cw = centering_weights(grid, m.V00, config.norming)
    masks = m.supported
    alphas = [np.zeros(grid[k].n_points) for k in range(d1)]
    betas = [np.zeros(grid[k].n_points) for k in range(d1)]
    intercept = m.alpha_star
    converged = diverged = False
    crit = np.inf
    it = 0
    for it in range(1, config.max_iterations + 1):
        old = [a.copy() for a in alphas]
        for j in range(d1):
            intercept = _ll_step(j, alphas, betas, intercept, m, cross, cw, masks)
        intercept = intercept_fn(m, grid, alphas, betas)
        num, den = _criterion_parts(alphas, old, grid, masks)
        crit = num / (den + config.tol_offset)
        finite = all(np.all(np.isfinite(a)) and np.all(np.isfinite(b))
                     for a, b in zip(alphas, betas))
        if not np.isfinite(crit) or not finite or num > DIVERGENCE_LIMIT:
            diverged = True
            break
        if crit < config.tolerance:
            converged = True
            break
    weights = m.V00 if config.norming is Norming.EXPOSURE else [
        np.ones(grid[k].n_points) for k in range(d1)]
    return AdditiveFit(
        intercept=float(intercept), components=tuple(alphas), grid=grid,
        weights=tuple(weights), estimator=estimator, bandwidth=tuple(m.bandwidth),
        derivatives=tuple(betas), iterations_used=it, converged=converged,
        final_criterion=float(crit), diverged=diverged,
        unsupported=tuple(~s for s in masks), norming=config.norming)


def ll_fit_from_marginals(marginals: LlMarginals, grid: EvaluationGrid,
                          config: FitConfig) -> AdditiveFit:
    return _ll_iterate(marginals, grid, config, _sbf_cross(marginals, grid), Estimator.LL_SBF)


def ll_fit(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig) -> AdditiveFit:
    """Fit the local-linear smooth backfitting estimator."""
    marginals = build_ll_marginals(dataset, grid, config)
    return ll_fit_from_marginals(marginals, grid, config)


def foc_residuals(fit: AdditiveFit, marginals: LlMarginals):
    """Residuals of both first-order conditions per dimension.

    Returns a list of ``(r0, r1)`` arrays; unsupported points are zeroed.
    """
    grid = fit.grid
    alphas = list(fit.components)
    betas = list(fit.derivatives) if fit.derivatives is not None else [
        np.zeros_like(a) for a in alphas]
    cross = _sbf_cross(marginals, grid)
    a0 = fit.intercept
    out = []
    for j, ok in enumerate(marginals.supported):
        c0, c1 = cross(j, alphas, betas)
        m = marginals
        r0 = m.U0[j] - c0 - (a0 + alphas[j]) * m.V00[j] - betas[j] * m.Vj0[j]
        r1 = m.Uj[j] - c1 - (a0 + alphas[j]) * m.Vj0[j] - betas[j] * m.Vjj[j]
        out.append((np.where(ok, r0, 0.0), np.where(ok, r1, 0.0)))
    return out


def foc_relative_residual(fit: AdditiveFit, marginals: LlMarginals) -> float:
    """Largest residual relative to the size of the occurrence tables."""
    res = foc_residuals(fit, marginals)
    scale = max(float(np.max(np.abs(marginals.U0[j]))) for j in range(len(res)))
    if scale == 0:
        scale = 1.0
    return max(max(float(np.max(np.abs(r0))), float(np.max(np.abs(r1)))) for r0, r1 in res) / scale
