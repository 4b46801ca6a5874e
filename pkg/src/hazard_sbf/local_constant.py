"""Local-constant smooth backfitting."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .data import EvaluationGrid, SurvivalDataset
from .marginals import LcMarginals, LlMarginals, Pilot, build_lc_marginals, lc_pilot
from .model import AdditiveFit, Estimator, FitConfig, Norming

__all__ = ["lc_backfit_update", "lc_fit", "lc_fit_from_marginals", "centering_weights",
           "intercept_from_components"]

DIVERGENCE_LIMIT = 1e6


def centering_weights(grid: EvaluationGrid, exposure: Sequence[np.ndarray], norming) -> list:
    """Node weights ``w_x * v(x)`` whose sum against a component must vanish."""
    norming = Norming.parse(norming)
    if norming is Norming.EXPOSURE:
        return [grid[k].weights * exposure[k] for k in range(len(grid))]
    return [grid[k].weights.copy() for k in range(len(grid))]


def _center(m, cw):
    total = cw.sum()
    if total <= 0:
        return m, 0.0
    mu = float(cw @ m) / total
    return m - mu, mu


def intercept_from_components(marginals, grid, components) -> float:
    """Intercept making the time-integrated occurrence match the fitted exposure."""
    if isinstance(marginals, LlMarginals):
        marginals = marginals.to_lc()
    exposure = marginals.total_exposure / marginals.n
    if exposure <= 0:
        return 0.0
    events = marginals.total_events / marginals.n
    explained = sum(float(np.sum(grid[k].weights * marginals.E[k] * components[k]))
                    for k in range(len(grid)))
    return (events - explained) / exposure


def _criterion_parts(new, old, grid, masks):
    num = 0.0
    den = 0.0
    for k in range(len(grid)):
        w = grid[k].weights * masks[k]
        num += float(np.sum(w * (new[k] - old[k]) ** 2))
        den += float(np.sum(w * new[k] ** 2))
    return num, den


def _sbf_cross(marginals: LcMarginals, grid):
    def cross(k, alphas):
        out = np.zeros(grid[k].n_points)
        for j in range(len(grid)):
            if j != k:
                out += marginals.E_pair[(k, j)] @ (grid[j].weights * alphas[j])
        return out
    return cross


def _as_components(current):
    if isinstance(current, AdditiveFit):
        return [c.copy() for c in current.components]
    return [np.asarray(c, dtype=float).copy() for c in current]


def lc_backfit_update(current, marginals: LcMarginals, k: int, grid: EvaluationGrid,
                      config: FitConfig, pilot: Optional[Pilot] = None):
    """One Gauss-Seidel update of component ``k``.

    Returns ``(m_bar, alpha_k)``: the curve before and after centering.
    ``current`` is an :class:`AdditiveFit` or a sequence of component curves;
    it is not modified.
    """
    alphas = _as_components(current)
    pilot = pilot or lc_pilot(marginals)
    cw = centering_weights(grid, marginals.E, config.norming)
    return _lc_step(k, alphas, pilot, marginals, _sbf_cross(marginals, grid), cw)


def _lc_step(k, alphas, pilot, marginals, cross, cw):
    ok = ~pilot.unsupported[k]
    num = cross(k, alphas)
    smoothed = np.divide(num, marginals.E[k], out=np.zeros_like(num), where=ok)
    m_bar = pilot.values[k] - smoothed
    alpha, _ = _center(m_bar, cw[k])
    return m_bar, alpha


def _lc_iterate(marginals: LcMarginals, grid: EvaluationGrid, config: FitConfig,
                cross: Callable, estimator: Estimator) -> AdditiveFit:
    pilot = lc_pilot(marginals)
    cw = centering_weights(grid, marginals.E, config.norming)
    masks = [~u for u in pilot.unsupported]
    alphas = [_center(pilot.values[k], cw[k])[0] for k in range(len(grid))]
    converged = diverged = False
    crit = np.inf
    it = 0
    for it in range(1, config.max_iterations + 1):
        old = [a.copy() for a in alphas]
        for k in range(len(grid)):
            alphas[k] = _lc_step(k, alphas, pilot, marginals, cross, cw)[1]
        num, den = _criterion_parts(alphas, old, grid, masks)
        crit = num / (den + config.tol_offset)
        if not np.isfinite(crit) or num > DIVERGENCE_LIMIT:
            diverged = True
            break
        if crit < config.tolerance:
            converged = True
            break
    if config.norming is Norming.EXPOSURE:
        intercept = marginals.alpha_star
    else:
        intercept = intercept_from_components(marginals, grid, alphas)
    weights = marginals.E if config.norming is Norming.EXPOSURE else [
        np.ones(grid[k].n_points) for k in range(len(grid))]
    return AdditiveFit(
        intercept=intercept, components=tuple(alphas), grid=grid, weights=tuple(weights),
        estimator=estimator, bandwidth=tuple(marginals.bandwidth), iterations_used=it,
        converged=converged, final_criterion=float(crit), diverged=diverged,
        unsupported=pilot.unsupported, norming=config.norming)


def lc_fit_from_marginals(marginals: LcMarginals | LlMarginals, grid: EvaluationGrid,
                          config: FitConfig) -> AdditiveFit:
    if isinstance(marginals, LlMarginals):
        marginals = marginals.to_lc()
    return _lc_iterate(marginals, grid, config, _sbf_cross(marginals, grid), Estimator.LC_SBF)


def lc_fit(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig) -> AdditiveFit:
    """Fit the local-constant smooth backfitting estimator."""
    marginals = build_lc_marginals(dataset, grid, config)
    return lc_fit_from_marginals(marginals, grid, config)
