"""Estimator dispatch and shared-table fitting of several estimators."""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable

from .classical import _hat_cross_lc, _hat_cross_ll
from .data import EvaluationGrid, SurvivalDataset
from .local_constant import _lc_iterate, lc_fit_from_marginals
from .local_linear import _ll_iterate, ll_fit_from_marginals
from .marginals import TableBuilder, build_classical_tables, build_ll_marginals
from .model import AdditiveFit, Estimator, FitConfig

__all__ = ["fit", "fit_estimators"]


def fit(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig) -> AdditiveFit:
    """Fit ``config.estimator`` to a validated dataset."""
    return fit_estimators(dataset, grid, config, [config.estimator])[config.estimator]


def fit_estimators(dataset: SurvivalDataset, grid: EvaluationGrid, config: FitConfig,
                   estimators: Iterable) -> dict:
    """Fit several estimators at one bandwidth, building the kernel tables once."""
    estimators = [Estimator.parse(e) for e in estimators]
    builder = TableBuilder(dataset, grid, config)
    ll = build_ll_marginals(dataset, grid, config, builder)
    out = {}
    for est in estimators:
        cfg = replace(config, estimator=est)
        if est is Estimator.LC_SBF:
            out[est] = lc_fit_from_marginals(ll, grid, cfg)
        elif est is Estimator.LL_SBF:
            out[est] = ll_fit_from_marginals(ll, grid, cfg)
        elif est is Estimator.LC_BF:
            H = build_classical_tables(dataset, grid, cfg, False, builder)
            out[est] = _lc_iterate(ll.to_lc(), grid, cfg, _hat_cross_lc(H, grid), est)
        else:
            H = build_classical_tables(dataset, grid, cfg, True, builder)
            out[est] = _ll_iterate(ll, grid, cfg, _hat_cross_ll(H, grid), est)
    return out
