"""Scikit-learn style front end."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data import EvaluationGrid, SurvivalDataset, validate_dataset
from .fitting import fit as _fit
from .model import FitConfig, evaluate_fit
from .validation import check_covariates, check_entry, check_kinds, check_points, check_survival_y

__all__ = ["SmoothBackfittingHazard"]


class SmoothBackfittingHazard(TransformerMixin, BaseEstimator):
    """Additive hazard ``a + a_0(t) + sum_k a_k(z_k)`` fitted by backfitting.

    Parameters
    ----------
    estimator : {"LL-SBF", "LC-SBF", "LL-BF", "LC-BF"}
    bandwidth : float or sequence of float
        One bandwidth for all dimensions or one per dimension, time first.
    grid_points : int
        Evaluation nodes per dimension.
    horizon : float, optional
        End of the time window; defaults to the largest exit time.
    domains : sequence of (lo, hi), optional
        Covariate domains; default to the observed ranges.
    norming : {"exposure", "uniform"}
        Weight of the centering constraint.
    tolerance, tol_offset, max_iter, quadrature_order
        Iteration and quadrature settings.
    covariate_kinds : sequence of {"const", "offset"}, optional
        ``offset`` columns hold ``a`` for a covariate ``a + t`` that moves
        with time, such as age at entry.

    Attributes
    ----------
    fit_ : AdditiveFit
    grid_ : EvaluationGrid
    intercept_ : float
    components_ : tuple of ndarray
    converged_ : bool
    n_iter_ : int
    n_features_in_ : int
    """

    def __init__(self, estimator="LL-SBF", bandwidth=0.2, grid_points=51, horizon=None,
                 domains=None, norming="exposure", tolerance=1e-4, tol_offset=1e-4,
                 max_iter=500, quadrature_order=16, covariate_kinds=None):
        self.estimator = estimator
        self.bandwidth = bandwidth
        self.grid_points = grid_points
        self.horizon = horizon
        self.domains = domains
        self.norming = norming
        self.tolerance = tolerance
        self.tol_offset = tol_offset
        self.max_iter = max_iter
        self.quadrature_order = quadrature_order
        self.covariate_kinds = covariate_kinds

    def _config(self):
        return FitConfig(bandwidth=self.bandwidth, estimator=self.estimator,
                         tolerance=self.tolerance, tol_offset=self.tol_offset,
                         max_iterations=self.max_iter, norming=self.norming,
                         quadrature_order=self.quadrature_order)

    def fit(self, X, y, entry=None):
        """Fit to covariates ``X`` (n, d) and ``y`` holding exit times and event flags."""
        X = check_covariates(X)
        exit_, event = check_survival_y(y)
        if exit_.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {exit_.shape[0]}")
        entry = check_entry(entry, X.shape[0])
        kinds = check_kinds(self.covariate_kinds, X.shape[1])
        raw = SurvivalDataset(entry=entry, exit=exit_, event=event, values=X, kinds=kinds)
        config = self._config()
        grid = EvaluationGrid.from_dataset(raw, self.grid_points, self.horizon, self.domains)
        data = validate_dataset(raw, grid)
        self.fit_ = _fit(data, grid, config)
        self.grid_ = grid
        self.intercept_ = self.fit_.intercept
        self.components_ = self.fit_.components
        self.converged_ = self.fit_.converged
        self.n_iter_ = self.fit_.iterations_used
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Hazard at points ``(t, z_1, ..., z_d)``, one per row."""
        check_is_fitted(self, "fit_")
        pts = check_points(X, self.n_features_in_ + 1)
        return evaluate_fit(self.fit_, pts)

    def transform(self, X):
        """Per-dimension contributions at points ``(t, z_1, ..., z_d)``; intercept excluded."""
        check_is_fitted(self, "fit_")
        pts = check_points(X, self.n_features_in_ + 1)
        return np.column_stack([self.fit_.component(k, pts[:, k]) for k in range(pts.shape[1])])

    def cumulative_hazard(self, t, z):
        """Integrated hazard from 0 to ``t`` for constant covariates ``z`` (trapezoid on the time grid)."""
        check_is_fitted(self, "fit_")
        z = np.asarray(z, dtype=float).reshape(-1)
        dim = self.grid_[0]
        nodes = dim.nodes[dim.nodes <= t]
        pts = np.column_stack([np.append(nodes, t), np.tile(z, (nodes.size + 1, 1))])
        vals = evaluate_fit(self.fit_, pts)
        return float(np.trapezoid(vals, pts[:, 0]))
