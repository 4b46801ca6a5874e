"""Monte-Carlo error metrics and bandwidth search."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .data import EvaluationGrid, SurvivalDataset
from .fitting import fit_estimators
from .model import AdditiveFit, Estimator, FitConfig
from .simulation import (SimConfig, TrueHazard, _draw_subjects, replication_seed,
                         scenario_grid, simulate_dataset)

__all__ = [
    "ComponentMetrics",
    "EvalReport",
    "BandwidthProfile",
    "centered_truth",
    "component_mise",
    "reference_sample",
    "mc_study",
    "study",
    "bandwidth_search",
    "search_bandwidths",
]

REFERENCE_SIZE = 1000
_REFERENCE_STREAM = 0x5EF


@dataclass(frozen=True)
class ComponentMetrics:
    """Errors of one covariate component.

    ``mise``, ``bias_sq`` and ``variance`` are computed on the shared
    reference sample, so ``mise == bias_sq + variance``. ``mise_own``
    averages each replication's squared error over its own covariates.
    """

    mise: float
    bias_sq: float
    variance: float
    mise_own: float


@dataclass(frozen=True)
class EvalReport:
    estimator: Estimator
    bandwidth: float
    n_reps: int
    n_converged: int
    scenario: str
    per_component: Optional[tuple[ComponentMetrics, ...]]
    n_diverged: int = 0

    @property
    def is_na(self) -> bool:
        return self.per_component is None

    def metric(self, k=1, name="mise_own") -> float:
        """Metric of covariate component ``k`` (1-based); NaN for NA reports."""
        if self.per_component is None:
            return float("nan")
        return getattr(self.per_component[k - 1], name)

    def total(self, name="mise_own") -> float:
        if self.per_component is None:
            return float("inf")
        return float(sum(getattr(c, name) for c in self.per_component))


@dataclass(frozen=True)
class BandwidthProfile:
    estimator: Estimator
    candidates: tuple[float, ...]
    reports: tuple[EvalReport, ...]
    objective: tuple[float, ...]
    best: float

    @property
    def best_report(self) -> EvalReport:
        return self.reports[self.candidates.index(self.best)]


def centered_truth(fit: AdditiveFit, truth: TrueHazard, k: int):
    """True component ``k`` centered with the fit's weights on its grid."""
    dim = fit.grid[k]
    w = dim.weights * fit.weights[k]
    shift = float(w @ truth.component(k, dim.nodes)) / float(w.sum())
    return lambda z: truth.component(k, z) - shift


def _errors(fit: AdditiveFit, truth: TrueHazard, k: int, z) -> np.ndarray:
    return fit.component(k, z) - centered_truth(fit, truth, k)(z)


def component_mise(fit: AdditiveFit, truth: TrueHazard, dataset: SurvivalDataset, k: int) -> float:
    """Mean squared error of covariate component ``k`` over the dataset's covariates."""
    if not 1 <= k <= dataset.d:
        raise ValueError(f"k must be a covariate index in 1..{dataset.d}, got {k}")
    z = dataset.values[:, k - 1]
    return float(np.mean(_errors(fit, truth, k, z) ** 2))


def reference_sample(scenario: SimConfig, size: int = REFERENCE_SIZE) -> np.ndarray:
    """Covariates shared by all replications of a scenario, shape ``(size, d)``."""
    seed = replication_seed(scenario.seed, _REFERENCE_STREAM)
    z, _, _ = _draw_subjects(scenario.resolved(), seed, size)
    return z


def _one_rep(scenario, rep, estimators, bandwidths, grid, reference, base):
    ds, truth = simulate_dataset(scenario, seed=replication_seed(scenario.seed, rep))
    out = {}
    d = scenario.d
    for h in bandwidths:
        fits = fit_estimators(ds, grid, replace(base, bandwidth=h), estimators)
        for est, fit in fits.items():
            ok = fit.converged and not fit.diverged
            if ok:
                ref = np.stack([_errors(fit, truth, k, reference[:, k - 1]) for k in range(1, d + 1)])
                own = np.array([component_mise(fit, truth, ds, k) for k in range(1, d + 1)])
            else:
                ref = own = None
            out[(est, h)] = (ok, fit.diverged, ref, own)
    return out


def _aggregate(est, h, results, scenario, n_reps):
    rows = [r[(est, h)] for r in results]
    good = [r for r in rows if r[0]]
    n_div = sum(1 for r in rows if r[1])
    if not good:
        return EvalReport(est, h, n_reps, 0, scenario.digest(), None, n_div)
    ref = np.stack([r[2] for r in good])
    own = np.stack([r[3] for r in good])
    mean = ref.mean(axis=0)
    metrics = []
    for k in range(ref.shape[1]):
        e = ref[:, k, :]
        mise = float(np.mean(e ** 2))
        bias_sq = float(np.mean(mean[k] ** 2))
        variance = float(np.mean(np.mean((e - mean[k]) ** 2, axis=0)))
        metrics.append(ComponentMetrics(mise, bias_sq, variance, float(own[:, k].mean())))
    return EvalReport(est, h, n_reps, len(good), scenario.digest(), tuple(metrics), n_div)


def _bandwidth_key(h):
    return float(h) if np.ndim(h) == 0 else tuple(float(v) for v in h)


def study(scenario: SimConfig, estimators: Sequence, bandwidths: Sequence, n_reps: int,
          grid: Optional[EvaluationGrid] = None, n_jobs: int = 1,
          config: Optional[FitConfig] = None, reference_size: int = REFERENCE_SIZE) -> dict:
    """Reports for every estimator and bandwidth; datasets are shared across both.

    A bandwidth may be a scalar or one value per dimension (time first).
    Returns a dict keyed by ``(Estimator, bandwidth)``.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    scenario = scenario.resolved()
    estimators = [Estimator.parse(e) for e in estimators]
    bandwidths = [_bandwidth_key(h) for h in bandwidths]
    grid = grid or scenario_grid(scenario)
    base = config or FitConfig(bandwidth=bandwidths[0])
    reference = reference_sample(scenario, reference_size)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_one_rep)(scenario, rep, estimators, bandwidths, grid, reference, base)
        for rep in range(n_reps))
    return {(est, h): _aggregate(est, h, results, scenario, n_reps)
            for est in estimators for h in bandwidths}


def mc_study(scenario: SimConfig, estimators: Sequence, bandwidth: float, n_reps: int,
             grid: Optional[EvaluationGrid] = None, n_jobs: int = 1,
             config: Optional[FitConfig] = None) -> dict:
    """One :class:`EvalReport` per estimator at a fixed bandwidth."""
    reports = study(scenario, estimators, [bandwidth], n_reps, grid, n_jobs, config)
    return {est: rep for (est, _), rep in reports.items()}


def search_bandwidths(scenario: SimConfig, estimators: Sequence, candidates: Sequence[float],
                      n_reps: int, grid: Optional[EvaluationGrid] = None, n_jobs: int = 1,
                      config: Optional[FitConfig] = None) -> dict:
    """Bandwidth profiles for several estimators from one set of replications."""
    candidates = tuple(float(h) for h in candidates)
    if len(candidates) < 2:
        raise ValueError("bandwidth search needs at least two candidates")
    reports = study(scenario, estimators, candidates, n_reps, grid, n_jobs, config)
    out = {}
    for est in [Estimator.parse(e) for e in estimators]:
        reps = tuple(reports[(est, h)] for h in candidates)
        objective = tuple(r.total() for r in reps)
        best = candidates[int(np.argmin(objective))]
        out[est] = BandwidthProfile(est, candidates, reps, objective, best)
    return out


def bandwidth_search(scenario: SimConfig, estimator, candidates: Sequence[float], n_reps: int,
                     grid: Optional[EvaluationGrid] = None, n_jobs: int = 1,
                     config: Optional[FitConfig] = None) -> BandwidthProfile:
    """Candidate minimising the summed component MISE, with common random numbers."""
    est = Estimator.parse(estimator)
    return search_bandwidths(scenario, [est], candidates, n_reps, grid, n_jobs, config)[est]
