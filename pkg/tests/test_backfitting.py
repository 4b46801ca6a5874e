from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_instance
from hazard_sbf.classical import classic_lc_fit, classic_ll_fit
from hazard_sbf.data import EvaluationGrid, SurvivalDataset, validate_dataset
from hazard_sbf.fitting import fit, fit_estimators
from hazard_sbf.local_constant import lc_backfit_update, lc_fit, lc_fit_from_marginals
from hazard_sbf.local_linear import (foc_relative_residual, ll_backfit_update, ll_fit,
                                     ll_fit_from_marginals)
from hazard_sbf.marginals import build_lc_marginals, build_ll_marginals, lc_pilot
from hazard_sbf.model import AdditiveFit, Estimator, FitConfig, Norming, evaluate_fit

TIGHT = dict(tolerance=1e-20, tol_offset=0.0, max_iterations=20000)


def _sup(fa, fb, masks):
    return max(float(np.max(np.abs((a - b)[m]))) for a, b, m in zip(fa.components, fb.components,
                                                                     masks))


@pytest.mark.parametrize("norming", ["exposure", "uniform"])
@pytest.mark.parametrize("est", ["LC-SBF", "LL-SBF", "LC-BF", "LL-BF"])
def test_centering_after_every_sweep(small, est, norming):
    ds, grid = small
    for sweeps in (1, 2, 5):
        cfg = FitConfig(bandwidth=0.5, estimator=est, norming=norming, max_iterations=sweeps,
                        tolerance=1e-14)
        f = fit(ds, grid, cfg)
        for k in range(len(grid)):
            assert f.centering_residual(k) < 1e-8


def test_lc_fixed_point_satisfies_update(small):
    ds, grid = small
    cfg = FitConfig(bandwidth=0.5, estimator="LC-SBF", **TIGHT)
    m = build_lc_marginals(ds, grid, cfg)
    f = lc_fit_from_marginals(m, grid, cfg)
    assert f.converged
    for k in range(len(grid)):
        _, new = lc_backfit_update(f, m, k, grid, cfg)
        np.testing.assert_allclose(new, f.components[k], atol=1e-8)


def test_lc_update_does_not_mutate(small):
    ds, grid = small
    cfg = FitConfig(bandwidth=0.5)
    m = build_lc_marginals(ds, grid, cfg)
    start = [p.copy() for p in lc_pilot(m).values]
    before = [s.copy() for s in start]
    lc_backfit_update(start, m, 1, grid, cfg)
    for a, b in zip(start, before):
        np.testing.assert_array_equal(a, b)


def test_lc_exposure_norming_intercept_is_alpha_star(small):
    ds, grid = small
    f = lc_fit(ds, grid, FitConfig(bandwidth=0.5, estimator="LC-SBF"))
    assert f.intercept == ds.total_events / ds.total_exposure


def test_ll_first_order_conditions(small):
    ds, grid = small
    cfg = FitConfig(bandwidth=0.5, **TIGHT)
    m = build_ll_marginals(ds, grid, cfg)
    f = ll_fit_from_marginals(m, grid, cfg)
    assert f.converged
    assert foc_relative_residual(f, m) < 1e-6


def test_ll_update_fixed_point(small):
    ds, grid = small
    cfg = FitConfig(bandwidth=0.5, **TIGHT)
    m = build_ll_marginals(ds, grid, cfg)
    f = ll_fit_from_marginals(m, grid, cfg)
    for j in range(len(grid)):
        value, deriv, _ = ll_backfit_update(f, m, j, grid, cfg)
        np.testing.assert_allclose(value, f.components[j], atol=1e-7)
        np.testing.assert_allclose(deriv, f.derivatives[j], atol=1e-7)


def test_ll_recovers_linear_slope():
    rng = np.random.default_rng(3)
    n = 4000
    z = rng.uniform(-1, 1, n)
    rate = 1.0 + 0.4 * z
    exit_ = rng.exponential(1 / rate)
    grid = EvaluationGrid.from_domains(1.0, [(-1.0, 1.0)], n_points=31)
    ds = validate_dataset(SurvivalDataset(np.zeros(n), exit_, np.ones(n, bool), z[:, None],
                                          ("const",)), grid)
    f = ll_fit(ds, grid, FitConfig(bandwidth=0.4))
    interior = slice(8, 23)
    assert np.median(f.slopes[1][interior]) == pytest.approx(0.4, abs=0.12)


def test_slopes_sign_convention(small):
    ds, grid = small
    f = ll_fit(ds, grid, FitConfig(bandwidth=0.5))
    for dv, sl, h in zip(f.derivatives, f.slopes, f.bandwidth):
        np.testing.assert_allclose(sl, -dv / h)


def test_no_covariates_classical_equals_smooth():
    rng = np.random.default_rng(2)
    n = 80
    exit_ = rng.exponential(1.0, n)
    grid = EvaluationGrid.from_domains(2.0, [], n_points=21)
    ds = validate_dataset(SurvivalDataset(np.zeros(n), exit_, rng.random(n) < 0.8,
                                          np.zeros((n, 0)), ()), grid)
    cfg = FitConfig(bandwidth=0.5, **TIGHT)
    a, b = lc_fit(ds, grid, cfg), classic_lc_fit(ds, grid, cfg)
    np.testing.assert_allclose(a.components[0], b.components[0], atol=1e-14)
    c, d = ll_fit(ds, grid, cfg), classic_ll_fit(ds, grid, cfg)
    np.testing.assert_allclose(c.components[0], d.components[0], atol=1e-14)
    assert c.intercept == pytest.approx(d.intercept, abs=1e-14)


def test_fit_estimators_matches_direct(small):
    ds, grid = small
    cfg = FitConfig(bandwidth=0.5)
    both = fit_estimators(ds, grid, cfg, list(Estimator))
    direct = {
        Estimator.LC_SBF: lc_fit(ds, grid, replace(cfg, estimator="LC-SBF")),
        Estimator.LL_SBF: ll_fit(ds, grid, cfg),
        Estimator.LC_BF: classic_lc_fit(ds, grid, replace(cfg, estimator="LC-BF")),
        Estimator.LL_BF: classic_ll_fit(ds, grid, replace(cfg, estimator="LL-BF")),
    }
    for est, f in direct.items():
        assert both[est].estimator is est
        for a, b in zip(both[est].components, f.components):
            np.testing.assert_allclose(a, b, atol=1e-13)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), est=st.sampled_from(list(Estimator)))
def test_row_order_invariance(seed, est):
    rng = np.random.default_rng(seed)
    ds, grid = random_instance(rng, n=40)
    cfg = FitConfig(bandwidth=0.55, estimator=est, tolerance=1e-10, tol_offset=0.0)
    a = fit(ds, grid, cfg)
    b = fit(ds.take(rng.permutation(ds.n)), grid, cfg)
    masks = [~u for u in a.unsupported]
    assert _sup(a, b, masks) < 1e-10
    assert a.intercept == pytest.approx(b.intercept, abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), est=st.sampled_from(list(Estimator)))
def test_duplication_invariance(seed, est):
    ds, grid = random_instance(np.random.default_rng(seed), n=30)
    cfg = FitConfig(bandwidth=0.55, estimator=est, tolerance=1e-10, tol_offset=0.0)
    a = fit(ds, grid, cfg)
    b = fit(ds.take(np.concatenate([np.arange(ds.n), np.arange(ds.n)])), grid, cfg)
    masks = [~u for u in a.unsupported]
    assert _sup(a, b, masks) < 1e-12 * max(1.0, max(np.abs(c).max() for c in a.components)) * 10
    assert a.intercept == pytest.approx(b.intercept, abs=1e-12)


def test_uniform_norming_centres_with_ones(small):
    ds, grid = small
    f = lc_fit(ds, grid, FitConfig(bandwidth=0.5, estimator="LC-SBF", norming=Norming.UNIFORM))
    for k in range(len(grid)):
        assert abs(grid[k].weights @ f.components[k]) < 1e-10
        np.testing.assert_array_equal(f.weights[k], 1.0)


def test_offset_channel_fits(rng):
    ds, grid = random_instance(rng, n=80, offset=True)
    for est in Estimator:
        f = fit(ds, grid, FitConfig(bandwidth=0.6, estimator=est))
        assert f.converged and not f.diverged


def test_non_convergence_reported(small):
    ds, grid = small
    f = lc_fit(ds, grid, FitConfig(bandwidth=0.5, tolerance=1e-15, max_iterations=1))
    assert not f.converged
    assert f.iterations_used == 1


def test_evaluate_fit_single_and_batch(small):
    ds, grid = small
    f = ll_fit(ds, grid, FitConfig(bandwidth=0.5))
    pts = np.array([[0.1, 0.2, -0.3], [1.0, 0.0, 0.5]])
    batch = evaluate_fit(f, pts)
    assert evaluate_fit(f, pts[0]) == pytest.approx(batch[0])
    with pytest.raises(ValueError):
        evaluate_fit(f, [[0.1, 5.0, 0.0]])
    with pytest.raises(ValueError):
        evaluate_fit(f, [[0.1, 0.0]])


def test_additive_fit_shape_checks(small):
    _, grid = small
    with pytest.raises(ValueError):
        AdditiveFit(0.0, (np.zeros(3),), grid, (np.ones(3),), "LC-SBF", (0.5,))


def test_config_validation():
    with pytest.raises(ValueError):
        FitConfig(bandwidth=-1)
    with pytest.raises(ValueError):
        FitConfig(bandwidth=0.2, estimator="LQ-SBF")
    with pytest.raises(ValueError):
        FitConfig(bandwidth=0.2, tolerance=0)
    grid = EvaluationGrid.from_domains(1.0, [(-1, 1)])
    with pytest.raises(ValueError, match="half the domain"):
        FitConfig(bandwidth=0.6).bandwidths(grid)
    with pytest.raises(ValueError, match="2 dimensions"):
        FitConfig(bandwidth=(0.1, 0.2, 0.3)).bandwidths(grid)
