import numpy as np
import pytest

from conftest import random_instance
from hazard_sbf.local_constant import lc_fit
from hazard_sbf.marginals import build_lc_marginals
from hazard_sbf.model import FitConfig
from hazard_sbf.oracle import build_full_pilot, oracle_solve


def _cfg(h, norming="exposure"):
    return FitConfig(bandwidth=h, estimator="LC-SBF", tolerance=1e-20, tol_offset=0.0,
                     max_iterations=20000, norming=norming)


def test_full_pilot_marginalises_to_one_dimensional_tables(small):
    ds, grid = small
    cfg = _cfg(0.5)
    pilot = build_full_pilot(ds, grid, cfg)
    m = build_lc_marginals(ds, grid, cfg)
    w = [dim.weights for dim in grid.dims]
    np.testing.assert_allclose(np.einsum("abc,b,c->a", pilot.E_full, w[1], w[2]), m.E[0],
                               atol=1e-10)
    np.testing.assert_allclose(np.einsum("abc,a,c->b", pilot.O_full, w[0], w[2]), m.O[1],
                               atol=1e-12)
    np.testing.assert_allclose(np.einsum("abc,c->ab", pilot.E_full, w[2]), m.E_pair[(0, 1)],
                               atol=1e-10)


@pytest.mark.parametrize("norming", ["exposure", "uniform"])
@pytest.mark.parametrize("offset", [False, True])
def test_lc_fit_equals_projection(norming, offset):
    rng = np.random.default_rng(99)
    ds, grid = random_instance(rng, n=70, n_points=11, offset=offset)
    cfg = _cfg(0.6, norming)
    a = lc_fit(ds, grid, cfg)
    b = oracle_solve(build_full_pilot(ds, grid, cfg), grid, norming)
    assert a.converged
    for ca, cb, u in zip(a.components, b.components, b.unsupported):
        assert np.max(np.abs((ca - cb)[~u])) < 1e-6
    assert a.intercept == pytest.approx(b.intercept, abs=1e-6)


def test_oracle_budget_limits(rng):
    ds, grid = random_instance(rng, n=10, d=4, n_points=5)
    with pytest.raises(ValueError, match="at most"):
        build_full_pilot(ds, grid, FitConfig(bandwidth=0.8))
