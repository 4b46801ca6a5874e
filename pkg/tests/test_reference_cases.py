import numpy as np
import pytest
from scipy import integrate, stats

from hazard_sbf.data import EvaluationGrid, SurvivalDataset, validate_dataset
from hazard_sbf.estimator import SmoothBackfittingHazard
from hazard_sbf.evaluation import component_mise, study
from hazard_sbf.fitting import fit
from hazard_sbf.local_constant import lc_backfit_update, lc_fit_from_marginals
from hazard_sbf.local_linear import ll_backfit_update, ll_fit
from hazard_sbf.marginals import LcMarginals, LlMarginals, build_ll_marginals, lc_pilot
from hazard_sbf.model import AdditiveFit, FitConfig, evaluate_fit
from hazard_sbf.oracle import FullGridPilot, oracle_solve
from hazard_sbf.simulation import (SimConfig, _draw_subjects, invert_cumulative_hazard,
                                   scenario_grid, simulate_dataset)


def _grid5():
    return EvaluationGrid.from_domains(1.0, [(-1.0, 1.0)], n_points=5)


def test_product_tables_decouple_in_one_sweep():
    grid = EvaluationGrid.from_domains(1.0, [(-1.0, 1.0), (0.0, 2.0)], n_points=7)
    rng = np.random.default_rng(1)
    total = 0.8
    E = []
    for dim in grid.dims:
        e = rng.uniform(0.5, 2.0, dim.n_points)
        E.append(e * total / (dim.weights @ e))
    O = tuple(e * rng.uniform(0.5, 1.5, e.size) for e in E)
    pairs = {(k, j): np.outer(E[k], E[j]) / total for k in range(3) for j in range(3) if k != j}
    m = LcMarginals(O=O, E=tuple(E), E_pair=pairs, alpha_star=0.7, total_events=56,
                    total_exposure=80.0, n=100, grid=grid, bandwidth=(0.3, 0.5, 0.5))
    cfg = FitConfig(bandwidth=0.3, estimator="LC-SBF", tolerance=1e-12, tol_offset=0.0)
    f = lc_fit_from_marginals(m, grid, cfg)
    assert f.iterations_used == 1 and f.converged
    pilot = lc_pilot(m).values
    for k in range(3):
        diff = f.components[k] - pilot[k]
        np.testing.assert_allclose(diff, diff[0], atol=1e-13)


def test_lc_update_matches_hand_computation():
    grid = _grid5()
    w = grid[0].weights
    E0 = np.array([1.0, 0.9, 0.8, 0.6, 0.3])
    E1 = np.array([0.5, 0.7, 0.9, 0.7, 0.5])
    O0 = np.array([0.9, 0.8, 0.9, 0.7, 0.4])
    O1 = np.array([0.4, 0.6, 0.8, 0.7, 0.6])
    E01 = np.arange(25, dtype=float).reshape(5, 5) / 40 + 0.1
    m = LcMarginals(O=(O0, O1), E=(E0, E1), E_pair={(0, 1): E01, (1, 0): E01.T.copy()},
                    alpha_star=0.9, total_events=10, total_exposure=11.0, n=10, grid=grid,
                    bandwidth=(0.4, 0.8))
    a1 = np.array([0.3, -0.1, 0.2, 0.0, -0.4])
    m_bar, a0 = lc_backfit_update([np.zeros(5), a1], m, 0, grid, FitConfig(bandwidth=0.4))
    w1 = grid[1].weights
    expect = np.empty(5)
    for x in range(5):
        cross = sum(w1[q] * E01[x, q] * a1[q] for q in range(5))
        expect[x] = O0[x] / E0[x] - cross / E0[x]
    np.testing.assert_allclose(m_bar, expect, atol=1e-12)
    shift = sum(w[x] * E0[x] * expect[x] for x in range(5)) / sum(w[x] * E0[x] for x in range(5))
    np.testing.assert_allclose(a0, expect - shift, atol=1e-12)


def test_ll_update_matches_hand_computation():
    grid = _grid5()
    rng = np.random.default_rng(2)
    V00 = (rng.uniform(0.5, 1, 5), rng.uniform(0.5, 1, 5))
    Vj0 = (rng.uniform(-0.1, 0.1, 5), rng.uniform(-0.1, 0.1, 5))
    Vjj = (rng.uniform(0.1, 0.2, 5), rng.uniform(0.1, 0.2, 5))
    U0 = (rng.uniform(0.5, 1, 5), rng.uniform(0.5, 1, 5))
    Uj = (rng.uniform(-0.1, 0.1, 5), rng.uniform(-0.1, 0.1, 5))
    P10 = rng.uniform(0, 0.2, (2, 2, 5, 5))
    pair = {(1, 0): P10, (0, 1): np.transpose(P10, (1, 0, 3, 2)).copy()}
    m = LlMarginals(V00=V00, Vj0=Vj0, Vjj=Vjj, U0=U0, Uj=Uj, pair=pair, alpha_star=0.8,
                    total_events=8, total_exposure=10.0, n=10, grid=grid, bandwidth=(0.4, 0.8))
    alphas = [np.zeros(5), rng.uniform(-0.3, 0.3, 5)]
    betas = [rng.uniform(-0.1, 0.1, 5), rng.uniform(-0.1, 0.1, 5)]
    value, deriv, a_star = ll_backfit_update((alphas, betas), m, 0, grid,
                                             FitConfig(bandwidth=0.4), intercept=0.8)
    w, w1 = grid[0].weights, grid[1].weights
    c0 = np.array([sum(w1[a] * (alphas[1][a] * P10[0, 0, a, x] + betas[1][a] * P10[1, 0, a, x])
                       for a in range(5)) for x in range(5)])
    c1 = np.array([sum(w1[a] * (alphas[1][a] * P10[0, 1, a, x] + betas[1][a] * P10[1, 1, a, x])
                       for a in range(5)) for x in range(5)])
    raw = (U0[0] - c0 - betas[0] * Vj0[0] - 0.8 * V00[0]) / V00[0]
    mu = sum(w[x] * V00[0][x] * raw[x] for x in range(5)) / sum(w[x] * V00[0][x] for x in range(5))
    np.testing.assert_allclose(value, raw - mu, atol=1e-12)
    assert a_star == pytest.approx(0.8 + mu, abs=1e-12)
    expect_b = (Uj[0] - c1 - (value + a_star) * Vj0[0]) / Vjj[0]
    np.testing.assert_allclose(deriv, expect_b, atol=1e-12)


def test_second_moment_table_integrates_to_kernel_moment():
    # pointwise the ratio is ((x - z)/h)^2; the 0.2 moment appears after integrating over x
    grid = EvaluationGrid.from_domains(1.0, [(0.0, 1.0)], n_points=401)
    ds = validate_dataset(SurvivalDataset(np.zeros(1), np.ones(1), np.ones(1, bool),
                                          np.array([[0.5]]), ("const",)), grid)
    m = build_ll_marginals(ds, grid, FitConfig(bandwidth=0.15))
    w = grid[1].weights
    assert w @ m.V00[1] == pytest.approx(1.0, abs=1e-4)
    assert w @ m.Vjj[1] == pytest.approx(0.2 * (w @ m.V00[1]), abs=1e-4)
    assert abs(w @ m.Vj0[1]) < 1e-12
    np.testing.assert_allclose(m.Vj0[1][200], 0.0, atol=1e-14)


def test_pure_interaction_projects_to_zero():
    grid = EvaluationGrid.from_domains(1.0, [(-1.0, 1.0), (-1.0, 1.0)], n_points=9)
    x1, x2 = grid[1].nodes, grid[2].nodes
    E = np.ones((9, 9, 9))
    O = np.broadcast_to(np.multiply.outer(x1, x2), (9, 9, 9)).copy()
    for norming in ("exposure", "uniform"):
        f = oracle_solve(FullGridPilot(O, E, (0.3, 0.5, 0.5), 10), grid, norming)
        for c in f.components:
            assert np.max(np.abs(c)) < 1e-8
        assert abs(f.intercept) < 1e-8


def test_query_at_node_returns_node_value():
    grid = EvaluationGrid.from_domains(1.0, [(-1.0, 1.0)], n_points=3)
    f = AdditiveFit(0.5, (np.array([0.1, 0.2, -0.3]), np.array([-0.2, 0.0, 0.2])), grid,
                    (np.ones(3), np.ones(3)), "LC-SBF", (0.6, 0.9))
    assert evaluate_fit(f, [0.5, 1.0]) == 0.5 + 0.2 + 0.2


def test_component_mise_hand_values():
    grid = _grid5()
    nodes = grid[1].nodes
    comp = np.array([0.1, -0.2, 0.0, 0.3, -0.1])
    f = AdditiveFit(1.0, (np.zeros(5), comp), grid, (np.ones(5), np.ones(5)), "LC-SBF",
                    (0.4, 0.8), norming="uniform")
    truth = SimConfig(n=5, d=1).truth
    z = np.array([-1.0, -0.5, 0.0, 0.25, 1.0])
    ds = SurvivalDataset(np.zeros(5), np.ones(5), np.ones(5, bool), z[:, None], ("const",))
    w = grid[1].weights
    tv = 4.0 * np.sin(np.pi * nodes)
    shift = (w @ tv) / w.sum()
    fitted = np.interp(z, nodes, comp)
    expect = np.mean((fitted - (4.0 * np.sin(np.pi * z) - shift)) ** 2)
    assert component_mise(f, truth, ds, 1) == pytest.approx(expect, abs=1e-12)


def test_ll_slope_recovers_linear_time_hazard():
    rng = np.random.default_rng(11)
    n = 5000
    a, b = 1.0, 1.0
    target = -np.log(rng.uniform(size=n))
    t = (-a + np.sqrt(a * a + 2 * b * target)) / b
    grid = EvaluationGrid.from_domains(1.5, [], n_points=61)
    ds = validate_dataset(SurvivalDataset(np.zeros(n), t, np.ones(n, bool), np.zeros((n, 0)), ()),
                          grid)
    f = ll_fit(ds, grid, FitConfig(bandwidth=0.3))
    inner = (grid[0].nodes > 0.3) & (grid[0].nodes < 1.0)
    assert np.mean(f.slopes[0][inner]) == pytest.approx(b, abs=0.2)


def test_flat_hazard_derivatives_in_pilot_band():
    scen = SimConfig(n=2000, d=2, amplitude=0.0, gompertz_rate=0.0, seed=77).resolved()
    grid = scenario_grid(scen)
    cfg = FitConfig(bandwidth=0.3)

    def sups(seed):
        ds, _ = simulate_dataset(scen, seed=seed)
        f = ll_fit(ds, grid, cfg)
        return np.array([np.max(np.abs(d[~u])) for d, u in zip(f.derivatives, f.unsupported)])

    pilot = np.array([sups(s) for s in range(1, 11)])
    band = pilot.mean(0) + 3 * pilot.std(0, ddof=1)
    assert np.all(sups(0) <= band)


def test_covariate_marginal_spread():
    cfg = SimConfig(n=1, d=1, rho=0.0, amplitude=0.0, horizon=1.0)
    z, _, _ = _draw_subjects(cfg, 3, 100_000)
    var = integrate.quad(lambda g: (2.5 / np.pi * np.arctan(g)) ** 2 * stats.norm.pdf(g),
                         -np.inf, np.inf, epsabs=1e-12)[0]
    assert z[:, 0].std() == pytest.approx(np.sqrt(var), rel=0.01)


def test_survival_curve_fixed_covariates():
    rng = np.random.default_rng(5)
    cfg = SimConfig(n=1, d=3)
    truth = cfg.truth
    z = np.array([0.1, 0.05, 0.0])
    c = truth.covariate_effect(z)
    assert c > 0
    t = invert_cumulative_hazard(np.full(100_000, c), -np.log(rng.uniform(size=100_000)),
                                 cfg.gompertz_rate, cfg.baseline_scale)
    for s in (0.5, 1.0, 2.0):
        p = np.exp(-truth.cumulative(s, z))
        se = np.sqrt(p * (1 - p) / t.size)
        assert abs(np.mean(t > s) - p) <= 3 * se


def test_censoring_proportion_sanity():
    ds, _ = simulate_dataset(SimConfig(n=10_000, d=3, rho=0.5, seed=2))
    assert 0.3 < 1 - ds.event.mean() < 0.8


@pytest.mark.parametrize("estimator", ["LL-SBF", "LC-SBF"])
def test_bias_variance_signature(estimator):
    scen = SimConfig(n=500, d=3, seed=31).resolved()
    under, over = 0.1, (0.4, 1.2, 1.2, 1.2)
    reps = study(scen, [estimator], [under, over], 20)
    est = next(iter(reps))[0]
    for c in reps[(est, under)].per_component:
        assert c.variance >= c.bias_sq
    for c in reps[(est, over)].per_component:
        assert c.bias_sq >= c.variance


def test_two_time_scale_fixture():
    rng = np.random.default_rng(21)
    n, horizon = 3000, 3.0

    def f_t(t):
        return 0.3 * np.sin(2 * t)

    def g_age(a):
        return 0.4 * np.cos(a)

    base = 1.0
    top = base + 0.3 + 0.4
    age0 = rng.uniform(0.0, 2.0, n)
    exit_ = np.empty(n)
    event = np.zeros(n, bool)
    cens = np.minimum(rng.exponential(4.0, n), horizon)
    for i in range(n):
        s = 0.0
        while True:
            s += rng.exponential(1 / top)
            if s >= cens[i]:
                exit_[i] = cens[i]
                break
            if rng.uniform() * top <= base + f_t(s) + g_age(age0[i] + s):
                exit_[i], event[i] = s, True
                break
    model = SmoothBackfittingHazard(bandwidth=(0.4, 0.5), horizon=horizon, norming="uniform",
                                    covariate_kinds=["offset"], grid_points=41)
    model.fit(age0[:, None], (exit_, event))
    fit_ = model.fit_
    assert fit_.converged and len(fit_.components) == 2
    for k, fn in ((0, f_t), (1, g_age)):
        dim = fit_.grid[k]
        truth = fn(dim.nodes)
        truth = truth - (dim.weights @ truth) / dim.weights.sum()
        inner = (dim.nodes > dim.lo + 0.5) & (dim.nodes < dim.hi - 0.5)
        assert np.max(np.abs(fit_.components[k] - truth)[inner]) < 0.2


@pytest.mark.parametrize("estimator", ["LL-SBF", "LC-SBF"])
def test_converges_on_random_seeds(estimator):
    for seed in range(20):
        d = 1 + seed % 3
        scen = SimConfig(n=200 + 10 * seed, d=d, seed=seed).resolved()
        ds, _ = simulate_dataset(scen)
        grid = scenario_grid(scen)
        f = fit(validate_dataset(ds, grid), grid,
                FitConfig(bandwidth=0.3, estimator=estimator, max_iterations=500))
        assert f.converged and f.iterations_used <= 500 and np.isfinite(f.intercept)
