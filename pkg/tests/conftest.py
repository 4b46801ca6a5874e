import numpy as np
import pytest

from hazard_sbf.data import CONSTANT, OFFSET, EvaluationGrid, SurvivalDataset, validate_dataset

_ACCEPTANCE = []


def record_verdict(label, measured, ok):
    _ACCEPTANCE.append((label, measured, bool(ok)))
    print(f"{'PASS' if ok else 'FAIL'}  {label}  measured={measured}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, measured, ok in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  measured={measured}")


def random_instance(rng, n=60, d=2, n_points=13, horizon=2.0, offset=False, late_entry=True):
    """Small left-truncated, right-censored dataset on ``[-1, 1]^d`` covariates."""
    kinds = [CONSTANT] * d
    if offset:
        kinds[-1] = OFFSET
    z = rng.uniform(-1, 1, size=(n, d))
    entry = rng.uniform(0, 0.4, n) if late_entry else np.zeros(n)
    rate = 0.6 + 0.4 * np.sin(z[:, 0])
    exit_ = entry + rng.exponential(1 / rate)
    event = rng.random(n) < 0.75
    domains = [(-1.0, 1.0)] * d
    if offset:
        z[:, -1] = rng.uniform(-1, 0, n)
        domains[-1] = (-1.0, 0.0 + horizon)
    grid = EvaluationGrid.from_domains(horizon, domains, n_points=n_points)
    raw = SurvivalDataset(entry=entry, exit=exit_, event=event, values=z, kinds=tuple(kinds))
    return validate_dataset(raw, grid), grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small(rng):
    return random_instance(rng)
