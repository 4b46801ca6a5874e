"""Table reproduction at several scales and fit timing benchmarks."""

from __future__ import annotations

import os
import platform
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .evaluation import search_bandwidths
from .io import format_value
from .local_linear import ll_fit_from_marginals
from .marginals import build_ll_marginals
from .model import Estimator, FitConfig
from .simulation import SimConfig, scenario_grid, simulate_dataset

__all__ = ["SCALES", "ESTIMATORS", "DEFAULT_CANDIDATES", "TableRow", "repro_table1",
           "bench_fit", "format_table", "table_verdicts", "D30_BUDGET_S"]

ESTIMATORS = (Estimator.LL_SBF, Estimator.LC_SBF, Estimator.LL_BF, Estimator.LC_BF)
DEFAULT_CANDIDATES = (0.1, 0.15, 0.2, 0.25, 0.3, 0.4)
# one LL-SBF fit at d = 30, n = 500, 51 nodes; about 1 s on one 2020s x86 core
D30_BUDGET_S = 10.0

SCALES = {
    "smoke": {"scenarios": [(3, 500)], "n_reps": 10, "candidates": (0.15, 0.2, 0.3)},
    "desk": {"scenarios": [(3, 500), (3, 5000), (10, 500), (10, 5000)], "n_reps": 100,
             "candidates": DEFAULT_CANDIDATES},
    "full": {"scenarios": [(3, 500), (3, 5000), (10, 500), (10, 5000), (30, 500), (30, 5000)],
             "n_reps": 500, "candidates": DEFAULT_CANDIDATES},
}


@dataclass(frozen=True)
class TableRow:
    d: int
    n: int
    estimator: Estimator
    bandwidth: float
    mise: float
    bias_sq: float
    variance: float
    n_converged: int
    n_reps: int

    @property
    def is_na(self) -> bool:
        return self.n_converged == 0


def _cell(x, na):
    return "NA" if na else format_value(x)


def format_table(rows) -> str:
    lines = ["d\tn\testimator\tbandwidth\tmise\tbias_sq\tvariance\tn_converged\tn_reps"]
    for r in rows:
        lines.append("\t".join([str(r.d), str(r.n), r.estimator.value, format_value(r.bandwidth),
                                _cell(r.mise, r.is_na), _cell(r.bias_sq, r.is_na),
                                _cell(r.variance, r.is_na), str(r.n_converged), str(r.n_reps)]))
    return "\n".join(lines) + "\n"


def _lookup(rows, d, n, est):
    for r in rows:
        if (r.d, r.n, r.estimator) == (d, n, est):
            return r
    return None


def _band(rows, d, n, est, lo, hi):
    r = _lookup(rows, d, n, est)
    if r is None:
        return None
    value = float("nan") if r.is_na else r.mise
    return (f"d={d} n={n} {est.value} mise in [{lo}, {hi}]", value, lo <= value <= hi)


def _ordering(rows, d, n, order):
    found = [_lookup(rows, d, n, e) for e in order]
    if any(r is None for r in found):
        return None
    values = [float("inf") if r.is_na else r.mise for r in found]
    ok = all(a < b for a, b in zip(values, values[1:]))
    label = " < ".join(e.value for e in order)
    return (f"d={d} n={n} ordering {label}", ";".join(format_value(v) for v in values), ok)


def table_verdicts(rows) -> list:
    """Pass/fail rows for every table check whose scenario is present."""
    L, C, LB, CB = Estimator.LL_SBF, Estimator.LC_SBF, Estimator.LL_BF, Estimator.LC_BF
    checks = [
        _band(rows, 3, 5000, L, 0.021, 0.046),
        _band(rows, 3, 5000, C, 0.035, 0.075),
        _ordering(rows, 3, 5000, (L, C, CB, LB)),
        _band(rows, 3, 500, L, 0.15, 0.40),
        _band(rows, 3, 500, C, 0.18, 0.45),
        _ordering(rows, 3, 500, (L, LB)),
        _band(rows, 10, 5000, L, 0.013, 0.030),
        _ordering(rows, 10, 5000, (L, C)),
    ]
    r = _lookup(rows, 3, 500, LB)
    if r is not None:
        value = float("inf") if r.is_na else r.mise
        checks.append(("d=3 n=500 LL-BF mise > 5", value, value > 5))
    return [c for c in checks if c is not None]


def repro_table1(scale: str = "smoke", out_dir=".", n_jobs: int = 1, n_reps: Optional[int] = None,
                 seed: int = 20240101, grid_points: int = 51, log=print) -> list:
    """Run the table at ``scale`` and write ``table1_<scale>.tsv`` and ``verdicts_<scale>.tsv``.

    Each estimator uses its own MISE-optimal bandwidth among the scale's
    candidates; metrics are for the first covariate component.
    """
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {sorted(SCALES)}, got {scale!r}")
    spec = SCALES[scale]
    reps = n_reps or spec["n_reps"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for d, n in spec["scenarios"]:
        scenario = SimConfig(n=n, d=d, seed=seed).resolved()
        grid = scenario_grid(scenario, grid_points)
        limit = 0.5 * scenario.horizon
        cands = [h for h in spec["candidates"] if h < limit and h >= grid[1].step]
        t0 = time.perf_counter()
        profiles = search_bandwidths(scenario, ESTIMATORS, cands, reps, grid, n_jobs)
        log(f"d={d} n={n}: {time.perf_counter() - t0:.1f}s")
        for est in ESTIMATORS:
            rep = profiles[est].best_report
            na = rep.is_na
            rows.append(TableRow(d, n, est, profiles[est].best,
                                 rep.metric(1, "mise_own") if not na else float("nan"),
                                 rep.metric(1, "bias_sq") if not na else float("nan"),
                                 rep.metric(1, "variance") if not na else float("nan"),
                                 rep.n_converged, rep.n_reps))
    (out / f"table1_{scale}.tsv").write_text(format_table(rows), encoding="utf-8")
    lines = ["check\tmeasured\tverdict"]
    for label, value, ok in table_verdicts(rows):
        shown = value if isinstance(value, str) else format_value(value)
        lines.append(f"{label}\t{shown}\t{'pass' if ok else 'fail'}")
    (out / f"verdicts_{scale}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


def _time_fit(n, d, grid_points, bandwidth=0.2, seed=7):
    scenario = SimConfig(n=n, d=d, seed=seed).resolved()
    grid = scenario_grid(scenario, grid_points)
    ds, _ = simulate_dataset(scenario)
    cfg = FitConfig(bandwidth=bandwidth, estimator=Estimator.LL_SBF)
    t0 = time.perf_counter()
    marg = build_ll_marginals(ds, grid, cfg)
    t1 = time.perf_counter()
    fit = ll_fit_from_marginals(marg, grid, cfg)
    t2 = time.perf_counter()
    return t1 - t0, (t2 - t1) / max(fit.iterations_used, 1), t2 - t0


def _slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def bench_fit(out_path="bench_fit.tsv", quick: bool = False, log=print) -> dict:
    """Time marginal builds and sweeps against ``n``, ``d`` and grid size.

    Writes one row per configuration, the fitted log-log slopes with their
    nominal orders (build against ``n``: 1; sweep against ``g`` and ``d``: 2)
    and the d = 30 wall time against :data:`D30_BUDGET_S`.
    """
    ns = (500, 1000, 2000) if quick else (1000, 2000, 4000)
    # sweeps are overhead-bound on small tables; sizes chosen so the d^2 g^2 term dominates
    ds_ = (6, 12, 24)
    gs = (201, 401, 801)
    rows = []
    with threadpool_limits(1):
        for n in ns:
            rows.append(("n", n, 3, 51, *_time_fit(n, 3, 51)))
        for d in ds_:
            rows.append(("d", 1000, d, 51, *_time_fit(1000, d, 51)))
        for g in gs:
            rows.append(("g", 1000, 3, g, *_time_fit(1000, 3, g)))
        rows.append(("budget", 500, 30, 51, *_time_fit(500, 30, 51)))
    slopes = {
        "build_vs_n": (_slope(ns, [r[4] for r in rows if r[0] == "n"]), 1.0),
        "sweep_vs_g": (_slope(gs, [r[5] for r in rows if r[0] == "g"]), 2.0),
        "sweep_vs_d": (_slope(ds_, [r[5] for r in rows if r[0] == "d"]), 2.0),
    }
    lines = [f"# threads=1 python={platform.python_version()} cpus={os.cpu_count()}",
             "sweep\tn\td\tgrid\tbuild_s\tsweep_s\ttotal_s"]
    for r in rows:
        lines.append("\t".join([r[0], str(r[1]), str(r[2]), str(r[3]),
                                *(f"{v:.6f}" for v in r[4:])]))
    lines.append("slope\tmeasured\tnominal\twithin_0.3")
    for name, (got, nominal) in slopes.items():
        lines.append(f"{name}\t{got:.3f}\t{nominal:.1f}\t{'yes' if abs(got - nominal) <= 0.3 else 'no'}")
    d30 = rows[-1][6]
    lines.append(f"# d30_total_s={d30:.3f} budget_s={D30_BUDGET_S} "
                 f"within_budget={'yes' if d30 <= D30_BUDGET_S else 'no'}")
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    log("\n".join(lines))
    return {"rows": rows, "slopes": slopes, "d30_seconds": d30}
