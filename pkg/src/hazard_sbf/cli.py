"""Command-line entry point ``hazard-sbf``.

Exit codes: 0 ok, 1 input error, 2 configuration error, 3 the fit did not
converge (the fit file is still written).
"""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

from .bench import SCALES, bench_fit, repro_table1
from .data import DatasetError, EvaluationGrid, validate_dataset
from .evaluation import search_bandwidths, study
from .fitting import fit
from .io import (ConfigError, format_value, parse_list, read_config, read_dataset_csv,
                 write_dataset_csv, write_fit)
from .model import Estimator, FitConfig, Norming
from .simulation import SimConfig, scenario_grid, simulate_dataset

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2, 3

_SCENARIO = {
    "n": int, "d": int, "rho": float, "gompertz_rate": float, "amplitude": float,
    "censor_scale_divisor": float, "horizon": float, "seed": int, "baseline_scale": float,
}
_FIT = {
    "estimator": Estimator.parse, "bandwidth": parse_list(float), "norming": Norming.parse,
    "tolerance": float, "tol_offset": float, "max_iterations": int, "quadrature_order": int,
    "grid_points": int, "threads": int,
}
_STUDY = {
    **{k: parse_list(v) for k, v in _SCENARIO.items() if k in ("n", "d", "rho")},
    **{k: v for k, v in _SCENARIO.items() if k not in ("n", "d", "rho")},
    "estimators": parse_list(Estimator.parse), "bandwidth": parse_list(float), "n_reps": int,
    "grid_points": int, "threads": int, "tolerance": float, "tol_offset": float,
    "max_iterations": int, "norming": Norming.parse,
}


def _domain(text):
    lo, hi = (float(v) for v in text.split(":"))
    return lo, hi


def _n_jobs(cfg):
    threads = cfg.get("threads", 1)
    return -1 if threads == 0 else threads


def _fit_config(cfg, bandwidth, estimator=Estimator.LL_SBF):
    kwargs = {k: cfg[k] for k in ("tolerance", "tol_offset", "norming", "quadrature_order")
              if k in cfg}
    if "max_iterations" in cfg:
        kwargs["max_iterations"] = cfg["max_iterations"]
    try:
        return FitConfig(bandwidth=bandwidth, estimator=cfg.get("estimator", estimator), **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _scenario(values):
    try:
        return SimConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None


def cmd_simulate(args):
    cfg = read_config(args.config, _SCENARIO, required=("n", "d"))
    scenario = _scenario(cfg).resolved()
    ds, _ = simulate_dataset(scenario)
    out = Path(args.out)
    write_dataset_csv(ds, out)
    digest = [
        f"digest = {scenario.digest()}",
        *(f"{k} = {format_value(getattr(scenario, k))}" for k in
          ("n", "d", "rho", "gompertz_rate", "amplitude", "censor_scale_divisor", "horizon",
           "seed", "baseline_scale")),
        f"censoring_proportion = {format_value(1.0 - ds.event.mean())}",
    ]
    Path(str(out) + ".digest").write_text("\n".join(digest) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_fit(args):
    schema = {**_FIT, "horizon": float, "domains": parse_list(_domain)}
    cfg = read_config(args.config, schema, required=("bandwidth",))
    config = _fit_config(cfg, cfg["bandwidth"])
    raw = read_dataset_csv(args.dataset)
    try:
        grid = EvaluationGrid.from_dataset(raw, cfg.get("grid_points", 51), cfg.get("horizon"),
                                           cfg.get("domains"))
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from None
    ds = validate_dataset(raw, grid)
    try:
        config.bandwidths(grid)
    except ValueError as exc:
        raise ConfigError(f"invalid bandwidth: {exc}") from None
    result = fit(ds, grid, config)
    write_fit(result, args.out, names=("time",) + raw.names)
    for k, flags in enumerate(result.unsupported):
        if flags.any():
            print(f"dimension {k}: {int(flags.sum())} unsupported grid points", file=sys.stderr)
    if not result.converged:
        print(f"not converged after {result.iterations_used} iterations "
              f"(criterion {result.final_criterion:.3g})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _scenarios(cfg):
    fixed = {k: cfg[k] for k in _SCENARIO if k in cfg and k not in ("n", "d", "rho")}
    lists = [cfg.get("n"), cfg.get("d"), cfg.get("rho", [0.5])]
    for n, d, rho in itertools.product(*lists):
        yield _scenario({"n": n, "d": d, "rho": rho, **fixed}).resolved()


def _report_line(scenario, rep, h):
    na = rep.is_na
    cells = [str(scenario.d), str(scenario.n), format_value(scenario.rho), rep.estimator.value,
             format_value(h)]
    for name in ("mise_own", "bias_sq", "variance", "mise"):
        cells.append("NA" if na else format_value(rep.metric(1, name)))
    cells += [str(rep.n_converged), str(rep.n_reps)]
    return "\t".join(cells)


def cmd_mc_study(args):
    cfg = read_config(args.config, _STUDY, required=("n", "d", "estimators", "bandwidth"))
    lines = ["d\tn\trho\testimator\tbandwidth\tmise\tbias_sq\tvariance\tmise_reference"
             "\tn_converged\tn_reps"]
    for scenario in _scenarios(cfg):
        grid = scenario_grid(scenario, cfg.get("grid_points", 51))
        base = _fit_config(cfg, cfg["bandwidth"][0])
        for h in cfg["bandwidth"]:
            _check_bandwidth(cfg, h, grid)
        reports = study(scenario, cfg["estimators"], cfg["bandwidth"], cfg.get("n_reps", 100),
                        grid, _n_jobs(cfg), base)
        for est in cfg["estimators"]:
            for h in cfg["bandwidth"]:
                lines.append(_report_line(scenario, reports[(est, h)], h))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _check_bandwidth(cfg, h, grid):
    try:
        _fit_config(cfg, h).bandwidths(grid)
        if h < max(dim.step for dim in grid.dims):
            raise ValueError(f"bandwidth {h} is below the grid step")
    except ValueError as exc:
        raise ConfigError(f"invalid bandwidth: {exc}") from None


def cmd_bandwidth_search(args):
    schema = {**{k: v for k, v in _STUDY.items() if k not in ("n", "d", "rho")},
              "n": int, "d": int, "rho": float, "candidates": parse_list(float),
              "estimator": Estimator.parse}
    schema.pop("estimators")
    schema.pop("bandwidth")
    cfg = read_config(args.config, schema, required=("n", "d", "estimator", "candidates"))
    scenario = _scenario({k: cfg[k] for k in _SCENARIO if k in cfg}).resolved()
    grid = scenario_grid(scenario, cfg.get("grid_points", 51))
    if len(cfg["candidates"]) < 2:
        raise ConfigError("candidates: at least two bandwidths are required")
    for h in cfg["candidates"]:
        _check_bandwidth(cfg, h, grid)
    base = _fit_config(cfg, cfg["candidates"][0])
    profile = search_bandwidths(scenario, [cfg["estimator"]], cfg["candidates"],
                                cfg.get("n_reps", 100), grid, _n_jobs(cfg), base)[cfg["estimator"]]
    lines = [f"# selected_bandwidth = {format_value(profile.best)}",
             "bandwidth\tobjective\tmise_1\tbias_sq_1\tvariance_1\tn_converged\tn_reps"]
    for h, rep, obj in zip(profile.candidates, profile.reports, profile.objective):
        na = rep.is_na
        cells = [format_value(h), "NA" if na else format_value(obj)]
        cells += ["NA" if na else format_value(rep.metric(1, m))
                  for m in ("mise_own", "bias_sq", "variance")]
        cells += [str(rep.n_converged), str(rep.n_reps)]
        lines.append("\t".join(cells))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_repro_table1(args):
    repro_table1(args.scale, args.out, n_jobs=-1 if args.threads == 0 else args.threads,
                 n_reps=args.n_reps)
    return EXIT_OK


def cmd_bench(args):
    bench_fit(args.out, quick=args.quick)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hazard-sbf",
                                     description="Smooth backfitting for additive hazards.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit an estimator to a dataset CSV")
    p.add_argument("dataset")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("mc-study", help="Monte-Carlo study over a scenario matrix")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=cmd_mc_study)

    p = sub.add_parser("bandwidth-search", help="MISE profile over candidate bandwidths")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=cmd_bandwidth_search)

    p = sub.add_parser("repro-table1", help="reproduce the simulation table")
    p.add_argument("--scale", choices=sorted(SCALES), default="smoke")
    p.add_argument("--out", default=".")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--n-reps", type=int, default=None)
    p.set_defaults(func=cmd_repro_table1)

    p = sub.add_parser("bench", help="time marginal builds and sweeps")
    p.add_argument("--out", default="bench_fit.tsv")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
