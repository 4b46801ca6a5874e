import math

import pytest

from hazard_sbf.bench import (D30_BUDGET_S, SCALES, TableRow, bench_fit, format_table,
                              table_verdicts)
from hazard_sbf.cli import main
from hazard_sbf.model import Estimator


def _row(est, mise, n_conv=10, d=3, n=500):
    return TableRow(d, n, est, 0.2, mise, mise / 2, mise / 2, n_conv, 10)


def test_format_table_renders_na():
    text = format_table([_row(Estimator.LL_SBF, 0.2), _row(Estimator.LL_BF, math.nan, n_conv=0)])
    lines = text.splitlines()
    assert lines[0].split("\t")[:4] == ["d", "n", "estimator", "bandwidth"]
    assert lines[2].split("\t")[4:7] == ["NA", "NA", "NA"]


def test_verdicts_cover_present_scenarios():
    rows = [_row(Estimator.LL_SBF, 0.2), _row(Estimator.LC_SBF, 0.3),
            _row(Estimator.LL_BF, 43.0), _row(Estimator.LC_BF, 0.5)]
    verdicts = {label: ok for label, _, ok in table_verdicts(rows)}
    assert verdicts["d=3 n=500 LL-SBF mise in [0.15, 0.4]"]
    assert verdicts["d=3 n=500 ordering LL-SBF < LL-BF"]
    assert verdicts["d=3 n=500 LL-BF mise > 5"]
    assert not any("n=5000" in k for k in verdicts)


def test_na_blow_up_counts_as_failure_to_converge():
    rows = [_row(Estimator.LL_SBF, 0.2), _row(Estimator.LL_BF, math.nan, n_conv=0)]
    verdicts = {label: ok for label, _, ok in table_verdicts(rows)}
    assert verdicts["d=3 n=500 ordering LL-SBF < LL-BF"]


def test_scales():
    assert SCALES["smoke"]["scenarios"] == [(3, 500)] and SCALES["smoke"]["n_reps"] == 10
    assert (30, 500) in SCALES["full"]["scenarios"] and SCALES["full"]["n_reps"] == 500


def test_repro_cli_writes_table_and_verdicts(tmp_path):
    assert main(["repro-table1", "--scale", "smoke", "--out", str(tmp_path), "--n-reps", "2"]) == 0
    table = (tmp_path / "table1_smoke.tsv").read_text().splitlines()
    assert len(table) == 1 + 4
    verdicts = (tmp_path / "verdicts_smoke.tsv").read_text().splitlines()
    assert verdicts[0] == "check\tmeasured\tverdict"
    assert all(line.rsplit("\t", 1)[1] in ("pass", "fail") for line in verdicts[1:])


def test_bench_fit_schema_and_orders(tmp_path):
    out = tmp_path / "bench.tsv"
    res = bench_fit(out, quick=True, log=lambda s: None)
    text = out.read_text()
    assert text.startswith("# threads=1")
    assert "sweep\tn\td\tgrid\tbuild_s\tsweep_s\ttotal_s" in text
    n_rows = [r for r in res["rows"] if r[0] == "n"]
    assert n_rows[-1][6] > n_rows[0][6]
    for name, (got, nominal) in res["slopes"].items():
        assert abs(got - nominal) <= 0.3, (name, got)
    assert res["d30_seconds"] <= D30_BUDGET_S
