import math

import numpy as np
import pytest

from subquad.bench import BenchRow, fit_slope, make_family, read_rows, run_suite, scaling_run, write_rows
from subquad.graph import gen_grid
from subquad.lattice import GrowthParams


def test_fit_slope_exact_power_law():
    ns = [2**e for e in range(4, 10)]
    slope, intercept, r2, se = fit_slope(ns, [3.0 * n**1.5 for n in ns])
    assert slope == pytest.approx(1.5) and math.exp(intercept) == pytest.approx(3.0)
    assert r2 == pytest.approx(1.0) and se == pytest.approx(0.0, abs=1e-9)
    assert math.isnan(fit_slope([4], [5])[0])


def test_families():
    g = make_family("grid")(256, 0)
    assert g.n == 256 and g.max_degree == 4
    assert make_family("random:3")(50, 1).max_degree <= 3
    with pytest.raises(ValueError):
        make_family("torus")


def test_scaling_run_determinism():
    kw = dict(lam=1 / 12, vertices=6, samples=1)
    a = scaling_run("random:4", "fast-hardcore", [32, 64], 0.5, seed=2, **kw)
    b = scaling_run("random:4", "fast-hardcore", [32, 64], 0.5, seed=2, **kw)
    assert [r.steps_consumed for r in a.rows] == [r.steps_consumed for r in b.rows]
    assert [r.estimate for r in a.rows] == [r.estimate for r in b.rows]
    assert all(r.steps_consumed > 0 for r in a.rows)


def test_scaling_run_validation():
    with pytest.raises(ValueError):
        scaling_run("grid", "mcmc", [16], 0.5)
    with pytest.raises(ValueError):
        scaling_run("grid", "weitz-baseline", [64, 16], 0.5)


def test_failures_are_recorded():
    # C0 below the grid degree makes every size fail the growth check
    res = scaling_run("grid", "lattice", [16, 36], 0.5, gp=GrowthParams(2), vertices=2)
    assert len(res.failures) == 2 and all(r.steps_consumed == -1 for r in res.rows)
    assert math.isnan(res.slope)


def test_weitz_steps_grow_with_n():
    res = scaling_run("random:4", "weitz-baseline", [64, 256, 1024], 0.5, lam=1 / 12, vertices=16)
    steps = [r.steps_consumed for r in res.rows]
    assert steps == sorted(steps) and res.slope > 1


def test_csv_round_trip(tmp_path):
    rows = [BenchRow("lattice", 16, 0.5, 0.25, 1234, -1.5, 0), BenchRow("fast-hardcore", 32, 0.2, 1e-3, 7, 2.0, 3)]
    p = tmp_path / "rows.csv"
    write_rows(rows, p)
    assert read_rows(p) == rows


def test_smoke_suite():
    res = run_suite("smoke", seed=0)
    assert set(res) == {"fast-hardcore", "weitz-baseline", "lattice"}
    for r in res.values():
        assert not r.failures and np.isfinite(r.slope)
    with pytest.raises(ValueError):
        run_suite("nope")
