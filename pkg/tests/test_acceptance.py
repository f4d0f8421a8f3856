"""One test per acceptance criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np

from conftest import acceptance_line, atlas_graphs, binom_sigma
from subquad.bench import run_suite
from subquad.errors import BudgetExhausted
from subquad.estimator import HardcoreEstimatorConfig, estimate_marginal_zero, fpras_hardcore, weitz_baseline
from subquad.graph import ball, find_thin_sphere, gen_cycle, gen_grid, gen_path, gen_quad_boundary, gen_random_bounded
from subquad.lattice import GrowthParams, build_boundary_table, fpras_lattice
from subquad.sampler import BranchingParams, Budget, GraphView, RngStream, branching_tail, budget_for, hardcore_sample
from subquad.saw import build_saw, saw_marginal
from subquad.spin import TwoSpinParams, exact_marginal, exact_partition, grid_marginal, hardcore
from subquad.verify import lower_bound_bruteforce, ssm_decay_fit, weitz_lower_bound


def within(log_est, log_ref, eps):
    return abs(math.exp(log_est - log_ref) - 1) <= eps


def test_criterion_1_oracle_closed_forms():
    t0 = time.perf_counter()
    lam = 0.7
    cases = [
        (exact_partition(gen_path(1), hardcore(lam)), math.log(1 + lam)),
        (exact_partition(gen_path(2), hardcore(lam)), math.log(1 + 2 * lam)),
        (exact_partition(gen_cycle(4), hardcore(0.5)), math.log(3.5)),
    ]
    err = max(abs(math.exp(a - b) - 1) for a, b in cases)
    dt = time.perf_counter() - t0
    ok = err <= 1e-12 and dt < 1
    acceptance_line(1, ok, f"max relative error {err:.2e} (tol 1e-12), {dt:.3f}s (< 1s)")
    assert ok


def test_criterion_2_saw_equivalence():
    t0 = time.perf_counter()
    worst, checks = 0.0, 0
    for g in atlas_graphs(7):
        for lam in (0.3, 0.8):
            m = hardcore(lam)
            for v in range(g.n):
                p = saw_marginal(build_saw(g, v, g.n), m)
                worst = max(worst, abs(p - exact_marginal(g, m, None, v)[0]))
                checks += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 120
    acceptance_line(2, ok, f"{checks} (graph, lambda, vertex) cases, max error {worst:.2e} (tol 1e-10), {dt:.1f}s (< 120s)")
    assert ok


def _budgeted_draws(g, lam, v, T, n, rng):
    """``n`` kept draws with discard-and-retry; returns (ones, attempts, exhausted)."""
    view = GraphView(g)
    ones = attempts = exhausted = 0
    kept = 0
    while kept < n:
        attempts += 1
        try:
            ones += hardcore_sample(view, lam, v, Budget(T), rng)
            kept += 1
        except BudgetExhausted:
            exhausted += 1
    return ones, attempts, exhausted


def test_criterion_3_sampler_unbiased():
    t0 = time.perf_counter()
    n = 100_000
    grid = gen_grid(5, 5)
    instances = [("P5 middle", gen_path(5), 0.5, 2), ("5x5 center", grid, 0.25, grid.vertex_at(2, 2))]
    ok = True
    parts = []
    for k, (name, g, lam, v) in enumerate(instances):
        target = exact_marginal(g, hardcore(lam), None, v)[1]
        for j, eps in enumerate((0.1, 0.01)):
            T = budget_for(g.max_degree, lam, eps)
            ones, attempts, exhausted = _budgeted_draws(g, lam, v, T, n, RngStream(3, 10 * k + j))
            z = (ones / n - target) / binom_sigma(target, n)
            rate = exhausted / attempts
            rate_ok = rate <= eps + 3 * binom_sigma(eps, attempts)
            ok &= abs(z) <= 4 and rate_ok
            parts.append(f"{name} eps={eps}: z={z:+.2f}, exhaustion {rate:.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    acceptance_line(3, ok, "; ".join(parts) + f"; {dt:.1f}s (< 120s)")
    assert ok


def test_criterion_4_branching_tail():
    t0 = time.perf_counter()
    n = 100_000
    params = BranchingParams.from_lambda(3, 0.2)
    ok = True
    parts = []
    for eps in (0.1, 0.01):
        T = budget_for(3, 0.2, eps)
        tail = branching_tail(params, T, n, RngStream(4, int(1 / eps)))
        ok &= tail <= eps + 3 * binom_sigma(eps, n)
        parts.append(f"eps={eps}: T={T}, tail {tail:.5f}")
    dt = time.perf_counter() - t0
    ok &= dt < 60
    acceptance_line(4, ok, "; ".join(parts) + f"; {dt:.1f}s (< 60s)")
    assert ok


def _deep_reference(g, lam, v, tol):
    """Weitz interval deepened until its half-width drops below ``tol``."""
    ell = 4
    while True:
        lo, hi = weitz_baseline(g, lam, v, ell)
        if (hi - lo) / 2 < tol or ell >= 16:
            return (lo + hi) / 2, (hi - lo) / 2, ell
        ell += 1


def test_criterion_5_estimator_contract():
    t0 = time.perf_counter()
    g = gen_random_bounded(64, 4, 0)
    assert g.max_degree == 4 and len(g.components()) == 1
    lam = 1 / 12
    cfg = HardcoreEstimatorConfig(k=1.0)
    reps = 10_000
    vertices = [int(v) for v in np.linspace(0, g.n - 1, 8).round()]
    ok = True
    worst_z, worst_var = 0.0, 0.0
    for v in vertices:
        vals = np.array([estimate_marginal_zero(g, lam, v, cfg, rng=RngStream(5, v * reps + j)).value
                         for j in range(reps)])
        se = vals.std(ddof=1) / math.sqrt(reps)
        ref, half, _ = _deep_reference(g, lam, v, 1e-4 * se)
        z = abs(vals.mean() - ref) / se
        var = vals.var(ddof=1)
        var_se = math.sqrt(max(np.mean((vals - vals.mean()) ** 4) - var**2, 0.0) / reps)
        ok &= abs(vals.mean() - ref) <= 4 * se + half and var <= 1 / 64 + 3 * var_se
        worst_z, worst_var = max(worst_z, z), max(worst_var, var)
    dt = time.perf_counter() - t0
    ok &= dt < 600
    acceptance_line(5, ok, f"8 vertices x {reps} runs: max |z| {worst_z:.2f} (<= 4), "
                           f"max Var {worst_var:.2e} (<= 1/64 = {1 / 64:.4f}), {dt:.1f}s (< 600s)")
    assert ok


def test_criterion_6_fpras_end_to_end():
    t0 = time.perf_counter()
    eps = 0.2
    parts = []
    ok = True
    for name, g, lam in (("C4", gen_cycle(4), 0.5), ("4x4 grid", gen_grid(4, 4), 0.08)):
        ref = exact_partition(g, hardcore(lam))
        hits = sum(within(fpras_hardcore(g, lam, eps, HardcoreEstimatorConfig(seed=s)).log_Z, ref, eps)
                   for s in range(10))
        ok &= hits >= 7
        parts.append(f"{name}: {hits}/10 within {eps}")
    dt = time.perf_counter() - t0
    ok &= dt < 600
    acceptance_line(6, ok, "; ".join(parts) + f"; {dt:.1f}s (< 600s)")
    assert ok


def test_criterion_7_lattice_pipeline():
    t0 = time.perf_counter()
    eps = 0.2
    models = {"hard-core lambda=1": hardcore(1.0), "Ising 1.2": TwoSpinParams(1.2, 1.2, 1.0)}
    parts = []
    ok = True
    table_err = 0.0
    for name, m in models.items():
        fit = ssm_decay_fit(gen_grid(7, 7), m, 24, 3)
        gp = GrowthParams(5, 2, fit.C_envelope, fit.r)
        for w in (3, 4):
            g = gen_grid(w, w)
            ref = exact_partition(g, m)
            hits = sum(within(fpras_lattice(g, m, eps, gp, seed, ell=2).log_Z, ref, eps) for seed in range(10))
            ok &= hits >= 7
            parts.append(f"{name} {w}x{w}: {hits}/10")
        big = gen_grid(9, 9)
        c = big.vertex_at(4, 4)
        tab = build_boundary_table(big, m, None, c, 4, GrowthParams(5))
        window = ball(big, c, tab.ell_prime)
        feas = np.flatnonzero(tab.feasible())
        for code in np.random.default_rng(7).choice(feas, size=10, replace=False):
            ref_row = grid_marginal(big, m, tab.decode(int(code)), c, window)
            table_err = max(table_err, float(np.abs(tab.lookup(int(code)) - ref_row).max()))
    ok &= table_err <= 1e-9
    dt = time.perf_counter() - t0
    ok &= dt < 900
    acceptance_line(7, ok, "; ".join(parts) + f"; table spot-check max error {table_err:.1e} (tol 1e-9); "
                           f"{dt:.1f}s (< 900s)")
    assert ok


def test_criterion_8_lower_bound():
    t0 = time.perf_counter()
    failures = 0
    brute_err = 0.0
    for delta, k in ((4, 1), (3, 2), (5, 1)):
        rep = weitz_lower_bound(delta, k, 10)
        failures += sum(not r.passed for r in rep.rows)
        assert [r.ell for r in rep.rows] == list(range(2, 11))
        brute_err = max(brute_err, abs(rep.rows[0].d_tv - lower_bound_bruteforce(delta, k, 2)))
    dt = time.perf_counter() - t0
    ok = failures == 0 and brute_err <= 1e-10 and dt < 10
    acceptance_line(8, ok, f"{failures} failing rows over 27, ell=2 brute-force error {brute_err:.1e} (tol 1e-10), "
                           f"{dt:.2f}s (< 10s)")
    assert ok


def test_criterion_9_quad_growth():
    t0 = time.perf_counter()
    band = (0.005, 0.05)
    ratios = {}
    thin_ok = True
    for n in (32, 64, 128, 256):
        g, s = gen_quad_boundary(n)
        ratios[n] = len(ball(g, s, n).sphere) / n**2
        for v in range(g.n):
            r, sphere = find_thin_sphere(g, v, 8, 5)
            thin_ok &= 4 <= r <= 8 and len(sphere) <= 2 * 5 * 8
    dt = time.perf_counter() - t0
    in_band = all(band[0] <= x <= band[1] for x in ratios.values())
    ok = in_band and thin_ok and dt < 60
    shown = ", ".join(f"{n}: {x:.5f}" for n, x in ratios.items())
    acceptance_line(9, ok, f"f(n)/n^2 = {shown} in [{band[0]}, {band[1]}]; thin spheres found on every vertex: "
                           f"{thin_ok}; {dt:.1f}s (< 60s)")
    assert ok


def test_criterion_10_scaling():
    t0 = time.perf_counter()
    hc = run_suite("hardcore", seed=0)
    lat = run_suite("lattice", seed=0)
    fast, weitz, lattice = hc["fast-hardcore"], hc["weitz-baseline"], lat["lattice"]
    hc2 = run_suite("hardcore", seed=0)
    lat2 = run_suite("lattice", seed=0)

    def steps(res):
        return [r.steps_consumed for r in res.rows]

    deterministic = (steps(fast) == steps(hc2["fast-hardcore"]) and steps(weitz) == steps(hc2["weitz-baseline"])
                     and steps(lattice) == steps(lat2["lattice"]))
    no_failures = not (fast.failures or weitz.failures or lattice.failures)
    dt = time.perf_counter() - t0
    ok = fast.slope < weitz.slope and lattice.slope < 2.0 and deterministic and no_failures and dt < 1800
    acceptance_line(10, ok, f"fast slope {fast.slope:.3f} (R^2 {fast.r2:.3f}) < Weitz slope {weitz.slope:.3f} "
                            f"(R^2 {weitz.r2:.3f}); lattice slope {lattice.slope:.3f} (R^2 {lattice.r2:.3f}) < 2.0; "
                            f"deterministic {deterministic}; {dt:.1f}s (< 1800s)")
    assert ok
