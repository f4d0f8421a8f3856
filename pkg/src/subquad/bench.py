"""Scaling runs on logical step counters.

Steps are deterministic given the seed: SAW-tree nodes built plus sampler
invocations for the hard-core estimator, tree nodes for the deterministic
baseline, and table work plus sampler work for the lattice pipeline.  To
keep large sizes affordable, each run processes an evenly spread subset of
vertex positions and a few product samples, then scales the counts up by
the skipped fraction.  Wall time is recorded but never used for fits.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import SubquadError
from .estimator import HardcoreEstimatorConfig, fpras_hardcore, sample_count, truncation_depth, weitz_log_partition
from .graph import Graph, gen_grid, gen_random_bounded
from .lattice import GrowthParams, fpras_lattice
from .spin import hardcore

__all__ = [
    "BenchRow",
    "ScalingResult",
    "ALGORITHMS",
    "make_family",
    "scaling_run",
    "fit_slope",
    "write_rows",
    "read_rows",
    "SUITES",
    "run_suite",
]

ALGORITHMS = ("fast-hardcore", "weitz-baseline", "lattice")


@dataclass(frozen=True)
class BenchRow:
    algorithm: str
    n: int
    eps: float
    wall_time: float
    steps_consumed: int
    estimate: float
    seed: int


@dataclass
class ScalingResult:
    rows: list[BenchRow]
    slope: float
    intercept: float
    r2: float
    stderr: float
    failures: list[str] = field(default_factory=list)

    @property
    def band(self) -> tuple[float, float]:
        # normal-approximation 95% band on the slope
        return self.slope - 1.96 * self.stderr, self.slope + 1.96 * self.stderr


def make_family(spec) -> Callable[[int, int], Graph]:
    """Graph family from a spec: a callable ``(n, seed) -> Graph``, ``"random:D"`` or ``"grid"``."""
    if callable(spec):
        return spec
    name, _, arg = str(spec).partition(":")
    if name == "random":
        delta = int(arg or 4)
        return lambda n, seed: gen_random_bounded(n, delta, seed)
    if name == "grid":
        def grid(n, seed):
            w = 2 ** (int(math.log2(n)) // 2) if n & (n - 1) == 0 else max(1, round(math.sqrt(n)))
            return gen_grid(w, n // w)
        return grid
    raise ValueError(f"unknown graph family {spec!r}")


def _positions(total: int, k: int | None) -> list[int] | None:
    if k is None or k >= total:
        return None
    return sorted(set(np.linspace(0, total - 1, k).round().astype(int).tolist()))


def _one(algorithm: str, g: Graph, eps: float, seed: int, opts: dict) -> tuple[int, float]:
    k_vert = opts.get("vertices")
    samples = opts.get("samples", 1)
    if algorithm == "fast-hardcore":
        lam = opts.get("lam", 1 / 12)
        cfg = HardcoreEstimatorConfig(k=opts.get("k", 1.0), C=opts.get("C", 1.0), seed=seed)
        t, N, _ = sample_count(lam, eps)
        pos = _positions(g.n * t, k_vert)
        res = fpras_hardcore(g, lam, eps, cfg, samples=samples, vertices=pos)
        scale = (N / res.N_samples) * (g.n * t / (len(pos) if pos else g.n * t))
        return round(res.diagnostics["steps"] * scale), res.log_Z
    if algorithm == "weitz-baseline":
        # depth for per-vertex error 1/n, i.e. the all-n-vertices product within a constant factor
        ell = truncation_depth(max(g.n, 2) ** 2, max(g.max_degree, 2), opts.get("k", 1.0), opts.get("C", 1.0))
        pos = _positions(g.n, k_vert)
        res = weitz_log_partition(g, opts.get("lam", 1 / 12), ell, vertices=pos)
        scale = g.n / (len(pos) if pos else g.n)
        return round(res["steps"] * scale), res["log_Z"]
    if algorithm == "lattice":
        m = opts.get("model") or hardcore(opts.get("lam", 0.2))
        gp = opts["gp"]
        pos = _positions(g.n, k_vert)
        res = fpras_lattice(g, m, eps, gp, seed, sampler=opts.get("sampler", "lazy"), samples=samples,
                            vertices=pos, radius=opts.get("radius"))
        d = res.diagnostics
        frac = g.n / (len(pos) if pos else g.n)
        steps = d["steps_pinning"] + frac * (d["steps_tables"] + d["steps_sampling"] * d["N_planned"] / res.N_samples)
        return round(steps), res.log_Z
    raise ValueError(f"unknown algorithm {algorithm!r}")


def fit_slope(ns: Sequence[float], steps: Sequence[float]):
    """Least-squares slope of log steps against log n, with R^2 and standard error."""
    x, y = np.log(np.asarray(ns, float)), np.log(np.asarray(steps, float))
    if len(x) < 2:
        return math.nan, math.nan, math.nan, math.nan
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2), float(fit.stderr)


def scaling_run(family, algorithm: str, sizes: Sequence[int], eps: float, seed: int = 0, **opts) -> ScalingResult:
    """Run one algorithm over ascending sizes and fit ``log steps ~ slope * log n``.

    Options: ``lam``, ``k``, ``C`` (hard-core), ``model``, ``gp``,
    ``sampler``, ``radius`` (lattice), ``vertices`` (positions processed per
    run) and ``samples`` (product samples per run).  A failing size is
    recorded as a row with ``steps_consumed = -1`` and left out of the fit.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be ascending")
    gen = make_family(family)
    rows, failures = [], []
    for n in sizes:
        g = gen(n, seed)
        t0 = time.perf_counter()
        try:
            steps, est = _one(algorithm, g, eps, seed, opts)
        except SubquadError as exc:
            failures.append(f"n={n}: {type(exc).__name__}: {exc}")
            steps, est = -1, math.nan
        rows.append(BenchRow(algorithm, g.n, eps, time.perf_counter() - t0, steps, est, seed))
    ok = [r for r in rows if r.steps_consumed > 0]
    slope, intercept, r2, se = fit_slope([r.n for r in ok], [r.steps_consumed for r in ok])
    return ScalingResult(rows, slope, intercept, r2, se, failures)


def write_rows(rows: Sequence[BenchRow], path) -> None:
    names = [f.name for f in fields(BenchRow)]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=names)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))


def read_rows(path) -> list[BenchRow]:
    casts = {"n": int, "eps": float, "wall_time": float, "steps_consumed": int, "estimate": float, "seed": int}
    with open(path, newline="") as fh:
        return [BenchRow(**{k: casts.get(k, str)(v) for k, v in row.items()}) for row in csv.DictReader(fh)]


# the lattice suite's decay constants come from ssm_decay_fit on a 9x9 grid
# center (hard-core, lambda = 0.2, radii 1..4); they are recomputed at run time
def _lattice_gp(lam: float) -> GrowthParams:
    from .verify import ssm_decay_fit

    fit = ssm_decay_fit(gen_grid(9, 9), hardcore(lam), 40, 4)
    return GrowthParams(5, 2, fit.C_envelope, fit.r)


SUITES = {
    "hardcore": [
        ("random:4", "fast-hardcore", [2**e for e in range(8, 14)], 0.5, {"lam": 1 / 12, "vertices": 48, "samples": 1}),
        ("random:4", "weitz-baseline", [2**e for e in range(8, 14)], 0.5, {"lam": 1 / 12, "vertices": 48}),
    ],
    "lattice": [
        ("grid", "lattice", [2**e for e in range(8, 13)], 0.5, {"lam": 0.2, "vertices": 32, "samples": 1}),
    ],
    "smoke": [
        ("random:4", "fast-hardcore", [32, 64, 128], 0.5, {"lam": 1 / 12, "vertices": 8, "samples": 1}),
        ("random:4", "weitz-baseline", [32, 64, 128], 0.5, {"lam": 1 / 12, "vertices": 8}),
        ("grid", "lattice", [16, 36, 64], 0.5, {"lam": 0.2, "vertices": 8, "samples": 1}),
    ],
}


def run_suite(name: str, seed: int = 0) -> dict[str, ScalingResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    out = {}
    for family, algorithm, sizes, eps, opts in SUITES[name]:
        opts = dict(opts)
        if algorithm == "lattice":
            opts.setdefault("gp", _lattice_gp(opts.get("lam", 0.2)))
        out[algorithm] = scaling_run(family, algorithm, sizes, eps, seed, **opts)
    return out
