"""Command line entry point.

Every command prints one JSON report on stdout and a short summary on
stderr.  Exit codes: 0 success, 2 bad arguments or input, 3 regime or
feasibility failure, 4 oracle cap exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    BudgetExhausted,
    GrowthAssumptionViolated,
    InfeasibleConditioning,
    OracleTooLarge,
    OutOfRegime,
    SamplerStuck,
    SubquadError,
)
from .graph import (
    gen_cycle,
    gen_grid,
    gen_path,
    gen_quad_boundary,
    gen_random_bounded,
    gen_regular_tree,
    gen_star,
    read_graph,
    write_graph,
)
from .spin import as_qspin, dump_model, exact_marginal, exact_partition, hardcore, load_model

SCHEMA_VERSION = 1


class ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def _clean(x):
    """Replace non-finite floats so the output is strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def _digest(args: argparse.Namespace, graph=None) -> str:
    h = hashlib.sha256()
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("seed", "func", "out", "plot", "csv")}
    h.update(json.dumps(items, sort_keys=True, default=str).encode())
    if graph is not None:
        h.update(graph.digest().encode())
    return h.hexdigest()[:16]


# -- commands ----------------------------------------------------------


def cmd_exact(args, ctx):
    g = ctx.graph(args.graph)
    m = load_model(args.model)
    pin = {int(k): int(v) for k, v in json.loads(args.pin).items()} if args.pin else {}
    out = {"log_Z": exact_partition(g, m, pin), "model": dump_model(m), "n": g.n}
    if args.vertex is not None:
        out["marginal"] = exact_marginal(g, m, pin, args.vertex).tolist()
    ctx.summary = f"log Z = {out['log_Z']:.12g}"
    return out


def cmd_count(args, ctx):
    g = ctx.graph(args.graph)
    if args.family == "hardcore":
        from .estimator import HardcoreEstimatorConfig, check_regime, fpras_hardcore

        cfg = HardcoreEstimatorConfig(k=args.k, C=args.C, seed=args.seed, ell_override=args.depth)
        ctx.warnings.extend(check_regime(max(g.max_degree, 2), args.lam, args.k).warnings())
        res = fpras_hardcore(g, args.lam, args.eps, cfg, max_steps=args.max_steps, time_limit=args.time_limit)
        model = dump_model(hardcore(args.lam))
    else:
        from .lattice import GrowthParams, fpras_lattice

        m = load_model(args.model)
        gp = GrowthParams(args.c0, args.dim, args.ssm_c, args.ssm_r)
        res = fpras_lattice(g, m, args.eps, gp, args.seed, ell=args.ell, sampler=args.sampler, radius=args.radius,
                            rule=args.rule, max_steps=args.max_steps, time_limit=args.time_limit)
        ctx.warnings.extend(res.diagnostics.get("warnings", []))
        model = dump_model(m)
    ctx.summary = f"log Z ~ {res.log_Z:.6g} from {res.N_samples} samples{' (truncated)' if res.truncated else ''}"
    return {
        "log_Z": res.log_Z,
        "Z": res.Z if res.log_Z < 700 else None,
        "N_samples": res.N_samples,
        "eps": res.eps,
        "truncated": res.truncated,
        "wall_time": res.wall_time,
        "model": model,
        "diagnostics": res.diagnostics,
    }


def cmd_marginal(args, ctx):
    from .estimator import HardcoreEstimatorConfig, estimate_marginal_zero, weitz_baseline
    from .sampler import RngStream, stream_id

    g = ctx.graph(args.graph)
    cfg = HardcoreEstimatorConfig(k=args.k, C=args.C, seed=args.seed, ell_override=args.depth)
    vals, steps, retries = [], [], 0
    for j in range(args.reps):
        est = estimate_marginal_zero(g, args.lam, args.vertex, cfg, rng=RngStream(args.seed, stream_id("marginal-rep", j)))
        vals.append(est.value)
        steps.append(est.steps_consumed)
        retries += est.retries
    arr = np.array(vals)
    out = {
        "mean": float(arr.mean()),
        "var": float(arr.var(ddof=1)) if len(arr) > 1 else 0.0,
        "stderr": float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0,
        "reps": args.reps,
        "ell": est.ell,
        "mean_steps": float(np.mean(steps)),
        "retries": retries,
        "weitz_interval": list(weitz_baseline(g, args.lam, args.vertex, est.ell)),
    }
    try:
        out["exact"] = float(exact_marginal(g, hardcore(args.lam), {}, args.vertex)[0])
    except OracleTooLarge:
        out["exact"] = None
    ctx.summary = f"mean p0 = {out['mean']:.6g} +- {out['stderr']:.2g}"
    return out


def cmd_sample(args, ctx):
    from .sampler import Budget, LazyTables, RngStream, budget_for, lazy_sample, stream_id

    g = ctx.graph(args.graph)
    m = load_model(args.model)
    qm = as_qspin(m)
    if args.budget is not None:
        T = args.budget
    else:
        if not (qm.q == 2 and qm.A[1, 1] == 0):
            raise ArgumentError("--budget is required unless the model is hard-core")
        lam = float(qm.b[1] / qm.b[0])
        T = budget_for(max(g.max_degree, 2), lam, args.eps)
    tables = LazyTables(g, qm)
    counts = Counter()
    hist = Counter()
    exhausted = 0
    for j in range(args.draws):
        b = Budget(T)
        try:
            s = lazy_sample(qm, g, {}, args.vertex, args.radius, b, RngStream(args.seed, stream_id("sample", j)), tables)
            counts[s] += 1
        except BudgetExhausted:
            exhausted += 1
        hist[b.consumed] += 1
    done = sum(counts.values())
    out = {
        "draws": args.draws,
        "budget": T,
        "exhausted": exhausted,
        "frequencies": [counts[i] / done if done else None for i in range(qm.q)],
        "steps_histogram": {str(k): hist[k] for k in sorted(hist)},
    }
    try:
        out["exact"] = exact_marginal(g, m, {}, args.vertex).tolist()
    except OracleTooLarge:
        out["exact"] = None
    ctx.summary = f"{done} draws kept, {exhausted} exhausted"
    return out


def cmd_verify(args, ctx):
    from . import plotting, verify

    if args.what == "lower-bound":
        rep = verify.weitz_lower_bound(args.delta, args.k, args.lmax)
        out = {
            "delta": rep.delta, "k": rep.k, "lambda": rep.lam, "base_gap": rep.base_gap, "all_pass": rep.all_pass,
            "rows": [{"ell": r.ell, "d_tv": r.d_tv, "bound": r.bound, "pass": r.passed} for r in rep.rows],
        }
        if args.plot:
            out["plot"] = str(plotting.plot_lower_bound(rep, args.plot))
        ctx.summary = f"{sum(r.passed for r in rep.rows)}/{len(rep.rows)} depths pass"
        return out
    g = ctx.graph(args.graph)
    if args.what == "growth":
        prof = verify.growth_profile(g, args.dim)
        ctx.summary = f"C0 = {prof.C0:g}"
        return {"C0": prof.C0, "d": prof.d, "sampled": prof.sampled, "worst_vertex": prof.worst_vertex,
                "worst_radius": prof.worst_radius}
    m = load_model(args.model)
    v = args.vertex if args.vertex is not None else g.n // 2
    fit = verify.ssm_decay_fit(g, m, v, args.lmax)
    out = {"vertex": v, "C": fit.C, "r": fit.r, "C_envelope": fit.C_envelope,
           "curve": [{"ell": e, "D": d} for e, d in fit.curve], "fit_radii": fit.used}
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("ell,D\n")
            for e, d in fit.curve:
                fh.write(f"{e},{d!r}\n")
        out["csv"] = args.csv
        out["plot"] = str(plotting.plot_decay(fit.curve, fit, Path(args.csv).with_suffix(".png")))
    ctx.summary = f"C = {fit.C_envelope:.4g} (envelope), r = {fit.r:.4g}"
    return out


def cmd_bench(args, ctx):
    from . import plotting
    from .bench import run_suite, write_rows

    results = run_suite(args.suite, seed=args.seed)
    rows = [r for res in results.values() for r in res.rows]
    write_rows(rows, args.out)
    png = plotting.plot_scaling(results, Path(args.out).with_suffix(".png"))
    ctx.summary = ", ".join(f"{k}: slope {v.slope:.3f}" for k, v in results.items())
    return {
        "suite": args.suite,
        "csv": args.out,
        "plot": str(png),
        "fits": {k: {"slope": v.slope, "intercept": v.intercept, "r2": v.r2, "stderr": v.stderr, "band": list(v.band),
                     "failures": v.failures} for k, v in results.items()},
    }


def cmd_gen(args, ctx):
    kind = args.kind
    extra = {}
    if kind == "grid":
        g = gen_grid(args.w, args.h if args.h is not None else args.w)
    elif kind == "path":
        g = gen_path(args.n)
    elif kind == "cycle":
        g = gen_cycle(args.n)
    elif kind == "star":
        g = gen_star(args.n)
    elif kind == "tree":
        g = gen_regular_tree(args.delta, args.depth)
    elif kind == "random":
        g = gen_random_bounded(args.n, args.delta, args.seed)
    else:
        g, center = gen_quad_boundary(args.n)
        extra["center"] = center
    write_graph(g, args.out, args.format)
    ctx.summary = f"wrote {g.n} vertices, {g.edge_count()} edges to {args.out}"
    return {"out": args.out, "n": g.n, "edges": g.edge_count(), "digest": g.digest(), **extra}


# -- parser ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="subquad", description="Approximate counting for spin systems.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, graph=True):
        if graph:
            sp.add_argument("--graph", required=True, help="edge-list or JSON graph file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1, help="worker cap (work runs sequentially)")

    sp = sub.add_parser("exact", help="exact log partition function and marginals")
    common(sp)
    sp.add_argument("--model", required=True, help="model JSON or path")
    sp.add_argument("--pin", help='pinning as JSON, e.g. {"0": 1}')
    sp.add_argument("--vertex", type=int)
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("count", help="randomized partition function estimate")
    csub = sp.add_subparsers(dest="family", required=True, parser_class=_Parser)
    hc = csub.add_parser("hardcore")
    common(hc)
    hc.add_argument("--lambda", dest="lam", type=float, required=True)
    hc.add_argument("--k", type=float, default=1.0)
    hc.add_argument("--C", type=float, default=1.0)
    hc.add_argument("--eps", type=float, default=0.2)
    hc.add_argument("--depth", type=int)
    hc.add_argument("--max-steps", type=int)
    hc.add_argument("--time-limit", type=float)
    hc.set_defaults(func=cmd_count)
    lat = csub.add_parser("lattice")
    common(lat)
    lat.add_argument("--model", required=True)
    lat.add_argument("--eps", type=float, required=True)
    lat.add_argument("--c0", type=float, required=True)
    lat.add_argument("--ssm-c", type=float, required=True)
    lat.add_argument("--ssm-r", type=float, required=True)
    lat.add_argument("--dim", type=int, default=2)
    lat.add_argument("--ell", type=int)
    lat.add_argument("--sampler", choices=["auto", "exact", "lazy"], default="auto")
    lat.add_argument("--radius", type=int)
    lat.add_argument("--rule", choices=["certified", "worst-case"], default="certified")
    lat.add_argument("--max-steps", type=int)
    lat.add_argument("--time-limit", type=float)
    lat.set_defaults(func=cmd_count)

    sp = sub.add_parser("marginal", help="repeated single-vertex estimates")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--vertex", type=int, required=True)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--k", type=float, default=1.0)
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--depth", type=int)
    sp.set_defaults(func=cmd_marginal)

    sp = sub.add_parser("sample", help="lazy sampler draws with step histogram")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--vertex", type=int, required=True)
    sp.add_argument("--draws", type=int, default=1000)
    sp.add_argument("--radius", type=int, default=1)
    sp.add_argument("--budget", type=int)
    sp.add_argument("--eps", type=float, default=0.01, help="exhaustion target for the hard-core budget")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("verify", help="numerical checks")
    vsub = sp.add_subparsers(dest="what", required=True, parser_class=_Parser)
    lb = vsub.add_parser("lower-bound")
    common(lb, graph=False)
    lb.add_argument("--delta", type=int, required=True)
    lb.add_argument("--k", type=float, required=True)
    lb.add_argument("--lmax", type=int, required=True)
    lb.add_argument("--plot", help="PNG path")
    lb.set_defaults(func=cmd_verify)
    ssm = vsub.add_parser("ssm")
    common(ssm)
    ssm.add_argument("--model", required=True)
    ssm.add_argument("--vertex", type=int)
    ssm.add_argument("--lmax", type=int, default=3)
    ssm.add_argument("--csv", help="write the decay curve here (and a PNG next to it)")
    ssm.set_defaults(func=cmd_verify)
    gr = vsub.add_parser("growth")
    common(gr)
    gr.add_argument("--dim", type=int, default=2)
    gr.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bench", help="scaling suites; CSV rows plus a PNG next to them")
    common(sp, graph=False)
    sp.add_argument("--suite", required=True, choices=["hardcore", "lattice", "smoke"])
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("gen", help="write a generated graph")
    sp.add_argument("kind", choices=["grid", "path", "cycle", "star", "tree", "random", "quad-boundary"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--w", type=int)
    sp.add_argument("--h", type=int)
    sp.add_argument("--delta", type=int)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["json", "edgelist"])
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)
    return p


_GEN_NEEDS = {"grid": ["w"], "path": ["n"], "cycle": ["n"], "star": ["n"], "tree": ["delta", "depth"],
              "random": ["n", "delta"], "quad-boundary": ["n"]}


class _Context:
    def __init__(self):
        self.warnings: list[str] = []
        self.summary = ""
        self.graphs = []

    def graph(self, path):
        try:
            g = read_graph(path)
        except (OSError, ValueError, KeyError) as exc:
            raise ArgumentError(f"cannot read graph {path}: {exc}") from exc
        self.graphs.append(g)
        return g


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen":
        missing = [k for k in _GEN_NEEDS[args.kind] if getattr(args, k) is None]
        if missing:
            parser.error(f"gen {args.kind} needs --{', --'.join(missing)}")
    ctx = _Context()
    start = time.perf_counter()
    code = 0
    try:
        outputs = args.func(args, ctx)
    except (ArgumentError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OracleTooLarge as exc:
        print(f"oracle cap exceeded: {exc}", file=sys.stderr)
        return 4
    except (GrowthAssumptionViolated, InfeasibleConditioning, OutOfRegime, SamplerStuck, BudgetExhausted) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except SubquadError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    report = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "command": argv,
        "inputs_digest": _digest(args, ctx.graphs[0] if ctx.graphs else None),
        "seed": getattr(args, "seed", None),
        "outputs": outputs,
        "timing": {"wall_time": time.perf_counter() - start},
        "warnings": ctx.warnings,
    }
    print(json.dumps(_clean(report), default=_json_default, indent=1))
    if ctx.summary:
        print(ctx.summary, file=sys.stderr)
    for w in ctx.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
