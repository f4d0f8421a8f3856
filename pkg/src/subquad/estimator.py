"""Hard-core partition function by self-reduction over truncated SAW trees.

``1/Z(G)`` telescopes into the product over ``i`` of ``mu_{G_i, v_i}(0)``,
where ``G_i`` is ``G`` with the first ``i-1`` vertices removed.  Each factor
is estimated without bias by sampling the boundary of a shallow SAW tree
with the lazy hard-core sampler and evaluating the ratio recursion under
that boundary.  The truncation depth only has to push the variance below
``1/n``, which is about half the depth the deterministic truncation needs.
"""

from __future__ import annotations

import math
import time
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InternalConsistencyError, OutOfRegime, SamplerStuck, BudgetExhausted
from .graph import Graph, disjoint_union
from .saw import build_saw, saw_marginal
from .sampler import Budget, RngStream, SawView, budget_for, hardcore_sample, stream_id
from .spin import hardcore

__all__ = [
    "HardcoreEstimatorConfig",
    "MarginalEstimate",
    "CountEstimate",
    "RegimeDiagnosis",
    "PrefixRemoved",
    "lambda_critical",
    "truncation_depth",
    "check_regime",
    "estimate_marginal_zero",
    "fpras_hardcore",
    "sample_count",
    "weitz_baseline",
    "weitz_log_partition",
]

ONE_MINUS_INV_E = 1.0 - math.exp(-1.0)


@dataclass(frozen=True)
class HardcoreEstimatorConfig:
    k: float = 1.0
    C: float = 1.0
    delta: float | None = None  # per-marginal failure budget; None lets the count pick 1/(n'N)
    ell_override: int | None = None
    seed: int = 0
    retry_cap: int = 16
    budget_override: int | None = None  # sampler steps when the one-hop budget bound does not apply

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


@dataclass
class MarginalEstimate:
    value: float
    boundary_size: int
    tree_nodes: int
    steps_consumed: int
    retries: int
    ell: int = 0


@dataclass
class CountEstimate:
    log_Z: float
    N_samples: int
    eps: float
    truncated: bool
    wall_time: float
    seed: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)


@dataclass(frozen=True)
class RegimeDiagnosis:
    delta: int
    lam: float
    k: float
    counting_regime: bool
    sampler_regime: bool
    uniqueness: bool
    lambda_c: float
    counting_bound: float
    sampler_bound: float

    def warnings(self) -> list[str]:
        out = []
        if not self.counting_regime:
            out.append(f"lambda={self.lam} is not below 1/(Delta^k (Delta-1))={self.counting_bound:.6g}")
        if not self.sampler_regime:
            out.append(f"lambda={self.lam} is not below 1/(Delta-1)={self.sampler_bound:.6g}; sampler budget unjustified")
        if not self.uniqueness:
            out.append(f"lambda={self.lam} is not below the uniqueness threshold {self.lambda_c:.6g}")
        return out


class PrefixRemoved(Mapping):
    """Pinning that marks every vertex below ``k`` as removed (spin 0)."""

    def __init__(self, k: int):
        self.k = k

    def __getitem__(self, v):
        if 0 <= v < self.k:
            return 0
        raise KeyError(v)

    def get(self, v, default=None):
        return 0 if 0 <= v < self.k else default

    def __iter__(self):
        return iter(range(self.k))

    def __len__(self):
        return self.k


def lambda_critical(delta: int) -> float:
    """Uniqueness threshold ``(Delta-1)^(Delta-1) / (Delta-2)^Delta``; infinite for Delta <= 2."""
    if delta <= 2:
        return math.inf
    return (delta - 1) ** (delta - 1) / (delta - 2) ** delta


def truncation_depth(n: int, delta: int, k: float, C: float = 1.0) -> int:
    """Smallest depth with ``C * delta^(-k ell) <= n^(-1/2)``, at least 1."""
    if n < 2 or delta < 2 or not k > 0 or not C > 0:
        raise ValueError("need n >= 2, delta >= 2, k > 0, C > 0")
    ell = math.ceil((math.log(n) / 2 - math.log(C)) / (k * math.log(delta)))
    return max(ell, 1)


def check_regime(delta: int, lam: float, k: float) -> RegimeDiagnosis:
    counting_bound = 1.0 / (delta**k * (delta - 1)) if delta > 1 else math.inf
    sampler_bound = 1.0 / (delta - 1) if delta > 1 else math.inf
    lc = lambda_critical(delta)
    return RegimeDiagnosis(delta, lam, k, lam < counting_bound, lam < sampler_bound, lam < lc, lc,
                           counting_bound, sampler_bound)


def _sampler_budget(delta: int, lam: float, eps: float, cfg: HardcoreEstimatorConfig) -> int:
    if cfg.budget_override is not None:
        return cfg.budget_override
    return budget_for(max(delta, 2), lam, eps)


def estimate_marginal_zero(g: Graph, lam: float, v: int, cfg: HardcoreEstimatorConfig, *,
                           pin: Mapping | None = None, n_ref: int | None = None,
                           rng: RngStream | None = None, delta: float | None = None) -> MarginalEstimate:
    """Unbiased estimate of ``mu_v(0)`` from one sampled SAW-tree boundary.

    ``pin`` marks removed vertices (spin 0) or occupied ones (spin 1).
    ``n_ref`` is the instance size used for the depth rule (default ``g.n``).
    """
    g.check_vertex(v)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    n_ref = g.n if n_ref is None else n_ref
    delta = cfg.delta if delta is None else delta
    if delta is None:
        delta = 1.0 / max(n_ref, 2)
    if cfg.ell_override is not None:
        ell = cfg.ell_override
    else:
        ell = truncation_depth(max(n_ref, 2), max(g.max_degree, 2), cfg.k, cfg.C)
    rng = rng or RngStream(cfg.seed, stream_id("marginal", v))
    tree = build_saw(g, v, ell, pin)
    boundary = tree.boundary_nodes()
    view = SawView(tree)
    steps = 0
    retries = 0
    if boundary:
        T = _sampler_budget(g.max_degree, lam, delta / (8 * len(boundary)), cfg)
        for j, s in enumerate(boundary):
            for attempt in range(cfg.retry_cap + 1):
                if attempt == cfg.retry_cap:
                    raise SamplerStuck(
                        f"boundary node {s} exhausted {cfg.retry_cap} budgets of {T} steps",
                        {"vertex": v, "node": s, "budget": T, "retries": retries, "boundary_size": len(boundary)},
                    )
                b = Budget(T)
                try:
                    view.pins[s] = hardcore_sample(view, lam, s, b, rng)
                    steps += b.consumed
                    break
                except BudgetExhausted:
                    steps += b.consumed
                    retries += 1
    value = saw_marginal(tree, hardcore(lam), {s: view.pins[s] for s in boundary})
    return MarginalEstimate(value, len(boundary), len(tree), steps, retries, ell)


def sample_count(lam: float, eps: float) -> tuple[int, int, float]:
    """Copies ``t``, samples ``N`` and the per-copy accuracy ``eps1`` of the counting scheme."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    t = math.ceil(2.0 / eps)
    eps0 = ONE_MINUS_INV_E / 2
    N = math.ceil(8.0 * math.exp((1.0 + lam) ** 2) / eps0**2)
    return t, N, ONE_MINUS_INV_E


def fpras_hardcore(g: Graph, lam: float, eps: float, cfg: HardcoreEstimatorConfig | None = None, *,
                   max_steps: int | None = None, time_limit: float | None = None,
                   samples: int | None = None, vertices=None) -> CountEstimate:
    """``(1 +- eps)``-estimate of ``Z(g)`` for the hard-core model, with probability >= 3/4.

    The graph is replaced by ``t = ceil(2/eps)`` disjoint copies, which are
    estimated at the fixed accuracy ``1 - 1/e``; the ``t``-th root of that
    estimate has accuracy ``eps``.  Each of the ``N`` product samples
    multiplies one marginal estimate per vertex of the copied graph, with
    vertices removed in ascending order.

    ``max_steps`` / ``time_limit`` stop early and flag the result as
    truncated.  ``samples`` overrides ``N`` and ``vertices`` restricts the
    product to a subset of positions; both exist for benchmarking and make
    the output a partial quantity, which the diagnostics record.
    """
    cfg = cfg or HardcoreEstimatorConfig()
    t_copies, N, eps1 = sample_count(lam, eps)
    if samples is not None:
        N = samples
    big = disjoint_union([g] * t_copies) if t_copies > 1 else g
    n_big = big.n
    delta = cfg.delta if cfg.delta is not None else 1.0 / (max(n_big, 1) * N)
    order = range(n_big) if vertices is None else sorted(vertices)
    start = time.perf_counter()
    logs = []
    steps = tree_nodes = retries = 0
    truncated = False
    ells = set()
    for j in range(N):
        acc = 0.0
        for i in order:
            rng = RngStream(cfg.seed, stream_id(f"count:{j}", i))
            est = estimate_marginal_zero(big, lam, i, cfg, pin=PrefixRemoved(i), n_ref=n_big, rng=rng, delta=delta)
            if not est.value > 0:
                raise InternalConsistencyError(f"marginal estimate at vertex {i} is {est.value}")
            acc += math.log(est.value)
            steps += est.tree_nodes + est.steps_consumed
            tree_nodes += est.tree_nodes
            retries += est.retries
            ells.add(est.ell)
        logs.append(acc)
        over_steps = max_steps is not None and steps >= max_steps
        over_time = time_limit is not None and time.perf_counter() - start >= time_limit
        if (over_steps or over_time) and j + 1 < N:
            truncated = True
            break
    log_x = float(logsumexp(logs) - math.log(len(logs)))
    log_z = -log_x / t_copies
    diag = {
        "copies": t_copies,
        "eps1": eps1,
        "n": g.n,
        "n_copied": n_big,
        "N_planned": N,
        "delta": delta,
        "ell": sorted(ells),
        "steps": steps,
        "tree_nodes": tree_nodes,
        "retries": retries,
        "partial_vertices": vertices is not None,
    }
    return CountEstimate(log_z, len(logs), eps, truncated, time.perf_counter() - start, cfg.seed, diag)


def weitz_baseline(g: Graph, lam: float, v: int, ell: int, pin: Mapping | None = None) -> tuple[float, float]:
    """Interval for ``mu_v(0)`` from the all-0 and all-1 boundaries at depth ``ell``."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    tree = build_saw(g, v, ell, pin)
    lo, hi, _ = _weitz_tree(tree, lam)
    return lo, hi


def _weitz_tree(tree, lam):
    m = hardcore(lam)
    boundary = tree.boundary_nodes()
    a = saw_marginal(tree, m, {s: 0 for s in boundary})
    b = saw_marginal(tree, m, {s: 1 for s in boundary})
    return min(a, b), max(a, b), len(tree)


def weitz_log_partition(g: Graph, lam: float, ell: int, vertices=None) -> dict:
    """Deterministic self-reduction with truncated SAW trees.

    Returns bounds on ``log Z`` (from the interval ends), the midpoint
    estimate and the number of tree nodes built.  ``vertices`` restricts
    the work to a subset of positions (benchmarking).
    """
    order = range(g.n) if vertices is None else sorted(vertices)
    lo_sum = hi_sum = mid_sum = 0.0
    nodes = 0
    for i in order:
        tree = build_saw(g, i, ell, PrefixRemoved(i))
        lo, hi, size = _weitz_tree(tree, lam)
        nodes += size
        lo_sum += math.log(lo)
        hi_sum += math.log(hi)
        mid_sum += math.log((lo + hi) / 2)
    return {"log_Z": -mid_sum, "log_Z_lo": -hi_sum, "log_Z_hi": -lo_sum, "steps": nodes, "ell": ell}
