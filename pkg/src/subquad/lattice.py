"""Counting on graphs of polynomial growth with boundary tables.

For each vertex the conditional marginal is tabulated for every assignment
of the free vertices on a thin sphere around it.  A marginal estimate is
then the average of table lookups at independent samples of that sphere,
so only the sphere has to be sampled.  A greedy pinning keeps every
conditional factor of the self-reduction bounded away from zero.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    BudgetExhausted,
    GrowthAssumptionViolated,
    InfeasibleConditioning,
    InternalConsistencyError,
    OracleTooLarge,
    SamplerStuck,
)
from .estimator import ONE_MINUS_INV_E, CountEstimate, MarginalEstimate
from .graph import Graph, ball, find_thin_sphere
from .sampler import Budget, LazyTables, RngStream, budget_for, lazy_sample, stream_id
from .spin import (
    as_qspin,
    boundary_marginals,
    check_pin,
    exact_marginal,
    joint_boundary_distribution,
    weight,
)

__all__ = [
    "GrowthParams",
    "BoundaryTable",
    "AdaptivePinning",
    "VertexPlan",
    "marginal_plan",
    "draw_estimates",
    "build_boundary_table",
    "boundary_sample_count",
    "lattice_marginal_estimator",
    "adaptive_pinning",
    "pinning_radius",
    "sample_count_lattice",
    "fpras_lattice",
    "poly_growth_depth",
    "choose_depth",
    "depth_ceiling",
    "sampler_radius",
    "exact_telescoping",
]

TABLE_CAP = 1 << 22
LAZY_BUDGET = 1_000_000
BATCH = 256
# free components up to this size get exact boundary draws under sampler="auto"
AUTO_EXACT_CAP = 64


@dataclass(frozen=True)
class GrowthParams:
    """Growth constant ``C0`` with exponent ``d``, and decay ``C r^(-ell)`` of boundary influence."""

    C0: float
    d: int = 2
    C: float = 1.0
    r: float = 2.0

    def __post_init__(self):
        if not self.C0 > 0:
            raise ValueError("C0 must be positive")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError("d must be an integer >= 2")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.r > 1:
            raise ValueError("r must exceed 1")

    def check(self, g: Graph) -> None:
        # the growth bound at radius 1 caps the degree
        if g.max_degree > self.C0:
            raise GrowthAssumptionViolated(f"max degree {g.max_degree} exceeds C0={self.C0:g}")


@dataclass
class BoundaryTable:
    """Conditional marginals of ``center`` for each assignment of ``free_boundary``.

    Row ``j`` of ``entries`` belongs to the assignment with
    ``tau[i] = (j // q**i) % q``; infeasible rows are NaN.
    """

    center: int
    ell_prime: int
    free_boundary: tuple[int, ...]
    entries: np.ndarray
    ball_size: int

    @property
    def q(self) -> int:
        return self.entries.shape[1]

    def __len__(self) -> int:
        return self.entries.shape[0]

    def encode(self, tau: Mapping[int, int] | Sequence[int]) -> int:
        if isinstance(tau, Mapping):
            tau = [tau[u] for u in self.free_boundary]
        return sum(int(s) * self.q**i for i, s in enumerate(tau))

    def decode(self, code: int) -> dict[int, int]:
        return {u: (code // self.q**i) % self.q for i, u in enumerate(self.free_boundary)}

    def feasible(self) -> np.ndarray:
        return np.isfinite(self.entries[:, 0])

    def lookup(self, code: int) -> np.ndarray:
        row = self.entries[code]
        if not np.isfinite(row[0]):
            raise InternalConsistencyError(f"boundary assignment {code} around {self.center} is infeasible")
        return row


def _pins_in(pin: Mapping[int, int], verts) -> dict:
    return {u: pin[u] for u in verts if u in pin}


def _sphere_for(g: Graph, v: int, ell: int, gp: GrowthParams) -> tuple[int, tuple[int, ...]]:
    if gp.d == 2:
        return find_thin_sphere(g, v, ell, gp.C0)
    return ell, ball(g, v, ell).sphere


def build_boundary_table(g: Graph, m, pin: Mapping[int, int] | None, v: int, ell: int, gp: GrowthParams,
                         *, cap: int = TABLE_CAP) -> BoundaryTable:
    """Table of ``mu_v`` given ``pin`` and each assignment of the free sphere vertices.

    With ``d == 2`` the sphere radius is the first thin one in
    ``[ell/2, ell]``; otherwise it is ``ell`` itself.  Pins inside the ball
    are respected and everything outside is cut off by the sphere.
    """
    qm = as_qspin(m)
    pin = check_pin(g, qm, pin)
    g.check_vertex(v)
    if v in pin:
        raise ValueError(f"vertex {v} is pinned")
    if ell < 1:
        raise ValueError("ell must be at least 1")
    gp.check(g)
    ell_p, sphere = _sphere_for(g, v, ell, gp)
    free = tuple(u for u in sphere if u not in pin)
    if qm.q ** len(free) > cap:
        raise OracleTooLarge(f"table for vertex {v} needs {qm.q}^{len(free)} entries; use a smaller ell")
    verts = ball(g, v, ell_p).ball
    entries = boundary_marginals(g, qm, _pins_in(pin, verts), v, verts, free)
    return BoundaryTable(v, ell_p, free, entries, len(verts))


def boundary_sample_count(n: int, gp: GrowthParams, ell_prime: int, free_size: int) -> int:
    """Number of boundary samples ``ceil(n C^2 r^(-ell'))``; one if nothing is left to sample."""
    if free_size == 0:
        return 1
    return max(1, math.ceil(n * gp.C**2 * gp.r ** (-ell_prime)))


# -- boundary samplers -------------------------------------------------


def sampler_radius(g: Graph, m, gp: GrowthParams, max_radius: int = 4) -> tuple[int, bool, str | None]:
    """Radius for the lazy sampler and whether its termination condition is certified.

    The condition is ``2 e q (1 + C0 R^d) C r^(-R) <= 1``.  When no radius up
    to ``max_radius`` meets it, hard-core models below ``1/(Delta-1)`` fall
    back to radius 1, whose recursion is a subcritical branching process;
    anything else gets radius 2 and a warning.
    """
    qm = as_qspin(m)
    for R in range(1, max_radius + 1):
        if 2 * math.e * qm.q * (1 + gp.C0 * R**gp.d) * gp.C * gp.r ** (-R) <= 1:
            return R, True, None
    lam = _hardcore_lambda(qm)
    if lam is not None and (g.max_degree <= 1 or lam < 1.0 / (g.max_degree - 1)):
        return 1, True, None
    return 2, False, (f"no lazy-sampler radius up to {max_radius} satisfies the termination condition "
                      f"for C={gp.C:g}, r={gp.r:g}; using radius 2 with a fixed step cap")


def _hardcore_lambda(qm) -> float | None:
    A = qm.A
    if qm.q == 2 and A[1, 1] == 0 and A[0, 0] > 0 and A[0, 1] == A[1, 0] == A[0, 0]:
        return float(qm.b[1] / qm.b[0])
    return None


def lazy_spin_cost(g: Graph, m, R: int) -> float:
    """Expected sampler steps per boundary spin: the mean progeny of the radius-1
    hard-core recursion when it is subcritical, else 1 (unknown)."""
    lam = _hardcore_lambda(as_qspin(m))
    if R == 1 and lam is not None:
        mean = lam * g.max_degree / (1 + lam)
        if mean < 1:
            return 1.0 / (1.0 - mean)
    return 1.0


def _lazy_budget(g: Graph, qm, R: int, eps: float) -> int:
    lam = _hardcore_lambda(qm)
    if R == 1 and lam is not None and g.max_degree >= 2 and lam * g.max_degree / (1 + lam) < 1:
        return budget_for(g.max_degree, lam, eps)
    return LAZY_BUDGET


@dataclass
class VertexPlan:
    """Everything needed to redraw the marginal estimate of one vertex."""

    vertex: int
    spin: int
    table: BoundaryTable
    samples: int
    sampler: str
    joint: np.ndarray | None = None
    radius: int = 0
    budget: int = 0
    retry_cap: int = 16
    table_steps: int = 0

    @property
    def exact_value(self) -> float | None:
        if len(self.table) == 1:
            return float(self.table.lookup(0)[self.spin])
        if self.joint is not None:
            col = np.nan_to_num(self.table.entries[:, self.spin])
            return float(self.joint @ col)
        return None


def marginal_plan(g: Graph, m, pin: Mapping[int, int] | None, v: int, k_spin: int, ell: int, gp: GrowthParams, *,
                  n_ref: int | None = None, sampler: str = "auto", radius: int | None = None,
                  delta: float | None = None, samples: int | None = None, retry_cap: int = 16,
                  table_cap: int = TABLE_CAP) -> VertexPlan:
    """Build the table and boundary sampler for one vertex; see ``lattice_marginal_estimator``."""
    qm = as_qspin(m)
    pin = check_pin(g, qm, pin)
    if not 0 <= k_spin < qm.q:
        raise ValueError("spin out of range")
    n_ref = g.n if n_ref is None else n_ref
    delta = 1.0 / max(n_ref, 2) if delta is None else delta
    table = build_boundary_table(g, qm, pin, v, ell, gp, cap=table_cap)
    S = len(table.free_boundary)
    count = boundary_sample_count(n_ref, gp, table.ell_prime, S) if samples is None else samples
    plan = VertexPlan(v, k_spin, table, count, "none", retry_cap=retry_cap,
                      table_steps=len(table) * table.ball_size)
    if S == 0:
        return plan
    if sampler in ("auto", "exact"):
        comp = _free_component(g, pin, v)
        if sampler == "exact" or len(comp) <= AUTO_EXACT_CAP:
            window = set(comp)
            for u in comp:
                window.update(g.adj[u])
            window = sorted(window)
            try:
                plan.joint = joint_boundary_distribution(g, qm, _pins_in(pin, window), window, table.free_boundary)
                sampler = "exact"
            except OracleTooLarge:
                if sampler == "exact":
                    raise
        if sampler == "auto":
            sampler = "lazy"
    if sampler == "lazy":
        R = radius if radius is not None else sampler_radius(g, qm, gp)[0]
        plan.radius = R
        plan.budget = _lazy_budget(g, qm, R, delta / (8 * S * count))
    elif sampler != "exact":
        raise ValueError(f"unknown sampler {sampler!r}")
    plan.sampler = sampler
    return plan


def _free_component(g: Graph, pin: Mapping[int, int], v: int) -> list[int]:
    seen = {v}
    stack = [v]
    while stack:
        u = stack.pop()
        for w in g.adj[u]:
            if w not in seen and w not in pin:
                seen.add(w)
                stack.append(w)
    return sorted(seen)


def draw_estimates(plan: VertexPlan, g: Graph, m, pins: dict, reps: int, rng: RngStream,
                   tables: LazyTables | None = None, stats: dict | None = None) -> np.ndarray:
    """``reps`` independent estimates, each the mean of ``plan.samples`` table lookups.

    ``pins`` must be the pinning the plan was built for; the lazy route
    pins boundary vertices in it temporarily.
    """
    qm = as_qspin(m)
    stats = {} if stats is None else stats
    tab = plan.table
    col = tab.entries[:, plan.spin]
    if plan.sampler == "none":
        stats["steps"] = stats.get("steps", 0) + reps
        return np.full(reps, float(tab.lookup(0)[plan.spin]))
    S = len(tab.free_boundary)
    if plan.sampler == "exact":
        codes = rng.numpy().choice(len(plan.joint), size=(reps, plan.samples), p=plan.joint)
        vals = col[codes]
        stats["steps"] = stats.get("steps", 0) + reps * plan.samples * (S + 1)
    else:
        tables = tables if tables is not None else LazyTables(g, qm)
        vals = np.empty((reps, plan.samples))
        for a in range(reps):
            for b in range(plan.samples):
                vals[a, b] = col[_lazy_boundary(plan, g, qm, pins, rng, tables, stats)]
        stats["steps"] = stats.get("steps", 0) + reps * plan.samples
    if not np.isfinite(vals).all():
        raise InternalConsistencyError(f"sampled an infeasible boundary around vertex {plan.vertex}")
    return vals.mean(axis=1)


def _lazy_boundary(plan: VertexPlan, g: Graph, qm, pins: dict, rng: RngStream, tables: LazyTables,
                   stats: dict) -> int:
    free = plan.table.free_boundary
    code = 0
    placed = []
    try:
        for i, w in enumerate(free):
            for attempt in range(plan.retry_cap + 1):
                if attempt == plan.retry_cap:
                    raise SamplerStuck(
                        f"boundary vertex {w} of {plan.vertex} exhausted {plan.retry_cap} budgets of {plan.budget} steps",
                        {"vertex": plan.vertex, "boundary_vertex": w, "budget": plan.budget},
                    )
                b = Budget(plan.budget)
                try:
                    s = lazy_sample(qm, g, pins, w, plan.radius, b, rng, tables, stats)
                    stats["steps"] = stats.get("steps", 0) + b.consumed
                    break
                except BudgetExhausted:
                    stats["steps"] = stats.get("steps", 0) + b.consumed
                    stats["retries"] = stats.get("retries", 0) + 1
            pins[w] = s
            placed.append(w)
            code += s * qm.q**i
    finally:
        for w in placed:
            del pins[w]
    return code


def lattice_marginal_estimator(g: Graph, m, pin: Mapping[int, int] | None, v: int, k_spin: int, ell: int,
                               gp: GrowthParams, delta: float | None = None, rng: RngStream | None = None, *,
                               n_ref: int | None = None, sampler: str = "auto", radius: int | None = None,
                               samples: int | None = None, retry_cap: int = 16,
                               table_cap: int = TABLE_CAP) -> MarginalEstimate:
    """Unbiased estimate of ``mu_v(k_spin)`` given ``pin`` from table lookups.

    ``sampler`` picks how boundary assignments are drawn: ``"lazy"`` runs
    the distance-R lazy sampler vertex by vertex, ``"exact"`` draws from
    the exact joint law of the free boundary (small components only) and
    ``"auto"`` uses the exact route whenever the component is small enough.
    """
    qm = as_qspin(m)
    pins = dict(check_pin(g, qm, pin))
    plan = marginal_plan(g, qm, pins, v, k_spin, ell, gp, n_ref=n_ref, sampler=sampler, radius=radius,
                         delta=delta, samples=samples, retry_cap=retry_cap, table_cap=table_cap)
    rng = rng or RngStream(0, stream_id("lattice-marginal", v))
    stats: dict = {}
    value = float(draw_estimates(plan, g, qm, pins, 1, rng, None, stats)[0])
    return MarginalEstimate(value, len(plan.table.free_boundary), plan.table.ball_size,
                            plan.table_steps + stats.get("steps", 0), stats.get("retries", 0),
                            plan.table.ell_prime)


# -- greedy pinning ----------------------------------------------------


@dataclass
class AdaptivePinning:
    """Greedy configuration with a certified lower bound on each conditional factor.

    ``mass[i]`` lower-bounds ``mu(sigma[v_i] | sigma on v_1..v_{i-1})``.  It is
    the larger of the decay bound ``row - C r^(-t)`` and the minimum of the
    conditional marginal over all free assignments of the radius-``t``
    sphere, when that minimum could be enumerated.
    """

    order: list[int]
    sigma: list[int]
    mass: list[float]
    t: int
    fallbacks: int = 0
    steps: int = 0

    def satisfied(self, q: int) -> bool:
        return all(x >= 1.0 / (2 * q) - 1e-12 for x in self.mass)


def pinning_radius(q: int, gp: GrowthParams) -> int:
    """Smallest ``t >= 1`` with ``C r^(-t) <= 1/(2q)``."""
    return max(1, math.ceil(math.log(2 * q * gp.C) / math.log(gp.r)))


def adaptive_pinning(g: Graph, m, gp: GrowthParams, order: Sequence[int] | None = None, *,
                     cap: int = TABLE_CAP) -> AdaptivePinning:
    """Pin vertices one at a time to the most likely spin under a fixed far boundary.

    The unpinned vertices at distance ``t`` get spin 0, or the first
    feasible assignment in table order when all-0 has weight zero.  Ties
    in the argmax go to the smallest spin.
    """
    qm = as_qspin(m)
    order = list(range(g.n)) if order is None else list(order)
    if sorted(order) != list(range(g.n)):
        raise ValueError("order must be a permutation of the vertices")
    t = pinning_radius(qm.q, gp)
    slack = gp.C * gp.r ** (-t)
    pins: dict[int, int] = {}
    sigma = [0] * g.n
    mass = []
    fallbacks = steps = 0
    for v in order:
        shell = ball(g, v, t)
        free = [u for u in shell.sphere if u not in pins]
        local = _pins_in(pins, shell.ball)
        if qm.q ** len(free) <= cap:
            rows = boundary_marginals(g, qm, local, v, shell.ball, free)
            steps += len(rows) * len(shell.ball)
            ok = np.isfinite(rows[:, 0])
            if not ok.any():
                raise InfeasibleConditioning(f"no feasible boundary around vertex {v}")
            j = 0 if ok[0] else int(np.argmax(ok))
            fallbacks += j != 0
            row = rows[j]
            floor = float(np.min(rows[ok], axis=0)[int(np.argmax(row))])
        else:
            row, j = _first_feasible_row(g, qm, local, v, shell, free)
            steps += (j + 1) * len(shell.ball)
            fallbacks += j != 0
            floor = 0.0
        s = int(np.argmax(row))
        sigma[v] = s
        mass.append(max(float(row[s]) - slack, floor))
        pins[v] = s
    return AdaptivePinning(order, sigma, mass, t, fallbacks, steps)


def _first_feasible_row(g, qm, local, v, shell, free, limit: int = 4096):
    for j in range(min(qm.q ** len(free), limit)):
        tau = {u: (j // qm.q**i) % qm.q for i, u in enumerate(free)}
        try:
            row = boundary_marginals(g, qm, {**local, **tau}, v, shell.ball, [])[0]
        except InfeasibleConditioning:
            continue
        if np.isfinite(row[0]):
            return row, j
    raise InfeasibleConditioning(f"no feasible boundary found around vertex {v}")


def exact_telescoping(g: Graph, m, sigma: Sequence[int], order: Sequence[int]) -> float:
    """``log w(sigma) - sum_i log mu(sigma[v_i] | sigma on earlier vertices)`` with exact marginals.

    Equals ``log Z`` for any feasible ``sigma`` and order.
    """
    qm = as_qspin(m)
    pins: dict[int, int] = {}
    total = weight(g, qm, sigma)
    for v in order:
        total -= math.log(exact_marginal(g, qm, pins, v)[sigma[v]])
        pins[v] = int(sigma[v])
    return total


# -- depth rules -------------------------------------------------------


def poly_growth_depth(n: int, gp: GrowthParams, q: int) -> int:
    """``ceil(0.99 (ln n)^(1/d) / (2 C0 ln q))``, at least 1."""
    if n < 2:
        raise ValueError("n must be at least 2")
    ell = math.ceil(0.99 * math.log(n) ** (1.0 / gp.d) / (2 * gp.C0 * math.log(q)))
    return max(ell, 1)


def depth_ceiling(n_ref: int, gp: GrowthParams) -> int:
    """Depth past which the boundary sample count is 1 for any thin radius in ``[ell/2, ell]``."""
    return max(1, math.ceil(2 * math.log(max(n_ref * gp.C**2, 1.0)) / math.log(gp.r)))


def choose_depth(g: Graph, m, gp: GrowthParams, v: int, pin: Mapping[int, int], n_ref: int, N: int,
                 cap: int = TABLE_CAP, max_ell: int | None = None, spin_cost: float = 1.0) -> int:
    """Depth in ``1..max_ell`` minimizing table work plus sampling work for one vertex.

    Table work is ``q^|free sphere| * |ball|``; sampling work is
    ``N * m * (spin_cost * |free sphere| + 1)`` with ``m`` the boundary
    sample count and ``spin_cost`` the expected sampler steps per boundary
    spin.  ``max_ell`` defaults to ``depth_ceiling``.
    """
    qm = as_qspin(m)
    max_ell = depth_ceiling(n_ref, gp) if max_ell is None else max_ell
    best, best_cost = 1, math.inf
    for ell in range(1, max_ell + 1):
        try:
            ell_p, sphere = _sphere_for(g, v, ell, gp)
        except GrowthAssumptionViolated:
            continue
        S = sum(1 for u in sphere if u not in pin)
        if qm.q**S > cap:
            continue
        size = len(ball(g, v, ell_p).ball)
        cost = qm.q**S * size + N * boundary_sample_count(n_ref, gp, ell_p, S) * (spin_cost * S + 1)
        if cost < best_cost:
            best, best_cost = ell, cost
        if not sphere:
            break
    return best


# -- counting ----------------------------------------------------------


def sample_count_lattice(eps: float, mass: Sequence[float], n_ref: int, q: int, rule: str = "certified"):
    """Copies ``t``, product samples ``N`` and ``eps0`` for the lattice scheme.

    ``rule="worst-case"`` uses the worst case ``10 e^(4 q^2) / eps0^2``.  The
    default bounds the relative variance of the product by
    ``prod_i (1 + 1/(n m_i^2)) - 1`` from the certified masses ``m_i``
    (each factor has variance at most ``1/n``) and takes
    ``N = ceil(10 * that / eps0^2)``, which gives the same 1/10 Chebyshev
    failure probability.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    t = math.ceil(2.0 / eps)
    eps0 = ONE_MINUS_INV_E / 2
    if rule == "worst-case":
        return t, math.ceil(10 * math.exp(4 * q * q) / eps0**2), eps0
    if rule != "certified":
        raise ValueError(f"unknown sample rule {rule!r}")
    floor = 1.0 / (2 * q)
    log_prod = sum(math.log1p(1.0 / (n_ref * max(c, floor) ** 2)) for c in mass)
    return t, max(1, math.ceil(10 * math.expm1(log_prod) / eps0**2)), eps0


def fpras_lattice(g: Graph, m, eps: float, gp: GrowthParams, seed: int = 0, *, ell: int | None = None,
                  sampler: str = "auto", radius: int | None = None, rule: str = "certified",
                  samples: int | None = None, vertices: Sequence[int] | None = None,
                  max_steps: int | None = None, time_limit: float | None = None,
                  table_cap: int = TABLE_CAP) -> CountEstimate:
    """``(1 +- eps)``-estimate of ``Z(g)`` with probability >= 3/4.

    ``t = ceil(2/eps)`` disjoint copies of ``g`` are estimated at accuracy
    ``1 - 1/e``.  The copies are identical components, so pinning and
    tables are computed once on ``g`` and reused, with sample counts set by
    the copied size; draws stay independent per copy.  ``samples`` and
    ``vertices`` override ``N`` and restrict the product (benchmarking only).
    """
    qm = as_qspin(m)
    gp.check(g)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    start = time.perf_counter()
    pin_info = adaptive_pinning(g, qm, gp, cap=table_cap)
    t_copies = math.ceil(2.0 / eps)
    n_big = g.n * t_copies
    _, N, eps0 = sample_count_lattice(eps, pin_info.mass * t_copies, n_big, qm.q, rule)
    N_planned = N
    if samples is not None:
        N = samples
    delta = 1.0 / (max(n_big, 2) * N_planned)
    order = pin_info.order
    positions = range(len(order)) if vertices is None else sorted(set(vertices))
    warnings = []
    if not pin_info.satisfied(qm.q):
        warnings.append("some certified pinning masses fall below 1/(2q); the decay constants may be wrong")
    if sampler == "lazy" and radius is None:
        msg = sampler_radius(g, qm, gp)[2]
        if msg:
            warnings.append(msg)
    spin_cost = 1.0
    if sampler == "lazy":
        spin_cost = lazy_spin_cost(g, qm, radius if radius is not None else sampler_radius(g, qm, gp)[0])
    plans = []
    pins: dict[int, int] = {}
    placed = 0
    for i in positions:
        while placed < i:
            pins[order[placed]] = pin_info.sigma[order[placed]]
            placed += 1
        v = order[i]
        if ell is not None:
            e = ell
        elif gp.d >= 3:
            e = poly_growth_depth(max(n_big, 2), gp, qm.q)
        else:
            e = choose_depth(g, qm, gp, v, pins, n_big, N_planned, cap=table_cap, spin_cost=spin_cost)
        plans.append((i, marginal_plan(g, qm, pins, v, pin_info.sigma[v], e, gp, n_ref=n_big, sampler=sampler,
                                       radius=radius, delta=delta, table_cap=table_cap)))
    table_steps = sum(p.table_steps for _, p in plans)
    log_w = t_copies * weight(g, qm, pin_info.sigma)
    if log_w == -math.inf:
        raise InternalConsistencyError("the greedy configuration has weight zero")
    stats: dict = {}
    tables = LazyTables(g, qm)
    logs = []
    truncated = False
    for b0 in range(0, N, BATCH):
        reps = min(BATCH, N - b0)
        acc = np.zeros(reps)
        pins = {}
        placed = 0
        for i, plan in plans:
            while placed < i:
                pins[order[placed]] = pin_info.sigma[order[placed]]
                placed += 1
            for c in range(t_copies):
                rng = RngStream(seed, stream_id(f"lattice:{b0}:{c}", i))
                z = draw_estimates(plan, g, qm, pins, reps, rng, tables, stats)
                if not (z > 0).all():
                    raise InternalConsistencyError(f"marginal estimate at vertex {plan.vertex} is not positive")
                acc += np.log(z)
        logs.extend(acc.tolist())
        steps = pin_info.steps + table_steps + stats.get("steps", 0)
        over_steps = max_steps is not None and steps >= max_steps
        over_time = time_limit is not None and time.perf_counter() - start >= time_limit
        if (over_steps or over_time) and b0 + reps < N:
            truncated = True
            break
    log_x = float(logsumexp(logs) - math.log(len(logs)))
    log_z = (log_w - log_x) / t_copies
    ells = [p.table.ell_prime for _, p in plans]
    sizes = [len(p.table.free_boundary) for _, p in plans]
    diag = {
        "copies": t_copies,
        "eps0": eps0,
        "n": g.n,
        "n_copied": n_big,
        "N_planned": N_planned,
        "rule": rule,
        "delta": delta,
        "pinning_radius": pin_info.t,
        "pinning_fallbacks": pin_info.fallbacks,
        "min_mass": min(pin_info.mass) if pin_info.mass else None,
        "ell_prime": {"min": min(ells, default=0), "max": max(ells, default=0), "mean": float(np.mean(ells)) if ells else 0.0},
        "free_boundary": {"max": max(sizes, default=0), "mean": float(np.mean(sizes)) if sizes else 0.0},
        "table_entries": int(sum(len(p.table) for _, p in plans)),
        "boundary_samples": {"max": max((p.samples for _, p in plans), default=0)},
        "samplers": sorted({p.sampler for _, p in plans}),
        "steps_pinning": pin_info.steps,
        "steps_tables": table_steps,
        "steps_sampling": stats.get("steps", 0),
        "steps": pin_info.steps + table_steps + stats.get("steps", 0),
        "retries": stats.get("retries", 0),
        "partial_vertices": vertices is not None,
        "warnings": warnings,
    }
    return CountEstimate(log_z, len(logs), eps, truncated, time.perf_counter() - start, seed, diag)
