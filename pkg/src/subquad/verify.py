"""Numerical checks of the analytic claims: a lower bound on tree correlation
decay, empirical decay-rate fits, and growth-constant profiles."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import OracleTooLarge, OutOfRegime
from .graph import Graph, _bfs_layers, ball, gen_regular_tree
from .spin import as_qspin, boundary_marginals, exact_marginal, hardcore

__all__ = [
    "LowerBoundRow",
    "LowerBoundReport",
    "weitz_lower_bound",
    "lower_bound_bruteforce",
    "SsmFit",
    "ssm_decay_fit",
    "GrowthProfile",
    "growth_profile",
]

SSM_ENUM_CAP = 1 << 20


@dataclass(frozen=True)
class LowerBoundRow:
    ell: int
    d_tv: float
    bound: float
    passed: bool


@dataclass
class LowerBoundReport:
    delta: int
    k: float
    lam: float
    base_gap: float
    rows: list[LowerBoundRow] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)


def _tree_root_tv(delta: int, lam: float, ell: int) -> float:
    # ratios one level above the pinned level: all children unoccupied gives
    # lam, any occupied child gives 0
    r0, r1 = lam, 0.0
    for _ in range(ell - 2):
        r0 = lam / (1.0 + r0) ** (delta - 1)
        r1 = lam / (1.0 + r1) ** (delta - 1)
    # the root has delta children instead of delta - 1
    r0 = lam / (1.0 + r0) ** delta
    r1 = lam / (1.0 + r1) ** delta
    return abs(r0 / (1.0 + r0) - r1 / (1.0 + r1))


def weitz_lower_bound(delta: int, k: float, ell_max: int) -> LowerBoundReport:
    """Root TV distance between all-0 and all-1 pinnings at depth ``ell`` of the
    ``delta``-regular tree, at ``lam = 2/((delta-1) delta^k)``, against ``delta^(-k ell)/2``."""
    if delta < 2 or delta**k < 4:
        raise OutOfRegime(f"need delta >= 2 and delta^k >= 4, got delta={delta}, k={k}")
    if ell_max < 2:
        raise ValueError("ell_max must be at least 2")
    lam = 2.0 / ((delta - 1) * delta**k)
    rep = LowerBoundReport(delta, k, lam, base_gap=lam)
    for ell in range(2, ell_max + 1):
        tv = _tree_root_tv(delta, lam, ell)
        bound = 0.5 * delta ** (-k * ell)
        rep.rows.append(LowerBoundRow(ell, tv, bound, tv >= bound))
    return rep


def lower_bound_bruteforce(delta: int, k: float, ell: int) -> float:
    """Same TV distance by exact enumeration on the finite depth-``ell`` tree."""
    lam = 2.0 / ((delta - 1) * delta**k)
    t = gen_regular_tree(delta, ell)
    level = _bfs_layers(t, 0, ell)[ell]
    m = hardcore(lam)
    p0 = exact_marginal(t, m, {u: 0 for u in level}, 0)[1]
    p1 = exact_marginal(t, m, {u: 1 for u in level}, 0)[1]
    return abs(p0 - p1)


@dataclass
class SsmFit:
    """Fitted decay ``D(ell) ~ C r^(-ell)``.

    ``C`` is the least-squares intercept; ``C_envelope`` is the smallest
    prefactor with ``D(ell) <= C r^(-ell)`` at every measured radius, which
    is the safe value to feed into depth and sample-count rules.
    """

    C: float
    r: float
    C_envelope: float
    curve: list[tuple[int, float]]
    used: list[int]


def _max_tv(rows: np.ndarray) -> float:
    rows = rows[np.isfinite(rows[:, 0])]
    if len(rows) < 2:
        return 0.0
    q = rows.shape[1]
    if q == 2:
        return float(rows[:, 1].max() - rows[:, 1].min())
    uniq = np.unique(np.round(rows, 15), axis=0)
    best = 0.0
    for i in range(len(uniq)):
        d = 0.5 * np.abs(uniq[i + 1:] - uniq[i]).sum(axis=1)
        if len(d):
            best = max(best, float(d.max()))
    return best


def ssm_decay_fit(g: Graph, m, v: int, ell_max: int, floor: float = 1e-12) -> SsmFit:
    """Worst-case boundary influence at ``v`` by radius, and a log-linear fit.

    ``D(ell)`` is the largest TV distance between the conditional marginals
    of ``v`` over all feasible pairs of assignments of the sphere at radius
    ``ell``.  Radii where ``D`` is below ``floor`` are left out of the fit.
    """
    qm = as_qspin(m)
    g.check_vertex(v)
    curve = []
    for ell in range(1, ell_max + 1):
        shell = ball(g, v, ell)
        if not shell.sphere:
            curve.append((ell, 0.0))
            continue
        if qm.q ** len(shell.sphere) > SSM_ENUM_CAP:
            raise OracleTooLarge(f"sphere of radius {ell} has {len(shell.sphere)} vertices; too many assignments")
        rows = boundary_marginals(g, qm, {}, v, shell.ball, shell.sphere)
        curve.append((ell, _max_tv(rows)))
    used = [(ell, d) for ell, d in curve if d >= floor]
    if len(used) >= 2:
        x = np.array([e for e, _ in used], dtype=float)
        y = np.log([d for _, d in used])
        slope, intercept = np.polyfit(x, y, 1)
        r = math.exp(-slope)
        C = math.exp(intercept)
    elif len(used) == 1:
        # a single point fixes only the envelope; report no decay information
        r, C = 1.0, used[0][1]
    else:
        r, C = math.inf, 0.0
    if used and math.isfinite(r):
        C_env = max(d * r**ell for ell, d in used)
    else:
        C_env = C
    return SsmFit(C, r, C_env, curve, [e for e, _ in used])


@dataclass
class GrowthProfile:
    C0: float
    d: int
    sampled: bool
    worst_vertex: int
    worst_radius: int


def growth_profile(g: Graph, d: int, max_sources: int = 2000, seed: int = 0) -> GrowthProfile:
    """Empirical ``max |B_v(ell)| / ell^d`` over vertices and radii ``ell >= 1``.

    Above ``max_sources`` vertices a random subset of sources is used and
    the result is flagged as sampled.
    """
    if d < 1:
        raise ValueError("d must be positive")
    sources = list(range(g.n))
    sampled = False
    if g.n > max_sources:
        sources = sorted(random.Random(seed).sample(sources, max_sources))
        sampled = True
    best, arg_v, arg_l = 0.0, -1, 0
    for v in sources:
        layers = _bfs_layers(g, v, g.n)
        size = 1
        for ell in range(1, max(len(layers), 2)):
            if ell < len(layers):
                size += len(layers[ell])
            ratio = size / ell**d
            if ratio > best:
                best, arg_v, arg_l = ratio, v, ell
    return GrowthProfile(best, d, sampled, arg_v, arg_l)
