"""Spin-system parameters, configuration weights and the exact oracles.

Everything is carried in natural-log space.  The oracles here are the
ground truth for every statistical test in the package:

* ``exact_partition`` / ``exact_marginal`` enumerate configurations of the
  free vertices, component by component, in vectorized chunks.
* ``grid_marginal`` runs a frontier (column-sweep) transfer DP over a
  grid-embedded ball.
* ``boundary_marginals`` contracts the factor graph of a ball with
  ``opt_einsum`` while keeping the boundary axes open, giving the whole
  table of conditional marginals in one pass.

The three engines share no code beyond the local field computation, so
they cross-check each other.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import opt_einsum

from .errors import InfeasibleConditioning, OracleTooLarge
from .graph import DistanceShell, Graph

__all__ = [
    "TwoSpinParams",
    "QSpinParams",
    "hardcore",
    "as_qspin",
    "check_pin",
    "is_feasible",
    "weight",
    "exact_partition",
    "exact_marginal",
    "tree_ratio",
    "grid_marginal",
    "boundary_marginals",
    "joint_boundary_distribution",
    "load_model",
    "dump_model",
    "oracle_free_cap",
    "grid_width_cap",
]

FREE_CAP_ENV = "SUBQUAD_ORACLE_FREE_CAP"
WIDTH_CAP_ENV = "SUBQUAD_GRID_WIDTH_CAP"
_CHUNK = 1 << 18
CONTRACT_CAP = 1 << 26


def oracle_free_cap() -> int:
    return int(os.environ.get(FREE_CAP_ENV, "25"))


def grid_width_cap() -> int:
    return int(os.environ.get(WIDTH_CAP_ENV, "22"))


@dataclass(frozen=True)
class TwoSpinParams:
    """Normalized two-spin system ``A = [[beta, 1], [1, gamma]]``, ``b = (1, lam)``."""

    beta: float
    gamma: float
    lam: float

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("beta and gamma must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @property
    def q(self) -> int:
        return 2

    @property
    def antiferromagnetic(self) -> bool:
        return self.beta * self.gamma < 1

    @property
    def is_hardcore(self) -> bool:
        return self.beta == 1 and self.gamma == 0

    def to_qspin(self) -> "QSpinParams":
        return QSpinParams(np.array([[self.beta, 1.0], [1.0, self.gamma]]), np.array([1.0, self.lam]))


@dataclass(frozen=True)
class QSpinParams:
    """General q-spin system with interaction matrix ``A`` and field ``b``."""

    A: np.ndarray
    b: np.ndarray
    symmetric: bool = field(default=True)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
            raise ValueError("A must be a square matrix with q >= 2")
        if b.shape != (A.shape[0],):
            raise ValueError("b must have length q")
        if (A < 0).any() or (b < 0).any():
            raise ValueError("A and b must be nonnegative")
        if not (b > 0).any():
            raise ValueError("at least one field entry must be positive")
        if self.symmetric and not np.allclose(A, A.T):
            raise ValueError("A is not symmetric")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def q(self) -> int:
        return self.A.shape[0]

    def __eq__(self, other):
        if not isinstance(other, QSpinParams):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.b, other.b)

    def __hash__(self):
        return hash((self.A.tobytes(), self.b.tobytes()))

    def to_qspin(self) -> "QSpinParams":
        return self


def hardcore(lam: float) -> TwoSpinParams:
    return TwoSpinParams(1.0, 0.0, float(lam))


def as_qspin(m) -> QSpinParams:
    return m.to_qspin()


def check_pin(g: Graph, m, pin: Mapping[int, int] | None) -> dict:
    """Validate a pinning and return it as a plain dict."""
    q = m.q
    out = {}
    for v, s in (pin or {}).items():
        g.check_vertex(v)
        s = int(s)
        if not 0 <= s < q:
            raise ValueError(f"spin {s} at vertex {v} is not in 0..{q - 1}")
        out[v] = s
    return out


def is_feasible(g: Graph, m, pin: Mapping[int, int]) -> bool:
    """Pinned vertices have positive field and pinned edges positive interaction."""
    qm = as_qspin(m)
    for v, s in pin.items():
        if qm.b[s] <= 0:
            return False
        for u in g.adj[v]:
            t = pin.get(u)
            if t is not None and qm.A[s, t] <= 0:
                return False
    return True


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def weight(g: Graph, m, sigma) -> float:
    """Log weight of a full configuration; ``-inf`` when some factor is zero."""
    qm = as_qspin(m)
    sigma = np.asarray(sigma, dtype=np.int64)
    if sigma.shape != (g.n,):
        raise ValueError("sigma must assign every vertex")
    if g.n and (sigma.min() < 0 or sigma.max() >= qm.q):
        raise ValueError("spin out of range")
    logA, logb = _log(qm.A), _log(qm.b)
    total = float(logb[sigma].sum()) if g.n else 0.0
    e = np.array(g.edges(), dtype=np.int64).reshape(-1, 2)
    if len(e):
        total += float(logA[sigma[e[:, 0]], sigma[e[:, 1]]].sum())
    return total


def _free_components(g: Graph, pin: dict, within=None) -> list[list[int]]:
    allowed = set(range(g.n)) if within is None else set(within)
    free = [u for u in sorted(allowed) if u not in pin]
    seen = set()
    comps = []
    for s in free:
        if s in seen:
            continue
        seen.add(s)
        comp = [s]
        stack = [s]
        while stack:
            u = stack.pop()
            for w in g.adj[u]:
                if w in allowed and w not in pin and w not in seen:
                    seen.add(w)
                    comp.append(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def _enumerate_component(g: Graph, qm: QSpinParams, comp: list[int], h: dict) -> float:
    """log sum over q^|comp| assignments of fields times internal interactions."""
    k = len(comp)
    q = qm.q
    logA = _log(qm.A)
    idx = {v: i for i, v in enumerate(comp)}
    H = np.stack([h[v] for v in comp])  # (k, q)
    E = np.array([(idx[u], idx[w]) for u in comp for w in g.adj[u] if w in idx and u < w], dtype=np.int64)
    E = E.reshape(-1, 2)
    total = q**k
    pw = q ** np.arange(k, dtype=np.int64)
    acc = -math.inf
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        spins = (codes[:, None] // pw[None, :]) % q  # (chunk, k)
        lw = H[np.arange(k)[None, :], spins].sum(axis=1)
        if len(E):
            lw = lw + logA[spins[:, E[:, 0]], spins[:, E[:, 1]]].sum(axis=1)
        top = lw.max()
        if top == -math.inf:
            continue
        part = top + math.log(np.exp(lw - top).sum())
        acc = np.logaddexp(acc, part)
    return float(acc)


def exact_partition(g: Graph, m, pin: Mapping[int, int] | None = None, *, within=None, cap: int | None = None) -> float:
    """Log of the total weight of all extensions of ``pin``.

    Free vertices split into connected components that are enumerated
    separately and multiplied.  ``cap`` bounds the size of each component.
    With ``within`` only that vertex subset (and edges inside it) is used.
    Returns ``-inf`` for an infeasible pin.
    """
    qm = as_qspin(m)
    pin = check_pin(g, qm, pin)
    cap = oracle_free_cap() if cap is None else cap
    if within is not None:
        keep = set(within)
        pin = {v: s for v, s in pin.items() if v in keep}
        g, old = g.induced_subgraph(sorted(keep))
        new = {v: i for i, v in enumerate(old)}
        pin = {new[v]: s for v, s in pin.items()}
    if not is_feasible(g, qm, pin):
        return -math.inf
    comps = _free_components(g, pin)
    big = max((len(c) for c in comps), default=0)
    if big > cap:
        raise OracleTooLarge(f"a free component has {big} vertices, above the oracle cap {cap}")
    _, h, const = _window_fields(g, qm, pin, set(range(g.n)))
    total = const
    for comp in comps:
        total += _enumerate_component(g, qm, comp, h)
        if total == -math.inf:
            return total
    return float(total)


def exact_marginal(g: Graph, m, pin: Mapping[int, int] | None, v: int, *, cap: int | None = None) -> np.ndarray:
    """Exact conditional distribution of the spin at ``v`` given ``pin``."""
    qm = as_qspin(m)
    pin = check_pin(g, qm, pin)
    g.check_vertex(v)
    if v in pin:
        raise ValueError(f"vertex {v} is pinned")
    # only the free component of v matters
    comp = next(c for c in _free_components(g, pin) if v in c)
    cap = oracle_free_cap() if cap is None else cap
    if len(comp) > cap:
        raise OracleTooLarge(f"component of {v} has {len(comp)} free vertices, above the oracle cap {cap}")
    # pinned vertices touching the component carry the boundary condition
    window = set(comp)
    window.update(u for w in comp for u in g.adj[w] if u in pin)
    logs = np.array([exact_partition(g, qm, {**pin, v: s}, within=window, cap=cap) for s in range(qm.q)])
    return _normalize_logs(logs, v)


def _normalize_logs(logs: np.ndarray, v) -> np.ndarray:
    top = logs.max()
    if top == -math.inf:
        raise InfeasibleConditioning(f"every extension has weight zero at vertex {v}")
    p = np.exp(logs - top)
    return p / p.sum()


# -- tree recursion ----------------------------------------------------


def _factor(R: float, beta: float, gamma: float) -> float:
    """(gamma R + 1)/(R + beta) with its limits at R = inf and R + beta = 0."""
    if R == math.inf:
        return gamma
    den = R + beta
    if den == 0:
        return math.inf
    return (gamma * R + 1.0) / den


def _product(lam: float, factors) -> float:
    out = lam
    has_zero = has_inf = False
    for f in factors:
        if f == 0:
            has_zero = True
        elif f == math.inf:
            has_inf = True
        else:
            out *= f
    if has_zero:
        if has_inf:
            raise InfeasibleConditioning("ratio recursion meets both a zero and an infinite factor")
        return 0.0
    return math.inf if has_inf else out


def tree_ratio(t: Graph, m: TwoSpinParams, pin: Mapping[int, int] | None, root: int) -> float:
    """Ratio ``mu_root(1)/mu_root(0)`` on a tree via the leaf-up recursion.

    Pinned vertices cut the recursion: a pinned-1 child has ratio ``inf``,
    a pinned-0 child ratio 0.
    """
    if not isinstance(m, TwoSpinParams):
        raise ValueError("tree_ratio needs a two-spin model")
    pin = check_pin(t, m, pin)
    t.check_vertex(root)
    if t.n != t.edge_count() + 1 or len(t.components()) != 1:
        raise ValueError("input graph is not a tree")
    if root in pin:
        return math.inf if pin[root] == 1 else 0.0
    parent = {root: -1}
    order = [root]
    for u in order:
        for w in t.adj[u]:
            if w != parent[u]:
                parent[w] = u
                order.append(w)
    R = {}
    for u in reversed(order):
        if u in pin:
            R[u] = math.inf if pin[u] == 1 else 0.0
            continue
        kids = (w for w in t.adj[u] if w != parent[u])
        R[u] = _product(m.lam, (_factor(R[w], m.beta, m.gamma) for w in kids))
    return R[root]


# -- grid transfer DP --------------------------------------------------


def grid_marginal(g: Graph, m, pin: Mapping[int, int] | None, v: int, window: DistanceShell | None = None,
                  *, width_cap: int | None = None) -> np.ndarray:
    """Exact marginal of ``v`` inside a grid-embedded window by a column sweep.

    Vertices of the window are added in column-major order (x, then y).  The
    DP state is a tensor over the spins of the current frontier, i.e. the
    added vertices that still have a neighbor waiting to be added; its size
    is bounded by the column height plus one.  The center spin is clamped,
    so the sweep runs once per spin.  Without coordinates this falls back to
    ``exact_marginal`` on the window.
    """
    qm = as_qspin(m)
    pin = check_pin(g, qm, pin)
    g.check_vertex(v)
    if v in pin:
        raise ValueError(f"vertex {v} is pinned")
    verts = list(window.ball) if window is not None else next(c for c in g.components() if v in c)
    inside = set(verts)
    if g.coords is None:
        sub, old = g.induced_subgraph(verts)
        new = {u: i for i, u in enumerate(old)}
        return exact_marginal(sub, qm, {new[u]: s for u, s in pin.items() if u in inside}, new[v])
    cap = grid_width_cap() if width_cap is None else width_cap
    local_pin = {u: s for u, s in pin.items() if u in inside}
    logs = np.empty(qm.q)
    for s in range(qm.q):
        clamped = dict(local_pin)
        clamped[v] = s
        logs[s] = _sweep(g, qm, clamped, verts, cap)
    return _normalize_logs(logs, v)


def _window_fields(g: Graph, qm: QSpinParams, pin: dict, inside: set):
    """Free vertices of a window, their log fields with pins absorbed, and the pinned-only constant."""
    logA, logb = _log(qm.A), _log(qm.b)
    free = sorted(u for u in inside if u not in pin)
    h = {}
    for u in free:
        hu = logb.copy()
        for w in g.adj[u]:
            if w in inside and w in pin:
                hu = hu + logA[:, pin[w]]
        h[u] = hu
    const = 0.0
    for u, s in pin.items():
        if u in inside:
            const += logb[s]
            for w in g.adj[u]:
                if w in inside and w in pin and w > u:
                    const += logA[s, pin[w]]
    return free, h, float(const)


def _sweep(g: Graph, qm: QSpinParams, pin: dict, verts: list[int], cap: int) -> float:
    inside = set(verts)
    free, h, log_scale = _window_fields(g, qm, pin, inside)
    if log_scale == -math.inf:
        return log_scale
    free.sort(key=lambda u: g.coords[u])
    A = qm.A / qm.A.max()
    rank = {u: i for i, u in enumerate(free)}
    remaining = {u: sum(1 for w in g.adj[u] if w in rank and rank[w] > rank[u]) for u in free}
    frontier: list[int] = []
    state = np.ones(())
    for u in free:
        top = float(h[u].max())
        if top == -math.inf:
            return top
        log_scale += top
        state = state[..., None] * np.exp(h[u] - top)
        for i, w in enumerate(frontier):
            if w in g.adj[u]:
                shape = [1] * (len(frontier) + 1)
                shape[i] = qm.q
                shape[-1] = qm.q
                state = state * A.reshape(shape)
                log_scale += math.log(qm.A.max())
                remaining[w] -= 1
        frontier.append(u)
        done = [i for i, w in enumerate(frontier) if remaining[w] == 0]
        if done:
            state = state.sum(axis=tuple(done))
            frontier = [w for i, w in enumerate(frontier) if i not in done]
        if len(frontier) > cap:
            raise OracleTooLarge(f"sweep frontier reached {len(frontier)} vertices, above the width cap {cap}")
        top = state.max()
        if top <= 0:
            return -math.inf
        state = state / top
        log_scale += math.log(top)
    return float(log_scale + math.log(state.sum()))


# -- boundary tables by tensor contraction -----------------------------


def _contract(g: Graph, qm: QSpinParams, pin: dict, verts, open_vertices: list[int]):
    """Contract the window's factor graph leaving ``open_vertices`` as output axes.

    Returns ``None`` when the pinning alone already has weight zero.  The
    tensor is only defined up to a positive constant.
    """
    inside = set(verts)
    pin = {u: s for u, s in pin.items() if u in inside}
    free, h, const = _window_fields(g, qm, pin, inside)
    if const == -math.inf:
        return None
    free_set = set(free)
    if any(u not in free_set for u in open_vertices) or len(set(open_vertices)) != len(open_vertices):
        raise ValueError("open vertices must be free, distinct and inside the window")
    sym = {u: opt_einsum.get_symbol(i) for i, u in enumerate(free)}
    A = qm.A / qm.A.max()
    operands = []
    terms = []
    for u in free:
        top = h[u].max()
        operands.append(np.exp(h[u] - top) if top > -math.inf else np.zeros(qm.q))
        terms.append(sym[u])
        for w in g.adj[u]:
            if w in free_set and u < w:
                operands.append(A)
                terms.append(sym[u] + sym[w])
    expr = ",".join(terms) + "->" + "".join(sym[u] for u in open_vertices)
    path, info = opt_einsum.contract_path(expr, *operands, optimize="greedy")
    if int(info.largest_intermediate) > CONTRACT_CAP:
        raise OracleTooLarge(f"contraction over {len(free)} vertices needs an intermediate of "
                             f"{int(info.largest_intermediate)} entries, above {CONTRACT_CAP}")
    return opt_einsum.contract(expr, *operands, optimize=path)


def boundary_marginals(g: Graph, m, pin: Mapping[int, int] | None, v: int, verts, kept) -> np.ndarray:
    """Conditional marginals of ``v`` for every assignment of ``kept``.

    The factor graph induced on ``verts`` (with ``pin`` absorbed) is
    contracted leaving the axes of ``v`` and of each ``kept`` vertex open.
    Returns an array of shape ``(q**len(kept), q)``; row ``j`` belongs to the
    mixed-radix code ``j = sum_i tau[i] * q**i``.  Rows of infeasible
    boundary assignments are NaN.
    """
    qm = as_qspin(m)
    pin = check_pin(g, qm, pin)
    q = qm.q
    kept = list(kept)
    if v in pin or v in kept:
        raise ValueError("center vertex must be free and not kept")
    t = _contract(g, qm, pin, verts, [*reversed(kept), v])
    if t is None:
        return np.full((q ** len(kept), q), np.nan)
    # axes (kept[-1], ..., kept[0], v): C-order reshape puts kept[0] fastest
    t = t.reshape(-1, q)
    tot = t.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        rows = t / tot
    rows[(tot[:, 0] <= 0) | ~np.isfinite(tot[:, 0])] = np.nan
    return rows


def joint_boundary_distribution(g: Graph, m, pin: Mapping[int, int] | None, verts, kept) -> np.ndarray:
    """Exact joint law of the spins on ``kept`` inside the window ``verts``.

    Indexed by the same mixed-radix code as ``boundary_marginals``.
    """
    qm = as_qspin(m)
    pin = check_pin(g, qm, pin)
    kept = list(kept)
    t = _contract(g, qm, pin, verts, list(reversed(kept)))
    if t is None:
        raise InfeasibleConditioning("the pinning has weight zero")
    p = np.asarray(t, dtype=float).reshape(-1)
    total = p.sum()
    if not total > 0:
        raise InfeasibleConditioning("every boundary assignment has weight zero")
    return p / total


# -- model files -------------------------------------------------------


def load_model(spec) -> TwoSpinParams | QSpinParams:
    """Model from a JSON string, a dict, or a path to a JSON file."""
    if isinstance(spec, str):
        text = spec.strip()
        if not text.startswith("{"):
            with open(text) as fh:
                text = fh.read()
        data = json.loads(text)
    else:
        data = dict(spec)
    kind = data.get("kind")
    if kind == "hardcore":
        return hardcore(float(data["lambda"]))
    if kind == "two_spin":
        return TwoSpinParams(float(data["beta"]), float(data["gamma"]), float(data["lambda"]))
    if kind == "q_spin":
        A = np.asarray(data["A"], dtype=float)
        return QSpinParams(A, np.asarray(data["b"], dtype=float), bool(data.get("symmetric", np.allclose(A, A.T))))
    raise ValueError(f"unknown model kind {kind!r}")


def dump_model(m) -> dict:
    if isinstance(m, TwoSpinParams):
        if m.is_hardcore:
            return {"kind": "hardcore", "lambda": m.lam}
        return {"kind": "two_spin", "beta": m.beta, "gamma": m.gamma, "lambda": m.lam}
    return {"kind": "q_spin", "A": m.A.tolist(), "b": m.b.tolist(), "symmetric": m.symmetric}
