"""Lazy single-site samplers with explicit step budgets.

``hardcore_sample`` is the one-hop recursive sampler for the hard-core
model: a vertex is tentatively occupied with probability lam/(1+lam) and
then kept only if a recursive sample of its free neighbors leaves them all
unoccupied.  ``lazy_sample`` is the distance-r generalization for any
q-spin system, which draws from a guaranteed part of the marginal and only
recurses on the distance-r sphere for the leftover mass.

Both run on an explicit stack, so deep recursions never hit Python's
recursion limit, and both charge exactly one budget step per invocation.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import BudgetExhausted, InternalConsistencyError, OracleTooLarge, OutOfRegime
from .graph import Graph, ball
from .saw import SawTree, expand_node
from .spin import as_qspin, boundary_marginals, check_pin

__all__ = [
    "Budget",
    "RngStream",
    "BranchingParams",
    "stream_id",
    "budget_for",
    "hardcore_sample",
    "GraphView",
    "SawView",
    "branching_tail",
    "LazyTables",
    "lazy_sample",
]

LAZY_ENUM_CAP = 1 << 20


@dataclass
class Budget:
    """Step budget for one sampler invocation tree."""

    remaining_steps: int
    consumed: int = 0

    def tick(self) -> None:
        if self.remaining_steps <= 0:
            raise BudgetExhausted(f"step budget exhausted after {self.consumed} steps")
        self.remaining_steps -= 1
        self.consumed += 1


def stream_id(label: str, index: int = 0) -> int:
    """Stable 64-bit id for a (purpose label, index) pair."""
    h = hashlib.blake2b(f"{label}:{index}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    The key is hashed into the seed of a ``random.Random`` (fast scalar
    draws); ``numpy()`` gives a Generator on the same key for vector draws.
    """

    __slots__ = ("seed", "stream_id", "counter", "_rng")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.counter = 0
        self._rng = random.Random(self._key())

    def _key(self) -> int:
        h = hashlib.blake2b(digest_size=16)
        h.update(self.seed.to_bytes(16, "little", signed=True))
        h.update(self.stream_id.to_bytes(16, "little", signed=False))
        return int.from_bytes(h.digest(), "little")

    def random(self) -> float:
        self.counter += 1
        return self._rng.random()

    def choice(self, probs) -> int:
        """Index drawn from a probability vector (assumed to sum to 1)."""
        u = self.random()
        acc = 0.0
        last = 0
        for i, p in enumerate(probs):
            if p <= 0:
                continue
            acc += p
            last = i
            if u < acc:
                return i
        return last

    def child(self, label: str, index: int = 0) -> "RngStream":
        return RngStream(self.seed, self.stream_id ^ stream_id(label, index))

    def numpy(self) -> np.random.Generator:
        return np.random.default_rng(self._key())


@dataclass(frozen=True)
class BranchingParams:
    """Walk that jumps up by delta-1 with probability p and down by 1 otherwise."""

    delta: int
    p: float

    def __post_init__(self):
        # p = 0 is allowed as the degenerate walk that dies in one step
        if not 0 <= self.p < 1:
            raise ValueError("p must lie in [0, 1)")
        if self.delta < 1:
            raise ValueError("delta must be positive")

    @classmethod
    def from_lambda(cls, delta: int, lam: float) -> "BranchingParams":
        return cls(delta, lam / (1.0 + lam))


def budget_for(delta: int, lam: float, eps: float) -> int:
    """Steps after which the dominating walk survives with probability at most ``eps``.

    ``T = ceil(2 delta^2 / (lam delta/(1+lam) - 1)^2 * ln(1/eps))``; valid only
    for ``lam < 1/(delta-1)``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if delta < 2:
        raise ValueError("delta must be at least 2")
    if not lam < 1.0 / (delta - 1):
        raise OutOfRegime(f"lambda={lam} is not below 1/(delta-1)={1.0 / (delta - 1):.6g}")
    drift = lam / (1.0 + lam) * delta - 1.0
    return math.ceil(2.0 * delta**2 / drift**2 * math.log(1.0 / eps))


def branching_tail(params: BranchingParams, T: int, trials: int, rng: RngStream) -> float:
    """Fraction of walks from 1 not absorbed at 0 within ``T`` steps."""
    if trials < 1:
        raise ValueError("trials must be positive")
    gen = rng.numpy()
    x = np.ones(trials, dtype=np.int64)
    up = params.delta - 1
    for _ in range(T):
        live = x > 0
        if not live.any():
            break
        jump = gen.random(trials) < params.p
        x = np.where(live, x + np.where(jump, up, -1), 0)
    return float((x > 0).mean())


# -- one-hop hard-core sampler ----------------------------------------


class GraphView:
    """Sampler view of a graph with a mutable pinning."""

    def __init__(self, g: Graph, pin: Mapping[int, int] | None = None):
        self.g = g
        self.pins = dict(pin or {})

    def neighbors(self, x: int):
        return self.g.adj[x]


class SawView:
    """Sampler view of a SAW tree: neighbors are the parent and the children.

    Children are created on first visit, and forced nodes are entered into
    the pinning as they appear, so the sampler explores the tree lazily.
    """

    def __init__(self, tree: SawTree, pin: Mapping[int, int] | None = None):
        self.tree = tree
        self.pins = dict(pin or {})
        for i, f in enumerate(tree.forced):
            if f is not None:
                self.pins[i] = f
        self.created = 0

    def neighbors(self, x: int):
        t = self.tree
        kids = t.children[x]
        if kids is None:
            if t.forced[x] is not None:
                kids = []
            else:
                kids = expand_node(t, x)
                self.created += len(kids)
                for c in kids:
                    f = t.forced[c]
                    if f is not None:
                        self.pins[c] = f
        p = t.parent[x]
        return kids if p < 0 else [p, *kids]


def hardcore_sample(view, lam: float, v: int, budget: Budget, rng: RngStream) -> int:
    """Spin of ``v`` drawn from the hard-core marginal given ``view.pins``.

    ``view`` is a ``GraphView`` or ``SawView`` (a ``Graph`` is wrapped).
    Temporary neighbor samples are removed again before returning, so the
    pinning is unchanged on exit, also when the budget runs out.
    """
    if isinstance(view, Graph):
        view = GraphView(view)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    pins = view.pins
    if v in pins:
        raise ValueError(f"vertex {v} is already pinned")
    p_bot = lam / (1.0 + lam)
    # frame: [vertex, pending neighbors, next index, y, neighbors pinned so far]
    stack = []
    result = None
    x = v
    try:
        while True:
            if x is not None:
                budget.tick()
                nb = view.neighbors(x)
                if any(pins.get(u) == 1 for u in nb):
                    result, x = 0, None
                elif rng.random() >= p_bot:
                    result, x = 0, None
                else:
                    todo = [u for u in nb if u not in pins]
                    stack.append([x, todo, 0, 1, []])
                    result, x = None, None
            frame = stack[-1] if stack else None
            if frame is None:
                return result
            if result is not None and frame[2] > 0:
                u = frame[1][frame[2] - 1]
                pins[u] = result
                frame[4].append(u)
                if result == 1:
                    frame[3] = 0
                result = None
            if result is None and frame[2] < len(frame[1]):
                x = frame[1][frame[2]]
                frame[2] += 1
                continue
            for u in frame[4]:
                del pins[u]
            stack.pop()
            result = frame[3]
            if not stack:
                return result
    except BudgetExhausted:
        for frame in stack:
            for u in frame[4]:
                pins.pop(u, None)
        raise


# -- generic distance-r sampler ----------------------------------------


class LazyTables:
    """Memo of conditional-marginal tables keyed by (center, radius, pins in the ball)."""

    def __init__(self, g: Graph, m, enum_cap: int = LAZY_ENUM_CAP):
        self.g = g
        self.m = as_qspin(m)
        self.enum_cap = enum_cap
        self._cache: dict = {}
        self.builds = 0

    def get(self, pins: Mapping[int, int], v: int, radius: int):
        shell = ball(self.g, v, radius)
        inner = shell.ball
        key = (v, radius, tuple((u, pins[u]) for u in inner if u in pins))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        q = self.m.q
        free_sphere = [u for u in shell.sphere if u not in pins] if radius > 0 else []
        if q ** len(free_sphere) > self.enum_cap:
            raise OracleTooLarge(f"{q}^{len(free_sphere)} boundary configurations exceed the cap {self.enum_cap}")
        local = {u: pins[u] for u in inner if u in pins}
        rows = boundary_marginals(self.g, self.m, local, v, inner, free_sphere)
        with np.errstate(invalid="ignore"):
            p_min = np.nanmin(rows, axis=0) if np.isfinite(rows[:, 0]).any() else np.zeros(q)
        p, slack = _lazy_split(p_min)
        entry = (free_sphere, rows, tuple(float(x) for x in p), float(slack))
        if len(self._cache) > 200_000:
            self._cache.clear()
        self._cache[key] = entry
        self.builds += 1
        return entry


def _lazy_split(p_min: np.ndarray):
    p = np.clip(p_min, 0.0, 1.0)
    slack = 1.0 - p.sum()
    if slack < 1e-12:
        return p / p.sum(), 0.0
    return p, slack


def lazy_sample(m, g: Graph, pin: Mapping[int, int] | None, v: int, r: int, budget: Budget, rng: RngStream,
                tables: LazyTables | None = None, stats: dict | None = None) -> int:
    """Spin of ``v`` from its marginal given ``pin`` using distance-``r`` recursion.

    With probability ``p_i`` (the smallest conditional probability of spin
    ``i`` over all feasible assignments of the free distance-r sphere) the
    spin is ``i`` outright.  With the leftover probability the free sphere
    is sampled vertex by vertex, each by the same procedure, and the spin is
    drawn from the residual ``(mu(i | sphere) - p_i) / p_0``.  Sphere samples
    are discarded afterwards.
    """
    qm = as_qspin(m)
    pins = check_pin(g, qm, pin) if not isinstance(pin, dict) else pin
    if v in pins:
        raise ValueError(f"vertex {v} is already pinned")
    if r < 1:
        raise ValueError("radius must be at least 1")
    tables = tables or LazyTables(g, qm)
    if stats is None:
        stats = {}
    # frame: [vertex, table entry, sphere list, next index, added]
    stack = []
    x = v
    result = None
    try:
        while True:
            if x is not None:
                budget.tick()
                entry = tables.get(pins, x, r)
                p, slack = entry[2], entry[3]
                u = rng.random()
                if u >= slack:
                    # inverse-cdf over the guaranteed masses, shifted past the slack
                    acc = slack
                    result = qm.q - 1
                    for i in range(qm.q):
                        acc += p[i]
                        if u < acc and p[i] > 0:
                            result = i
                            break
                    x = None
                else:
                    stats["splits"] = stats.get("splits", 0) + 1
                    stack.append([x, entry, [w for w in entry[0] if w not in pins], 0, []])
                    x = None
                    result = None
            if not stack:
                return result
            frame = stack[-1]
            if result is not None and frame[3] > 0:
                w = frame[2][frame[3] - 1]
                pins[w] = result
                frame[4].append(w)
                result = None
            if frame[3] < len(frame[2]):
                x = frame[2][frame[3]]
                frame[3] += 1
                continue
            center, (sphere, rows, p, slack) = frame[0], frame[1]
            code = 0
            q = qm.q
            for i, w in enumerate(sphere):
                code += pins[w] * q**i
            rho = [(float(mu) - pi) / slack for mu, pi in zip(rows[code], p)]
            total = sum(rho)
            if not all(math.isfinite(x) and x >= -1e-9 for x in rho) or abs(total - 1) > 1e-9:
                raise InternalConsistencyError(f"residual distribution at {center} is invalid: {rho}")
            stats["min_rho"] = min(stats.get("min_rho", 0.0), min(rho))
            rho = [max(x, 0.0) / total for x in rho]
            for w in frame[4]:
                del pins[w]
            stack.pop()
            result = rng.choice(rho)
            x = None
            if not stack:
                return result
    except BudgetExhausted:
        for frame in stack:
            for w in frame[4]:
                pins.pop(w, None)
        raise
