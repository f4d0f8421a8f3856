"""Self-avoiding-walk trees with cycle-closing pinnings.

A node of the tree is a self-avoiding walk from the root vertex.  A step
that returns to a vertex already on the walk closes a cycle; that node is
a leaf whose spin is forced.  The local order at every vertex is the
ascending adjacency order, and the closing node is occupied iff the
penultimate vertex of the walk comes after the first vertex of the cycle
(the one stepped to right after the closing vertex) in that order.

Nodes live in flat arrays indexed by integer id.  Children are always
created after their parent, so reversed id order is a valid leaf-up order.
"""

from __future__ import annotations

import json
import math
from typing import Mapping

from .graph import Graph
from .spin import TwoSpinParams, _factor, _product

__all__ = ["SawTree", "build_saw", "expand_node", "saw_marginal"]


class SawTree:
    """Lazily expandable SAW tree of ``g`` rooted at ``root_vertex``.

    ``pin`` is an optional graph pinning.  Vertices pinned to 0 are left out
    of the tree (an unoccupied neighbor contributes a factor of exactly 1 to
    the ratio recursion and never blocks a sampler).  Vertices pinned to 1
    become forced-occupied leaves.
    """

    def __init__(self, g: Graph, root_vertex: int, truncation_depth: int, pin: Mapping[int, int] | None = None):
        g.check_vertex(root_vertex)
        if truncation_depth < 0:
            raise ValueError("truncation depth must be nonnegative")
        self.g = g
        # any mapping with .get works; it is not copied
        self.pin = pin if pin is not None else {}
        if self.pin.get(root_vertex) is not None:
            raise ValueError("the root vertex is pinned")
        self.truncation_depth = truncation_depth
        self.g_vertex: list[int] = [root_vertex]
        self.parent: list[int] = [-1]
        self.depth: list[int] = [0]
        self.forced: list[int | None] = [None]
        self.children: list[list[int] | None] = [None]

    @property
    def root(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.g_vertex)

    def is_expanded(self, node: int) -> bool:
        return self.children[node] is not None

    def is_frontier(self, node: int) -> bool:
        return self.children[node] is None and self.forced[node] is None

    def frontier(self) -> list[int]:
        return [i for i in range(len(self)) if self.is_frontier(i)]

    def ancestors(self, node: int) -> list[int]:
        """Graph vertices on the root path, root first, excluding ``node`` itself."""
        out = []
        p = self.parent[node]
        while p >= 0:
            out.append(self.g_vertex[p])
            p = self.parent[p]
        out.reverse()
        return out

    def walk(self, node: int) -> list[int]:
        return self.ancestors(node) + [self.g_vertex[node]]

    def nodes_at_depth(self, d: int) -> list[int]:
        return [i for i, dd in enumerate(self.depth) if dd == d]

    def boundary_nodes(self) -> list[int]:
        """Non-forced nodes at the truncation depth, in creation order."""
        ell = self.truncation_depth
        return [i for i, d in enumerate(self.depth) if d == ell and self.forced[i] is None]

    def to_json(self, max_depth: int | None = None) -> str:
        rows = [
            {"id": i, "g_vertex": self.g_vertex[i], "parent": self.parent[i], "depth": self.depth[i],
             "forced_spin": self.forced[i]}
            for i in range(len(self))
            if max_depth is None or self.depth[i] <= max_depth
        ]
        return json.dumps({"root_vertex": self.g_vertex[0], "truncation_depth": self.truncation_depth, "nodes": rows})


def expand_node(t: SawTree, node: int) -> list[int]:
    """Create the children of a frontier node and return their ids."""
    if t.forced[node] is not None:
        raise ValueError(f"node {node} has a forced spin and cannot be expanded")
    if t.children[node] is not None:
        raise ValueError(f"node {node} is already expanded")
    g = t.g
    u = t.g_vertex[node]
    p = t.parent[node]
    back = t.g_vertex[p] if p >= 0 else -1
    # position of each vertex on the walk, to find where a cycle starts
    walk = t.walk(node)
    pos = {x: i for i, x in enumerate(walk)}
    kids = []
    for w in g.adj[u]:
        if w == back:
            continue
        spin = t.pin.get(w)
        if spin == 0:
            continue
        j = pos.get(w)
        if j is not None:
            # walk ... w=walk[j], walk[j+1], ..., u, then back to w
            spin = 1 if u > walk[j + 1] else 0
        kid = len(t.g_vertex)
        t.g_vertex.append(w)
        t.parent.append(node)
        t.depth.append(t.depth[node] + 1)
        t.forced.append(spin)
        t.children.append(None)
        kids.append(kid)
    t.children[node] = kids
    return kids


def build_saw(g: Graph, v: int, ell: int, pin: Mapping[int, int] | None = None) -> SawTree:
    """SAW tree expanded completely down to depth ``ell``."""
    t = SawTree(g, v, ell, pin)
    i = 0
    while i < len(t):
        if t.depth[i] < ell and t.forced[i] is None:
            expand_node(t, i)
        i += 1
    return t


def saw_marginal(t: SawTree, m: TwoSpinParams, boundary: Mapping[int, int] | None = None) -> float:
    """Root probability of spin 0 from the ratio recursion on the truncated tree.

    ``boundary`` maps every non-forced node at the truncation depth to a
    spin.  Nodes deeper than the truncation depth are ignored.
    """
    boundary = boundary or {}
    ell = t.truncation_depth
    n = len(t)
    R = [0.0] * n
    for i in range(n - 1, -1, -1):
        d = t.depth[i]
        if d > ell:
            continue
        f = t.forced[i]
        if f is not None:
            R[i] = math.inf if f == 1 else 0.0
        elif d == ell:
            s = boundary.get(i)
            if s is None:
                raise ValueError(f"boundary node {i} (vertex {t.g_vertex[i]}) has no assignment")
            R[i] = math.inf if s == 1 else 0.0
        else:
            kids = t.children[i]
            if kids is None:
                raise ValueError(f"node {i} above the truncation depth was never expanded")
            R[i] = _product(m.lam, (_factor(R[c], m.beta, m.gamma) for c in kids))
    r = R[0]
    return 0.0 if r == math.inf else 1.0 / (1.0 + r)
