"""Bounded-degree graphs, distance shells and the instance generators.

Vertices are dense integers ``0..n-1`` and every adjacency list is sorted
ascending.  That fixed order is also the local ordering used when closing
cycles in self-avoiding-walk trees.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import GrowthAssumptionViolated

__all__ = [
    "Graph",
    "DistanceShell",
    "ball",
    "find_thin_sphere",
    "gen_grid",
    "gen_quad_boundary",
    "gen_regular_tree",
    "gen_random_bounded",
    "gen_path",
    "gen_cycle",
    "gen_star",
    "disjoint_union",
    "read_graph",
    "write_graph",
]


class Graph:
    """Immutable undirected simple graph with optional integer 2D coordinates."""

    __slots__ = ("n", "adj", "coords", "max_degree", "_shell_cache", "_coord_index")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = (), coords=None):
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        self.n = n
        self.adj: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in nbrs)
        self.max_degree = max((len(a) for a in self.adj), default=0)
        if coords is not None:
            coords = tuple((int(x), int(y)) for x, y in coords)
            if len(coords) != n:
                raise ValueError("coords must list one point per vertex")
            if len(set(coords)) != n:
                raise ValueError("coords must be distinct")
            for u in range(n):
                xu, yu = coords[u]
                for v in self.adj[u]:
                    xv, yv = coords[v]
                    if abs(xu - xv) + abs(yu - yv) != 1:
                        raise ValueError(f"edge ({u}, {v}) is not a unit grid edge")
        self.coords = coords
        self._shell_cache: dict = {}
        self._coord_index = None

    # -- basic queries -------------------------------------------------

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        kind = "grid-embedded " if self.coords is not None else ""
        return f"<{kind}Graph n={self.n} m={self.edge_count()} max_degree={self.max_degree}>"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.adj == other.adj and self.coords == other.coords

    def __hash__(self) -> int:
        return hash((self.n, self.adj, self.coords))

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adj[u] if u < v]

    def edge_count(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adj[v]

    def check_vertex(self, v: int) -> int:
        if not isinstance(v, (int,)) or isinstance(v, bool) or not 0 <= v < self.n:
            raise ValueError(f"invalid vertex id {v!r} for a graph on {self.n} vertices")
        return v

    def vertex_at(self, x: int, y: int) -> int | None:
        if self.coords is None:
            return None
        if self._coord_index is None:
            self._coord_index = {c: i for i, c in enumerate(self.coords)}
        return self._coord_index.get((x, y))

    def components(self) -> list[list[int]]:
        """Connected components, each sorted, ordered by smallest vertex."""
        seen = [False] * self.n
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            comp = [s]
            stack = [s]
            while stack:
                u = stack.pop()
                for w in self.adj[u]:
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        stack.append(w)
            comps.append(sorted(comp))
        return comps

    def induced_subgraph(self, vertices: Sequence[int]) -> tuple["Graph", list[int]]:
        """Induced subgraph on ``vertices``; returns it with the old-id list."""
        verts = sorted(set(vertices))
        index = {v: i for i, v in enumerate(verts)}
        edges = [(index[u], index[w]) for u in verts for w in self.adj[u] if w in index and u < w]
        coords = [self.coords[v] for v in verts] if self.coords is not None else None
        return Graph(len(verts), edges, coords), verts

    def is_tree(self) -> bool:
        return self.n > 0 and self.edge_count() == self.n - 1 and len(self.components()) == 1

    def canonical(self) -> dict:
        """Plain-data form used by the JSON writer and for hashing."""
        data = {"n": self.n, "edges": [list(e) for e in self.edges()]}
        if self.coords is not None:
            data["coords"] = [list(c) for c in self.coords]
        return data

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class DistanceShell:
    """BFS ball ``B_v(radius)`` with exact distances and its outer sphere."""

    center: int
    radius: int
    ball: tuple[int, ...]
    dist: dict
    sphere: tuple[int, ...]

    def layer(self, d: int) -> tuple[int, ...]:
        return tuple(u for u in self.ball if self.dist[u] == d)


def _bfs_layers(g: Graph, v: int, depth: int) -> list[list[int]]:
    layers = [[v]]
    seen = {v}
    frontier = [v]
    for _ in range(depth):
        nxt = []
        for u in frontier:
            for w in g.adj[u]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if not nxt:
            break
        nxt.sort()
        layers.append(nxt)
        frontier = nxt
    return layers


def ball(g: Graph, v: int, radius: int) -> DistanceShell:
    """All vertices within graph distance ``radius`` of ``v``.

    Ordering is ascending distance, then vertex id.  Results are cached on
    the graph, which is safe because graphs never change.
    """
    g.check_vertex(v)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    key = (v, radius)
    shell = g._shell_cache.get(key)
    if shell is not None:
        return shell
    layers = _bfs_layers(g, v, radius)
    order = [u for layer in layers for u in layer]
    dist = {u: d for d, layer in enumerate(layers) for u in layer}
    sphere = tuple(layers[radius]) if radius < len(layers) else ()
    shell = DistanceShell(v, radius, tuple(order), dist, sphere)
    if len(g._shell_cache) < 200_000:
        g._shell_cache[key] = shell
    return shell


def find_thin_sphere(g: Graph, v: int, radius: int, c0: float) -> tuple[int, tuple[int, ...]]:
    """Smallest ``r'`` in ``[ceil(radius/2), radius]`` with ``|S_v(r')| <= 2*c0*radius``.

    A graph with ``|B_v(l)| <= c0 * l**2`` always has one; failing to find
    it means the growth assumption is false for this input.
    """
    g.check_vertex(v)
    if radius < 1:
        raise ValueError("radius must be at least 1")
    layers = _bfs_layers(g, v, radius)
    limit = 2 * c0 * radius
    for r in range(math.ceil(radius / 2), radius + 1):
        sphere = layers[r] if r < len(layers) else []
        if len(sphere) <= limit:
            return r, tuple(sphere)
    raise GrowthAssumptionViolated(
        f"no sphere around {v} with radius in [{math.ceil(radius / 2)}, {radius}] "
        f"has at most {limit:g} vertices; the graph is not {c0:g}-quadratic-growth"
    )


# -- generators --------------------------------------------------------


def gen_grid(w: int, h: int, deleted: Iterable[tuple[int, int]] = ()) -> Graph:
    """Induced subgraph of the ``w x h`` grid with ``deleted`` points removed.

    Vertices are numbered row-major over the surviving points (y outer).
    """
    if w < 1 or h < 1:
        raise ValueError("grid dimensions must be positive")
    gone = {(int(x), int(y)) for x, y in deleted}
    pts = [(x, y) for y in range(h) for x in range(w) if (x, y) not in gone]
    index = {p: i for i, p in enumerate(pts)}
    edges = []
    for (x, y), i in index.items():
        for q in ((x + 1, y), (x, y + 1)):
            j = index.get(q)
            if j is not None:
                edges.append((i, j))
    return Graph(len(pts), edges, pts)


def gen_path(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def gen_cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def gen_star(leaves: int) -> Graph:
    return Graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def gen_regular_tree(delta: int, depth: int) -> Graph:
    """Depth-truncated Δ-regular tree: root has Δ children, others Δ-1.

    Vertex 0 is the root and ids increase level by level.
    """
    if delta < 2 or depth < 0:
        raise ValueError("need delta >= 2 and depth >= 0")
    edges = []
    level = [0]
    nxt_id = 1
    for d in range(depth):
        new_level = []
        for u in level:
            for _ in range(delta if d == 0 else delta - 1):
                edges.append((u, nxt_id))
                new_level.append(nxt_id)
                nxt_id += 1
        level = new_level
    return Graph(nxt_id, edges)


def gen_random_bounded(n: int, delta: int, seed: int) -> Graph:
    """Random simple graph with maximum degree at most ``delta``.

    A random spanning tree is grown first (each new vertex attaches to a
    uniformly chosen earlier vertex with spare degree), then random extra
    edges are added while both endpoints have spare degree.
    """
    if n < 1 or delta < 1:
        raise ValueError("need n >= 1 and delta >= 1")
    rng = random.Random(seed)
    deg = [0] * n
    edges: set[tuple[int, int]] = set()
    open_slots: list[int] = [0]
    for v in range(1, n):
        if not open_slots:
            open_slots.append(v)
            continue
        u = rng.choice(open_slots)
        edges.add((u, v))
        deg[u] += 1
        deg[v] += 1
        if deg[u] >= delta:
            open_slots.remove(u)
        if deg[v] < delta:
            open_slots.append(v)
    for _ in range(4 * n * delta):
        if len(open_slots) < 2:
            break
        u, v = rng.sample(open_slots, 2)
        e = (min(u, v), max(u, v))
        if e in edges:
            continue
        edges.add(e)
        for x in e:
            deg[x] += 1
            if deg[x] >= delta:
                open_slots.remove(x)
    return Graph(n, sorted(edges))


def _pinwheel(x0: int, y0: int, m: int, back: tuple[int, int], pts: list, edges: list, at: dict) -> None:
    """Three bent arms of length ``m`` leaving (x0, y0), each ending at distance m.

    Arms start in every lattice direction except ``back`` (where the feeding
    corridor arrives) and turn clockwise halfway, so they never meet.
    """
    straight = (m + 1) // 2
    for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0)):
        if (dx, dy) == back:
            continue
        tx, ty = dy, -dx
        x, y = x0, y0
        for step in range(m):
            if step < straight:
                nx, ny = x + dx, y + dy
            else:
                nx, ny = x + tx, y + ty
            _add_edge(x, y, nx, ny, pts, edges, at)
            x, y = nx, ny


def _add_point(x, y, pts, at):
    key = (x, y)
    if key in at:
        return at[key]
    at[key] = len(pts)
    pts.append(key)
    return at[key]


def _add_edge(x0, y0, x1, y1, pts, edges, at):
    a = _add_point(x0, y0, pts, at)
    b = _add_point(x1, y1, pts, at)
    edges.append((a, b))


def _quad_halfwidth(m: int) -> int:
    if m < 8:
        return (m + 1) // 2
    arm = m // 4 + 1
    return arm + _quad_halfwidth(m - 2 * arm)


def _quad_tree(x0: int, y0: int, m: int, back, pts, edges, at) -> None:
    # H-tree: vertical bar through the root, horizontal bars at its ends,
    # four sub-copies with budget m - 2*arm placed at the bar ends.
    if m < 8:
        _pinwheel(x0, y0, m, back, pts, edges, at)
        return
    arm = m // 4 + 1
    child = m - 2 * arm
    if _quad_halfwidth(child) >= arm:
        raise AssertionError("quad-boundary sub-copies would overlap")
    for sy in (1, -1):
        for i in range(arm):
            _add_edge(x0, y0 + sy * i, x0, y0 + sy * (i + 1), pts, edges, at)
        yb = y0 + sy * arm
        for sx in (1, -1):
            for i in range(arm):
                _add_edge(x0 + sx * i, yb, x0 + sx * (i + 1), yb, pts, edges, at)
            _quad_tree(x0 + sx * arm, yb, child, (-sx, 0), pts, edges, at)


def gen_quad_boundary(n: int) -> tuple[Graph, int]:
    """Induced Z² subgraph whose distance-``n`` sphere around S has Θ(n²) vertices.

    An H-shaped tree of corridors with budget ``m = n/2`` is laid out on
    the lattice: from a root, bars of length ``a = m//4 + 1`` lead to four
    recursive copies with budget ``m - 2a`` (roughly ``m/2 - 1``).  Copies
    with budget below 8 are a pinwheel of three bent arms.  Every edge is
    then subdivided, which doubles all distances and makes the vertex set
    an induced subgraph of Z².  The leaves are exactly the vertices at
    distance ``n`` from S, so ``f(n) = 4 f(n/2 - Θ(1))``
    with ``f = 3`` for the base pinwheel.

    Returns the graph and the start vertex S.
    """
    if n < 16 or n % 2:
        raise ValueError("gen_quad_boundary needs an even n >= 16")
    pts: list = []
    edges: list = []
    at: dict = {}
    _add_point(0, 0, pts, at)
    _quad_tree(0, 0, n // 2, None, pts, edges, at)
    if len(pts) != len(edges) + 1:
        raise AssertionError("quad-boundary corridors overlap")
    # subdivide: original points to even coordinates, one midpoint per edge
    fine = [(2 * x, 2 * y) for x, y in pts]
    fine_edges = []
    for a, b in edges:
        (xa, ya), (xb, yb) = fine[a], fine[b]
        mid = len(fine)
        fine.append(((xa + xb) // 2, (ya + yb) // 2))
        fine_edges.append((a, mid))
        fine_edges.append((mid, b))
    return Graph(len(fine), fine_edges, fine), 0


def disjoint_union(graphs: Sequence[Graph]) -> Graph:
    """Disjoint union; vertex ids are shifted block by block.

    Coordinates are kept (shifted apart along x) only when every part has them.
    """
    edges = []
    coords = [] if all(g.coords is not None for g in graphs) else None
    offset = 0
    x_shift = 0
    for g in graphs:
        edges.extend((u + offset, v + offset) for u, v in g.edges())
        if coords is not None and g.n:
            xs = [c[0] for c in g.coords]
            lo, hi = min(xs), max(xs)
            coords.extend((x - lo + x_shift, y) for x, y in g.coords)
            x_shift += hi - lo + 2
        offset += g.n
    return Graph(offset, edges, coords)


# -- file formats ------------------------------------------------------


def read_graph(path) -> Graph:
    """Read an edge-list (``n m`` header) or JSON graph file; format is sniffed."""
    text = Path(path).read_text()
    return parse_graph(text)


def parse_graph(text: str) -> Graph:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(stripped)
        return Graph(int(data["n"]), [tuple(e) for e in data.get("edges", [])], data.get("coords"))
    rows = [ln.split() for ln in stripped.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty graph file")
    n, m = int(rows[0][0]), int(rows[0][1])
    edge_rows = rows[1:]
    if len(edge_rows) != m:
        raise ValueError(f"header announces {m} edges but {len(edge_rows)} were found")
    return Graph(n, [(int(a), int(b)) for a, b in edge_rows])


def write_graph(g: Graph, path, fmt: str | None = None) -> None:
    """Write ``g``; JSON for ``.json`` paths (or ``fmt='json'``), else edge list."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "edgelist")
    if fmt == "json":
        path.write_text(json.dumps(g.canonical()))
    elif fmt == "edgelist":
        edges = g.edges()
        lines = [f"{g.n} {len(edges)}"] + [f"{u} {v}" for u, v in edges]
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown graph format {fmt!r}")
