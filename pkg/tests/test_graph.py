import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subquad.errors import GrowthAssumptionViolated
from subquad.graph import (
    Graph,
    ball,
    disjoint_union,
    find_thin_sphere,
    gen_cycle,
    gen_grid,
    gen_path,
    gen_quad_boundary,
    gen_random_bounded,
    gen_regular_tree,
    gen_star,
    parse_graph,
    read_graph,
    write_graph,
)


def same_graph(a, b):
    return a.n == b.n and a.edges() == b.edges()


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError):
        Graph(2, [(0, 0)])
    with pytest.raises(ValueError):
        Graph(2, [(0, 2)])


def test_coords_must_be_unit_edges():
    with pytest.raises(ValueError):
        Graph(2, [(0, 1)], [(0, 0), (2, 0)])


def test_ball_radius_zero():
    g = gen_grid(3, 3)
    sh = ball(g, 4, 0)
    assert sh.ball == (4,) and sh.sphere == (4,)


def test_ball_grid_center_radius_one():
    g = gen_grid(5, 5)
    c = g.vertex_at(2, 2)
    sh = ball(g, c, 1)
    assert len(sh.ball) == 5 and len(sh.sphere) == 4


def test_ball_path_endpoint():
    sh = ball(gen_path(3), 0, 2)
    assert len(sh.ball) == 3 and sh.sphere == (2,)


def test_ball_ordering_and_distances():
    g = gen_grid(4, 4)
    sh = ball(g, 5, 3)
    keys = [(sh.dist[u], u) for u in sh.ball]
    assert keys == sorted(keys)
    assert set(sh.sphere) == {u for u in sh.ball if sh.dist[u] == 3}


def test_ball_invalid_vertex():
    with pytest.raises(ValueError):
        ball(gen_path(3), 5, 1)


def test_thin_sphere_grid():
    g = gen_grid(17, 17)
    r, sphere = find_thin_sphere(g, g.vertex_at(8, 8), 4, 5)
    assert r == 2 and len(sphere) == 8


def test_thin_sphere_star_empty_sphere():
    r, sphere = find_thin_sphere(gen_star(3), 0, 2, 5)
    assert 1 <= r <= 2


def test_thin_sphere_binary_tree_violates_growth():
    # complete binary tree of depth 12: the root has 2 children, everything else 2
    edges = [(i, c) for i in range(2**12 - 1) for c in (2 * i + 1, 2 * i + 2)]
    g = Graph(2**13 - 1, edges)
    with pytest.raises(GrowthAssumptionViolated):
        find_thin_sphere(g, 0, 12, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9), st.integers(1, 8), st.floats(0.5, 6))
def test_thin_sphere_radius_range(w, h, ell, c0):
    g = gen_grid(w, h)
    try:
        r, sphere = find_thin_sphere(g, 0, ell, c0)
    except GrowthAssumptionViolated:
        return
    assert -(-ell // 2) <= r <= ell
    assert len(sphere) <= 2 * c0 * ell


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 12), st.integers(5, 12), st.integers(1, 6))
def test_grid_sphere_at_most_4l(w, h, ell):
    g = gen_grid(w, h)
    sh = ball(g, g.vertex_at(w // 2, h // 2), ell)
    assert len(sh.sphere) <= 4 * ell
    sizes = [len(ball(g, 0, r).ball) for r in range(ell + 1)]
    assert sizes == sorted(sizes)


def test_grid_examples():
    assert same_graph(gen_grid(2, 2), gen_cycle(4)) or sorted(map(len, gen_grid(2, 2).adj)) == [2] * 4
    g = gen_grid(1, 5)
    assert g.n == 5 and g.edge_count() == 4 and g.max_degree == 2
    ring = gen_grid(3, 3, deleted={(1, 1)})
    assert ring.n == 8 and all(len(a) == 2 for a in ring.adj) and len(ring.components()) == 1


def test_regular_tree_sizes():
    t = gen_regular_tree(2, 3)
    assert t.n == 7 and t.is_tree() and t.max_degree == 2
    assert gen_regular_tree(3, 2).n == 10
    assert gen_regular_tree(4, 0).n == 1


def test_random_bounded():
    assert gen_random_bounded(1, 3, 0).n == 1
    g = gen_random_bounded(8, 3, 5)
    assert g.max_degree <= 3 and len(g.components()) == 1
    assert same_graph(g, gen_random_bounded(8, 3, 5))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 60), st.integers(1, 5), st.integers(0, 10**6))
def test_random_bounded_invariants(n, delta, seed):
    g = gen_random_bounded(n, delta, seed)
    assert g.max_degree <= delta
    for u in range(g.n):
        assert u not in g.adj[u]
        for w in g.adj[u]:
            assert u in g.adj[w]
        assert len(set(g.adj[u])) == len(g.adj[u])


def test_quad_boundary_growth():
    counts = {}
    for n in (32, 64, 128, 256):
        g, s = gen_quad_boundary(n)
        assert g.max_degree <= 4 and g.is_tree()
        counts[n] = len(ball(g, s, n).sphere)
    for n in (64, 128, 256):
        assert 3 <= counts[n] / counts[n // 2] <= 5
    band = [counts[n] / n**2 for n in counts]
    assert min(band) > 0.005 and max(band) < 0.05


def test_quad_boundary_is_induced():
    g, _ = gen_quad_boundary(64)
    at = {c: i for i, c in enumerate(g.coords)}
    for (x, y), i in at.items():
        for q in ((x + 1, y), (x, y + 1)):
            j = at.get(q)
            if j is not None:
                assert j in g.adj[i]


def test_quad_boundary_rejects_small():
    with pytest.raises(ValueError):
        gen_quad_boundary(10)
    with pytest.raises(ValueError):
        gen_quad_boundary(33)


def test_disjoint_union():
    g = disjoint_union([gen_grid(2, 2), gen_grid(3, 1)])
    assert g.n == 7 and len(g.components()) == 2 and g.coords is not None


@pytest.mark.parametrize("fmt", ["json", "edgelist"])
@pytest.mark.parametrize("make", [lambda: gen_grid(3, 4), lambda: gen_cycle(5), lambda: gen_regular_tree(3, 2),
                                  lambda: gen_random_bounded(20, 4, 1), lambda: gen_quad_boundary(16)[0]])
def test_round_trip(tmp_path, fmt, make):
    g = make()
    p = tmp_path / ("g.json" if fmt == "json" else "g.txt")
    write_graph(g, p, fmt)
    h = read_graph(p)
    assert same_graph(g, h)
    if fmt == "json":
        assert h.digest() == g.digest() and h.canonical() == g.canonical()


def test_parse_graph_errors():
    with pytest.raises(ValueError):
        parse_graph("3 2\n0 1\n")
    g = parse_graph(json.dumps({"n": 2, "edges": [[0, 1]]}))
    assert g.edges() == [(0, 1)]
