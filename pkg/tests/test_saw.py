import json

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from subquad.graph import gen_cycle, gen_grid, gen_path, gen_random_bounded, gen_regular_tree, gen_star
from subquad.saw import SawTree, build_saw, expand_node, saw_marginal
from subquad.spin import TwoSpinParams, exact_marginal, hardcore


def test_tree_input_has_no_forced_nodes():
    g = gen_regular_tree(3, 3)
    t = build_saw(g, 5, g.n)
    assert len(t) == g.n
    assert all(f is None for f in t.forced)
    assert sorted(t.g_vertex) == list(range(g.n))


def test_triangle_closing_leaves():
    t = build_saw(gen_cycle(3), 0, 3)
    forced = [i for i in range(len(t)) if t.forced[i] is not None]
    # a closing walk 0-a-b-0 has length 3
    assert [t.depth[i] for i in forced] == [3, 3]
    assert sorted(t.forced[i] for i in forced) == [0, 1]


def test_four_cycle_closing_leaves():
    t = build_saw(gen_cycle(4), 0, 4)
    forced = [i for i in range(len(t)) if t.forced[i] is not None]
    assert [t.depth[i] for i in forced] == [4, 4]
    assert sorted(t.forced[i] for i in forced) == [0, 1]
    # one closing leaf below each branch of the root
    top = {t.walk(i)[1] for i in forced}
    assert len(top) == 2


def test_expand_path_root():
    t = SawTree(gen_path(3), 0, 5)
    assert [t.g_vertex[c] for c in expand_node(t, 0)] == [1]
    t = SawTree(gen_path(3), 1, 5)
    assert sorted(t.g_vertex[c] for c in expand_node(t, 0)) == [0, 2]


def test_expand_all_neighbors_on_walk_are_forced():
    g = gen_cycle(3)
    t = build_saw(g, 0, 2)
    deep = t.nodes_at_depth(2)
    kids = expand_node(t, deep[0])
    assert kids and all(t.forced[c] is not None for c in kids)


def test_expand_twice_and_forced_errors():
    t = SawTree(gen_path(3), 0, 2)
    expand_node(t, 0)
    with pytest.raises(ValueError):
        expand_node(t, 0)
    t = build_saw(gen_cycle(3), 0, 3)
    forced = next(i for i in range(len(t)) if t.forced[i] is not None)
    with pytest.raises(ValueError):
        expand_node(t, forced)


def test_pinned_vertices():
    g = gen_path(3)
    t = build_saw(g, 1, 3, {0: 0, 2: 1})
    assert [t.g_vertex[c] for c in t.children[0]] == [2]
    assert t.forced[t.children[0][0]] == 1
    with pytest.raises(ValueError):
        SawTree(g, 0, 2, {0: 1})


def test_marginal_depth_zero():
    t = build_saw(gen_path(3), 0, 0)
    assert saw_marginal(t, hardcore(1), {0: 0}) == 1.0
    assert saw_marginal(t, hardcore(1), {0: 1}) == 0.0


def test_marginal_star_leaves_pinned():
    t = build_saw(gen_star(3), 0, 1)
    b = {i: 0 for i in t.boundary_nodes()}
    assert saw_marginal(t, hardcore(1), b) == pytest.approx(0.5)


def test_missing_boundary_assignment():
    t = build_saw(gen_star(3), 0, 1)
    with pytest.raises(ValueError):
        saw_marginal(t, hardcore(1), {})


def test_json_export():
    t = build_saw(gen_cycle(4), 0, 4)
    data = json.loads(t.to_json(max_depth=1))
    assert data["root_vertex"] == 0 and len(data["nodes"]) == 3


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 4), st.integers(0, 10**6), st.floats(0.05, 3.0),
       st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_untruncated_saw_matches_oracle(n, delta, seed, lam, beta, gamma):
    # beta = gamma = 0 forbids every odd cycle, so no configuration is always allowed
    assume(beta > 0 or gamma > 0)
    g = gen_random_bounded(n, delta, seed)
    m = TwoSpinParams(beta, gamma, lam)
    v = seed % g.n
    t = build_saw(g, v, g.n)
    assert saw_marginal(t, m) == pytest.approx(exact_marginal(g, m, None, v)[0], abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 3), st.integers(2, 3), st.integers(0, 10**6), st.floats(0.1, 2.0))
def test_pinned_saw_matches_oracle(w, h, seed, lam):
    g = gen_grid(w, h)
    v = seed % g.n
    others = [u for u in range(g.n) if u != v]
    pin = {u: (seed >> i) & 1 for i, u in enumerate(others[: 2])}
    if any(pin.get(a) == 1 and pin.get(b) == 1 for a, b in g.edges()):
        return
    t = build_saw(g, v, g.n, pin)
    assert saw_marginal(t, hardcore(lam)) == pytest.approx(exact_marginal(g, hardcore(lam), pin, v)[0], abs=1e-10)
