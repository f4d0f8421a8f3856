import math

import pytest

from subquad.errors import OracleTooLarge, OutOfRegime
from subquad.graph import Graph, gen_grid, gen_path, gen_quad_boundary, gen_random_bounded, gen_regular_tree
from subquad.spin import TwoSpinParams, hardcore
from subquad.verify import growth_profile, lower_bound_bruteforce, ssm_decay_fit, weitz_lower_bound


@pytest.mark.parametrize("delta,k", [(4, 1), (3, 2), (5, 1), (2, 2)])
def test_lower_bound_rows_pass(delta, k):
    rep = weitz_lower_bound(delta, k, 10)
    assert [r.ell for r in rep.rows] == list(range(2, 11))
    assert rep.all_pass
    assert rep.lam == pytest.approx(2 / ((delta - 1) * delta**k))
    assert rep.base_gap == pytest.approx(rep.lam)


@pytest.mark.parametrize("delta,k", [(4, 1), (3, 2), (5, 1)])
def test_lower_bound_matches_brute_force(delta, k):
    rep = weitz_lower_bound(delta, k, 2)
    assert rep.rows[0].d_tv == pytest.approx(lower_bound_bruteforce(delta, k, 2), abs=1e-10)


def test_lower_bound_three_levels_brute_force():
    rep = weitz_lower_bound(2, 2, 3)
    assert rep.rows[1].d_tv == pytest.approx(lower_bound_bruteforce(2, 2, 3), abs=1e-12)


def test_lower_bound_errors():
    with pytest.raises(OutOfRegime):
        weitz_lower_bound(3, 1, 5)
    with pytest.raises(OutOfRegime):
        weitz_lower_bound(1, 4, 5)
    with pytest.raises(ValueError):
        weitz_lower_bound(4, 1, 1)


def test_ssm_tree_rate():
    delta, k = 3, 1
    lam = 0.9 / (delta**k * (delta - 1))
    fit = ssm_decay_fit(gen_regular_tree(delta, 4), hardcore(lam), 0, 3)
    assert math.log(fit.r) >= k * math.log(delta) - 0.1


def test_ssm_zero_beyond_diameter():
    fit = ssm_decay_fit(gen_path(3), hardcore(1.0), 1, 4)
    assert [d for _, d in fit.curve[1:]] == [0.0, 0.0, 0.0]
    assert fit.used == [1] and fit.r == 1.0


def test_ssm_grid_strictly_decreasing():
    g = gen_grid(5, 5)
    fit = ssm_decay_fit(g, hardcore(1.0), g.vertex_at(2, 2), 3)
    D = [d for _, d in fit.curve]
    assert D[0] > D[1] > D[2] > 0
    # the envelope bounds every measured point
    for ell, d in fit.curve:
        assert d <= fit.C_envelope * fit.r ** (-ell) * (1 + 1e-12)


def test_ssm_ising_decays_faster():
    g = gen_grid(7, 7)
    a = ssm_decay_fit(g, hardcore(1.0), 24, 3)
    b = ssm_decay_fit(g, TwoSpinParams(1.2, 1.2, 1.0), 24, 3)
    assert b.r > a.r > 1


def test_ssm_cap():
    g = gen_grid(31, 31)
    with pytest.raises(OracleTooLarge):
        ssm_decay_fit(g, hardcore(1.0), g.vertex_at(15, 15), 6)


def test_growth_profile_examples():
    assert growth_profile(gen_grid(9, 7), 2).C0 <= 5
    assert growth_profile(gen_grid(3, 3, deleted={(1, 1)}), 2).C0 <= 5
    assert growth_profile(gen_path(12), 1).C0 <= 3
    assert growth_profile(Graph(1, []), 2).C0 == 1


def test_growth_profile_sampled():
    g, _ = gen_quad_boundary(64)
    prof = growth_profile(g, 2, max_sources=50)
    assert prof.sampled and 0 < prof.C0 <= 5
    assert prof == growth_profile(g, 2, max_sources=50)


def test_growth_profile_expander_is_large():
    assert growth_profile(gen_random_bounded(400, 4, 0), 2).C0 > 5
