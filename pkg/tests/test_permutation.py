from dataclasses import replace

import numpy as np
import pytest

from conftest import make_pair
from leadlag import rng as lrng
from leadlag.errors import TooFewEntities
from leadlag.numerics import pearson
from leadlag.permutation import (
    Scenario,
    correlation_matrix,
    draw_derangements,
    empirical_p,
    global_reshuffle_test,
    per_entity_all,
    per_entity_test,
)
from leadlag.series import AlignedPair
from leadlag.synth import CoupledDgpConfig, gen_entity_pool, weekday_calendar


def pool(k=8, seed=0, market=0.0, innov_corr=0.5, **kw):
    cfg = CoupledDgpConfig(n_days=120, seed=seed, innov_corr=innov_corr, **kw)
    return gen_entity_pool(k, cfg, market)


def test_empirical_p_never_zero():
    null = np.array([0.1, 0.2, 0.3])
    assert empirical_p(0.9, null) == 0.25
    assert empirical_p(0.2, null) == 0.75
    assert empirical_p(-1.0, null) == 1.0


def test_derangements_have_no_fixed_points():
    valid = np.ones((6, 6), dtype=bool)
    perms = draw_derangements(valid, 500, lrng.stream(0, "t"))
    assert perms.shape == (500, 6)
    assert not (perms == np.arange(6)).any()
    assert all(sorted(p) == list(range(6)) for p in perms)


def test_derangements_respect_invalid_pairings():
    valid = np.ones((4, 4), dtype=bool)
    valid[0, 1] = False
    perms = draw_derangements(valid, 200, lrng.stream(1, "t"))
    assert not (perms[:, 0] == 1).any()


def test_identical_entities_give_p_one():
    base = pool(1 + 1, seed=3)[0]
    pairs = [AlignedPair(f"C{i}", base.dates, base.q, base.t) for i in range(5)]
    rep = global_reshuffle_test(pairs, n_perm=50, seed=1)
    assert np.all(rep.null_values == rep.observed)
    assert rep.empirical_p == 1.0


def test_global_test_with_market_factor():
    pairs = pool(20, seed=5, market=0.3, beta_qt=0.5)
    rep = global_reshuffle_test(pairs, n_perm=300, seed=2)
    assert rep.observed > rep.null_summary.max
    assert rep.empirical_p == 1 / 301
    assert rep.null_summary.mean > 0


def test_global_test_without_factor_has_centred_null():
    rep = global_reshuffle_test(pool(20, seed=6), n_perm=300, seed=2)
    assert abs(rep.null_summary.mean) < 0.02


def test_global_determinism_and_order_independence():
    pairs = pool(6, seed=8, market=0.2)
    a = global_reshuffle_test(pairs, n_perm=100, seed=9)
    b = global_reshuffle_test(list(reversed(pairs)), n_perm=100, seed=9)
    np.testing.assert_array_equal(a.null_values, b.null_values)
    assert a.observed == b.observed


def test_too_few_entities():
    with pytest.raises(TooFewEntities):
        global_reshuffle_test(pool(2), n_perm=10)


def test_short_overlap_marks_cell_unusable():
    pairs = pool(3, seed=1)
    late = pairs[2]
    # only 20 of this entity's dates overlap the others
    shifted = AlignedPair(late.entity_id, weekday_calendar(late.n, pairs[0].dates[-20]), late.q, late.t)
    R = correlation_matrix(pairs[:2] + [shifted])
    assert np.isnan(R[0, 2]) and np.isnan(R[2, 0])
    assert not np.isnan(R[2, 2])


def test_per_entity_scenarios_read_the_global_datasets():
    pairs = pool(7, seed=2, market=0.1)
    g = global_reshuffle_test(pairs, n_perm=80, seed=4)
    R = correlation_matrix(pairs)
    perms = draw_derangements(~np.isnan(R), 80, lrng.stream(4, "reshuffle"))
    np.testing.assert_array_equal(g.null_values, R[np.arange(7), perms].mean(axis=1))
    i = 3
    fq = per_entity_test(pairs, pairs[i].entity_id, Scenario.FIXED_Q, n_perm=80, seed=4)
    np.testing.assert_array_equal(fq.null_values, R[i, perms[:, i]])
    ft = per_entity_test(pairs, pairs[i].entity_id, Scenario.FIXED_T, n_perm=80, seed=4)
    partners = [int(np.flatnonzero(p == i)[0]) for p in perms]
    np.testing.assert_array_equal(ft.null_values, [R[j, i] for j in partners])
    assert ft.observed == pearson(pairs[i].q, pairs[i].t)
    both = per_entity_all(pairs, Scenario.FIXED_T, n_perm=80, seed=4)
    np.testing.assert_array_equal(both[i].null_values, ft.null_values)


def test_copied_target_reaches_floor():
    others = pool(10, seed=11)
    r = np.random.default_rng(0)
    t = r.random(120) + 1
    target = make_pair(t.copy(), t, entity_id="ZZZ", start=others[0].dates[0])
    for scenario in (Scenario.FIXED_T, Scenario.FIXED_Q):
        rep = per_entity_test(others + [target], "ZZZ", scenario, n_perm=1000, seed=1)
        assert rep.empirical_p == 1 / 1001 == pytest.approx(0.001, abs=1e-6)


def test_independent_target_is_not_significant_on_average():
    ps = []
    for s in range(60):
        pairs = pool(8, seed=100 + s, innov_corr=0.0)
        ps.append(per_entity_test(pairs, "E000", Scenario.FIXED_T, n_perm=99, seed=s).empirical_p)
    ps = np.array(ps)
    assert 0.3 <= ps.mean() <= 0.7
    assert np.mean(ps < 0.05) <= 0.15


def test_global_scenario_rejected_by_per_entity():
    with pytest.raises(Exception):
        per_entity_test(pool(4), "E000", Scenario.GLOBAL, n_perm=10)
    with pytest.raises(Exception):
        per_entity_test(pool(4), "NOPE", Scenario.FIXED_T, n_perm=10)


def test_seed_changes_null():
    pairs = pool(6, seed=3)
    a = global_reshuffle_test(pairs, n_perm=50, seed=1)
    b = global_reshuffle_test(pairs, n_perm=50, seed=2)
    assert not np.array_equal(a.null_values, b.null_values)
    c = global_reshuffle_test([replace(p) for p in pairs], n_perm=50, seed=1)
    np.testing.assert_array_equal(a.null_values, c.null_values)
