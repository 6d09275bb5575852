from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from conftest import make_pair
from leadlag.errors import SeriesTooShort
from leadlag.granger import Direction, granger_batch, granger_test
from leadlag.synth import CoupledDgpConfig, gen_coupled_pair, gen_entity_pool


def lstsq_rss(columns, y):
    X = np.column_stack([np.ones(len(y))] + list(columns))
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return r @ r


def oracle_granger(cause, effect, p):
    n = len(effect)
    y = effect[p:]
    own = [effect[p - j : n - j] for j in range(1, p + 1)]
    other = [cause[p - j : n - j] for j in range(1, p + 1)]
    rss_r = lstsq_rss(own, y)
    rss_u = lstsq_rss(own + other, y)
    df2 = (n - p) - 2 * p - 1
    f = ((rss_r - rss_u) / p) / (rss_u / df2)
    return f, stats.f.sf(f, p, df2), 1 - rss_u / rss_r


@pytest.mark.parametrize("p", [1, 2, 3])
def test_granger_matches_lstsq_and_scipy(p):
    pair = gen_coupled_pair(CoupledDgpConfig(beta_qt=0.2, beta_tq=0.1, ar_q=0.3, seed=p))
    for d in Direction:
        cause, effect = (pair.q, pair.t) if d is Direction.Q_TO_T else (pair.t, pair.q)
        f, pv, red = oracle_granger(cause, effect, p)
        res = granger_test(pair, d, p)
        assert res.f_stat == pytest.approx(f, rel=1e-8)
        assert res.p_value == pytest.approx(pv, rel=1e-7, abs=1e-300)
        assert res.rss_reduction == pytest.approx(red, rel=1e-8)
        assert (res.df_num, res.df_den) == (p, pair.n - p - 2 * p - 1)
        assert res.rss_reduction == 1 - res.rss_unrestricted / res.rss_restricted


def test_granger_planted_power():
    hits = 0
    for s in range(500):
        pair = gen_coupled_pair(CoupledDgpConfig(ar_t=0.5, beta_qt=0.8, seed=s))
        hits += granger_test(pair, Direction.Q_TO_T, 1).p_value < 0.01
    assert hits / 500 >= 0.99


def test_granger_affine_invariance_and_determinism():
    pair = gen_coupled_pair(CoupledDgpConfig(beta_qt=0.3, seed=9))
    base = granger_test(pair, Direction.Q_TO_T, 2)
    scaled = make_pair(pair.q * 1e4 + 7, pair.t * 0.003 + 2)
    other = granger_test(scaled, Direction.Q_TO_T, 2)
    assert other.f_stat == pytest.approx(base.f_stat, rel=1e-8)
    assert base.f_stat >= 0
    again = granger_test(pair, Direction.Q_TO_T, 2)
    assert again == base


def test_granger_too_short():
    with pytest.raises(SeriesTooShort):
        granger_test(make_pair([1, 2, 3, 4], [2, 1, 4, 3]), Direction.Q_TO_T, 1)


def test_batch_single_pair():
    pair = gen_coupled_pair(CoupledDgpConfig(beta_qt=0.8, seed=1))
    s = granger_batch([pair], 1)
    for d in Direction:
        ds = s.directions[d]
        res = granger_test(pair, d, 1)
        assert ds.n_tested == 1
        assert ds.pct_p05 in (0.0, 100.0) and ds.pct_p01 in (0.0, 100.0)
        assert ds.pct_p05 == (100.0 if res.p_value < 0.05 else 0.0)
        assert ds.mean_rss_reduction == res.rss_reduction


def test_batch_planted_subset():
    base = CoupledDgpConfig(ar_t=0.5, seed=123)
    planted = gen_entity_pool(40, replace(base, beta_qt=0.8), 0.0)
    null = [
        gen_coupled_pair(replace(base, seed=1000 + i, entity_id=f"N{i:03d}"))
        for i in range(47)
    ]
    s = granger_batch(planted + null, 1)
    assert s.directions[Direction.Q_TO_T].pct_p05 == pytest.approx(46, abs=6)


def test_batch_symmetric_coupling():
    cfg = CoupledDgpConfig(ar_t=0.3, ar_q=0.3, beta_qt=0.3, beta_tq=0.3, seed=77)
    s = granger_batch(gen_entity_pool(60, cfg, 0.0), 1)
    a = s.directions[Direction.Q_TO_T].pct_p05
    b = s.directions[Direction.T_TO_Q].pct_p05
    assert abs(a - b) <= 15


def test_batch_collects_errors():
    good = gen_coupled_pair(CoupledDgpConfig(seed=2, entity_id="A"))
    flat = make_pair(np.ones(50), np.arange(50.0), entity_id="B")
    s = granger_batch([flat, good], 1)
    assert set(s.errors) == {"B"}
    assert s.directions[Direction.Q_TO_T].n_tested == 1
