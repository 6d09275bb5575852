from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from conftest import make_pair
from leadlag import rng as lrng
from leadlag.anticipation import (
    Model,
    Verdict,
    anticipation_report,
    bootstrap_rss,
    case_resample_indices,
    rank_p_value,
    regression_frame,
    test1 as run_test1,
    test2 as run_test2,
    test3 as run_test3,
)
from leadlag.errors import TooShort, ZeroVariance
from leadlag.numerics import mann_whitney_u, ols
from leadlag.synth import CoupledDgpConfig, gen_coupled_pair


def planted(seed):
    return gen_coupled_pair(CoupledDgpConfig(ar_t=0.5, beta_qt=0.8, seed=seed))


def test_regression_frame_shapes_and_errors():
    pair = planted(0)
    f = regression_frame(pair)
    assert all(len(v) == pair.n - 1 for v in f.values())
    np.testing.assert_array_equal(f["T"][:-1], f["T_lag"][1:])
    with pytest.raises(TooShort):
        regression_frame(make_pair(np.arange(10.0), np.arange(10.0)))
    with pytest.raises(ZeroVariance):
        regression_frame(make_pair(np.ones(40), np.arange(40.0)))


def test_rank_p_value_convention():
    bs = np.array([0.1, 0.2, 0.3, 0.4])
    assert rank_p_value(0.5, bs) == 1 / 5
    assert rank_p_value(0.0, bs) == 1.0
    assert rank_p_value(0.25, bs) == 3 / 5


def test_case_resampling_keeps_rows_together():
    pair = planted(3)
    frame = regression_frame(pair)
    n_rows = len(frame["T"])
    # row checksum: any mixing of columns across rows would break it
    weights = (np.pi, np.e, np.sqrt(2), np.sqrt(3))
    cols = ("T", "Q", "T_lag", "Q_lag")
    checksum = sum(w * frame[c] for w, c in zip(weights, cols))
    bs = bootstrap_rss(frame, (Model.M2,), 6, lrng.stream(1, "rows"))
    idx = case_resample_indices(n_rows, 6, lrng.stream(1, "rows"))
    assert bs.redraws == 0
    for b in range(6):
        rows = {c: frame[c][idx[b]] for c in cols}
        np.testing.assert_array_equal(sum(w * rows[c] for w, c in zip(weights, cols)), checksum[idx[b]])
        ref = ols([rows["T_lag"], rows["Q_lag"]], rows["T"])
        assert bs.rss[Model.M2][b] == pytest.approx(ref.rss, rel=1e-9)


def test_test1_planted_direction():
    ok_qt = ok_tq = 0
    for s in range(200):
        res = run_test1(planted(s), n_boot=999, seed=s)
        ok_qt += res.p_qt < 0.01
        ok_tq += res.p_tq > 0.5
    assert ok_qt / 200 >= 0.95
    assert ok_tq / 200 >= 0.95


def test_test1_null_calibration():
    ps = np.array([
        run_test1(gen_coupled_pair(CoupledDgpConfig(ar_t=0.0, seed=s)), n_boot=999, seed=s).p_qt
        for s in range(1000)
    ])
    assert 0.02 <= np.mean(ps < 0.05) <= 0.09


def test_test1_invariants():
    pair = gen_coupled_pair(CoupledDgpConfig(beta_qt=0.2, beta_tq=0.2, seed=5))
    a = run_test1(pair, n_boot=199, seed=11)
    b = run_test1(pair, n_boot=199, seed=11)
    assert a == b
    assert a.delta_qt >= -1e-9 and a.delta_tq >= -1e-9
    for p in (a.p_qt, a.p_tq):
        assert 1 / 200 <= p <= 1
    assert a.n_boot == 199


def test_test1_floor_is_one_over_b_plus_one():
    res = run_test1(planted(1), n_boot=9999, seed=1)
    assert res.p_qt == 1 / 10000 == 0.0001


def test_test2_planted_and_symmetric():
    planted_verdicts = Counter(run_test2(planted(s), n_boot=999, seed=s).verdict for s in range(50))
    assert planted_verdicts[Verdict.Q_TO_T] / 50 >= 0.9
    sym = CoupledDgpConfig(ar_t=0.3, ar_q=0.3, beta_qt=0.3, beta_tq=0.3)
    sym_verdicts = Counter(
        run_test2(gen_coupled_pair(replace(sym, seed=s)), n_boot=999, seed=s).verdict
        for s in range(50)
    )
    assert sym_verdicts[Verdict.INCONCLUSIVE] > 25


def test_test2_reverse_direction():
    cfg = CoupledDgpConfig(ar_t=0.0, ar_q=0.5, beta_tq=0.8, seed=4)
    assert run_test2(gen_coupled_pair(cfg), n_boot=999, seed=4).verdict is Verdict.T_TO_Q


def test_test3_no_effect_and_planted():
    x = np.random.default_rng(0).standard_normal(500)
    assert mann_whitney_u(x, x.copy()).p_value == pytest.approx(0.5, abs=0.01)
    res = run_test3(planted(2), n_boot=999, seed=2)
    assert res.p_qt < 1e-4
    assert 0 < res.p_qt <= 1 and 0 < res.p_tq <= 1


def test_report_reproducible_and_seed_sensitive():
    pair = planted(7)
    a = anticipation_report(pair, 99, 99, 99, seed=3)
    b = anticipation_report(pair, 99, 99, 99, seed=3)
    c = anticipation_report(pair, 99, 99, 99, seed=4)
    assert a == b
    assert a.test2.pct95_qt != c.test2.pct95_qt
