from collections import defaultdict
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leadlag.errors import EmptyWindow, NoSuchTicker
from leadlag.synth import UserLogConfig, gen_user_log
from leadlag.userstats import (
    Month,
    QueryEvent,
    Year,
    active_days_per_ticker,
    monthly_average_tickers_per_user,
    one_time_fraction_series,
    tickers_per_user,
)

T0 = datetime(2011, 3, 7, 12, 0, tzinfo=timezone.utc)


def ev(user, ticker, day=0, hour=0):
    return QueryEvent(T0 + timedelta(days=day, hours=hour), user, ticker)


def test_single_user_single_ticker():
    d = tickers_per_user([ev("a", "X", h) for h in range(5)])
    assert d.support == (1,) and d.mass == (1.0,) and d.n_users == 1


def test_two_users_one_and_three_tickers():
    events = [ev("a", "X"), ev("b", "X"), ev("b", "Y"), ev("b", "Z")]
    d = tickers_per_user(events)
    assert d.mass_at(1) == 0.5 and d.mass_at(3) == 0.5 and d.mass_at(2) == 0.0


def test_active_days_dedup():
    assert active_days_per_ticker([ev("a", "X")], "X").mass_at(1) == 1.0
    same_day = [ev("a", "X", 0, h) for h in (0, 1, 2)]
    assert active_days_per_ticker(same_day, "X").support == (1,)
    with pytest.raises(NoSuchTicker):
        active_days_per_ticker(same_day, "Y")


def test_naive_timestamps_are_utc_and_days_follow_utc():
    e = QueryEvent(datetime(2011, 1, 1, 23, 30), "a", "X")
    assert e.timestamp.tzinfo is not None
    shifted = QueryEvent(datetime(2011, 1, 1, 23, 30, tzinfo=timezone(timedelta(hours=-5))), "a", "X")
    assert shifted.day.isoformat() == "2011-01-02"


def test_windows():
    events = [ev("a", "X", 0), ev("a", "Y", 40)]
    assert tickers_per_user(events, Month(2011, 3)).support == (1,)
    assert tickers_per_user(events, Year(2011)).support == (2,)
    with pytest.raises(EmptyWindow):
        tickers_per_user(events, Month(2012, 1))


def test_one_time_fraction_omits_empty_months():
    events = [ev("a", "X", 0), ev("b", "X", 62)]
    series = one_time_fraction_series(events, "X")
    assert [m for m, _ in series] == [Month(2011, 3), Month(2011, 5)]
    assert all(f == 1.0 for _, f in series)


def test_monthly_average():
    events = [ev("a", "X", 0), ev("a", "Y", 1), ev("b", "X", 31)]
    d = monthly_average_tickers_per_user(events, 2011)
    # March: user a has 2 tickers; April: user b has 1
    assert d.mass_at(1) == 0.5 and d.mass_at(2) == 0.5 and d.n_users == 2


events_strategy = st.lists(
    st.tuples(st.sampled_from("abcd"), st.sampled_from(["X", "Y", "Z"]), st.integers(0, 90), st.integers(0, 23)),
    min_size=1,
    max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(events_strategy, st.integers(2, 4))
def test_properties(raw, k):
    events = [ev(u, t, d, h) for u, t, d, h in raw]
    d = tickers_per_user(events)
    assert sum(d.mass) == pytest.approx(1.0, abs=1e-9)
    assert d.n_users == len({u for u, *_ in raw})
    # duplicating every event leaves all outputs unchanged
    many = [e for e in events for _ in range(k)]
    assert tickers_per_user(many) == d
    for t in {t for _, t, *_ in raw}:
        assert active_days_per_ticker(many, t) == active_days_per_ticker(events, t)
        assert one_time_fraction_series(many, t) == one_time_fraction_series(events, t)
    # a user's yearly ticker count bounds every monthly count
    yearly = defaultdict(set)
    monthly = defaultdict(set)
    for e in events:
        yearly[(e.user_id, e.day.year)].add(e.ticker)
        monthly[(e.user_id, e.day.year, e.day.month)].add(e.ticker)
    for (u, y, m), s in monthly.items():
        assert len(yearly[(u, y)]) >= len(s)


def test_generator_round_trip():
    events = gen_user_log(UserLogConfig(n_users=5000, tickers=("AAPL", "MSFT"), seed=2))
    assert tickers_per_user(events).mass_at(1) == pytest.approx(0.9, abs=0.02)
    assert active_days_per_ticker(events, "AAPL").mass_at(1) == pytest.approx(0.9, abs=0.02)


def test_one_time_fraction_flat_for_stationary_generator():
    events = gen_user_log(UserLogConfig(n_users=20000, tickers=("AAPL",), seed=4))
    fr = np.array([f for _, f in one_time_fraction_series(events, "AAPL")])
    assert len(fr) == 12
    assert np.all(np.abs(fr - fr.mean()) <= 0.03)
