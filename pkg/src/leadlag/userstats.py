"""Aggregations of per-user search behaviour from a query-event log.

A "day" is the UTC calendar date of an event timestamp. Naive timestamps are
taken to be UTC already.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyWindow, LeadLagError, NoSuchTicker


@dataclass(frozen=True)
class QueryEvent:
    timestamp: datetime
    user_id: str
    ticker: str

    def __post_init__(self):
        if not self.ticker:
            raise LeadLagError("query event with empty ticker")
        ts = self.timestamp
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        object.__setattr__(self, "timestamp", ts.astimezone(timezone.utc))

    @property
    def day(self) -> date:
        return self.timestamp.date()


@dataclass(frozen=True)
class Month:
    year: int
    month: int

    def contains(self, d: date) -> bool:
        return d.year == self.year and d.month == self.month


@dataclass(frozen=True)
class Year:
    year: int

    def contains(self, d: date) -> bool:
        return d.year == self.year


def _in_window(events: Iterable[QueryEvent], window) -> list[QueryEvent]:
    if window is None:
        return list(events)
    return [e for e in events if window.contains(e.day)]


@dataclass(frozen=True)
class CountDistribution:
    support: tuple[int, ...]
    mass: tuple[float, ...]
    n_users: int

    def mass_at(self, k: int) -> float:
        try:
            return self.mass[self.support.index(k)]
        except ValueError:
            return 0.0


def _distribution(counts: Sequence[int]) -> CountDistribution:
    tally = Counter(counts)
    total = len(counts)
    support = tuple(sorted(tally))
    return CountDistribution(support, tuple(tally[k] / total for k in support), total)


def tickers_per_user(events: Iterable[QueryEvent], window=None) -> CountDistribution:
    """Distribution of the number of distinct tickers each user searched.

    ``window`` is a :class:`Month`, a :class:`Year` or ``None`` for all events.
    """
    per_user = defaultdict(set)
    for e in _in_window(events, window):
        per_user[e.user_id].add(e.ticker)
    if not per_user:
        raise EmptyWindow(f"no events in window {window}")
    return _distribution([len(s) for s in per_user.values()])


def monthly_average_tickers_per_user(events: Iterable[QueryEvent], year: int) -> CountDistribution:
    """Pointwise mean of the monthly distributions of ``year``.

    Months without events are left out of the mean. ``n_users`` counts the
    distinct users active anywhere in the year.
    """
    events = _in_window(events, Year(year))
    months = []
    for m in range(1, 13):
        try:
            months.append(tickers_per_user(events, Month(year, m)))
        except EmptyWindow:
            continue
    if not months:
        raise EmptyWindow(f"no events in {year}")
    support = tuple(sorted(set().union(*(d.support for d in months))))
    mass = np.mean([[d.mass_at(k) for k in support] for d in months], axis=0)
    return CountDistribution(support, tuple(float(v) for v in mass), len({e.user_id for e in events}))


def _active_days(events: Iterable[QueryEvent], ticker: str) -> dict[str, set]:
    days = defaultdict(set)
    for e in events:
        if e.ticker == ticker:
            days[e.user_id].add(e.day)
    return days


def active_days_per_ticker(events: Iterable[QueryEvent], ticker: str, window=None) -> CountDistribution:
    """Distribution of distinct active days per user searching ``ticker``."""
    days = _active_days(_in_window(events, window), ticker)
    if not days:
        raise NoSuchTicker(f"nobody searched {ticker} in window {window}")
    return _distribution([len(s) for s in days.values()])


def one_time_fraction_series(events: Iterable[QueryEvent], ticker: str) -> list[tuple[Month, float]]:
    """Per month, the share of the ticker's searchers active on exactly one day.

    Months in which nobody searched the ticker are omitted.
    """
    by_month = defaultdict(lambda: defaultdict(set))
    for e in events:
        if e.ticker == ticker:
            by_month[Month(e.day.year, e.day.month)][e.user_id].add(e.day)
    out = []
    for month in sorted(by_month, key=lambda m: (m.year, m.month)):
        users = by_month[month]
        out.append((month, sum(len(d) == 1 for d in users.values()) / len(users)))
    return out
