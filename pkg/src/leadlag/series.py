"""Daily series types, calendar alignment and derived series.

All containers are frozen and hold read-only numpy arrays, so they can be
shared freely between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyIntersection, KTooLarge, LeadLagError, TooShort


class SeriesKind(str, Enum):
    QUERY_VOLUME = "query_volume"
    USER_VOLUME = "user_volume"
    TRADE_VOLUME = "trade_volume"
    CLOSE_PRICE = "close_price"


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_increasing(dates: Sequence[date]) -> None:
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise LeadLagError(f"dates must be strictly increasing ({a} then {b})")


@dataclass(frozen=True, eq=False)
class DailySeries:
    """Date-indexed daily values for one entity."""

    entity_id: str
    kind: SeriesKind
    dates: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "kind", SeriesKind(self.kind))
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.ndim != 1 or len(self.values) != len(self.dates):
            raise LeadLagError("dates and values must have equal length")
        _check_increasing(self.dates)
        if not np.all(np.isfinite(self.values)):
            raise LeadLagError(f"{self.entity_id}: non-finite value")
        if np.any(self.values < 0):
            raise LeadLagError(f"{self.entity_id}: negative value in {self.kind.value} series")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def points(self) -> list[tuple[date, float]]:
        return list(zip(self.dates, self.values.tolist()))

    def equals(self, other: "DailySeries") -> bool:
        return (
            self.entity_id == other.entity_id
            and self.kind == other.kind
            and self.dates == other.dates
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class AlignedPair:
    """Query-side and trade-side values on one shared trading calendar.

    ``meta`` carries free-form provenance (e.g. the positivity transform used
    by the synthetic generators) and is ignored by all analysis code.
    """

    entity_id: str
    dates: tuple[date, ...]
    q: np.ndarray
    t: np.ndarray
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "q", _frozen_array(self.q))
        object.__setattr__(self, "t", _frozen_array(self.t))
        n = len(self.dates)
        if n < 2:
            raise TooShort(f"{self.entity_id}: aligned pair needs at least 2 dates, got {n}")
        if self.q.shape != (n,) or self.t.shape != (n,):
            raise LeadLagError(f"{self.entity_id}: q, t and dates must have equal length")
        _check_increasing(self.dates)
        weekend = [d for d in self.dates if d.weekday() >= 5]
        if weekend:
            raise LeadLagError(f"{self.entity_id}: non-working day {weekend[0]} in aligned pair")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.t))):
            raise LeadLagError(f"{self.entity_id}: non-finite value in aligned pair")

    @property
    def n(self) -> int:
        return len(self.dates)

    def query_series(self, kind: SeriesKind = SeriesKind.QUERY_VOLUME) -> DailySeries:
        return DailySeries(self.entity_id, kind, self.dates, self.q)

    def trade_series(self) -> DailySeries:
        return DailySeries(self.entity_id, SeriesKind.TRADE_VOLUME, self.dates, self.t)

    def take(self, index) -> "AlignedPair":
        """Sub-pair on the given (sorted) row positions."""
        index = np.asarray(index, dtype=int)
        return AlignedPair(
            self.entity_id,
            [self.dates[i] for i in index],
            self.q[index],
            self.t[index],
            self.meta,
        )

    def equals(self, other: "AlignedPair") -> bool:
        return (
            self.entity_id == other.entity_id
            and self.dates == other.dates
            and np.array_equal(self.q, other.q)
            and np.array_equal(self.t, other.t)
        )


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Signed close-to-close price changes, dated by the later day."""

    entity_id: str
    dates: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", _frozen_array(self.values))
        if len(self.values) != len(self.dates):
            raise LeadLagError("dates and values must have equal length")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True, eq=False)
class VolatilityProxies:
    abs: np.ndarray
    pos: ReturnSeries
    neg: ReturnSeries
    dates: tuple[date, ...]


def align(q: DailySeries, t: DailySeries) -> tuple[AlignedPair, int]:
    """Restrict ``q`` to the calendar of ``t``.

    The trade series defines the working days; query dates outside it are
    dropped. Returns the pair and the number of dropped query dates.
    """
    if len(q) == 0 or len(t) == 0:
        raise EmptyIntersection("cannot align an empty series")
    q_index = {d: i for i, d in enumerate(q.dates)}
    shared = [(d, q_index[d], j) for j, d in enumerate(t.dates) if d in q_index]
    if len(shared) < 2:
        raise EmptyIntersection(
            f"{t.entity_id}: only {len(shared)} shared dates between query and trade series"
        )
    dates = [d for d, _, _ in shared]
    qi = np.array([i for _, i, _ in shared])
    ti = np.array([j for _, _, j in shared])
    pair = AlignedPair(t.entity_id, dates, q.values[qi], t.values[ti])
    return pair, len(q) - len(shared)


def price_returns(p: DailySeries) -> ReturnSeries:
    """Raw differences ``p[i+1] - p[i]``; not log returns."""
    if len(p) < 2:
        raise TooShort(f"{p.entity_id}: need at least 2 closing prices, got {len(p)}")
    return ReturnSeries(p.entity_id, p.dates[1:], np.diff(p.values))


def volatility_proxies(r: ReturnSeries) -> VolatilityProxies:
    """Split returns into |R|, the positive subsequence and the negative one.

    Zero returns only show up in the absolute series.
    """
    v = r.values
    pos = np.flatnonzero(v > 0)
    neg = np.flatnonzero(v < 0)
    return VolatilityProxies(
        abs=_frozen_array(np.abs(v)),
        pos=ReturnSeries(r.entity_id, [r.dates[i] for i in pos], v[pos]),
        neg=ReturnSeries(r.entity_id, [r.dates[i] for i in neg], v[neg]),
        dates=r.dates,
    )


def top_k_positions(values: np.ndarray, k: int) -> np.ndarray:
    """Positions of the ``k`` largest values; ties go to the earlier position."""
    order = np.lexsort((np.arange(len(values)), -np.asarray(values)))
    return np.sort(order[:k])


def drop_top_k(pair: AlignedPair, k: int, by: SeriesKind = SeriesKind.TRADE_VOLUME) -> AlignedPair:
    """Remove the ``k`` days with the largest trading volume from both series."""
    if by != SeriesKind.TRADE_VOLUME:
        raise LeadLagError("events can only be ranked by trading volume")
    if k < 0:
        raise LeadLagError("k must be non-negative")
    if k > pair.n - 2:
        raise KTooLarge(f"{pair.entity_id}: cannot drop {k} of {pair.n} days and keep two")
    if k == 0:
        return pair
    keep = np.ones(pair.n, dtype=bool)
    keep[top_k_positions(pair.t, k)] = False
    return pair.take(np.flatnonzero(keep))


def fraction_to_k(fraction: float, n: int) -> int:
    """``floor(fraction * n)``, robust to binary representation of the fraction."""
    return math.floor(round(fraction * n, 9))


def drop_top_fraction(pair: AlignedPair, fraction: float) -> AlignedPair:
    """Percentage variant of :func:`drop_top_k` (``k = floor(fraction * n)``)."""
    return drop_top_k(pair, fraction_to_k(fraction, pair.n))
