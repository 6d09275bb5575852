"""Time-lagged cross-correlation between query and trading activity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import LeadLagError, MixedLagWindows, SeriesTooShort, TooFewPoints, ZeroVariance
from .numerics import pearson
from .series import AlignedPair, DailySeries, align, drop_top_k, price_returns, volatility_proxies

DEFAULT_MAX_LAG = 5


@dataclass(frozen=True, eq=False)
class CcfResult:
    entity_id: str
    lags: tuple[int, ...]
    r: np.ndarray
    n_overlap: tuple[int, ...]

    @property
    def max_lag(self) -> int:
        return self.lags[-1]

    def at(self, lag: int) -> float:
        return float(self.r[lag + self.max_lag])


@dataclass(frozen=True, eq=False)
class CcfTable:
    lags: tuple[int, ...]
    mean_r: np.ndarray
    per_entity: Mapping[str, CcfResult]
    count: int


def lagged_windows(q: np.ndarray, t: np.ndarray, lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Overlapping windows pairing ``q[i]`` with ``t[i + lag]``."""
    n = len(q)
    if lag >= 0:
        return q[: n - lag], t[lag:]
    return q[-lag:], t[: n + lag]


def ccf_arrays(q, t, max_lag: int = DEFAULT_MAX_LAG, entity_id: str = "") -> CcfResult:
    q = np.asarray(q, dtype=float)
    t = np.asarray(t, dtype=float)
    if max_lag < 0:
        raise LeadLagError("max_lag must be non-negative")
    n = len(q)
    if len(t) != n:
        raise LeadLagError("q and t differ in length")
    if n < 2 * max_lag + 2:
        raise SeriesTooShort(f"{entity_id}: n={n} is too short for max_lag={max_lag}")
    lags = tuple(range(-max_lag, max_lag + 1))
    r = np.empty(len(lags))
    for i, lag in enumerate(lags):
        a, b = lagged_windows(q, t, lag)
        try:
            r[i] = pearson(a, b)
        except ZeroVariance as exc:
            raise ZeroVariance(f"{entity_id}: constant window at lag {lag}", lag=lag) from exc
    r.setflags(write=False)
    return CcfResult(entity_id, lags, r, tuple(n - abs(d) for d in lags))


def ccf(pair: AlignedPair, max_lag: int = DEFAULT_MAX_LAG) -> CcfResult:
    """Cross-correlation r(lag) for lag in [-max_lag, max_lag].

    Positive lags correlate today's query volume with trading volume ``lag``
    days later. Each coefficient is a Pearson correlation over the
    ``n - |lag|`` overlapping days, with means and variances taken on that
    same window.
    """
    return ccf_arrays(pair.q, pair.t, max_lag, pair.entity_id)


def ccf_average(results: Iterable[CcfResult]) -> CcfTable:
    """Unweighted per-lag mean over entities, summed in entity-id order."""
    results = sorted(results, key=lambda res: res.entity_id)
    if not results:
        raise LeadLagError("no CCF results to average")
    lags = results[0].lags
    if any(res.lags != lags for res in results):
        raise MixedLagWindows("all CCF results must share the same lag window")
    ids = [res.entity_id for res in results]
    if len(set(ids)) != len(ids):
        raise LeadLagError("duplicate entity ids in CCF results")
    mean = np.mean(np.vstack([res.r for res in results]), axis=0)
    mean.setflags(write=False)
    return CcfTable(lags, mean, {res.entity_id: res for res in results}, len(results))


def ccf_after_drop(pair: AlignedPair, k: int) -> float:
    """Lag-0 correlation after removing the ``k`` highest-volume days."""
    dropped = drop_top_k(pair, k)
    return ccf_arrays(dropped.q, dropped.t, 0, pair.entity_id).at(0)


def _absolute_return_pair(q: DailySeries, closes: DailySeries) -> AlignedPair:
    if len(closes) < 3:
        raise TooFewPoints(f"{closes.entity_id}: need at least 3 closing prices")
    proxies = volatility_proxies(price_returns(closes))
    vol = DailySeries(closes.entity_id, "close_price", proxies.dates, proxies.abs)
    pair, _ = align(q, vol)
    return pair


def ccf_vs_volatility(q: DailySeries, closes: DailySeries, max_lag: int = DEFAULT_MAX_LAG) -> CcfResult:
    """CCF between query volume and absolute daily price change."""
    return ccf(_absolute_return_pair(q, closes), max_lag)


def _corr_on_dates(q: DailySeries, dates, values, label: str) -> float:
    q_index = {d: i for i, d in enumerate(q.dates)}
    rows = [(q_index[d], v) for d, v in zip(dates, values) if d in q_index]
    if len(rows) < 2:
        raise TooFewPoints(f"{q.entity_id}: fewer than 2 {label} returns on query dates")
    qi = np.array([i for i, _ in rows])
    vals = np.array([v for _, v in rows])
    try:
        return pearson(q.values[qi], vals)
    except ZeroVariance as exc:
        raise ZeroVariance(f"{q.entity_id}: constant {label} branch", lag=0) from exc


def signed_return_corr(q: DailySeries, closes: DailySeries) -> tuple[float, float, float]:
    """Lag-0 correlation of query volume with positive, negative and absolute returns.

    The signed branches are irregularly spaced, which is why only lag 0 is
    defined for them.
    """
    proxies = volatility_proxies(price_returns(closes))
    r_pos = _corr_on_dates(q, proxies.pos.dates, proxies.pos.values, "positive")
    r_neg = _corr_on_dates(q, proxies.neg.dates, proxies.neg.values, "negative")
    r_abs = _corr_on_dates(q, proxies.dates, proxies.abs, "absolute")
    return r_pos, r_neg, r_abs
