"""Bivariate Granger-causality F-test between query and trading volume."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import LeadLagError, SeriesTooShort
from .numerics import f_sf, ols
from .series import AlignedPair


class Direction(str, Enum):
    """``Q_TO_T``: null hypothesis "Q does not Granger-cause T"."""

    Q_TO_T = "Q->T"
    T_TO_Q = "T->Q"


@dataclass(frozen=True)
class GrangerResult:
    entity_id: str
    direction: Direction
    lag_order: int
    f_stat: float
    p_value: float
    rss_restricted: float
    rss_unrestricted: float
    rss_reduction: float
    df_num: int
    df_den: int


def lag_columns(x: np.ndarray, p: int) -> list[np.ndarray]:
    """Columns x_{t-1}, ..., x_{t-p} for rows t = p .. n-1."""
    n = len(x)
    return [x[p - j : n - j] for j in range(1, p + 1)]


def granger_test(pair: AlignedPair, direction: Direction = Direction.Q_TO_T, p: int = 1) -> GrangerResult:
    """F-test of whether lags of the cause improve an AR(p) model of the effect.

    The first ``p`` rows lack a full lag history and are dropped, so both
    models are fit on the same ``n - p`` rows. Degrees of freedom are
    ``(p, n - p - 2p - 1)``.
    """
    direction = Direction(direction)
    if p < 1:
        raise LeadLagError("lag order must be at least 1")
    n = pair.n
    if n <= 2 * p + 2:
        raise SeriesTooShort(f"{pair.entity_id}: n={n} too short for lag order {p}")
    cause, effect = (pair.q, pair.t) if direction is Direction.Q_TO_T else (pair.t, pair.q)
    y = effect[p:]
    own = lag_columns(effect, p)
    restricted = ols(own, y)
    unrestricted = ols(own + lag_columns(cause, p), y)
    n_eff = n - p
    df_den = n_eff - 2 * p - 1
    if df_den < 1:
        raise SeriesTooShort(f"{pair.entity_id}: no residual degrees of freedom")
    rss_r, rss_u = restricted.rss, unrestricted.rss
    if rss_u == 0.0:
        f_stat, p_value = float("inf"), 0.0
    else:
        f_stat = max(0.0, ((rss_r - rss_u) / p) / (rss_u / df_den))
        p_value = f_sf(f_stat, p, df_den)
    reduction = 1.0 - rss_u / rss_r if rss_r > 0 else 0.0
    return GrangerResult(
        pair.entity_id, direction, p, f_stat, p_value, rss_r, rss_u, reduction, p, df_den
    )


@dataclass(frozen=True)
class DirectionSummary:
    direction: Direction
    n_tested: int
    pct_p05: float
    pct_p01: float
    mean_rss_reduction: float


@dataclass(frozen=True)
class GrangerSummary:
    lag_order: int
    directions: dict[Direction, DirectionSummary]
    results: tuple[GrangerResult, ...]
    errors: dict[str, str] = field(default_factory=dict)


def _test_both(pair: AlignedPair, p: int):
    try:
        return [granger_test(pair, d, p) for d in Direction]
    except LeadLagError as exc:
        return f"{type(exc).__name__}: {exc}"


def summarize(results: Sequence[GrangerResult], lag_order: int, errors: dict[str, str] | None = None) -> GrangerSummary:
    """Per-direction rejection percentages and mean RSS reduction."""
    results = tuple(sorted(results, key=lambda r: (r.entity_id, r.direction.value)))
    directions = {}
    for d in Direction:
        rs = [r for r in results if r.direction is d]
        if rs:
            pv = np.array([r.p_value for r in rs])
            directions[d] = DirectionSummary(
                d,
                len(rs),
                100.0 * float(np.mean(pv < 0.05)),
                100.0 * float(np.mean(pv < 0.01)),
                float(np.mean([r.rss_reduction for r in rs])),
            )
    return GrangerSummary(lag_order, directions, results, dict(sorted((errors or {}).items())))


def granger_batch(pairs: Sequence[AlignedPair], p: int = 1, mapper=map) -> GrangerSummary:
    """Run both directions for every pair; failing entities are reported, not raised.

    ``mapper`` is any order-preserving map (builtin ``map`` or an executor's).
    """
    if not pairs:
        raise LeadLagError("granger_batch needs at least one pair")
    pairs = sorted(pairs, key=lambda pr: pr.entity_id)
    outcomes = list(mapper(_test_both, pairs, [p] * len(pairs)))
    results, errors = [], {}
    for pair, out in zip(pairs, outcomes):
        if isinstance(out, str):
            errors[pair.entity_id] = out
        else:
            results.extend(out)
    return summarize(results, p, errors)
