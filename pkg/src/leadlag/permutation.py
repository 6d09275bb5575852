"""Cross-entity reshuffling tests.

Each null dataset pairs the query series of every entity with the trade
series of a different entity (a random derangement). The global test compares
the macro-average lag-0 correlation with its value on these datasets; the
per-entity scenarios read off one entity's re-paired correlation from the
same datasets.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import rng as _rng
from .errors import LeadLagError, TooFewEntities, ZeroVariance
from .numerics import pearson
from .series import AlignedPair

MIN_SHARED_DATES = 30


class Scenario(str, Enum):
    GLOBAL = "global"
    FIXED_T = "fixed-t"  # T_i kept, Q_i replaced by Q_j
    FIXED_Q = "fixed-q"  # Q_i kept, T_i replaced by T_j


@dataclass(frozen=True)
class NullSummary:
    min: float
    max: float
    mean: float
    p05: float
    p50: float
    p95: float

    @classmethod
    def of(cls, values: np.ndarray) -> "NullSummary":
        p05, p50, p95 = np.percentile(values, [5, 50, 95])
        return cls(float(values.min()), float(values.max()), float(values.mean()), float(p05), float(p50), float(p95))


@dataclass(frozen=True, eq=False)
class PermutationReport:
    scenario: Scenario
    n_permutations: int
    observed: float
    null_summary: NullSummary
    empirical_p: float
    target: str | None
    null_values: np.ndarray
    seed: int


def empirical_p(observed: float, null: np.ndarray) -> float:
    """``(1 + #{null >= observed}) / (N + 1)``; never zero."""
    return (1 + int(np.count_nonzero(null >= observed))) / (len(null) + 1)


def _r0_on_shared_dates(qp: AlignedPair, tp: AlignedPair) -> float:
    """Lag-0 correlation of ``qp``'s queries with ``tp``'s trades; NaN if unusable."""
    if qp.dates == tp.dates:
        q, t = qp.q, tp.t
    else:
        t_index = {d: i for i, d in enumerate(tp.dates)}
        rows = [(i, t_index[d]) for i, d in enumerate(qp.dates) if d in t_index]
        q = qp.q[[i for i, _ in rows]]
        t = tp.t[[j for _, j in rows]]
    # an entity's own pair is always usable; re-pairings need enough overlap
    if qp is not tp and len(q) < MIN_SHARED_DATES:
        return float("nan")
    try:
        return pearson(q, t)
    except ZeroVariance:
        return float("nan")


def correlation_matrix(pairs: Sequence[AlignedPair]) -> np.ndarray:
    """``R[i, j]`` = lag-0 correlation of Q_i with T_j (NaN where unusable)."""
    k = len(pairs)
    R = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            R[i, j] = _r0_on_shared_dates(pairs[i], pairs[j])
    return R


def draw_derangements(valid: np.ndarray, n_perm: int, gen: np.random.Generator, max_tries: int | None = None) -> np.ndarray:
    """``n_perm`` uniform random permutations with no fixed point.

    ``valid[i, j]`` marks usable (Q_i, T_j) pairings; permutations using an
    unusable pairing are rejected and redrawn like fixed points are.
    Row ``p`` maps entity i to the entity whose trades it is paired with.
    """
    k = valid.shape[0]
    allowed = valid.copy()
    np.fill_diagonal(allowed, False)
    max_tries = max_tries or 1000 * n_perm
    out = np.empty((n_perm, k), dtype=int)
    got = tries = 0
    idx = np.arange(k)
    while got < n_perm:
        tries += 1
        if tries > max_tries:
            raise LeadLagError("could not draw enough valid re-pairings")
        perm = gen.permutation(k)
        if allowed[idx, perm].all():
            out[got] = perm
            got += 1
    return out


def _sorted_pool(pairs: Sequence[AlignedPair]) -> list[AlignedPair]:
    pairs = sorted(pairs, key=lambda p: p.entity_id)
    ids = [p.entity_id for p in pairs]
    if len(set(ids)) != len(ids):
        raise LeadLagError("duplicate entity ids in pool")
    return pairs


def _datasets(pairs, n_perm: int, seed: int):
    R = correlation_matrix(pairs)
    if np.isnan(np.diag(R)).any():
        bad = [pairs[i].entity_id for i in np.flatnonzero(np.isnan(np.diag(R)))]
        raise ZeroVariance(f"observed correlation undefined for {bad}")
    perms = draw_derangements(~np.isnan(R), n_perm, _rng.stream(seed, "reshuffle"))
    return R, perms


def global_reshuffle_test(pairs: Sequence[AlignedPair], n_perm: int = 1000, seed: int = 0) -> PermutationReport:
    """Macro-average lag-0 correlation against re-paired datasets."""
    pairs = _sorted_pool(pairs)
    k = len(pairs)
    if k < 3:
        raise TooFewEntities(f"need at least 3 entities, got {k}")
    R, perms = _datasets(pairs, n_perm, seed)
    idx = np.arange(k)[None, :]
    # same reduction for both so identical inputs give bitwise-equal averages
    observed = float(R[idx, idx].mean(axis=1)[0])
    null = R[idx, perms].mean(axis=1)
    return PermutationReport(
        Scenario.GLOBAL, n_perm, observed, NullSummary.of(null), empirical_p(observed, null), None, null, seed
    )


def _entity_null(R: np.ndarray, perms: np.ndarray, i: int, scenario: Scenario) -> np.ndarray:
    if scenario is Scenario.FIXED_Q:
        return R[i, perms[:, i]]
    # entity j whose query series is paired with T_i, i.e. perm[j] == i
    return R[np.argmax(perms == i, axis=1), i]


def _entity_report(R, perms, i, scenario, target, seed) -> PermutationReport:
    null = _entity_null(R, perms, i, scenario)
    observed = float(R[i, i])
    return PermutationReport(
        scenario, len(perms), observed, NullSummary.of(null), empirical_p(observed, null), target, null, seed
    )


def per_entity_test(
    pairs: Sequence[AlignedPair],
    target: str,
    scenario: Scenario = Scenario.FIXED_T,
    n_perm: int = 1000,
    seed: int = 0,
) -> PermutationReport:
    """Compare one entity's own correlation with its re-paired correlations.

    FIXED_T keeps T_target and takes Q_j from the entity paired with it in
    each null dataset; FIXED_Q keeps Q_target and takes the T_j it was
    paired with. With the same seed, the null datasets are exactly those of
    :func:`global_reshuffle_test`.
    """
    scenario = Scenario(scenario)
    if scenario is Scenario.GLOBAL:
        raise LeadLagError("use global_reshuffle_test for the global scenario")
    pairs = _sorted_pool(pairs)
    if len(pairs) < 3:
        raise TooFewEntities(f"need the target plus at least 2 other entities, got {len(pairs)}")
    ids = [p.entity_id for p in pairs]
    if target not in ids:
        raise LeadLagError(f"unknown target entity {target!r}")
    R, perms = _datasets(pairs, n_perm, seed)
    return _entity_report(R, perms, ids.index(target), scenario, target, seed)


def per_entity_all(pairs: Sequence[AlignedPair], scenario: Scenario, n_perm: int = 1000, seed: int = 0) -> list[PermutationReport]:
    """Per-entity test for every entity, sharing one set of null datasets."""
    scenario = Scenario(scenario)
    if scenario is Scenario.GLOBAL:
        raise LeadLagError("use global_reshuffle_test for the global scenario")
    pairs = _sorted_pool(pairs)
    if len(pairs) < 3:
        raise TooFewEntities(f"need at least 3 entities, got {len(pairs)}")
    R, perms = _datasets(pairs, n_perm, seed)
    return [_entity_report(R, perms, i, scenario, p.entity_id, seed) for i, p in enumerate(pairs)]
