"""Synthetic data with known lead-lag structure, for validating the detectors."""

from __future__ import annotations

import calendar
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta, timezone
from typing import Sequence

import numpy as np

from . import rng as _rng
from .errors import LeadLagError, NonStationaryConfig
from .series import AlignedPair, DailySeries, SeriesKind
from .userstats import QueryEvent

EPOCH = date(2010, 7, 1)


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 1.0


@dataclass(frozen=True)
class StudentT:
    """Student-t innovations rescaled to standard deviation ``sigma`` (needs nu > 2)."""

    nu: float = 3.0
    sigma: float = 1.0


@dataclass(frozen=True)
class CoupledDgpConfig:
    """Bivariate VAR(1) for (T, Q) with optional shared market factor.

    ``T_t = ar_t T_{t-1} + beta_qt Q_{t-1} + L f_t + e_T``
    ``Q_t = beta_tq T_{t-1} + ar_q Q_{t-1} + L f_t + e_Q``

    ``innov_corr`` correlates e_T and e_Q on the same day; ``L`` is
    ``market_factor_loading``. ``positivity`` selects how raw values are made
    positive: ``"shift"`` adds ``1 - min`` (affine, so correlation and
    regression conclusions are unchanged), ``"exp"`` maps x to
    ``exp(x / scale)`` with ``scale = 2 * std(x)``, ``"none"`` keeps raw values.
    """

    n_days: int = 250
    ar_t: float = 0.5
    ar_q: float = 0.0
    beta_qt: float = 0.0
    beta_tq: float = 0.0
    innov_corr: float = 0.0
    noise: Gaussian | StudentT = field(default_factory=Gaussian)
    market_factor_loading: float = 0.0
    seed: int = 0
    entity_id: str = "SYN"
    positivity: str = "shift"
    burn_in: int = 200

    def companion(self) -> np.ndarray:
        return np.array([[self.ar_t, self.beta_qt], [self.beta_tq, self.ar_q]])

    def validate(self) -> None:
        radius = max(abs(np.linalg.eigvals(self.companion())))
        if radius >= 1:
            raise NonStationaryConfig(f"spectral radius {radius:.4f} >= 1")
        if not -1 <= self.innov_corr <= 1:
            raise LeadLagError("innov_corr must lie in [-1, 1]")
        if isinstance(self.noise, StudentT) and self.noise.nu <= 2:
            raise LeadLagError("Student-t innovations need nu > 2")
        if self.n_days < 2:
            raise LeadLagError("n_days must be at least 2")
        if self.positivity not in ("shift", "exp", "none"):
            raise LeadLagError(f"unknown positivity transform {self.positivity!r}")


def weekday_calendar(n: int, start: date = EPOCH) -> list[date]:
    """The first ``n`` Monday-to-Friday dates on or after ``start``."""
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def _innovations(noise, gen: np.random.Generator, size) -> np.ndarray:
    if isinstance(noise, Gaussian):
        return noise.sigma * gen.standard_normal(size)
    if isinstance(noise, StudentT):
        return noise.sigma * np.sqrt((noise.nu - 2) / noise.nu) * gen.standard_t(noise.nu, size)
    raise LeadLagError(f"unknown noise model {noise!r}")


def simulate_coupled(cfg: CoupledDgpConfig, factor: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Raw (q, t) after discarding ``cfg.burn_in`` steps."""
    cfg.validate()
    total = cfg.burn_in + cfg.n_days
    gen = _rng.stream(cfg.seed, cfg.entity_id, "dgp")
    z = _innovations(cfg.noise, gen, (total, 2))
    rho = cfg.innov_corr
    e_t = z[:, 0]
    e_q = rho * z[:, 0] + np.sqrt(1 - rho * rho) * z[:, 1]
    if cfg.market_factor_loading != 0:
        if factor is None:
            factor = _rng.stream(cfg.seed, cfg.entity_id, "factor").standard_normal(total)
        if len(factor) != total:
            raise LeadLagError(f"factor series must have {total} points")
        common = cfg.market_factor_loading * np.asarray(factor, dtype=float)
    else:
        common = np.zeros(total)
    t = np.empty(total)
    q = np.empty(total)
    t_prev = q_prev = 0.0
    for i in range(total):
        t_prev, q_prev = (
            cfg.ar_t * t_prev + cfg.beta_qt * q_prev + common[i] + e_t[i],
            cfg.beta_tq * t_prev + cfg.ar_q * q_prev + common[i] + e_q[i],
        )
        t[i] = t_prev
        q[i] = q_prev
    return q[cfg.burn_in :], t[cfg.burn_in :]


def make_positive(x: np.ndarray, mode: str) -> tuple[np.ndarray, dict]:
    """Apply a positivity transform; the returned dict is enough to invert it."""
    if mode == "none":
        return x.copy(), {"mode": "none"}
    if mode == "shift":
        offset = 1.0 - float(x.min())
        return x + offset, {"mode": "shift", "offset": offset}
    if mode == "exp":
        scale = 2.0 * float(x.std()) or 1.0
        return np.exp(x / scale), {"mode": "exp", "scale": scale}
    raise LeadLagError(f"unknown positivity transform {mode!r}")


def invert_positive(y: np.ndarray, meta: dict) -> np.ndarray:
    if meta["mode"] == "none":
        return np.asarray(y, dtype=float)
    if meta["mode"] == "shift":
        return np.asarray(y, dtype=float) - meta["offset"]
    return np.log(y) * meta["scale"]


def gen_coupled_pair(cfg: CoupledDgpConfig, factor: np.ndarray | None = None) -> AlignedPair:
    q_raw, t_raw = simulate_coupled(cfg, factor)
    q, q_meta = make_positive(q_raw, cfg.positivity)
    t, t_meta = make_positive(t_raw, cfg.positivity)
    meta = {"seed": cfg.seed, "q_transform": q_meta, "t_transform": t_meta}
    return AlignedPair(cfg.entity_id, weekday_calendar(cfg.n_days), q, t, meta)


def entity_ids(k: int) -> list[str]:
    return [f"E{i:03d}" for i in range(k)]


def gen_entity_pool(k: int, cfg: CoupledDgpConfig, market_strength: float = 0.0) -> list[AlignedPair]:
    """``k`` independently seeded pairs sharing one market factor series."""
    if k < 2:
        raise LeadLagError("an entity pool needs k >= 2")
    factor = _rng.stream(cfg.seed, "market-factor").standard_normal(cfg.burn_in + cfg.n_days)
    return [
        gen_coupled_pair(replace(cfg, entity_id=eid, market_factor_loading=market_strength), factor)
        for eid in entity_ids(k)
    ]


def gen_closes(dates: Sequence[date], entity_id: str, seed: int = 0, vol: float = 0.02) -> DailySeries:
    """Geometric random-walk closing prices on the given calendar."""
    gen = _rng.stream(seed, entity_id, "closes")
    path = 50.0 * np.exp(np.cumsum(vol * gen.standard_normal(len(dates))))
    return DailySeries(entity_id, SeriesKind.CLOSE_PRICE, dates, np.round(path, 4))


# -- query-event logs ------------------------------------------------------


@dataclass(frozen=True)
class UserLogConfig:
    """Synthetic search log.

    Each user is active in one month. With probability ``p_one_ticker`` the
    user searches a single ticker, otherwise 2..``max_tickers`` distinct ones.
    For each (user, ticker), the number of active days is 1 with probability
    ``p_one_day`` and otherwise 2..``max_days``; every active day carries one
    or more events.
    """

    n_users: int = 1000
    tickers: tuple[str, ...] = ("AAPL", "GOOG", "MSFT")
    p_one_ticker: float = 0.9
    p_one_day: float = 0.9
    months: int = 12
    seed: int = 0
    start: date = EPOCH
    max_tickers: int = 5
    max_days: int = 6

    def validate(self) -> None:
        for name in ("p_one_ticker", "p_one_day"):
            if not 0 <= getattr(self, name) <= 1:
                raise LeadLagError(f"{name} must lie in [0, 1]")
        if not self.tickers:
            raise LeadLagError("at least one ticker is required")
        if self.months < 1 or self.n_users < 0:
            raise LeadLagError("months must be >= 1 and n_users >= 0")


def _month_days(start: date, offset: int) -> list[date]:
    y, m = divmod(start.month - 1 + offset, 12)
    year, month = start.year + y, m + 1
    return [date(year, month, d) for d in range(1, calendar.monthrange(year, month)[1] + 1)]


def gen_user_log(cfg: UserLogConfig) -> list[QueryEvent]:
    cfg.validate()
    gen = _rng.stream(cfg.seed, "user-log")
    tickers = list(cfg.tickers)
    max_multi = min(cfg.max_tickers, len(tickers))
    events = []
    for u in range(cfg.n_users):
        user = f"u{u:06d}"
        days = _month_days(cfg.start, int(gen.integers(cfg.months)))
        if max_multi < 2 or gen.random() < cfg.p_one_ticker:
            n_tick = 1
        else:
            n_tick = int(gen.integers(2, max_multi + 1))
        for ti in gen.choice(len(tickers), size=n_tick, replace=False):
            n_days = 1 if gen.random() < cfg.p_one_day else int(gen.integers(2, cfg.max_days + 1))
            for di in np.sort(gen.choice(len(days), size=n_days, replace=False)):
                for _ in range(1 + int(gen.poisson(0.5))):
                    second = int(gen.integers(86400))
                    ts = datetime.combine(days[di], datetime.min.time(), timezone.utc) + timedelta(seconds=second)
                    events.append(QueryEvent(ts, user, tickers[ti]))
    events.sort(key=lambda e: (e.timestamp, e.user_id, e.ticker))
    return events
