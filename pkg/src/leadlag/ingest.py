"""Readers and writers for the on-disk formats, plus query-text matching.

Formats
-------
Daily series CSV
    ``date,value`` with ISO-8601 dates (query, user and volume series).
Financial CSV
    ``date,close,volume``.
Event log
    Tab-separated ``timestamp<TAB>user_id<TAB>ticker``, timestamps ISO-8601
    in UTC (written with a ``Z`` suffix).
Clean list
    One ticker per line; ``#`` starts a comment.

Files are UTF-8 with LF line endings; CRLF input is accepted.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import DuplicateDate, EmptyList, LeadLagError, NegativeValue, ParseError
from .series import AlignedPair, DailySeries, SeriesKind, align
from .userstats import QueryEvent

logger = logging.getLogger(__name__)

SERIES_HEADER = ["date", "value"]
FINANCIAL_HEADER = ["date", "close", "volume"]


def format_number(x: float) -> str:
    """Shortest repr that round-trips the double exactly."""
    return repr(float(x))


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [row for row in csv.reader(fh)]


def _parse_date(text: str, line: int) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(line, f"bad date {text!r}") from None


def _parse_value(text: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(line, f"bad number {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(line, f"non-finite number {text!r}")
    if v < 0:
        raise NegativeValue(line, v)
    return v


def read_series_csv(path, kind: SeriesKind, entity_id: str | None = None) -> DailySeries:
    """Read a daily series.

    ``date,value`` files yield their single column. ``date,close,volume``
    files yield the close column for ``CLOSE_PRICE`` and the volume column
    otherwise. Rows are sorted by date; duplicates are rejected.
    """
    kind = SeriesKind(kind)
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise ParseError(1, "empty file")
    header = [h.strip() for h in rows[0]]
    if header == SERIES_HEADER:
        col = 1
    elif header == FINANCIAL_HEADER:
        col = 1 if kind is SeriesKind.CLOSE_PRICE else 2
    else:
        raise ParseError(1, f"unexpected header {','.join(header)!r}")
    seen = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        d = _parse_date(row[0], lineno)
        if d in seen:
            raise DuplicateDate(lineno, d)
        seen[d] = _parse_value(row[col], lineno)
    dates = sorted(seen)
    return DailySeries(entity_id or path.stem.split("_")[0], kind, dates, [seen[d] for d in dates])


def write_series_csv(series: DailySeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for d, v in zip(series.dates, series.values):
            w.writerow([d.isoformat(), format_number(v)])


def read_financial_csv(path, entity_id: str | None = None) -> tuple[DailySeries, DailySeries]:
    """(closing prices, trading volumes) from a ``date,close,volume`` file."""
    return (
        read_series_csv(path, SeriesKind.CLOSE_PRICE, entity_id),
        read_series_csv(path, SeriesKind.TRADE_VOLUME, entity_id),
    )


def write_financial_csv(closes: DailySeries, volumes: DailySeries, path) -> None:
    if closes.dates != volumes.dates:
        raise LeadLagError("close and volume series must share dates")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FINANCIAL_HEADER)
        for d, c, v in zip(closes.dates, closes.values, volumes.values):
            w.writerow([d.isoformat(), format_number(c), format_number(v)])


# -- event logs ------------------------------------------------------------


def _format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S") + (
        f".{ts.microsecond:06d}Z" if ts.microsecond else "Z"
    )


def _parse_ts(text: str, line: int) -> datetime:
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(t)
    except ValueError:
        raise ParseError(line, f"bad timestamp {text!r}") from None


def read_event_log(path) -> list[QueryEvent]:
    events = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(lineno, f"expected 3 tab-separated fields, got {len(parts)}")
            ts, user, ticker = parts
            if not ticker:
                raise ParseError(lineno, "empty ticker")
            events.append(QueryEvent(_parse_ts(ts, lineno), user, ticker))
    return events


def write_event_log(events: Iterable[QueryEvent], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for e in events:
            fh.write(f"{_format_ts(e.timestamp)}\t{e.user_id}\t{e.ticker}\n")


# -- clean lists -----------------------------------------------------------


@dataclass(frozen=True)
class CleanList:
    tickers: frozenset[str]

    def __contains__(self, ticker: str) -> bool:
        return ticker.upper() in self.tickers

    def __len__(self) -> int:
        return len(self.tickers)


def read_clean_list(path) -> CleanList:
    seen = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if len(text.split()) != 1:
                raise ParseError(lineno, f"expected one ticker per line, got {text!r}")
            seen.append(text.upper())
    if not seen:
        raise EmptyList(f"{path}: no tickers")
    dupes = sorted(t for t, c in Counter(seen).items() if c > 1)
    if dupes:
        logger.warning("%s: duplicate tickers ignored: %s", path, ", ".join(dupes))
    return CleanList(frozenset(seen))


def write_clean_list(tickers: Iterable[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for t in sorted(set(tickers)):
            fh.write(f"{t.upper()}\n")


# -- query matching --------------------------------------------------------


class MatchMode(str, Enum):
    TICKER_WORD = "ticker-word"
    COMPANY_NAME_EXACT = "company-name-exact"


def load_suffixes(path=None) -> tuple[str, ...]:
    """Legal-ending list from ``path``, or the packaged default."""
    if path is None:
        text = resources.files("leadlag.data").joinpath("legal_suffixes.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            out.append(line)
    return tuple(out)


@dataclass(frozen=True)
class QueryMatcherConfig:
    mode: MatchMode = MatchMode.TICKER_WORD
    legal_suffixes: tuple[str, ...] = field(default_factory=load_suffixes)

    def __post_init__(self):
        object.__setattr__(self, "mode", MatchMode(self.mode))
        object.__setattr__(self, "legal_suffixes", tuple(s.lower() for s in self.legal_suffixes))


_TOKEN = re.compile(r"[A-Za-z0-9]+")


def _normalize_name(text: str, suffixes: tuple[str, ...]) -> str:
    words = text.lower().replace(",", " ").split()
    if len(words) > 1 and words[-1] in suffixes:
        words = words[:-1]
    return " ".join(words)


def match_query(text: str, ticker: str, company_name: str = "", cfg: QueryMatcherConfig | None = None) -> bool:
    """Does a raw query refer to the company?

    Ticker mode looks for the ticker as a whole ASCII-alphanumeric token,
    ignoring case. Company mode requires the whole query to equal the
    company name after lower-casing, dropping commas, collapsing whitespace
    and stripping one trailing legal ending from each side.
    """
    cfg = cfg or QueryMatcherConfig()
    if cfg.mode is MatchMode.TICKER_WORD:
        target = ticker.lower()
        return any(tok.lower() == target for tok in _TOKEN.findall(text))
    if not company_name:
        return False
    return _normalize_name(text, cfg.legal_suffixes) == _normalize_name(company_name, cfg.legal_suffixes)


class CountMode(str, Enum):
    QUERIES = "queries"
    DISTINCT_USERS = "distinct-users"


def aggregate_events_to_series(
    events: Iterable[QueryEvent],
    ticker: str,
    count: CountMode = CountMode.QUERIES,
    start: date | None = None,
    end: date | None = None,
) -> DailySeries:
    """Daily query (or distinct-user) counts for one ticker.

    Every calendar day from ``start`` to ``end`` (default: first and last
    event day) is present, with zero on days without events. Weekends are
    kept; aligning with a trade series removes them.
    """
    count = CountMode(count)
    per_day = defaultdict(list)
    for e in events:
        if e.ticker == ticker:
            per_day[e.day].append(e.user_id)
    if not per_day and (start is None or end is None):
        raise LeadLagError(f"no events for {ticker} and no explicit date range")
    start = start or min(per_day)
    end = end or max(per_day)
    days = [start + timedelta(days=i) for i in range((end - start).days + 1)]
    if count is CountMode.QUERIES:
        values = [len(per_day.get(d, ())) for d in days]
        kind = SeriesKind.QUERY_VOLUME
    else:
        values = [len(set(per_day.get(d, ()))) for d in days]
        kind = SeriesKind.USER_VOLUME
    return DailySeries(ticker, kind, days, values)


# -- data directories ------------------------------------------------------


@dataclass
class Pool:
    """Entities loaded from a data directory, sorted by ticker."""

    pairs: list[AlignedPair]
    queries: dict[str, DailySeries]
    closes: dict[str, DailySeries]
    failures: dict[str, str]
    files: list[Path]


def load_pool(data_dir, series: str = "query", clean_list: CleanList | None = None) -> Pool:
    """Load ``{TICKER}_{series}.csv`` + ``{TICKER}_finance.csv`` pairs from a directory.

    Tickers missing from ``clean_list`` are skipped. Tickers whose files are
    malformed or cannot be aligned are listed in ``failures``.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise LeadLagError(f"{data_dir} is not a directory")
    pairs, queries, closes, failures, files = [], {}, {}, {}, []
    kind = SeriesKind.USER_VOLUME if series == "users" else SeriesKind.QUERY_VOLUME
    for fin in sorted(data_dir.glob("*_finance.csv")):
        ticker = fin.name[: -len("_finance.csv")]
        if clean_list is not None and ticker not in clean_list:
            continue
        qpath = data_dir / f"{ticker}_{series}.csv"
        try:
            if not qpath.exists():
                raise LeadLagError(f"missing {qpath.name}")
            close, volume = read_financial_csv(fin, ticker)
            q = read_series_csv(qpath, kind, ticker)
            pair, _ = align(q, volume)
        except LeadLagError as exc:
            failures[ticker] = f"{type(exc).__name__}: {exc}"
            continue
        files += [fin, qpath]
        pairs.append(pair)
        queries[ticker] = q
        closes[ticker] = close
    if not pairs and not failures:
        raise LeadLagError(f"no *_finance.csv files found in {data_dir}")
    return Pool(pairs, queries, closes, failures, files)
