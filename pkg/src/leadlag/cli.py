"""Command-line entry point: ``leadlag <subcommand> [options]``.

Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when some
tickers failed while the rest were processed (failures are listed in the
JSON report).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import replace
from functools import partial
from pathlib import Path

from . import __version__
from . import report as rpt
from .anticipation import anticipation_report
from .crosscorr import ccf, ccf_after_drop, ccf_average, ccf_vs_volatility, signed_return_corr
from .errors import LeadLagError
from .granger import granger_batch
from .ingest import (
    load_pool,
    read_clean_list,
    read_event_log,
    write_clean_list,
    write_event_log,
    write_financial_csv,
    write_series_csv,
)
from .permutation import Scenario, global_reshuffle_test, per_entity_all, per_entity_test
from .series import DailySeries, SeriesKind, fraction_to_k
from .synth import (
    CoupledDgpConfig,
    Gaussian,
    StudentT,
    UserLogConfig,
    gen_closes,
    gen_coupled_pair,
    gen_entity_pool,
    gen_user_log,
)
from .userstats import (
    Year,
    active_days_per_ticker,
    monthly_average_tickers_per_user,
    one_time_fraction_series,
    tickers_per_user,
)

logger = logging.getLogger("leadlag")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2
FAST_N_BOOT = 999


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a count >= 1, got {text}")
    return v


def _non_negative_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {text}")
    return v


def _top_drop(text: str) -> str:
    t = text.strip()
    try:
        if t.endswith("%"):
            v = float(t[:-1])
            ok = 0 <= v < 100
        else:
            ok = int(t) >= 0
    except ValueError:
        ok = False
    if not ok:
        raise argparse.ArgumentTypeError(f"expected a day count (5) or a percentage (5%), got {text!r}")
    return t


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--data", type=Path, help="directory with {TICKER}_finance.csv and {TICKER}_<series>.csv files")
    g.add_argument("--series", default="query", help="query-side file suffix, e.g. query or users (default: query)")
    g.add_argument("--clean-list", type=Path, help="file of tickers to keep, one per line")
    g.add_argument("--max-lag", type=_non_negative_int, default=5, help="largest CCF lag in working days (default: 5)")
    g.add_argument("--lag", dest="lag_order", type=_positive_int, action="append",
                   help="Granger lag order; repeat for several (default: 1)")
    g.add_argument("--n-perm", type=_positive_int, default=1000, help="re-paired datasets for permutation tests (default: 1000)")
    g.add_argument("--n-boot-test1", type=_positive_int, default=9999, help="bootstrap samples for Test 1 (default: 9999)")
    g.add_argument("--n-boot-test2", type=_positive_int, default=1000, help="bootstrap samples for Test 2 (default: 1000)")
    g.add_argument("--n-boot-test3", type=_positive_int, default=9999, help="bootstrap samples for Test 3 (default: 9999)")
    g.add_argument("--top-drop", type=_top_drop, action="append", default=[],
                   help="also report r(0) after removing the top K volume days (K or K%%); repeatable")
    g.add_argument("--seed", type=_non_negative_int, default=None,
                   help="master seed (default: $LEADLAG_SEED, else 0)")
    g.add_argument("--out", type=Path, default=Path("leadlag-out"), help="output directory (default: leadlag-out)")
    g.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1,
                   help="parallel worker processes (default: available cores); results do not depend on it")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="leadlag", description="Lead-lag analysis of query volume against trading volume.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("ccf", parents=[common], help="cross-correlation tables, top-K drops, volatility comparison").add_argument(
        "--histogram-bins", type=_positive_int, help="also write rescaled histograms of every series")

    g = sub.add_parser("granger", parents=[common], help="Granger-causality F-tests in both directions")
    g.add_argument("--dataset", help="dataset label in the summary (default: Q, or U for --series users)")

    p = sub.add_parser("permtest", parents=[common], help="cross-entity reshuffling tests")
    p.add_argument("--scenario", choices=[s.value for s in Scenario], default="global")
    p.add_argument("--target", help="ticker for fixed-t / fixed-q (default: every ticker)")

    a = sub.add_parser("anticipate", parents=[common], help="bootstrap anticipation Tests 1-3")
    a.add_argument("--fast", action="store_true", help=f"use {FAST_N_BOOT} bootstrap samples for every test")

    u = sub.add_parser("userstats", parents=[common], help="per-user search behaviour from an event log")
    u.add_argument("--events", type=Path, required=True, help="tab-separated event log")
    u.add_argument("--ticker", action="append", help="ticker for per-ticker statistics; repeatable (default: all)")
    u.add_argument("--year", type=int, help="restrict to one calendar year and add the monthly-average distribution")

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset in the input formats")
    s.add_argument("--entities", type=_positive_int, default=20)
    s.add_argument("--days", type=_positive_int, default=250)
    s.add_argument("--ar-t", type=float, default=0.5)
    s.add_argument("--ar-q", type=float, default=0.0)
    s.add_argument("--beta-qt", type=float, default=0.8, help="coupling Q_{t-1} -> T_t")
    s.add_argument("--beta-tq", type=float, default=0.0, help="coupling T_{t-1} -> Q_t")
    s.add_argument("--innov-corr", type=float, default=0.3, help="same-day innovation correlation")
    s.add_argument("--market", type=float, default=0.3, help="loading on the shared market factor")
    s.add_argument("--noise", choices=["gaussian", "student-t"], default="gaussian")
    s.add_argument("--nu", type=float, default=3.0, help="Student-t degrees of freedom")
    s.add_argument("--users", type=_non_negative_int, default=2000, help="users in the synthetic event log")
    return parser


@contextmanager
def _mapper(workers: int):
    if workers <= 1:
        yield map
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            yield ex.map


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("LEADLAG_SEED")
    if env is None:
        return 0
    try:
        value = int(env)
    except ValueError:
        raise LeadLagError(f"LEADLAG_SEED must be a non-negative integer, got {env!r}") from None
    if value < 0:
        raise LeadLagError(f"LEADLAG_SEED must be a non-negative integer, got {env!r}")
    return value


def _load(args):
    if args.data is None:
        raise LeadLagError("--data is required")
    clean = read_clean_list(args.clean_list) if args.clean_list else None
    pool = load_pool(args.data, args.series, clean)
    files = list(pool.files) + ([args.clean_list] if args.clean_list else [])
    return pool, files


def _manifest(args, parameters: dict, seeds: dict, files) -> rpt.RunManifest:
    digests = {}
    for f in files:
        f = Path(f)
        key = f.name if args.data is None or f.parent.resolve() != args.data.resolve() else f"data/{f.name}"
        digests[key] = rpt.file_digest(f)
    return rpt.RunManifest(args.command, parameters, seeds, dict(sorted(digests.items())))


# -- ccf -------------------------------------------------------------------


def _drop_k(spec: str, n: int) -> int:
    if spec.endswith("%"):
        return fraction_to_k(float(spec[:-1]) / 100.0, n)
    return int(spec)


def _ccf_job(pair, query, close, max_lag, drops):
    out = {"entity_id": pair.entity_id}
    try:
        out["ccf"] = ccf(pair, max_lag)
    except LeadLagError as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
        return out
    row = {"r0": out["ccf"].at(0)}
    for spec in drops:
        try:
            row[spec] = ccf_after_drop(pair, _drop_k(spec, pair.n))
        except LeadLagError as exc:
            row[spec] = None
            out.setdefault("drop_errors", {})[spec] = f"{type(exc).__name__}: {exc}"
    out["drops"] = row
    try:
        out["volatility"] = ccf_vs_volatility(query, close, max_lag)
        out["signed"] = signed_return_corr(query, close)
    except LeadLagError as exc:
        out["volatility_error"] = f"{type(exc).__name__}: {exc}"
    return out


def cmd_ccf(args) -> int:
    pool, files = _load(args)
    failures = dict(pool.failures)
    with _mapper(args.workers) as pmap:
        jobs = list(pmap(
            partial(_ccf_job, max_lag=args.max_lag, drops=args.top_drop),
            pool.pairs,
            [pool.queries[p.entity_id] for p in pool.pairs],
            [pool.closes[p.entity_id] for p in pool.pairs],
        ))
    results, drops, vol, signed, vol_failures = [], {}, [], {}, {}
    for job in jobs:
        eid = job["entity_id"]
        if "error" in job:
            failures[eid] = job["error"]
            continue
        results.append(job["ccf"])
        drops[eid] = job["drops"]
        if "volatility" in job:
            vol.append(job["volatility"])
            signed[eid] = job["signed"]
        else:
            vol_failures[eid] = job["volatility_error"]
    out = args.out
    table = ccf_average(results) if results else None
    vol_table = ccf_average(vol) if vol else None
    if table is not None:
        rpt.emit_ccf_table(table, out / "ccf.csv")
        if args.top_drop:
            rpt.emit_ccf_drop_table(drops, args.top_drop, out / "ccf_drop.csv")
    if vol_table is not None:
        rpt.emit_ccf_table(vol_table, out / "ccf_volatility.csv")
        rpt.emit_signed_returns(signed, out / "signed_returns.csv")
    if args.histogram_bins:
        for pair in pool.pairs:
            for label, values in (("query", pair.q), ("trade", pair.t)):
                try:
                    rpt.emit_histogram(values, args.histogram_bins, out / "histograms" / f"{pair.entity_id}_{label}.csv")
                except LeadLagError as exc:
                    logger.warning("%s %s histogram skipped: %s", pair.entity_id, label, exc)
    params = {"max_lag": args.max_lag, "top_drop": list(args.top_drop), "series": args.series,
              "histogram_bins": args.histogram_bins}
    extra = {
        "top_drop": {eid: {rpt.drop_label(k) if k != "r0" else k: v for k, v in row.items()} for eid, row in sorted(drops.items())},
        "volatility": rpt.ccf_section(vol_table, vol_failures),
        "signed_returns": {eid: dict(zip(("r_pos", "r_neg", "r_abs"), v)) for eid, v in sorted(signed.items())},
    }
    rpt.emit_json_report({"ccf": rpt.ccf_section(table, failures, extra)},
                         _manifest(args, params, {}, files), out / "ccf.json")
    return EXIT_PARTIAL if failures else EXIT_OK


# -- granger ---------------------------------------------------------------


def cmd_granger(args) -> int:
    pool, files = _load(args)
    lags = args.lag_order or [1]
    dataset = args.dataset or ("U" if args.series == "users" else "Q")
    summaries = []
    with _mapper(args.workers) as pmap:
        for p in sorted(set(lags)):
            s = granger_batch(pool.pairs, p, pmap) if pool.pairs else None
            if s is not None:
                summaries.append((dataset, s))
                rpt.emit_granger_summary([(dataset, s)], args.out / f"granger_lag{p}.csv")
    failures = dict(pool.failures)
    for _, s in summaries:
        failures.update({f"{k} (lag {s.lag_order})": v for k, v in s.errors.items()})
    params = {"lag_orders": sorted(set(lags)), "series": args.series, "dataset": dataset}
    rpt.emit_json_report({"granger": rpt.granger_section(summaries), "failures": dict(sorted(failures.items()))},
                         _manifest(args, params, {}, files), args.out / "granger.json")
    return EXIT_PARTIAL if failures else EXIT_OK


# -- permutation -----------------------------------------------------------


def cmd_permtest(args) -> int:
    pool, files = _load(args)
    seed = _seed(args)
    scenario = Scenario(args.scenario)
    if scenario is Scenario.GLOBAL:
        reports = [global_reshuffle_test(pool.pairs, args.n_perm, seed)]
    elif args.target:
        reports = [per_entity_test(pool.pairs, args.target, scenario, args.n_perm, seed)]
    else:
        reports = per_entity_all(pool.pairs, scenario, args.n_perm, seed)
    rpt.emit_permutation_table(reports, args.out / "permtest.csv")
    params = {"n_perm": args.n_perm, "scenario": scenario.value, "target": args.target, "series": args.series}
    rpt.emit_json_report({"permutation": rpt.permutation_section(reports), "failures": dict(sorted(pool.failures.items()))},
                         _manifest(args, params, {"permutation": seed}, files), args.out / "permtest.json")
    return EXIT_PARTIAL if pool.failures else EXIT_OK


# -- anticipation ----------------------------------------------------------


def _anticipate_job(pair, n1, n2, n3, seed):
    try:
        return anticipation_report(pair, n1, n2, n3, seed)
    except LeadLagError as exc:
        return f"{type(exc).__name__}: {exc}"


def cmd_anticipate(args) -> int:
    pool, files = _load(args)
    seed = _seed(args)
    n1, n2, n3 = (FAST_N_BOOT,) * 3 if args.fast else (args.n_boot_test1, args.n_boot_test2, args.n_boot_test3)
    with _mapper(args.workers) as pmap:
        outcomes = list(pmap(partial(_anticipate_job, n1=n1, n2=n2, n3=n3, seed=seed), pool.pairs))
    reports, failures = [], dict(pool.failures)
    for pair, out in zip(pool.pairs, outcomes):
        if isinstance(out, str):
            failures[pair.entity_id] = out
        else:
            reports.append(out)
    rpt.emit_anticipation_table(reports, args.out / "anticipation.csv")
    params = {"n_boot_test1": n1, "n_boot_test2": n2, "n_boot_test3": n3, "series": args.series}
    rpt.emit_json_report({"anticipation": rpt.anticipation_section(reports, failures)},
                         _manifest(args, params, {"anticipation": seed}, files), args.out / "anticipation.json")
    return EXIT_PARTIAL if failures else EXIT_OK


# -- userstats -------------------------------------------------------------


def cmd_userstats(args) -> int:
    events = read_event_log(args.events)
    window = Year(args.year) if args.year else None
    tickers = args.ticker or sorted({e.ticker for e in events})
    out = args.out
    section = {}
    dist = tickers_per_user(events, window)
    rpt.emit_distribution(dist, out / "tickers_per_user.csv")
    section["tickers_per_user"] = dist
    if args.year:
        avg = monthly_average_tickers_per_user(events, args.year)
        rpt.emit_distribution(avg, out / "tickers_per_user_monthly_avg.csv")
        section["tickers_per_user_monthly_avg"] = avg
    per_ticker, failures = {}, {}
    for t in tickers:
        try:
            days = active_days_per_ticker(events, t, window)
        except LeadLagError as exc:
            failures[t] = f"{type(exc).__name__}: {exc}"
            continue
        series = one_time_fraction_series(events if window is None else
                                          [e for e in events if window.contains(e.day)], t)
        rpt.emit_distribution(days, out / f"active_days_{t}.csv")
        rpt.emit_fraction_series(series, out / f"one_time_fraction_{t}.csv")
        per_ticker[t] = {
            "active_days": days,
            "one_time_fraction": [{"month": f"{m.year:04d}-{m.month:02d}", "fraction": f} for m, f in series],
        }
    section["per_ticker"] = per_ticker
    section["failures"] = failures
    params = {"year": args.year, "tickers": tickers}
    rpt.emit_json_report({"userstats": section}, _manifest(args, params, {}, [args.events]), out / "userstats.json")
    return EXIT_PARTIAL if failures else EXIT_OK


# -- synth -----------------------------------------------------------------


def cmd_synth(args) -> int:
    seed = _seed(args)
    noise = StudentT(args.nu) if args.noise == "student-t" else Gaussian()
    cfg = CoupledDgpConfig(
        n_days=args.days, ar_t=args.ar_t, ar_q=args.ar_q, beta_qt=args.beta_qt, beta_tq=args.beta_tq,
        innov_corr=args.innov_corr, noise=noise, seed=seed,
    )
    pool = gen_entity_pool(args.entities, cfg, args.market) if args.entities >= 2 else [
        gen_coupled_pair(replace(cfg, entity_id="E000"))]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    for pair in pool:
        # query logs also cover weekends; give them the series minimum so
        # alignment has something to drop
        q_dates, q_vals = [], []
        day_index = {d: i for i, d in enumerate(pair.dates)}
        d, last = pair.dates[0], pair.dates[-1]
        floor = float(pair.q.min())
        while d <= last:
            q_dates.append(d)
            q_vals.append(pair.q[day_index[d]] if d in day_index else floor)
            d = d.fromordinal(d.toordinal() + 1)
        write_series_csv(DailySeries(pair.entity_id, SeriesKind.QUERY_VOLUME, q_dates, q_vals),
                         out / f"{pair.entity_id}_{args.series}.csv")
        closes = gen_closes(pair.dates, pair.entity_id, seed)
        volume = DailySeries(pair.entity_id, SeriesKind.TRADE_VOLUME, pair.dates, pair.t)
        write_financial_csv(closes, volume, out / f"{pair.entity_id}_finance.csv")
    write_clean_list([p.entity_id for p in pool], out / "clean_list.txt")
    events = gen_user_log(UserLogConfig(n_users=args.users, tickers=tuple(p.entity_id for p in pool[:5]), seed=seed))
    write_event_log(events, out / "events.tsv")
    return EXIT_OK


COMMANDS = {
    "ccf": cmd_ccf,
    "granger": cmd_granger,
    "permtest": cmd_permtest,
    "anticipate": cmd_anticipate,
    "userstats": cmd_userstats,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (LeadLagError, OSError) as exc:
        print(f"leadlag {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
