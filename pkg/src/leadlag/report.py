"""CSV tables, histograms and the JSON run report.

CSV values use fixed 4-decimal formatting; the JSON report keeps every float
at full precision. Entities are always written in ticker order, and keys are
sorted, so equal inputs and seeds give byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .anticipation import AnticipationReport
from .crosscorr import CcfTable
from .errors import ConstantSeries, LeadLagError
from .granger import Direction, GrangerSummary
from .permutation import PermutationReport
from .userstats import CountDistribution, Month

SCHEMA_VERSION = 1


def fmt4(x) -> str:
    if x is None or not math.isfinite(x):
        return "nan"
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _open(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


# -- manifest --------------------------------------------------------------


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _created() -> str | None:
    # Wall-clock time would break byte-identical reruns; honour the
    # reproducible-builds convention instead.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seeds: dict
    input_digests: dict = field(default_factory=dict)
    version: str = __version__
    created: str | None = field(default_factory=_created)

    @classmethod
    def for_files(cls, command: str, parameters: dict, seeds: dict, files: Iterable, root=None) -> "RunManifest":
        digests = {}
        for f in files:
            f = Path(f)
            key = f.relative_to(root).as_posix() if root is not None else f.name
            digests[key] = file_digest(f)
        return cls(command, parameters, seeds, dict(sorted(digests.items())))


# -- JSON ------------------------------------------------------------------


def to_jsonable(obj):
    """Plain JSON types for dataclasses, enums, numpy values and dates.

    Non-finite floats become ``None``.
    """
    if isinstance(obj, Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(to_jsonable(k)): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (date, datetime)):
        return obj.isoformat()
    return obj


def ccf_section(table: CcfTable | None, failures: Mapping[str, str] | None = None, extra: Mapping | None = None) -> dict:
    out = {"failures": dict(sorted((failures or {}).items()))}
    if table is not None:
        out.update(
            lags=list(table.lags),
            mean_r=to_jsonable(table.mean_r),
            count=table.count,
            per_entity={
                eid: {"r": to_jsonable(res.r), "n_overlap": list(res.n_overlap)}
                for eid, res in sorted(table.per_entity.items())
            },
        )
    if extra:
        out.update(to_jsonable(dict(extra)))
    return out


def granger_section(summaries: Sequence[tuple[str, GrangerSummary]]) -> list:
    out = []
    for dataset, s in summaries:
        out.append({
            "dataset": dataset,
            "lag_order": s.lag_order,
            "directions": {d.value: to_jsonable(ds) for d, ds in s.directions.items()},
            "results": to_jsonable(list(s.results)),
            "errors": dict(s.errors),
        })
    return out


def permutation_section(reports: Sequence[PermutationReport]) -> list:
    return [
        {
            "scenario": r.scenario.value,
            "target": r.target,
            "n_permutations": r.n_permutations,
            "observed": r.observed,
            "null_summary": to_jsonable(r.null_summary),
            "empirical_p": r.empirical_p,
            "seed": r.seed,
        }
        for r in reports
    ]


def anticipation_section(reports: Sequence[AnticipationReport], failures: Mapping[str, str] | None = None) -> dict:
    return {
        "reports": {r.entity_id: to_jsonable(r) for r in sorted(reports, key=lambda r: r.entity_id)},
        "failures": dict(sorted((failures or {}).items())),
    }


def emit_json_report(sections: Mapping, manifest: RunManifest, path) -> None:
    """Write one JSON document: schema version, manifest, and the given sections."""
    doc = {"schema_version": SCHEMA_VERSION, "manifest": to_jsonable(manifest)}
    for key, value in sections.items():
        if key in doc:
            raise LeadLagError(f"reserved report key {key!r}")
        doc[key] = to_jsonable(value)
    text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False)
    with _open(path) as fh:
        fh.write(text + "\n")


def load_schema() -> dict:
    from importlib import resources

    return json.loads(resources.files("leadlag.data").joinpath("report.schema.json").read_text("utf-8"))


# -- CSV tables ------------------------------------------------------------


def emit_ccf_table(table: CcfTable, path) -> None:
    """``ticker,r_-L,...,r_L`` per entity plus a closing ``AVERAGE`` row."""
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["ticker"] + [f"r_{d}" for d in table.lags])
        for eid, res in sorted(table.per_entity.items()):
            w.writerow([eid] + [fmt4(v) for v in res.r])
        w.writerow(["AVERAGE"] + [fmt4(v) for v in table.mean_r])


def drop_label(spec: str) -> str:
    return "r0_drop" + spec.replace("%", "pct")


def emit_ccf_drop_table(rows: Mapping[str, Mapping[str, float]], drops: Sequence[str], path) -> None:
    """Lag-0 correlation before and after removing the largest-volume days.

    ``rows`` maps ticker to ``{"r0": ..., "<drop spec>": ...}``. The
    ``AVERAGE`` row averages each column over tickers where it is defined.
    """
    cols = ["r0"] + list(drops)
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["ticker", "r0"] + [drop_label(d) for d in drops])
        for eid in sorted(rows):
            w.writerow([eid] + [fmt4(rows[eid].get(c)) for c in cols])
        avg = []
        for c in cols:
            vals = [rows[e][c] for e in rows if rows[e].get(c) is not None]
            avg.append(fmt4(float(np.mean(vals))) if vals else "nan")
        w.writerow(["AVERAGE"] + avg)


def emit_signed_returns(rows: Mapping[str, tuple[float, float, float]], path) -> None:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["ticker", "r_pos", "r_neg", "r_abs"])
        for eid in sorted(rows):
            w.writerow([eid] + [fmt4(v) for v in rows[eid]])
        if rows:
            w.writerow(["AVERAGE"] + [fmt4(v) for v in np.mean(np.array(list(rows.values())), axis=0)])


def emit_granger_summary(summaries: Sequence[tuple[str, GrangerSummary]], path) -> None:
    """One row per (dataset, lag, direction); ``avg_rss_reduction`` is a fraction."""
    if not summaries:
        raise LeadLagError("no Granger summaries to write")
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["dataset", "lag", "direction", "%p<5%", "%p<1%", "avg_rss_reduction"])
        for dataset, s in summaries:
            for d in Direction:
                if d in s.directions:
                    ds = s.directions[d]
                    w.writerow([dataset, s.lag_order, d.value, fmt4(ds.pct_p05), fmt4(ds.pct_p01), fmt4(ds.mean_rss_reduction)])


def emit_permutation_table(reports: Sequence[PermutationReport], path) -> None:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["scenario", "target", "observed", "null_min", "null_mean", "null_max", "empirical_p", "n_permutations"])
        for r in reports:
            s = r.null_summary
            w.writerow([r.scenario.value, r.target or "", fmt4(r.observed), fmt4(s.min), fmt4(s.mean), fmt4(s.max), fmt4(r.empirical_p), r.n_permutations])


def emit_anticipation_table(reports: Sequence[AnticipationReport], path) -> None:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow([
            "ticker", "t1_delta_qt", "t1_delta_tq", "t1_p_qt", "t1_p_tq",
            "t2_rss_qt", "t2_rss_tq", "t2_pct95_qt", "t2_pct95_tq", "t2_verdict",
            "t3_p_qt", "t3_p_tq",
        ])
        for r in sorted(reports, key=lambda r: r.entity_id):
            a, b, c = r.test1, r.test2, r.test3
            w.writerow([
                r.entity_id, fmt4(a.delta_qt), fmt4(a.delta_tq), fmt4(a.p_qt), fmt4(a.p_tq),
                fmt4(b.rss_qt), fmt4(b.rss_tq), fmt4(b.pct95_qt), fmt4(b.pct95_tq), b.verdict.value,
                fmt4(c.p_qt), fmt4(c.p_tq),
            ])


def emit_distribution(dist: CountDistribution, path) -> None:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["count", "mass"])
        for k, m in zip(dist.support, dist.mass):
            w.writerow([k, fmt4(m)])


def emit_fraction_series(series: Sequence[tuple[Month, float]], path) -> None:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["month", "fraction"])
        for m, f in series:
            w.writerow([f"{m.year:04d}-{m.month:02d}", fmt4(f)])


# -- histograms ------------------------------------------------------------


def histogram(values, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Counts of ``values / max(values)`` in ``n_bins`` equal bins on [0, 1].

    Bins are closed on the right, (a, b], with the first bin also taking 0.
    Returns ``(edges, counts)``.
    """
    v = np.asarray(values, dtype=float)
    if n_bins < 2:
        raise LeadLagError("n_bins must be at least 2")
    if v.size == 0 or np.all(v == v[0]):
        raise ConstantSeries("cannot rescale a constant series")
    peak = v.max()
    if peak <= 0:
        raise LeadLagError("histogram needs a positive maximum")
    scaled = v / peak
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.searchsorted(edges[1:], scaled, side="left"), 0, n_bins - 1)
    return edges, np.bincount(idx, minlength=n_bins)


def emit_histogram(values, n_bins: int, path) -> None:
    edges, counts = histogram(values, n_bins)
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([fmt4(lo), fmt4(hi), int(c)])
