import csv
import json

import jsonschema
import numpy as np
import pytest

from leadlag.anticipation import anticipation_report
from leadlag.crosscorr import ccf, ccf_average
from leadlag.errors import ConstantSeries
from leadlag.granger import Direction, granger_batch
from leadlag.permutation import global_reshuffle_test
from leadlag.report import (
    RunManifest,
    anticipation_section,
    ccf_section,
    emit_ccf_drop_table,
    emit_ccf_table,
    emit_granger_summary,
    emit_histogram,
    emit_json_report,
    fmt4,
    granger_section,
    histogram,
    load_schema,
    permutation_section,
)
from leadlag.synth import CoupledDgpConfig, StudentT, gen_coupled_pair, gen_entity_pool, simulate_coupled


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def manifest(**kw):
    return RunManifest("test", {"max_lag": 5}, {"master": 0}, **kw)


def test_fmt4():
    assert fmt4(0.123456) == "0.1235"
    assert fmt4(-0.00001) == "0.0000"
    assert fmt4(float("nan")) == "nan" and fmt4(None) == "nan"


def test_histogram_hand_binning():
    edges, counts = histogram([1, 2, 4], 2)
    np.testing.assert_array_equal(edges, [0, 0.5, 1])
    np.testing.assert_array_equal(counts, [2, 1])
    with pytest.raises(ConstantSeries):
        histogram([3, 3, 3], 4)


def test_histogram_conservation_and_fat_tail(tmp_path):
    cfg = CoupledDgpConfig(n_days=5000, ar_t=0.0, noise=StudentT(3.0), seed=1)
    q, _ = simulate_coupled(cfg)
    v = np.abs(q)
    edges, counts = histogram(v, 20)
    assert counts.sum() == len(v)
    assert counts[-1] >= 1
    assert counts[:10].sum() > len(v) / 2
    emit_histogram(v, 20, tmp_path / "h.csv")
    r = rows(tmp_path / "h.csv")
    assert r[0] == ["bin_left", "bin_right", "count"]
    assert sum(int(x[2]) for x in r[1:]) == len(v)


def test_ccf_table_single_ticker(tmp_path):
    table = ccf_average([ccf(gen_coupled_pair(CoupledDgpConfig(seed=1, entity_id="ONE")))])
    emit_ccf_table(table, tmp_path / "ccf.csv")
    r = rows(tmp_path / "ccf.csv")
    assert len(r) == 3 and len(r[0]) == 12
    assert r[0][0] == "ticker" and r[0][1] == "r_-5" and r[0][-1] == "r_5"
    assert r[1][1:] == r[2][1:] and r[2][0] == "AVERAGE"


def test_ccf_table_average_recomputed(tmp_path):
    pairs = gen_entity_pool(12, CoupledDgpConfig(beta_qt=0.6, seed=2), 0.2)
    table = ccf_average([ccf(p) for p in pairs])
    emit_ccf_table(table, tmp_path / "ccf.csv")
    r = rows(tmp_path / "ccf.csv")
    avg = np.array([float(x) for x in r[-1][1:]])
    np.testing.assert_allclose(avg, table.mean_r, atol=5e-5)
    per = np.array([[float(x) for x in row[1:]] for row in r[1:-1]])
    np.testing.assert_allclose(per.mean(axis=0), avg, atol=1e-4)


def test_drop_table_columns(tmp_path):
    emit_ccf_drop_table({"B": {"r0": 0.5, "5": 0.3, "10": 0.2}, "A": {"r0": 0.7, "5": 0.6, "10": None}}, ["5", "10"], tmp_path / "d.csv")
    r = rows(tmp_path / "d.csv")
    assert r[0] == ["ticker", "r0", "r0_drop5", "r0_drop10"]
    assert [x[0] for x in r[1:]] == ["A", "B", "AVERAGE"]
    assert r[1][3] == "nan" and r[3][3] == "0.2000"


def test_granger_summary_rows(tmp_path):
    pairs = gen_entity_pool(6, CoupledDgpConfig(beta_qt=0.8, seed=3), 0.0)
    s = granger_batch(pairs, 1)
    emit_granger_summary([("Q", s), ("U", s)], tmp_path / "g.csv")
    r = rows(tmp_path / "g.csv")
    assert r[0] == ["dataset", "lag", "direction", "%p<5%", "%p<1%", "avg_rss_reduction"]
    assert [(x[0], x[2]) for x in r[1:]] == [("Q", "Q->T"), ("Q", "T->Q"), ("U", "Q->T"), ("U", "T->Q")]
    assert float(r[1][3]) == pytest.approx(s.directions[Direction.Q_TO_T].pct_p05, abs=5e-5)


def test_granger_summary_one_entity(tmp_path):
    s = granger_batch([gen_coupled_pair(CoupledDgpConfig(beta_qt=0.8, seed=4))], 1)
    emit_granger_summary([("Q", s)], tmp_path / "g.csv")
    for row in rows(tmp_path / "g.csv")[1:]:
        assert row[3] in ("0.0000", "100.0000") and row[4] in ("0.0000", "100.0000")


def test_manifest_only_document(tmp_path, monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    path = tmp_path / "r.json"
    emit_json_report({}, manifest(), path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"schema_version", "manifest"}
    assert doc["manifest"]["created"] is None
    jsonschema.validate(doc, load_schema())
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    emit_json_report({}, manifest(), path)
    assert json.loads(path.read_text())["manifest"]["created"] == "1970-01-01T00:00:00Z"


def full_sections():
    pairs = gen_entity_pool(5, CoupledDgpConfig(beta_qt=0.6, innov_corr=0.4, seed=5), 0.2)
    table = ccf_average([ccf(p) for p in pairs])
    return {
        "ccf": ccf_section(table, {"BAD": "ZeroVariance: constant"}),
        "granger": granger_section([("Q", granger_batch(pairs, 1))]),
        "permutation": permutation_section([global_reshuffle_test(pairs, 50, 1)]),
        "anticipation": anticipation_section([anticipation_report(p, 49, 49, 49, 1) for p in pairs[:2]]),
    }, table


def test_full_report_validates_and_round_trips(tmp_path):
    sections, table = full_sections()
    path = tmp_path / "r.json"
    emit_json_report(sections, manifest(), path)
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, load_schema())
    # floats survive exactly
    assert doc["ccf"]["mean_r"] == table.mean_r.tolist()
    for eid, res in table.per_entity.items():
        assert doc["ccf"]["per_entity"][eid]["r"] == res.r.tolist()
    # invariants re-checked on the parsed document
    for rep in doc["anticipation"]["reports"].values():
        n = rep["test1"]["n_boot"]
        assert 1 / (n + 1) <= rep["test1"]["p_qt"] <= 1
    assert 0 < doc["permutation"][0]["empirical_p"] <= 1


def test_report_bytes_deterministic(tmp_path, monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    emit_json_report(full_sections()[0], manifest(), a)
    emit_json_report(full_sections()[0], manifest(), b)
    assert a.read_bytes() == b.read_bytes()


def test_schema_rejects_bad_p_value(tmp_path):
    sections, _ = full_sections()
    path = tmp_path / "r.json"
    emit_json_report(sections, manifest(), path)
    doc = json.loads(path.read_text())
    doc["granger"][0]["results"][0]["p_value"] = 1.5
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, load_schema())
