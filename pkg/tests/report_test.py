from __future__ import annotations

import json
import math

import pytest

from src.errors import ConfigError
from src.harness.report import CheckRecord, Report, anchors_covered, load_report, merge, merge_reports


def _report(scenario: str, digest: str, *records: CheckRecord) -> Report:
    return Report.from_records(records, digest, scenario)


A = _report("a", "h1", CheckRecord("a/one", "flux-equals-c", 1e-5, 1e-3, True, 0.5))
B = _report("b", "h2", CheckRecord("b/two", "obstruction", math.nan, 1e-3, False, 0.1, "boom"))
C = _report("c", "h3", CheckRecord("a/one", "flux-equals-c", 2e-5, 1e-3, True))


def test_merge_is_associative():
    left = merge(merge(A, B), C)
    right = merge(A, merge(B, C))
    assert left.to_dict() == right.to_dict()
    assert left.records["a/one"].residual == 2e-5


def test_merge_is_idempotent():
    once = merge(A, B)
    assert merge(once, once).to_dict() == once.to_dict()
    assert merge_reports([A, A]).to_dict() == merge_reports([A]).to_dict()


def test_merged_metadata():
    merged = merge_reports([B, A])
    assert merged.scenario == "a+b"
    assert merged.config_hash == "h1+h2"
    assert not merged.passed
    assert [r.name for r in merged.failures] == ["b/two"]
    assert merged.exit_code() == 1
    assert merged.summary() == "a+b: 1/2 checks passed"


def test_dumps_is_deterministic_and_timing_is_opt_in():
    merged = merge(A, B)
    assert merged.dumps() == merge(A, B).dumps()
    raw = json.loads(merged.dumps())
    assert all("wall_time" not in r for r in raw["records"])
    assert [r["name"] for r in raw["records"]] == ["a/one", "b/two"]
    assert raw["records"][1]["residual"] is None
    timed = json.loads(merged.dumps(timing=True))
    assert timed["records"][0]["wall_time"] == 0.5


def test_empty_report_passes():
    assert Report().passed
    assert Report().exit_code() == 0


def test_save_and_load(tmp_path):
    path = tmp_path / "out" / "report.json"
    merged = merge(A, B)
    merged.save(path)
    loaded = load_report(path)
    assert loaded.to_dict() == merged.to_dict()
    assert math.isnan(loaded.records["b/two"].residual)


def test_load_report_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_report(tmp_path / "missing.json")
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"schema": "other", "records": []}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_report(wrong)
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({"schema": "report/v1", "records": [{"name": "x"}]}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_report(broken)


def test_anchor_coverage_of_reports():
    assert anchors_covered([A, B], ["flux-equals-c", "obstruction"]) is None
    assert anchors_covered([A], ["flux-equals-c", "obstruction", "btilde"]) == ["obstruction", "btilde"]
