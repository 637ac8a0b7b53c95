from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from src.harness import suites
from src.harness.cli import main
from src.harness.report import CheckRecord, Report, load_report
from src.harness.suites import Check


def _write(path: Path, raw: dict) -> Path:
    path.write_text(json.dumps(raw), encoding="utf-8")
    return path


def _cheap_suite(ctx):
    yield Check("ok", "obstruction", lambda: 0.0, 1e-3)


def test_invalid_scenario_exits_with_config_code(tmp_path, capsys):
    path = _write(tmp_path / "bad.json", {"name": "x", "kind": "warp", "colour": 1})
    assert main(["verify", str(path)]) == 2
    err = capsys.readouterr().err
    assert "unknown key" in err
    assert "kind must be one of" in err


def test_missing_scenario_exits_with_config_code(tmp_path):
    assert main(["verify", str(tmp_path / "nope.json")]) == 2


def test_verify_prints_a_json_report(monkeypatch, tmp_path, capsys):
    monkeypatch.setitem(suites.SUITES, "flux_vs_c", _cheap_suite)
    path = _write(tmp_path / "cheap.json", {"name": "cheap", "kind": "flux_vs_c"})
    out = tmp_path / "report.json"
    assert main(["verify", str(path), "--json", "--seed", "3", "--output", str(out)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["passed"] is True
    assert [r["name"] for r in printed["records"]] == ["cheap/ok"]
    assert load_report(out).config_hash == printed["config_hash"]


def test_report_merge(tmp_path):
    good = Report.from_records([CheckRecord("a/ok", "flux-equals-c", 0.0, 1.0, True)], "h1", "a")
    bad = Report.from_records([CheckRecord("b/no", "obstruction", 2.0, 1.0, False)], "h2", "b")
    good.save(tmp_path / "a.json")
    bad.save(tmp_path / "b.json")
    merged = tmp_path / "merged.json"
    assert main(["report", "--merge", str(tmp_path / "a.json"), "--output", str(merged)]) == 0
    assert merged.exists()
    assert main(["report", "--merge", str(tmp_path / "a.json"), str(tmp_path / "b.json"), "--output", str(merged)]) == 1
    assert sorted(load_report(merged).records) == ["a/ok", "b/no"]


def test_reconstruct_identity_surface(tmp_path):
    path = _write(tmp_path / "id.json", {"name": "id", "kind": "main_theorem", "samples": 3, "hamiltonian": []})
    out = tmp_path / "id.csv"
    assert main(["reconstruct", str(path), "--export-csv", str(out)]) == 0
    with out.open("r", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert len(rows) == 4
    for row in rows[1:]:
        assert float(row[6]) == pytest.approx(-1.0, abs=1e-4)
        assert float(row[7]) == pytest.approx(0.0, abs=1e-4)
