#!/usr/bin/env python
"""
Machine-readable verification reports.

A report is a list of named check records plus the scenario's config
hash. Records are keyed by name, so merging reports is a pure fold:
later records replace earlier ones with the same name, which makes the
merge associative and idempotent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from src.errors import ConfigError

SCHEMA_VERSION = "report/v1"
ARTIFACT_VERSION = "0.1.0"


@dataclass(frozen=True)
class CheckRecord:
    name: str
    anchor: str
    residual: float
    tolerance: float
    passed: bool
    wall_time: float = 0.0
    detail: str = ""

    def to_dict(self, timing: bool = False) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "name": self.name,
            "anchor": self.anchor,
            # NaN and inf are not JSON; failed checks carry null instead
            "residual": self.residual if math.isfinite(self.residual) else None,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "detail": self.detail,
        }
        if timing:
            out["wall_time"] = round(self.wall_time, 6)
        return out

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> CheckRecord:
        try:
            residual = raw["residual"]
            return cls(
                name=raw["name"],
                anchor=raw["anchor"],
                residual=float("nan") if residual is None else float(residual),
                tolerance=float(raw["tolerance"]),
                passed=bool(raw["passed"]),
                wall_time=float(raw.get("wall_time", 0.0)),
                detail=raw.get("detail", ""),
            )
        except KeyError as e:
            raise ConfigError("invalid check record", [f"missing key {e}"]) from e


@dataclass(frozen=True)
class Report:
    records: Dict[str, CheckRecord] = field(default_factory=dict)
    config_hash: str = ""
    scenario: str = ""
    version: str = ARTIFACT_VERSION

    @classmethod
    def from_records(cls, records: Iterable[CheckRecord], config_hash: str = "", scenario: str = "") -> Report:
        return cls(records={r.name: r for r in records}, config_hash=config_hash, scenario=scenario)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records.values())

    @property
    def failures(self) -> List[CheckRecord]:
        return [self.records[k] for k in sorted(self.records) if not self.records[k].passed]

    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self, timing: bool = False) -> Dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "version": self.version,
            "config_hash": self.config_hash,
            "scenario": self.scenario,
            "passed": self.passed,
            "records": [self.records[k].to_dict(timing) for k in sorted(self.records)],
        }

    def dumps(self, timing: bool = False) -> str:
        """Sorted, deterministic JSON; wall times only on request."""
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=2)

    def save(self, path: Path, timing: bool = False) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            f.write(self.dumps(timing) + "\n")

    def summary(self) -> str:
        total = len(self.records)
        failed = len(self.failures)
        return f"{self.scenario or 'report'}: {total - failed}/{total} checks passed"


def _join_hashes(a: str, b: str) -> str:
    parts = {p for p in a.split("+") + b.split("+") if p}
    return "+".join(sorted(parts))


def merge(a: Report, b: Report) -> Report:
    """Records of b override records of a with the same name."""
    records = dict(a.records)
    records.update(b.records)
    scenarios = "+".join(sorted({s for s in a.scenario.split("+") + b.scenario.split("+") if s}))
    return Report(records=records, config_hash=_join_hashes(a.config_hash, b.config_hash), scenario=scenarios)


def merge_reports(reports: Iterable[Report]) -> Report:
    return reduce(merge, reports, Report())


def load_report(path: Path) -> Report:
    if not path.exists():
        raise FileNotFoundError(f"Report file not found: {path}")
    with path.open("r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid report {path}", [str(e)]) from e
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"invalid report {path}", [f"schema {raw.get('schema')!r}, expected {SCHEMA_VERSION!r}"])
    try:
        records = [CheckRecord.from_dict(r) for r in raw["records"]]
        return Report.from_records(records, raw.get("config_hash", ""), raw.get("scenario", ""))
    except KeyError as e:
        raise ConfigError(f"invalid report {path}", [f"missing key {e}"]) from e


def anchors_covered(reports: Iterable[Report], anchors: Iterable[str]) -> Optional[List[str]]:
    """Anchors that no record in the reports carries; None when all are covered."""
    seen = {r.anchor for rep in reports for r in rep.records.values()}
    missing = [a for a in anchors if a not in seen]
    return missing or None
