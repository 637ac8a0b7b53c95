from __future__ import annotations

import json
from pathlib import Path

import pytest

from src.errors import ConfigError
from src.harness.scenario import DEFAULT_TOLERANCES, Scenario, config_hash, load_scenario, parse_scenario

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "data" / "scenarios"


def _write(path: Path, raw: dict) -> Path:
    path.write_text(json.dumps(raw), encoding="utf-8")
    return path


def test_minimal_scenario_takes_defaults():
    scenario = parse_scenario({"name": "x", "kind": "flux_vs_c"})
    assert (scenario.seed, scenario.mesh_n, scenario.steps, scenario.samples) == (7, 50, 256, 8)
    assert scenario.hamiltonian == "random"
    assert scenario.flux_target is None
    assert scenario.tolerance("flux_c") == DEFAULT_TOLERANCES["flux_c"]


def test_explicit_values_are_kept():
    scenario = parse_scenario(
        {
            "name": "x",
            "kind": "obstruction",
            "seed": 3,
            "tolerances": {"lattice": 0.5},
            "hamiltonian": [{"centre": [0.0, 1.0], "radius": 0.5, "amplitude": 0.2}],
            "flux_target": [1, 0, 0, 0.5],
        }
    )
    assert scenario.tolerance("lattice") == 0.5
    assert scenario.flux_target == (1.0, 0.0, 0.0, 0.5)
    assert scenario.seed == 3


def test_empty_hamiltonian_list_is_valid():
    assert parse_scenario({"name": "id", "kind": "main_theorem", "hamiltonian": []}).hamiltonian == []


@pytest.mark.parametrize(
    "raw, fragment",
    [
        ({"name": "x", "kind": "flux_vs_c", "colour": 1}, "unknown key"),
        ({"kind": "flux_vs_c"}, "missing key 'name'"),
        ({"name": "x", "kind": "warp"}, "kind must be one of"),
        ({"name": "x", "kind": "flux_vs_c", "seed": -1}, "'seed'"),
        ({"name": "x", "kind": "flux_vs_c", "steps": 0}, "positive"),
        ({"name": "x", "kind": "flux_vs_c", "tolerances": {"warp": 1.0}}, "unknown tolerance"),
        ({"name": "x", "kind": "flux_vs_c", "tolerances": {"flux_c": 0}}, "positive number"),
        ({"name": "x", "kind": "flux_vs_c", "hamiltonian": [{"centre": [0, 1]}]}, "'hamiltonian'"),
        ({"name": "x", "kind": "flux_vs_c", "flux_target": [1, 2]}, "'flux_target'"),
        ({"name": "x", "kind": "suite"}, "non-empty 'include'"),
    ],
)
def test_invalid_scenarios_are_diagnosed(raw, fragment):
    with pytest.raises(ConfigError) as info:
        parse_scenario(raw, origin="test.json")
    assert any(fragment in line and line.startswith("test.json") for line in info.value.diagnostics)


def test_every_problem_is_reported_at_once():
    with pytest.raises(ConfigError) as info:
        parse_scenario({"kind": "warp", "seed": "x"})
    assert len(info.value.diagnostics) == 3


def test_includes_need_a_file():
    with pytest.raises(ConfigError):
        parse_scenario({"name": "all", "include": ["a.json"]})


def test_load_scenario_resolves_includes(tmp_path):
    _write(tmp_path / "a.json", {"name": "a", "kind": "flux_vs_c"})
    _write(tmp_path / "b.json", {"name": "b", "kind": "obstruction", "seed": 2})
    scenario = load_scenario(_write(tmp_path / "all.json", {"name": "all", "include": ["a.json", "b.json"]}))
    assert scenario.kind == "suite"
    assert [c.name for c in scenario.children] == ["a", "b"]
    assert scenario.children[1].seed == 2
    assert scenario.source == str(tmp_path / "all.json")


def test_nested_includes_are_rejected(tmp_path):
    _write(tmp_path / "inner.json", {"name": "inner", "include": ["a.json"]})
    _write(tmp_path / "a.json", {"name": "a", "kind": "flux_vs_c"})
    path = _write(tmp_path / "outer.json", {"name": "outer", "include": ["inner.json"]})
    with pytest.raises(ConfigError) as info:
        load_scenario(path)
    assert any("nested include" in line for line in info.value.diagnostics)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_scenario(bad)
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_scenario(listed)


def test_shipped_scenarios_load():
    suite = load_scenario(SCENARIO_DIR / "all.json")
    assert {c.kind for c in suite.children} == {
        "geometry_sanity",
        "flux_vs_c",
        "composition",
        "infinitesimal",
        "main_theorem",
        "obstruction",
    }
    assert load_scenario(SCENARIO_DIR / "identity.json").hamiltonian == []


def test_overrides_reach_children():
    child = Scenario(name="c", kind="flux_vs_c")
    parent = Scenario(name="p", kind="suite", children=(child,))
    assert parent.with_overrides(seed=None, steps=None) is parent
    changed = parent.with_overrides(seed=11, steps=None)
    assert changed.seed == 11
    assert changed.children[0].seed == 11
    assert changed.children[0].steps == child.steps


def test_config_hash_is_stable_and_sensitive():
    a = parse_scenario({"name": "x", "kind": "flux_vs_c"})
    b = parse_scenario({"name": "x", "kind": "flux_vs_c", "seed": 7})
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    assert config_hash(a) != config_hash(a.with_overrides(seed=8))
    loose = parse_scenario({"name": "x", "kind": "flux_vs_c", "tolerances": {"flux_c": 0.5}})
    assert config_hash(a) != config_hash(loose)
