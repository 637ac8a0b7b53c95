#!/usr/bin/env python
"""
Scenario files: flat JSON objects naming a check suite and its sizes.

Typical usage:
    scenario = load_scenario(Path("data/scenarios/flux_vs_c.json"))
    scenario = scenario.with_overrides(seed=11)
    print(config_hash(scenario))
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from src.errors import ConfigError

logger = logging.getLogger(__name__)

KINDS = (
    "flux_vs_c",
    "composition",
    "infinitesimal",
    "main_theorem",
    "obstruction",
    "geometry_sanity",
    "suite",
)
ALLOWED_KEYS = frozenset(
    {"name", "kind", "seed", "mesh_n", "steps", "samples", "tolerances", "hamiltonian", "flux_target", "include", "flows"}
)

DEFAULT_TOLERANCES: Dict[str, float] = {
    # closed-form curvature of the bi-invariant metric, round-off only
    "curvature": 1e-6,
    # closed timelike geodesic length, adaptive quadrature of a constant, against pi and half the turning angle
    "geodesic_length": 1e-9,
    # membership of moved geodesic points, products of three matrices
    "geodesic_membership": 1e-7,
    # relation word and side pairings, products of 8 matrices
    "group": 1e-9,
    # quadrature of the octagon area against 4 pi
    "area": 1e-8,
    # d omega = Omega_h: FD exterior derivative (order 2, Richardson) of an analytic form
    "connection": 1e-6,
    # equivariance of invariant fields after reduction
    "equivariance": 1e-8,
    # harmonic representative periods: exact Klein-model integrals of a mesh cochain
    "harmonic": 1e-6,
    # Flux and C mod 2 pi: RK4 at 256 steps, FD section derivatives at 1e-4, 16 arcs of GL8
    "flux_c": 1e-3,
    # C additivity under composition, same error budget as flux_c
    "composition": 1e-3,
    # d/dt eta against Omega_h(X, .): central difference in t at dt=1e-3 (order 2)
    "infinitesimal": 1e-3,
    # Hamiltonian flux: Gauss-Legendre in t on an exact form
    # Omega_h(X_H, .) against dH, both from the same analytic differential
    "contraction": 1e-9,
    "hamiltonian_flux": 1e-5,
    # flux of a collar-class flow against its class
    "class_flux": 1e-4,
    # unreduced eta periods against 2 pi Z
    "lattice": 1e-3,
    # eta of the trivialized section, nested FD at 1e-4
    "eta_zero": 1e-4,
    # d^nabla of the trivialized section, FD of an FD section
    "codazzi": 1e-3,
    # the Codazzi and connection routes to eta, nested FD at 1e-4
    "eta_routes": 1e-4,
    # sigma(x)(F(x)) = x and d sigma o dF = -b, bounded by the 1e-6 frame tolerance times the jet scale
    "reconstruction": 1e-5,
    # tensor-b and self-adjointness for maps with an exact b_L
    "minimal_lagrangian": 1e-4,
    # Newton inversion of the left projection plus nested FD at 1e-3
    "round_trip": 1e-4,
    # swept-area flux of the extracted correction map
    "extracted_flux": 1e-3,
    # phi_Sigma* Omega_h against Omega_h, FD jet of the projections at 1e-3
    "extracted_area": 1e-3,
    # lower bound on the hyperbolic Jacobian of either projection
    "projection_margin": 1e-2,
    # Gauss equation against Brioschi, outer FD at 1e-3
    "gauss_equation": 1e-3,
    # ambient orthogonality of the surface to the fibres; frames carry FD section derivatives at 1e-4
    "orthogonality": 1e-5,
    # Gauss map under the generators, Newton-free fixed points of the normal
    "gauss_equivariance": 1e-4,
    # b~ conditions: FD of an FD shape operator of an FD section (three nested levels)
    "btilde": 1e-2,
    # curvature of the (id, id) surface, Brioschi on an analytic first form at step 1e-3
    "umbilic": 1e-4,
    # geodesic-circle curvature oracle, central differences at 1e-5 over 128 angles
    "circle_curvature": 1e-5,
}

DEFAULTS: Dict[str, Any] = {
    "seed": 7,
    "mesh_n": 50,
    "steps": 256,
    "samples": 8,
    "flows": 5,
    "hamiltonian": "random",
    "flux_target": None,
}


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    seed: int = 7
    mesh_n: int = 50
    steps: int = 256
    samples: int = 8
    flows: int = 5
    tolerances: Dict[str, float] = field(default_factory=dict)
    hamiltonian: Union[str, List[Dict[str, Any]]] = "random"
    flux_target: Optional[Tuple[float, ...]] = None
    children: Tuple[Scenario, ...] = ()
    source: Optional[str] = None

    def tolerance(self, key: str) -> float:
        if key in self.tolerances:
            return float(self.tolerances[key])
        return DEFAULT_TOLERANCES[key]

    def with_overrides(self, **overrides: Any) -> Scenario:
        """Apply CLI overrides (None values are ignored) to this scenario and its children."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return self
        children = tuple(c.with_overrides(**changes) for c in self.children)
        return replace(self, children=children, **changes)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "name": self.name,
            "kind": self.kind,
            "seed": self.seed,
            "mesh_n": self.mesh_n,
            "steps": self.steps,
            "samples": self.samples,
            "flows": self.flows,
            "tolerances": {k: self.tolerance(k) for k in sorted(DEFAULT_TOLERANCES)},
            "hamiltonian": self.hamiltonian,
            "flux_target": list(self.flux_target) if self.flux_target is not None else None,
        }
        if self.children:
            out["include"] = [c.to_dict() for c in self.children]
        return out


def _validate(raw: Dict[str, Any], origin: str) -> List[str]:
    problems: List[str] = []
    unknown = sorted(set(raw) - ALLOWED_KEYS)
    if unknown:
        problems.append(f"unknown key(s) {unknown}")
    if "name" not in raw:
        problems.append("missing key 'name'")
    kind = raw.get("kind", "suite" if "include" in raw else None)
    if kind not in KINDS:
        problems.append(f"kind must be one of {list(KINDS)}, got {kind!r}")
    if kind == "suite" and not raw.get("include"):
        problems.append("a suite needs a non-empty 'include' list")
    for key in ("seed", "mesh_n", "steps", "samples", "flows"):
        value = raw.get(key, DEFAULTS[key])
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            problems.append(f"'{key}' must be a non-negative integer, got {value!r}")
    if raw.get("mesh_n", DEFAULTS["mesh_n"]) == 0 or raw.get("steps", DEFAULTS["steps"]) == 0:
        problems.append("'mesh_n' and 'steps' must be positive")
    tolerances = raw.get("tolerances", {})
    if not isinstance(tolerances, dict):
        problems.append("'tolerances' must be an object")
    else:
        for key, value in tolerances.items():
            if key not in DEFAULT_TOLERANCES:
                problems.append(f"unknown tolerance {key!r}")
            elif not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
                problems.append(f"tolerance {key!r} must be a positive number")
    hamiltonian = raw.get("hamiltonian", "random")
    if hamiltonian != "random":
        if not isinstance(hamiltonian, list) or not all(
            isinstance(b, dict)
            and set(b) == {"centre", "radius", "amplitude"}
            and isinstance(b["centre"], list)
            and len(b["centre"]) == 2
            for b in hamiltonian
        ):
            problems.append("'hamiltonian' must be \"random\" or a list of {centre: [x, y], radius, amplitude}")
    target = raw.get("flux_target")
    if target is not None and (
        not isinstance(target, list) or len(target) != 4 or not all(isinstance(t, (int, float)) for t in target)
    ):
        problems.append("'flux_target' must be a list of 4 numbers")
    return [f"{origin}: {p}" for p in problems]


def _read(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")
    with path.open("r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid scenario file {path}", [str(e)]) from e
    if not isinstance(raw, dict):
        raise ConfigError(f"invalid scenario file {path}", ["top level must be an object"])
    return raw


def _from_raw(raw: Dict[str, Any], source: str, children: Tuple[Scenario, ...] = ()) -> Scenario:
    target = raw.get("flux_target")
    return Scenario(
        name=raw["name"],
        kind=raw.get("kind", "suite"),
        seed=raw.get("seed", DEFAULTS["seed"]),
        mesh_n=raw.get("mesh_n", DEFAULTS["mesh_n"]),
        steps=raw.get("steps", DEFAULTS["steps"]),
        samples=raw.get("samples", DEFAULTS["samples"]),
        flows=raw.get("flows", DEFAULTS["flows"]),
        tolerances={k: float(v) for k, v in raw.get("tolerances", {}).items()},
        hamiltonian=raw.get("hamiltonian", "random"),
        flux_target=tuple(float(t) for t in target) if target is not None else None,
        children=children,
        source=source,
    )


def parse_scenario(raw: Dict[str, Any], origin: str = "<memory>") -> Scenario:
    """Validate a scenario object without includes."""
    problems = _validate(raw, origin)
    if "include" in raw:
        problems.append(f"{origin}: 'include' needs a file location, use load_scenario")
    if problems:
        raise ConfigError("invalid scenario", problems)
    return _from_raw(raw, origin)


def load_scenario(path: Path) -> Scenario:
    """Load and validate a scenario; includes are resolved one level deep."""
    raw = _read(path)
    problems = _validate(raw, str(path))
    children: List[Scenario] = []
    for item in raw.get("include", []) or []:
        child_path = (path.parent / item).resolve()
        child_raw = _read(child_path)
        child_problems = _validate(child_raw, str(child_path))
        if "include" in child_raw:
            child_problems.append(f"{child_path}: nested include is not allowed")
        problems.extend(child_problems)
        if not child_problems:
            children.append(_from_raw(child_raw, str(child_path)))
    if problems:
        raise ConfigError("invalid scenario", problems)
    scenario = _from_raw(raw, str(path), tuple(children))
    logger.debug("loaded scenario %s (%s) with %d child(ren)", scenario.name, scenario.kind, len(children))
    return scenario


def config_hash(scenario: Scenario) -> str:
    """SHA-256 of the canonical JSON dump of the resolved scenario."""
    canonical = json.dumps(scenario.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
