#!/usr/bin/env python3
"""
Command-line front end for the verification harness.

Subcommands:

- `verify <scenario.json>`: run a scenario (or a suite of them) and print a report
- `flux --hamiltonian <scenario.json>`: flux and C of the scenario's flow
- `reconstruct <scenario.json> --export-csv <path>`: build the AdS surface and
  export sigma, K and tr B at sample points
- `report --merge <a.json> <b.json> ...`: fold several reports into one

Typical usage:

    uv run main.py verify data/scenarios/all.json --json > report.json
    uv run main.py reconstruct data/scenarios/identity.json --export-csv out/id.csv
    uv run main.py report --merge run1.json run2.json
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from src.ads.surface import export_surface_csv, induced_geometry, reconstruct_sigma
from src.errors import ConfigError, FluxAdsError
from src.geometry.fuchsian import random_domain_points
from src.harness.report import anchors_covered, load_report, merge_reports
from src.harness.scenario import Scenario, config_hash, load_scenario
from src.harness.suites import ANCHORS, SuiteContext, anchor_coverage, run_scenario
from src.symplectic.flows import IdentityMap, flux
from src.symplectic.sections import c_invariant, identity_section

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mesh-n", type=int, default=None, help="Override the mesh resolution.")
    parser.add_argument("--steps", type=int, default=None, help="Override the number of RK4 flow steps.")
    parser.add_argument("--seed", type=int, default=None, help="Override the random seed.")


def _build_arg_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Print machine-readable JSON on stdout.")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")

    parser = argparse.ArgumentParser(
        description="Flux, the C invariant and AdS3 surfaces on the genus-2 octagon surface."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", parents=[common], help="Run the checks of a scenario file.")
    verify.add_argument("scenario", type=Path, help="Scenario JSON (see data/scenarios/).")
    verify.add_argument("--workers", type=int, default=1, help="Processes for the children of a suite.")
    verify.add_argument("--output", type=Path, default=None, help="Also write the JSON report here.")
    verify.add_argument("--timing", action="store_true", help="Include wall times in the JSON report.")
    _add_overrides(verify)

    flux_cmd = sub.add_parser("flux", parents=[common], help="Flux and C of the flow of a scenario's Hamiltonian.")
    flux_cmd.add_argument(
        "--hamiltonian",
        type=Path,
        required=True,
        help="Scenario JSON whose 'hamiltonian' (and optional 'flux_target') define the field.",
    )
    _add_overrides(flux_cmd)

    recon = sub.add_parser("reconstruct", parents=[common], help="Reconstruct the AdS surface of a scenario.")
    recon.add_argument("scenario", type=Path, help="Scenario JSON; an empty 'hamiltonian' list gives the (id, id) surface.")
    recon.add_argument("--export-csv", type=Path, required=True, help="CSV path for the surface snapshot.")
    _add_overrides(recon)

    report = sub.add_parser("report", parents=[common], help="Work with saved reports.")
    report.add_argument("--merge", type=Path, nargs="+", required=True, help="Report files to fold together.")
    report.add_argument("--output", type=Path, default=None, help="Write the merged report here.")
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(levelname)s] %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _load(args: argparse.Namespace, path: Path) -> Scenario:
    scenario = load_scenario(path.expanduser().resolve())
    return scenario.with_overrides(mesh_n=args.mesh_n, steps=args.steps, seed=args.seed)


def _emit(args: argparse.Namespace, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(text)


def _verify(args: argparse.Namespace) -> int:
    scenario = _load(args, args.scenario)
    report = run_scenario(scenario, workers=args.workers)
    if args.output is not None:
        report.save(args.output, timing=args.timing)
    if args.json:
        print(report.dumps(timing=args.timing))
    else:
        for record in report.failures:
            print(f"FAIL {record.name}: {record.detail or record.residual}")
        print(report.summary())
    return report.exit_code()


def _flux(args: argparse.Namespace) -> int:
    scenario = _load(args, args.hamiltonian)
    ctx = SuiteContext(scenario)
    if scenario.flux_target is not None:
        psi = ctx.class_flow(scenario.flux_target)
        if scenario.hamiltonian != []:
            psi = ctx.flow(1, with_class=False).then(psi)
    else:
        psi = ctx.flow(1, with_class=False)
    F = flux(psi, ctx.loops, ctx.h)
    C = c_invariant(psi, ctx.h, loops=ctx.loops)
    payload = {"config_hash": config_hash(scenario), "flux": F.tolist(), "c_mod_2pi": C.tolist(), "gap": C.distance(F)}
    _emit(args, payload, f"Flux = {F.tolist()}\nC    = {C.tolist()}\n|C - Flux| mod 2 pi = {C.distance(F):.3e}")
    return 0


def _reconstruct(args: argparse.Namespace) -> int:
    scenario = _load(args, args.scenario)
    ctx = SuiteContext(scenario)
    if scenario.hamiltonian == []:
        s = reconstruct_sigma(IdentityMap(), identity_section(ctx.h), ctx.group, name="sigma_id")
        geo = induced_geometry(s)
    else:
        geo = ctx.pipeline("same")["geometry"]
    z = random_domain_points(ctx.rng(20), scenario.samples, radius=0.5)
    export_surface_csv(geo, z, args.export_csv)
    K = geo.curvature(z)
    payload = {"path": str(args.export_csv), "points": int(z.size), "K_min": float(K.min()), "K_max": float(K.max())}
    _emit(args, payload, f"wrote {z.size} rows to {args.export_csv}; K in [{K.min():.6f}, {K.max():.6f}]")
    return 0


def _report(args: argparse.Namespace) -> int:
    merged = merge_reports(load_report(p.expanduser().resolve()) for p in args.merge)
    missing = anchors_covered([merged], ANCHORS)
    if missing:
        logger.warning("anchors without a record: %s", missing)
    if args.output is not None:
        merged.save(args.output)
    _emit(args, merged.to_dict(), merged.summary())
    return merged.exit_code()


COMMANDS = {"verify": _verify, "flux": _flux, "reconstruct": _reconstruct, "report": _report}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_arg_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    unregistered = anchor_coverage()
    if unregistered:
        logger.warning("anchors with no registered check: %s", unregistered)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        for line in e.diagnostics:
            print(f"  - {line}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FluxAdsError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
