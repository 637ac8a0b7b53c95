#!/usr/bin/env python3
"""
flux-ads: the flux homomorphism, the C invariant and equivariant AdS3 surfaces
on the genus-2 octagon surface.

This tool:

- Builds the standard genus-2 Fuchsian group and its loop basis
- Integrates symplectic flows and computes their flux and C invariant
- Reconstructs spacelike surfaces in AdS3 from a map and a section b
- Runs scenario files of numerical checks and writes JSON reports

Typical usage:

    uv run main.py verify data/scenarios/all.json
    uv run main.py flux --hamiltonian data/scenarios/flux_vs_c.json
    uv run main.py reconstruct data/scenarios/identity.json --export-csv out/identity.csv
    uv run main.py report --merge out/a.json out/b.json
"""

import sys

from src.harness.cli import main

if __name__ == "__main__":
    sys.exit(main())
