#!/usr/bin/env python3
"""Spectrum-vs-Fisher gap over a (patch width, population size) grid.

Uses the synthetic power-law prior spectrum by default and writes
``fig2.csv`` plus its JSON sidecar to the current directory.  To run on
measured image patches instead, point the config at a patch file (binary
header M, K as little-endian uint32 followed by M*K little-endian
float32, or a CSV with one patch per row)::

    python3 scripts/run_fig2.py --seed 3
    python3 scripts/run_fig2.py --config my_patches_config.json
"""

from __future__ import annotations

import sys
from pathlib import Path

from popcode_mi.cli import main

CONFIG = Path(__file__).resolve().parent / "configs" / "fig2.json"

if __name__ == "__main__":
    sys.exit(main(["fig2", "--config", str(CONFIG), *sys.argv[1:]]))
