#!/usr/bin/env python3
"""Maximize the information over the population density on a theta grid.

Runs pairwise Frank-Wolfe with exact line search on the default
ten-class problem and writes the optimal weights, the gradient, and the
KKT certificate to ``optimize.csv`` (+ JSON sidecar).  Power constraints
are available through the config (``peak_power`` caps the tuning
amplitude, ``avg_power`` bounds the mean firing cost)::

    python3 scripts/run_optimize.py --seed 1
    python3 scripts/run_optimize.py --config budgeted.json --bits
"""

from __future__ import annotations

import sys
from pathlib import Path

from popcode_mi.cli import main

CONFIG = Path(__file__).resolve().parent / "configs" / "optimize.json"

if __name__ == "__main__":
    sys.exit(main(["optimize", "--config", str(CONFIG), *sys.argv[1:]]))
