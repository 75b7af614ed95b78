#!/usr/bin/env python3
"""Capacity-achieving stimulus density for a fixed tuning-curve population.

Writes the per-node density p*(x) proportional to sqrt(J(x)) together
with the channel capacity and the redundancy of the configured prior to
``capacity.csv`` (+ JSON sidecar)::

    python3 scripts/run_capacity.py
    python3 scripts/run_capacity.py --bits --out /tmp/capacity.csv
"""

from __future__ import annotations

import sys
from pathlib import Path

from popcode_mi.cli import main

CONFIG = Path(__file__).resolve().parent / "configs" / "capacity.json"

if __name__ == "__main__":
    sys.exit(main(["capacity", "--config", str(CONFIG), *sys.argv[1:]]))
