#!/usr/bin/env python3
"""Reproduce the dropout-resilience curves at desk scale.

Sweeps offline-UE count 0..6 and offline-BS count 0..2 with the default
population (8 devices, 4 stations, 3-of-4 threshold, 10 rounds, 10 seeds)
and writes one CSV per axis into results/.
"""

import sys
from pathlib import Path

from secagg5g.cli import main

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "results"


def run() -> int:
    OUT.mkdir(exist_ok=True)
    rc = main(["sweep", str(ROOT / "configs" / "ue_sweep.json"),
               "-o", str(OUT / "ue_sweep.csv")])
    if rc:
        return rc
    return main(["sweep", str(ROOT / "configs" / "bs_sweep.json"),
                 "-o", str(OUT / "bs_sweep.csv")])


if __name__ == "__main__":
    sys.exit(run())
