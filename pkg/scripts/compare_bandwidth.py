#!/usr/bin/env python3
"""Per-station bandwidth: EVALUATED (full mask vector) vs COMPACT (one
summed key share) at model dimension 1000."""

import sys
from pathlib import Path

from secagg5g.cli import main

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "results"

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    sys.exit(main(["compare-modes", str(ROOT / "configs" / "bandwidth.json"),
                   "-o", str(OUT / "bandwidth.csv")]))
