#!/usr/bin/env python3
"""Solve one given-friction contact problem and one Coulomb fixed point,
emit KKT reports, VTK fields and the iteration history.

Usage: python3 scripts/run_contact_demo.py [--config configs/example.toml]
                                           [--out out/demo]
"""

import argparse
import sys
from pathlib import Path

from crackhom import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/example.toml")
    ap.add_argument("--out", default="out/demo")
    args = ap.parse_args()
    out = Path(args.out)
    for cmd in ("solve-contact", "coulomb"):
        rc = cli.main([cmd, "--config", args.config, "--out", str(out)])
        if rc != 0:
            print(f"{cmd} failed with exit code {rc}", file=sys.stderr)
            return rc
    for name in ("kkt_report.csv", "coulomb_kkt.csv",
                 "coulomb_history.csv"):
        print(f"--- {name} ---")
        print((out / name).read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
