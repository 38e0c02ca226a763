#!/usr/bin/env python3
"""Two-scale convergence study: solve the epsilon-family of contact
problems, unfold the strains, compare against the coupled limit problem
and print the error sequence with observed orders.

Usage: python3 scripts/run_convergence_study.py [--config ...] [--out ...]
"""

import argparse
import sys
from pathlib import Path

from crackhom import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/example.toml")
    ap.add_argument("--out", default="out/convergence")
    args = ap.parse_args()
    rc = cli.main(["convergence", "--config", args.config,
                   "--out", args.out])
    if rc != 0:
        print(f"convergence failed with exit code {rc}", file=sys.stderr)
        return rc
    print((Path(args.out) / "convergence.csv").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
