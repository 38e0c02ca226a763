#!/usr/bin/env python3
"""Run the identity/constant diagnostics: unfolding identity suite, Korn
constants and the kappa-regularization consistency sweep.

Usage: python3 scripts/run_diagnostics.py [--config ...] [--out ...]
"""

import argparse
import sys
from pathlib import Path

from crackhom import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/example.toml")
    ap.add_argument("--out", default="out/diagnostics")
    args = ap.parse_args()
    status = 0
    for cmd, report in (("verify-unfolding", "unfolding_checks.csv"),
                        ("korn-report", "korn_report.csv"),
                        ("kappa-study", "kappa_study.csv")):
        rc = cli.main([cmd, "--config", args.config, "--out", args.out])
        if rc != 0:
            print(f"{cmd} exited with code {rc}", file=sys.stderr)
            status = rc
            continue
        print(f"--- {report} ---")
        print((Path(args.out) / report).read_text())
    return status


if __name__ == "__main__":
    sys.exit(main())
