#!/usr/bin/env python3
"""Reproduce the thresholded-PWA experiment with package defaults.

Runs 100 seeded paths at T=20000 for thresholds {3500, 5000, inf}, writes the
mean-error CSV/SVG, the burn-in/excited-time summary (both constant
conventions) and a pass-flag report.

Usage:
    python scripts/run_example1.py [--out results/example1] [--seed N]
"""
import sys

from rexid.cli import cli_main

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "results/example1"]
    raise SystemExit(cli_main(["reproduce-example1", *args]))
