#!/usr/bin/env python3
"""Reproduce the stochastic double-integrator experiment with package defaults.

Builds the global excitation certificate from the closed-form moment bounds,
evaluates the error-bound rate envelope over t in [1e3, 1e6], checks the
trajectory growth bound on every simulated path, and runs a desk-scale
coverage study.

Usage:
    python scripts/run_example2.py [--out results/example2] [--seed N]
"""
import sys

from rexid.cli import cli_main

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "results/example2"]
    raise SystemExit(cli_main(["reproduce-example2", *args]))
