"""Command-line entry point.

Subcommands: simulate, bounds, excitation, coverage, reproduce-example1,
reproduce-example2.  Exit codes: 0 on success with all pass flags true, 1 when
an acceptance flag failed, 2 on configuration or domain errors.  All outputs
are written atomically.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .bounds import (
    BoundProfile,
    ImprovementConditionViolated,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    default_example1_config,
    default_example2_config,
    load_config,
)
from .excitation import mc_excitation_probability, mc_verify_moments
from .experiments import coverage_experiment, reproduce_example1, reproduce_example2
from .report import atomic_write_text, format_number, write_csv
from .systems import simulate

__all__ = ["main", "cli_main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rexid",
        description="Closed-loop identification toolkit: simulation, excitation "
                    "certificates, and non-asymptotic error bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "simulate one closed-loop trajectory and export it as CSV"),
        ("bounds", "emit the bound pipeline (wbar/xbar/zbar/beta_max/e/e_tilde) as CSV"),
        ("excitation", "Monte Carlo verification of the excitation certificate"),
        ("coverage", "Monte Carlo coverage of the error bound"),
        ("reproduce-example1", "PWA worked example: mean error curves and times"),
        ("reproduce-example2", "double-integrator worked example: rate envelope"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="TOML config path")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
    return parser


def _load(args, default_factory=None) -> ExperimentConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif default_factory is not None:
        cfg = default_factory()
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    out = cfg.resolve_out_dir(args.out)
    spec = cfg.build_spec()
    run = simulate(spec, cfg.run.x0, cfg.run.T, cfg.seed)
    header = (["t"] + [f"x_{i+1}" for i in range(spec.n)]
              + [f"u_{j+1}" for j in range(spec.m)] + ["err", "gmin", "gmax"])
    write_csv(out / "simulate_run.csv", header, run.to_csv_rows(),
              preamble=[f"family={spec.family} T={cfg.run.T} seed={cfg.seed}"])
    print(f"wrote {out / 'simulate_run.csv'}")
    return 0


def _cmd_bounds(args) -> int:
    cfg = _load(args)
    out = cfg.resolve_out_dir(args.out)
    spec = cfg.build_spec()
    cert = cfg.build_certificate(spec)
    profile = BoundProfile.build(spec, cert, cfg.run.delta, cfg.run.x0,
                                 horizon=cfg.run.T,
                                 convention=cfg.conventions.burn_in,
                                 search_horizon=cfg.conventions.verify_horizon)
    t = np.arange(1, cfg.run.T + 1)
    e_vals = np.asarray(profile.e(t))
    try:
        et_vals = np.asarray(profile.e_tilde(t))
        improvement = "holds"
    except ImprovementConditionViolated:
        et_vals = np.full(len(t), np.nan)
        improvement = "violated (e_tilde undefined)"
    preamble = [
        f"family={spec.family} delta={cfg.run.delta} x0={list(map(float, np.atleast_1d(cfg.run.x0)))}",
        f"certificate: region={cert.region.describe()} c_pe={format_number(cert.c_pe)} "
        f"p_pe={format_number(cert.p_pe)} provenance={cert.provenance}",
        f"T_burn_in[{profile.t_burn_in.convention}]={profile.t_burn_in.value} "
        f"T_burn_in[{profile.t_burn_in_alt.convention}]={profile.t_burn_in_alt.value} "
        f"T_excited={profile.t_excited}",
        f"improvement condition: {improvement}",
        "wbar/xbar/zbar/beta_max evaluated at delta/3 (the split the error bound uses)",
    ]
    if spec.growth.has_unverified_members:
        preamble.append("growth certificate carries user-declared (UNVERIFIED) class flags")
    rows = zip(t, profile.wbar, profile.xbar[1:], profile.zbar, profile.beta_max,
               e_vals, et_vals)
    write_csv(out / "bounds.csv",
              ["t", "wbar", "xbar", "zbar", "beta_max", "e", "e_tilde"],
              rows, preamble=preamble)
    print(f"wrote {out / 'bounds.csv'}")
    return 0


def _cmd_excitation(args) -> int:
    cfg = _load(args)
    out = cfg.resolve_out_dir(args.out)
    spec = cfg.build_spec()
    cert = cfg.build_certificate(spec)
    exb = cfg.excitation
    tail = mc_excitation_probability(
        spec, cert.region, cert, num_states=exb.mc_states,
        num_directions=exb.mc_directions, num_params=exb.mc_params,
        n_samples=exb.mc_samples, seed=cfg.seed)
    lines = [
        f"certificate: region={cert.region.describe()} c_pe={format_number(cert.c_pe)} "
        f"p_pe={format_number(cert.p_pe)} provenance={cert.provenance}",
        f"tail check: pass={tail.passed} min_wilson_tail={format_number(tail.min_observed_tail)} "
        f"target p_pe={format_number(cert.p_pe)}",
        "; ".join(tail.notes),
    ]
    ok = tail.passed
    if cert.provenance == "from-moments":
        if spec.family == "pwa":
            from .excitation import pwa_moment_certificate
            mc = pwa_moment_certificate(spec.params["xbar_threshold"],
                                        spec.params["sigma_w"], spec.params["ubar"])
        else:
            from .excitation import double_integrator_certificate
            mc = double_integrator_certificate(spec.params["sigma_w"],
                                               spec.params["ubar1"],
                                               spec.params["ubar2"])
        moments = mc_verify_moments(
            spec, cert.region, mc, num_states=exb.mc_states,
            num_directions=exb.mc_directions, num_params=exb.mc_params,
            n_samples=exb.mc_samples, seed=cfg.seed, slack=exb.slack)
        lines.append(
            f"moment check: pass={moments.passed} "
            f"min_mean={format_number(moments.min_observed_mean)} "
            f"(claimed c_pe1={format_number(mc.c_pe1)}) "
            f"max_var={format_number(moments.max_observed_var)} "
            f"(claimed c_pe2={format_number(mc.c_pe2)})")
        lines.append("; ".join(moments.notes))
        ok = ok and moments.passed
    atomic_write_text(out / "excitation_report.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0 if ok else 1


def _cmd_coverage(args) -> int:
    cfg = _load(args)
    out = cfg.resolve_out_dir(args.out)
    report = coverage_experiment(cfg)
    lines = [
        f"paths={report.num_paths} covered={report.num_covered} "
        f"rate={report.empirical_rate:.4f} wilson_lower_95={report.wilson_lower_95:.4f} "
        f"target={report.target:.4f} passed={report.passed}",
        f"interval={report.interval} interval_empty={report.interval_empty} "
        f"overflowed={report.num_overflowed}",
    ]
    lines += list(report.notes)
    atomic_write_text(out / "coverage_report.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0 if report.passed else 1


def _cmd_example1(args) -> int:
    cfg = _load(args, default_example1_config)
    out = cfg.resolve_out_dir(args.out)
    result = reproduce_example1(cfg, out_dir=out)
    for f in result.files:
        print(f"wrote {f}")
    for name, ok in result.flags.items():
        print(f"flag {name}: {'PASS' if ok else 'FAIL'}")
    return 0 if result.all_passed else 1


def _cmd_example2(args) -> int:
    cfg = _load(args, default_example2_config)
    out = cfg.resolve_out_dir(args.out)
    result = reproduce_example2(cfg, out_dir=out)
    for f in result.files:
        print(f"wrote {f}")
    for name, ok in result.flags.items():
        print(f"flag {name}: {'PASS' if ok else 'FAIL'}")
    return 0 if result.all_passed else 1


_COMMANDS = {
    "simulate": _cmd_simulate,
    "bounds": _cmd_bounds,
    "excitation": _cmd_excitation,
    "coverage": _cmd_coverage,
    "reproduce-example1": _cmd_example1,
    "reproduce-example2": _cmd_example2,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
