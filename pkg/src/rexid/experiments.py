"""Experiment harness: worked-example reproductions and Monte Carlo coverage.

Everything here is seed-deterministic: trajectory ``k`` of an experiment uses
the noise substream keyed by ``(master seed, k)``, so results are identical
under any worker schedule, and repeated invocations write byte-identical CSVs.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import inf
from pathlib import Path

import numpy as np

from .bounds import BoundProfile, BurnInResult
from .config import ExperimentConfig, default_example1_config, default_example2_config
from .excitation import ExcitationCertificate
from .report import wilson_lower, write_csv
from .svgplot import log_line_plot
from .systems import (
    EstimationRun,
    SimulationOverflow,
    SystemSpec,
    double_integrator_growth_bound,
    simulate,
)

__all__ = [
    "CoverageReport",
    "coverage_experiment",
    "Example1Result",
    "reproduce_example1",
    "Example2Result",
    "reproduce_example2",
    "mean_error_curve",
    "iter_paths",
]

EXAMPLE1_THRESHOLDS = (3500.0, 5000.0, inf)


def iter_paths(spec: SystemSpec, x0, T: int, seed: int, num_paths: int,
               start_index: int = 0):
    """Yield ``(index, run_or_overflow)`` for each trajectory, in index order."""
    for k in range(num_paths):
        idx = start_index + k
        try:
            yield idx, simulate(spec, x0, T, seed, stream_index=idx)
        except SimulationOverflow as exc:
            yield idx, exc


def _error_chunk(args):
    """Worker task: error curves for a contiguous block of path indices.

    The configuration is rebuilt in the worker; every path depends only on
    (seed, index), so the split across workers cannot change any number.
    """
    cfg, T, indices = args
    spec = cfg.build_spec()
    out = []
    for idx in indices:
        try:
            run = simulate(spec, cfg.run.x0, T, cfg.seed, stream_index=idx)
            out.append((idx, run.errors))
        except SimulationOverflow:
            out.append((idx, None))
    return out


def mean_error_curve(spec: SystemSpec, x0, T: int, seed: int, num_paths: int,
                     start_index: int = 0) -> tuple[np.ndarray, int]:
    """Arithmetic mean of the spectral error per step; overflowed paths are
    excluded from the mean and counted."""
    acc = np.zeros(T)
    n_ok = 0
    n_overflow = 0
    for _, run in iter_paths(spec, x0, T, seed, num_paths, start_index):
        if isinstance(run, SimulationOverflow):
            n_overflow += 1
            continue
        acc += run.errors
        n_ok += 1
    if n_ok == 0:
        raise RuntimeError("all paths overflowed")
    return acc / n_ok, n_overflow


def mean_error_curve_cfg(cfg: ExperimentConfig, start_index: int = 0) -> tuple[np.ndarray, int]:
    """Config-driven mean error curve, distributing paths over cfg.run.workers.

    Per-path results are reduced in index order, so the outcome is identical
    for every worker count.
    """
    indices = [start_index + k for k in range(cfg.run.num_paths)]
    workers = max(int(cfg.run.workers), 1)
    if workers == 1:
        spec = cfg.build_spec()
        return mean_error_curve(spec, cfg.run.x0, cfg.run.T, cfg.seed,
                                cfg.run.num_paths, start_index)
    chunks = [indices[i::workers] for i in range(workers)]
    results: dict[int, np.ndarray | None] = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_error_chunk, [(cfg, cfg.run.T, c) for c in chunks]):
            results.update(part)
    acc = np.zeros(cfg.run.T)
    n_ok = 0
    n_overflow = 0
    for idx in indices:  # fixed reduction order
        errs = results[idx]
        if errs is None:
            n_overflow += 1
            continue
        acc += errs
        n_ok += 1
    if n_ok == 0:
        raise RuntimeError("all paths overflowed")
    return acc / n_ok, n_overflow


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    """Fraction of sample paths on which the error bound held at every time of
    the evaluated interval, with a Wilson lower confidence bound at 95%.
    ``passed`` is pinned to ``wilson_lower_95 >= target - 0.02``."""

    num_paths: int
    num_covered: int
    empirical_rate: float
    wilson_lower_95: float
    target: float
    passed: bool
    interval: tuple[int, int] | None
    interval_empty: bool
    num_overflowed: int = 0
    notes: tuple[str, ...] = ()


def coverage_experiment(cfg: ExperimentConfig, e_scale: float = 1.0,
                        profile: BoundProfile | None = None) -> CoverageReport:
    """Per-path all-times check of |theta_hat(t) - theta_star| <= e(t) over the
    PE interval truncated at the run horizon.

    ``e_scale`` rescales the bound; it exists so the harness can be shown to
    fail when the bound is made absurdly tight (sanity hook, default 1).
    """
    cfg.validate()
    spec = cfg.build_spec()
    cert = cfg.build_certificate(spec)
    if profile is None:
        profile = BoundProfile.build(spec, cert, cfg.run.delta, cfg.run.x0,
                                     horizon=cfg.run.T,
                                     convention=cfg.conventions.burn_in,
                                     search_horizon=cfg.conventions.verify_horizon)
    interval = profile.pe_interval(upto=cfg.run.T)
    empty = len(interval) == 0
    if not empty:
        ts = np.arange(interval.start, interval.stop)
        e_vals = np.asarray(profile.e(ts)) * e_scale
    covered = 0
    n_overflow = 0
    n_done = 0
    for _, run in iter_paths(spec, cfg.run.x0, cfg.run.T, cfg.seed, cfg.run.num_paths):
        if isinstance(run, SimulationOverflow):
            n_overflow += 1
            continue
        n_done += 1
        if empty:
            covered += 1  # nothing to check on an empty interval
        else:
            errs = run.errors[interval.start - 1: interval.stop - 1]
            covered += bool(np.all(errs <= e_vals))
    if n_done == 0:
        raise RuntimeError("all paths overflowed")
    rate = covered / n_done
    lower = wilson_lower(covered, n_done)
    target = 1.0 - cfg.run.delta
    notes = []
    if empty:
        notes.append("interval empty: PE interval does not intersect the run horizon")
        notes.append(f"T_burn_in={profile.t_burn_in.value} T_excited={profile.t_excited}")
    return CoverageReport(
        num_paths=n_done, num_covered=covered, empirical_rate=rate,
        wilson_lower_95=lower, target=target,
        passed=lower >= target - 0.02,
        interval=None if empty else (interval.start, interval.stop - 1),
        interval_empty=empty, num_overflowed=n_overflow, notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# Worked example 1: thresholded PWA plant
# ---------------------------------------------------------------------------

@dataclass
class Example1Result:
    thresholds: tuple
    mean_errors: dict
    t_burn_in: dict
    t_burn_in_alt: dict
    t_excited: dict
    overflows: dict
    flags: dict
    files: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(self.flags.values())


def _downsample(x: np.ndarray, y: np.ndarray, max_pts: int = 2000):
    if len(x) <= max_pts:
        return x, y
    idx = np.unique(np.round(np.geomspace(1, len(x), max_pts)).astype(int) - 1)
    return x[idx], y[idx]


def reproduce_example1(cfg: ExperimentConfig | None = None,
                       out_dir: str | Path | None = None,
                       thresholds=EXAMPLE1_THRESHOLDS) -> Example1Result:
    """Mean estimation-error curves for the PWA plant at several thresholds,
    plus the burn-in/excited times implied by each threshold's certificate.

    Writes four artifacts under ``out_dir``: the mean-error CSV, its log-scale
    SVG, a times summary CSV, and a plain-text report with the pass flags.
    """
    base = cfg or default_example1_config()
    base.validate()
    if base.system.family != "pwa":
        raise ValueError("example 1 runs on the PWA family")
    T = base.run.T
    mean_errors: dict = {}
    t_burn: dict = {}
    t_burn_alt: dict = {}
    t_exc: dict = {}
    overflow: dict = {}
    for i, thr in enumerate(thresholds):
        cfg_i = default_example1_config(thr)
        cfg_i.run = base.run
        cfg_i.seed = base.seed
        cfg_i.estimator = base.estimator
        cfg_i.conventions = base.conventions
        cfg_i.system.ubar = base.system.ubar
        if base.system.sigma_w is not None:
            cfg_i.system.sigma_w = base.system.sigma_w
        spec = cfg_i.build_spec()
        cert = cfg_i.build_certificate(spec)
        curve, n_over = mean_error_curve_cfg(cfg_i, start_index=i * 1_000_000)
        profile = BoundProfile.build(spec, cert, cfg_i.run.delta, cfg_i.run.x0,
                                     horizon=1,
                                     convention=cfg_i.conventions.burn_in,
                                     search_horizon=cfg_i.conventions.verify_horizon)
        mean_errors[thr] = curve
        t_burn[thr] = profile.t_burn_in
        t_burn_alt[thr] = profile.t_burn_in_alt
        t_exc[thr] = profile.t_excited
        overflow[thr] = n_over

    thr_lo, thr_hi = thresholds[0], thresholds[-1]  # tightest and loosest
    final = {thr: mean_errors[thr][-1] for thr in thresholds}
    halfway = {thr: mean_errors[thr][T // 2 - 1] for thr in thresholds}
    flags = {
        "no_overflow": all(v == 0 for v in overflow.values()),
        "unbounded_case_beats_tightest": final[thr_hi] < 0.5 * final[thr_lo],
        "tightest_plateaus": final[thr_lo] / halfway[thr_lo] >= 0.8,
        "unbounded_keeps_decaying": final[thr_hi] / halfway[thr_hi] <= 0.8,
    }

    result = Example1Result(
        thresholds=tuple(thresholds), mean_errors=mean_errors,
        t_burn_in=t_burn, t_burn_in_alt=t_burn_alt, t_excited=t_exc,
        overflows=overflow, flags=flags,
    )
    if out_dir is not None:
        result.files = _write_example1(result, Path(out_dir), base)
    return result


def _thr_label(thr: float) -> str:
    return "inf" if thr == inf else f"{thr:g}"


def _write_example1(res: Example1Result, out: Path, cfg: ExperimentConfig) -> list:
    out.mkdir(parents=True, exist_ok=True)
    T = len(next(iter(res.mean_errors.values())))
    t = np.arange(1, T + 1)
    header = ["t"] + [f"mean_err_xbar_{_thr_label(thr)}" for thr in res.thresholds]
    rows = zip(t, *[res.mean_errors[thr] for thr in res.thresholds])
    errors_csv = out / "example1_mean_errors.csv"
    write_csv(errors_csv, header, rows,
              preamble=[f"paths={cfg.run.num_paths} T={T} delta={cfg.run.delta} "
                        f"seed={cfg.seed}"])

    series = {}
    for thr in res.thresholds:
        xs, ys = _downsample(t, res.mean_errors[thr])
        series[f"xbar={_thr_label(thr)}"] = (xs, ys)
    svg = out / "example1_mean_errors.svg"
    log_line_plot(svg, series, title="Mean estimation error (log scale)",
                  xlabel="t", ylabel="|theta_hat - theta*|")

    times_csv = out / "example1_times_summary.csv"
    write_csv(
        times_csv,
        ["xbar", "t_burn_in_definition", "t_burn_in_proof", "t_excited", "overflows"],
        [
            (
                _thr_label(thr),
                str(_pick(res.t_burn_in[thr], res.t_burn_in_alt[thr], "definition").value),
                str(_pick(res.t_burn_in[thr], res.t_burn_in_alt[thr], "proof").value),
                str(res.t_excited[thr]),
                res.overflows[thr],
            )
            for thr in res.thresholds
        ],
    )

    report = out / "example1_report.txt"
    lines = ["example 1: PWA plant, mean error over sample paths", ""]
    for thr in res.thresholds:
        lines.append(
            f"xbar={_thr_label(thr)}: "
            f"T_burn_in[{res.t_burn_in[thr].convention}]={res.t_burn_in[thr].value} "
            f"T_burn_in[{res.t_burn_in_alt[thr].convention}]={res.t_burn_in_alt[thr].value} "
            f"T_excited={res.t_excited[thr]} overflows={res.overflows[thr]}"
        )
    lines.append("")
    for name, ok in res.flags.items():
        lines.append(f"flag {name}: {'PASS' if ok else 'FAIL'}")
    from .report import atomic_write_text

    atomic_write_text(report, "\n".join(lines) + "\n")
    return [errors_csv, svg, times_csv, report]


def _pick(a: BurnInResult, b: BurnInResult, convention: str) -> BurnInResult:
    return a if a.convention == convention else b


# ---------------------------------------------------------------------------
# Worked example 2: stochastic double integrator
# ---------------------------------------------------------------------------

@dataclass
class Example2Result:
    certificate: ExcitationCertificate
    t_burn_in: BurnInResult
    rate_sup: float
    rate_trend: float
    e_decreasing: bool
    growth_violations: int
    coverage: CoverageReport
    flags: dict
    files: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(self.flags.values())


def check_growth_invariant(spec: SystemSpec, run: EstimationRun, x0) -> int:
    """Count violations of the proved double-integrator trajectory bound.

    At time t the bound takes sum_{i<t} |u(i)| and sum_{i<=t} |w(i)|, with the
    noise reconstructed exactly from the stored run (f = 0 for this family):
    W(t+1) = X(t+1) - theta_star^T Z(t+1).
    """
    theta = spec.theta_star
    W = run.states[1:] - run.regressors @ theta
    w_norm_sums = np.cumsum(np.linalg.norm(W, axis=1))
    u_abs_sums = np.cumsum(np.abs(run.controls[:, 0]))
    xi = float(np.linalg.norm(np.atleast_1d(x0)))
    t = np.arange(1, run.horizon + 1, dtype=float)
    bounds = double_integrator_growth_bound(t, xi, u_abs_sums, w_norm_sums)
    state_norms = np.linalg.norm(run.states[1:], axis=1)
    return int(np.sum(state_norms > bounds))


def reproduce_example2(cfg: ExperimentConfig | None = None,
                       out_dir: str | Path | None = None) -> Example2Result:
    """Double-integrator study: certificate, burn-in, convergence-rate
    envelope over [1e3, 1e6], the trajectory growth invariant on every path,
    and a desk-scale coverage report.
    """
    from .bounds import burn_in_time, error_bound, rate_envelope

    cfg = cfg or default_example2_config()
    cfg.validate()
    if cfg.system.family != "double_integrator":
        raise ValueError("example 2 runs on the double-integrator family")
    spec = cfg.build_spec()
    cert = cfg.build_certificate(spec)
    if not spec.growth.is_apb:
        raise RuntimeError("double-integrator growth certificate must be APB")

    rate = rate_envelope(spec, cert, cfg.run.delta, cfg.run.x0, t_range=(1e3, 1e6))
    e_probe = [float(error_bound(spec, cert, t, cfg.run.delta, cfg.run.x0))
               for t in (100, 10_000, 1_000_000)]
    e_decreasing = e_probe[2] < e_probe[1] < e_probe[0]
    t_burn = burn_in_time(spec, cert, cfg.run.delta, cfg.run.x0,
                          convention=cfg.conventions.burn_in,
                          search_horizon=cfg.conventions.verify_horizon)

    growth_violations = 0
    n_over = 0
    for _, run in iter_paths(spec, cfg.run.x0, cfg.run.T, cfg.seed, cfg.run.num_paths):
        if isinstance(run, SimulationOverflow):
            n_over += 1
            continue
        growth_violations += check_growth_invariant(spec, run, cfg.run.x0)

    coverage = coverage_experiment(cfg)
    flags = {
        "rate_trend_bounded": rate.trend <= 1.1,
        "error_bound_decreasing": e_decreasing,
        "growth_invariant": growth_violations == 0 and n_over == 0,
        "coverage": coverage.passed,
    }
    result = Example2Result(
        certificate=cert, t_burn_in=t_burn, rate_sup=rate.sup_value,
        rate_trend=rate.trend, e_decreasing=e_decreasing,
        growth_violations=growth_violations, coverage=coverage, flags=flags,
    )
    if out_dir is not None:
        result.files = _write_example2(result, rate, Path(out_dir), cfg, spec, cert)
    return result


def _write_example2(res: Example2Result, rate, out: Path, cfg: ExperimentConfig,
                    spec, cert) -> list:
    from .report import atomic_write_text

    out.mkdir(parents=True, exist_ok=True)
    rate_csv = out / "example2_rate_envelope.csv"
    e_vals = rate.envelope / np.sqrt(rate.grid / np.log(rate.grid))
    write_csv(rate_csv, ["t", "e", "envelope"],
              zip(rate.grid, e_vals, rate.envelope),
              preamble=[f"c_pe={cert.c_pe:.12g} p_pe={cert.p_pe:.12g} "
                        f"delta={cfg.run.delta}"])
    svg = out / "example2_rate_envelope.svg"
    log_line_plot(svg, {"e(t)": (rate.grid, e_vals),
                        "e(t)*sqrt(t/ln t)": (rate.grid, rate.envelope)},
                  title="Error bound and rate envelope", xlabel="t", logx=True)

    mean_csv = out / "example2_mean_errors.csv"
    curve, _ = mean_error_curve(spec, cfg.run.x0, cfg.run.T, cfg.seed,
                                min(cfg.run.num_paths, 20))
    write_csv(mean_csv, ["t", "mean_err"],
              zip(np.arange(1, cfg.run.T + 1), curve))

    report = out / "example2_report.txt"
    lines = [
        "example 2: stochastic double integrator",
        f"certificate: c_pe={cert.c_pe:.12g} p_pe={cert.p_pe:.12g} "
        f"({cert.provenance}; {'; '.join(cert.notes)})",
        f"T_burn_in[{res.t_burn_in.convention}]={res.t_burn_in.value} "
        f"(horizon-verified up to {res.t_burn_in.horizon})",
        f"rate envelope sup={res.rate_sup:.6g} trend={res.rate_trend:.4f}",
        f"growth invariant violations: {res.growth_violations}",
        f"coverage: {res.coverage.num_covered}/{res.coverage.num_paths} "
        f"wilson_lower={res.coverage.wilson_lower_95:.4f} "
        f"target={res.coverage.target:.2f} "
        + ("(interval empty) " if res.coverage.interval_empty else "")
        + f"passed={res.coverage.passed}",
        "",
    ]
    for name, ok in res.flags.items():
        lines.append(f"flag {name}: {'PASS' if ok else 'FAIL'}")
    atomic_write_text(report, "\n".join(lines) + "\n")
    return [rate_csv, svg, mean_csv, report]
