"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.

Criteria 1 and 2 are implemented faithfully and are expected to FAIL: the
reference values they target (burn-in 1724, excited times 1724/2224) are
not generated by the governing definitions under any documented
convention.  The state envelope alone already exceeds the
containment threshold at those horizons for every admissible failure
probability, and both burn-in conventions land near 14700-14950.  The full
analysis lives in the project notes; the faithful values are pinned as
regressions in tests/test_bounds.py.  All other criteria pass.
"""
import time
from math import inf

import numpy as np

from rexid.bounds import BoundProfile, burn_in_time, excited_time, rate_envelope
from rexid.config import default_example1_config, default_example2_config
from rexid.excitation import (
    MomentCertificate,
    all_space,
    bmsb_failure_probe,
    certificate_from_moments,
    double_integrator_certificate,
    half_line,
    mc_excitation_probability,
    pwa_moment_certificate,
)
from rexid.experiments import (
    check_growth_invariant,
    coverage_experiment,
    iter_paths,
    reproduce_example1,
)
from rexid.noise import noise_bound_wbar, substream
from rexid.report import wilson_lower
from rexid.systems import (
    RecursiveLeastSquares,
    double_integrator_spec,
    draw_noise,
    pwa_spec,
    rls_direct,
    simulate,
)

SQRT01 = float(np.sqrt(0.1))
DELTA = 0.4


def _pwa_cert(threshold):
    mc = pwa_moment_certificate(threshold, SQRT01, 1.0)
    region = all_space() if threshold == inf else half_line(0.9 * threshold)
    return certificate_from_moments(mc, region)


def _line(num, passed, detail, elapsed, limit):
    status = "PASS" if passed else "FAIL"
    msg = f"[criterion {num:2}] {status}  {detail}  ({elapsed:.1f}s / limit {limit}s)"
    print(msg)
    return msg


def test_criterion_01_burn_in_reproduction():
    """Burn-in within +-10% of the reported 1724 under >= 1 convention."""
    t0 = time.perf_counter()
    spec = pwa_spec(3500.0)
    cert = _pwa_cert(3500.0)
    results = {
        conv: burn_in_time(spec, cert, DELTA, [1.0], convention=conv)
        for conv in ("definition", "proof")
    }
    elapsed = time.perf_counter() - t0
    vals = {conv: r.value for conv, r in results.items()}
    within = {
        conv: v.is_finite and abs(v.value - 1724) / 1724 <= 0.10
        for conv, v in vals.items()
    }
    passed = any(within.values()) and elapsed < 5.0
    detail = ("burn-in target 1724 +-10%; computed "
              + ", ".join(f"{c}={v}" for c, v in vals.items()))
    msg = _line(1, passed, detail, elapsed, 5)
    assert elapsed < 5.0
    assert any(within.values()), (
        msg + " -- faithful evaluation of the burn-in definition does "
        "not reach the reference value under either documented constant "
        "convention; see notes/decisions.md and the module docstring."
    )


def test_criterion_02_excited_time_reproduction():
    """Excited times within +-10% of 1724 / 2224 and exactly inf."""
    t0 = time.perf_counter()
    computed = {
        thr: excited_time(pwa_spec(thr), _pwa_cert(thr), DELTA, [1.0])
        for thr in (3500.0, 5000.0, inf)
    }
    elapsed = time.perf_counter() - t0
    targets = {3500.0: 1724, 5000.0: 2224}
    finite_ok = {
        thr: computed[thr].is_finite
        and abs(computed[thr].value - tgt) / tgt <= 0.10
        for thr, tgt in targets.items()
    }
    inf_ok = computed[inf].is_infinite
    passed = all(finite_ok.values()) and inf_ok and elapsed < 5.0
    detail = ("excited targets 1724/2224/inf +-10%; computed "
              + ", ".join(f"xbar={k}: {v}" for k, v in computed.items()))
    msg = _line(2, passed, detail, elapsed, 5)
    assert elapsed < 5.0
    assert inf_ok
    assert all(finite_ok.values()), (
        msg + " -- the state envelope at t=1723 exceeds the containment "
        "threshold for every admissible failure probability, so the reported "
        "finite excited times cannot arise from the governing definitions; see "
        "notes/decisions.md."
    )


def test_criterion_03_figure1_qualitative():
    """Mean-error curves: decay vs plateau contrast at T=20000, 100 paths."""
    t0 = time.perf_counter()
    res = reproduce_example1()
    elapsed = time.perf_counter() - t0
    T = len(res.mean_errors[inf])
    final = {thr: res.mean_errors[thr][-1] for thr in res.thresholds}
    half = {thr: res.mean_errors[thr][T // 2 - 1] for thr in res.thresholds}
    factor_ok = final[inf] < 0.5 * final[3500.0]
    plateau_ok = final[3500.0] / half[3500.0] >= 0.8
    decay_ok = final[inf] / half[inf] <= 0.8
    passed = factor_ok and plateau_ok and decay_ok and elapsed < 300
    detail = (f"err(inf,T)={final[inf]:.5f} vs 0.5*err(3500,T)={0.5 * final[3500.0]:.5f}; "
              f"plateau={final[3500.0] / half[3500.0]:.3f}>=0.8; "
              f"decay={final[inf] / half[inf]:.3f}<=0.8")
    _line(3, passed, detail, elapsed, 300)
    assert elapsed < 300
    assert factor_ok and plateau_ok and decay_ok


def test_criterion_04_theorem_coverage():
    """Error-bound coverage over the PE interval truncated at T=5000."""
    t0 = time.perf_counter()
    cfg = default_example1_config(inf)
    cfg.run.T = 5000
    cfg.run.num_paths = 200
    report = coverage_experiment(cfg)
    elapsed = time.perf_counter() - t0
    passed = report.wilson_lower_95 >= 0.6 and elapsed < 180
    detail = (f"rate={report.empirical_rate:.3f} wilson={report.wilson_lower_95:.3f}>=0.6 "
              f"(conservative bound; interval="
              f"{'EMPTY at this horizon' if report.interval_empty else report.interval})")
    _line(4, passed, detail, elapsed, 180)
    if report.interval_empty:
        print("           note: faithful burn-in exceeds 5000, so the truncated "
              "PE interval is empty and coverage is vacuous; the non-vacuous "
              "synthetic-certificate variant is exercised in tests/test_bounds.py")
    assert elapsed < 180
    assert report.wilson_lower_95 >= 0.6


def test_criterion_05_rls_oracle_equivalence():
    """Recursive vs direct estimator on 200 random instances."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(1, 4))
        T = int(rng.integers(1, 51))
        gamma = float(10.0 ** rng.uniform(-6, 2))
        Z = rng.normal(size=(T, d)) * 10.0 ** rng.uniform(-1, 2)
        Y = rng.normal(size=(T, n))
        rls = RecursiveLeastSquares(d, n, gamma, np.zeros((d, n)))
        for z, y in zip(Z, Y):
            est = rls.update(z, y)
        direct = rls_direct(Z, Y, gamma, np.zeros((d, n)))
        scale = max(float(np.max(np.abs(direct))), 1e-30)
        worst = max(worst, float(np.max(np.abs(est - direct))) / scale)
    elapsed = time.perf_counter() - t0
    passed = worst < 1e-8 and elapsed < 10
    _line(5, passed, f"max relative deviation {worst:.2e} < 1e-8 on 200 instances",
          elapsed, 10)
    assert elapsed < 10
    assert worst < 1e-8


def test_criterion_06_gramian_sandwich():
    """lambda_max <= beta_max on envelope-conditioned paths; PE line on T_PE."""
    t0 = time.perf_counter()
    cfg = default_example1_config(inf)
    spec = cfg.build_spec()
    cert = _pwa_cert(inf)
    T = 5000
    profile = BoundProfile.build(spec, cert, DELTA, [1.0], horizon=T)
    wb = noise_bound_wbar(np.arange(1, T + 1), DELTA / 3.0, SQRT01, 1)
    interval = profile.pe_interval(upto=T)
    pe_line = cert.c_pe * cert.p_pe / 4.0 * (np.arange(1, T + 1) - 1.0) + spec.gamma
    n_cond = 0
    max_violations = 0
    n_pe_ok = 0
    for k in range(100):
        W, _ = draw_noise(spec, T, cfg.seed, k)
        if not np.all(np.abs(W[:, 0]) <= wb):
            continue
        n_cond += 1
        run = simulate(spec, [1.0], T, cfg.seed, stream_index=k)
        max_violations += int(np.sum(run.gram_max_eig > profile.beta_max * (1 + 1e-9)))
        if len(interval) == 0:
            n_pe_ok += 1  # vacuous
        else:
            lo = interval.start
            n_pe_ok += bool(np.all(run.gram_min_eig[lo - 1: interval.stop - 1]
                                   >= pe_line[lo - 1: interval.stop - 1]))
    elapsed = time.perf_counter() - t0
    pe_freq = n_pe_ok / n_cond
    passed = max_violations == 0 and pe_freq >= 1 - DELTA and elapsed < 180
    detail = (f"lambda_max violations={max_violations} over {n_cond} conditioned paths; "
              f"lambda_min PE frequency={pe_freq:.2f}>= {1 - DELTA:.2f}"
              + (" (interval empty -> vacuous)" if len(interval) == 0 else ""))
    _line(6, passed, detail, elapsed, 180)
    assert elapsed < 180
    assert n_cond >= 50
    assert max_violations == 0
    assert pe_freq >= 1 - DELTA


def test_criterion_07_noise_envelope_coverage():
    """Uniform-in-time envelope coverage, 2000 sequences, T=1000."""
    t0 = time.perf_counter()
    T, n_seq = 1000, 2000
    details = []
    passed = True
    for delta in (0.1, 0.4):
        bound = noise_bound_wbar(np.arange(1, T + 1), delta, SQRT01, 1)
        ok = 0
        for k in range(n_seq):
            w = substream(555, k).normal(0.0, SQRT01, size=T)
            ok += bool(np.all(np.abs(w) <= bound))
        lower = wilson_lower(ok, n_seq)
        details.append(f"delta={delta}: rate={ok / n_seq:.4f} wilson={lower:.4f}"
                       f">={1 - delta - 0.02:.2f}")
        passed &= lower >= 1 - delta - 0.02
    elapsed = time.perf_counter() - t0
    passed = passed and elapsed < 30
    _line(7, passed, "; ".join(details), elapsed, 30)
    assert elapsed < 30
    assert passed


def test_criterion_08_excitation_certificates():
    """Lemma formulas exact; tail checks pass at N=1e5; degenerate map fails."""
    t0 = time.perf_counter()
    # (a) closed-form hand cases
    c_a = certificate_from_moments(MomentCertificate(2.0, 0.0), all_space())
    c_b = certificate_from_moments(MomentCertificate(1.0, 3.0), all_space())
    hand_ok = (c_a.c_pe == 1.0 and c_a.p_pe == 0.25
               and c_b.c_pe == 0.25 and c_b.p_pe == 1.0 / 16.0)
    # (b) built-in certificates verified by direct tail sampling
    pwa = pwa_spec(3500.0)
    cert_pwa = _pwa_cert(3500.0)
    rep_pwa = mc_excitation_probability(pwa, cert_pwa.region, cert_pwa,
                                        n_samples=100_000, num_directions=64,
                                        seed=31)
    di = double_integrator_spec()
    cert_di = certificate_from_moments(
        double_integrator_certificate(1.0, 0.5, 1.0), all_space())
    rep_di = mc_excitation_probability(di, cert_di.region, cert_di,
                                       n_samples=100_000, num_directions=64,
                                       seed=32)
    # (c) a feature map that is identically zero cannot be excited
    from rexid.excitation import ExcitationCertificate, ball
    from rexid.growth import identity
    from rexid.noise import GAUSSIAN, UNIFORM, NoiseModel
    from rexid.systems import GrowthCertificate, PolynomialMap, generic_spec

    degenerate = generic_spec(
        n=1, m=1, d=1,
        f_map=PolynomialMap(1, 1, 1, ()),
        psi_map=PolynomialMap(1, 1, 1, ()),
        theta_star=np.zeros((1, 1)), gamma=1e-2,
        process_noise=NoiseModel(GAUSSIAN, 0.1, 1),
        exploratory_noise=NoiseModel(UNIFORM, 1.0, 1),
        growth=GrowthCertificate(identity(), identity(), identity(), identity(),
                                 identity(), identity(), identity()),
    )
    cert_deg = ExcitationCertificate(ball([0.0], 1.0), c_pe=1e-6, p_pe=1e-3)
    rep_deg = mc_excitation_probability(degenerate, cert_deg.region, cert_deg,
                                        n_samples=20_000, seed=33)
    elapsed = time.perf_counter() - t0
    passed = (hand_ok and rep_pwa.passed and rep_di.passed
              and not rep_deg.passed and elapsed < 120)
    detail = (f"hand cases exact={hand_ok}; PWA tail pass={rep_pwa.passed} "
              f"(min={rep_pwa.min_observed_tail:.3f}>= {cert_pwa.p_pe:.4f}); "
              f"integrator tail pass={rep_di.passed} "
              f"(min={rep_di.min_observed_tail:.3f}>= {cert_di.p_pe:.5f}); "
              f"degenerate fails={not rep_deg.passed}")
    _line(8, passed, detail, elapsed, 120)
    assert elapsed < 120
    assert hand_ok and rep_pwa.passed and rep_di.passed and not rep_deg.passed


def test_criterion_09_rate_envelope():
    """O(sqrt(ln t / t)) envelope bounded and e decreasing over decades."""
    t0 = time.perf_counter()
    cfg = default_example2_config()
    spec = cfg.build_spec()
    cert = cfg.build_certificate(spec)
    rep = rate_envelope(spec, cert, DELTA, [1.0, 0.0], t_range=(1e3, 1e6))
    from rexid.bounds import error_bound

    e_vals = [float(error_bound(spec, cert, t, DELTA, [1.0, 0.0]))
              for t in (100, 10_000, 1_000_000)]
    mono_ok = e_vals[2] < e_vals[1] < e_vals[0]
    elapsed = time.perf_counter() - t0
    passed = rep.trend <= 1.1 and mono_ok and elapsed < 5
    detail = (f"trend={rep.trend:.3f}<=1.1; e(1e2)={e_vals[0]:.1f} > "
              f"e(1e4)={e_vals[1]:.1f} > e(1e6)={e_vals[2]:.1f}")
    _line(9, passed, detail, elapsed, 5)
    assert elapsed < 5
    assert rep.trend <= 1.1
    assert mono_ok


def test_criterion_10_double_integrator_growth():
    """Trajectory growth bound at every step, feedback and zero policies."""
    t0 = time.perf_counter()
    violations = 0
    overflows = 0
    from rexid.systems import SimulationOverflow

    for policy in ("feedback", "zero"):
        spec = double_integrator_spec(inner_policy=policy)
        for _, run in iter_paths(spec, [1.0, 0.0], 2000, 909, 50):
            if isinstance(run, SimulationOverflow):
                overflows += 1
                continue
            violations += check_growth_invariant(spec, run, [1.0, 0.0])
    elapsed = time.perf_counter() - t0
    passed = violations == 0 and overflows == 0 and elapsed < 30
    _line(10, passed,
          f"violations={violations}, overflows={overflows} over 100 paths x 2000 steps",
          elapsed, 30)
    assert elapsed < 30
    assert violations == 0 and overflows == 0


def test_criterion_11_bmsb_probe():
    """Forced excursion above the threshold starves the small-ball average."""
    t0 = time.perf_counter()
    report = bmsb_failure_probe(
        xbar_threshold=3500.0, sigma_w=SQRT01, ubar=1.0,
        k=3, gamma_sb=0.1, p=0.1, j=2,
        n_outer=200, n_inner=1000, seed=2468, forced_start=3600.0)
    elapsed = time.perf_counter() - t0
    passed = (report.outer_wilson_lower >= 0.9
              and report.mean_inner_average < 0.1 and elapsed < 60)
    detail = (f"P(inner avg < 0.1) wilson lower={report.outer_wilson_lower:.3f}>=0.9; "
              f"mean inner small-ball avg={report.mean_inner_average:.4f}")
    _line(11, passed, detail, elapsed, 60)
    assert elapsed < 60
    assert report.outer_wilson_lower >= 0.9
    assert report.mean_inner_average < 0.1
