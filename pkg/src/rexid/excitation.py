"""Excitation certificates: closed forms, the moment route, and Monte Carlo checks.

A region X of the state space is *exciting* for the pair (psi, alpha) under
noise laws (mu_w, mu_s) with constants (c_PE, p_PE) when, for every parameter
theta, state x in X and unit direction zeta,

    P( |zeta^T psi(x + W, alpha(x + W, S, theta))|^2 >= c_PE ) >= p_PE.

Trajectories whose one-step predicted state stays inside such a region
generate regressors whose Gramian minimum eigenvalue grows linearly, which is
what the error-bound pipeline in :mod:`rexid.bounds` consumes.

A convenient sufficient route bounds the first moment below by ``c_PE1`` and
the variance above by ``c_PE2``; Paley-Zygmund then yields

    c_PE = c_PE1^2 / 4,    p_PE = (1/4) / (c_PE2 / c_PE1^2 + 1).

Closed-form moment constants are provided for both built-in families, and a
seed-deterministic Monte Carlo verifier covers everything else.  The direct
tail condition cannot be *proved* by sampling (it quantifies over every theta
and every state in the region); the verifiers therefore label their verdicts
as sampled evidence.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import erf, exp, inf, pi, sqrt
from typing import Callable

import numpy as np

from .noise import substream
from .report import wilson_lower
from .systems import SystemSpec, project_frobenius_ball

__all__ = [
    "RegionDescriptor",
    "half_line",
    "ball",
    "all_space",
    "MomentCertificate",
    "ExcitationCertificate",
    "certificate_from_moments",
    "pwa_moment_certificate",
    "double_integrator_certificate",
    "mc_verify_moments",
    "mc_excitation_probability",
    "bmsb_failure_probe",
    "normal_cdf",
    "unit_sphere_directions",
]


def normal_cdf(z: float) -> float:
    """Standard normal CDF via the C library erf (|error| well under 1e-12)."""
    if z == inf:
        return 1.0
    if z == -inf:
        return 0.0
    return 0.5 * (1.0 + erf(z / sqrt(2.0)))


def normal_pdf(z: float) -> float:
    if z in (inf, -inf):
        return 0.0
    return exp(-0.5 * z * z) / sqrt(2.0 * pi)


@dataclass(frozen=True)
class RegionDescriptor:
    """State-space region with a total membership test and a member sampler.

    Kinds: ``half_line`` (scalar states x <= upper), ``ball`` (|x - center|
    <= radius, radius may be inf), ``all``, and ``predicate`` (user-supplied
    contains/sampler pair).
    """

    kind: str
    upper: float = inf
    center: np.ndarray | None = None
    radius: float = inf
    contains_fn: Callable[[np.ndarray], bool] | None = None
    sampler_fn: Callable[[np.random.Generator, int], np.ndarray] | None = None

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "all":
            return True
        if self.kind == "half_line":
            return bool(x[0] <= self.upper)
        if self.kind == "ball":
            c = np.zeros_like(x) if self.center is None else self.center
            return bool(np.linalg.norm(x - c) <= self.radius)
        return bool(self.contains_fn(x))

    def sample(self, rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
        """``count`` representative member states, shape ``(count, dim)``."""
        if self.kind == "half_line":
            # the boundary, two interior probes, then spread below the bound
            hi = self.upper if np.isfinite(self.upper) else 1e4
            pts = np.concatenate([
                np.array([hi, min(0.0, hi - 1.0), hi - 1.0]),
                hi - np.abs(rng.normal(0.0, max(abs(hi), 1.0) / 3.0, size=max(count - 3, 0))),
            ])[:count]
            return pts.reshape(-1, 1)
        if self.kind in ("all", "ball"):
            c = np.zeros(dim) if self.center is None else np.asarray(self.center, dtype=float)
            r = self.radius if np.isfinite(self.radius) else 1e3
            raw = rng.normal(size=(count, dim))
            raw[0] = 0.0  # always probe the centre
            nrm = np.linalg.norm(raw, axis=1, keepdims=True)
            nrm[nrm == 0] = 1.0
            radii = r * rng.uniform(0, 1, size=(count, 1)) ** (1.0 / dim)
            return c + raw / nrm * radii
        out = self.sampler_fn(rng, count)
        return np.asarray(out, dtype=float).reshape(count, dim)

    def describe(self) -> str:
        if self.kind == "half_line":
            return f"(-inf, {self.upper:g}]"
        if self.kind == "all":
            return "all of R^n"
        if self.kind == "ball":
            return f"ball(radius={self.radius:g})"
        return "predicate region"


def half_line(upper: float) -> RegionDescriptor:
    return RegionDescriptor(kind="half_line", upper=float(upper))


def ball(center, radius: float) -> RegionDescriptor:
    return RegionDescriptor(kind="ball", center=np.asarray(center, dtype=float),
                            radius=float(radius))


def all_space() -> RegionDescriptor:
    return RegionDescriptor(kind="all")


@dataclass(frozen=True)
class MomentCertificate:
    """First-moment lower bound and variance upper bound of |zeta^T psi(...)|."""

    c_pe1: float
    c_pe2: float
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.c_pe1 > 0:
            raise ValueError("c_pe1 must be positive")
        if self.c_pe2 < 0:
            raise ValueError("c_pe2 must be >= 0")


@dataclass(frozen=True)
class ExcitationCertificate:
    """Region plus tail constants (c_PE, p_PE) and how they were obtained."""

    region: RegionDescriptor
    c_pe: float
    p_pe: float
    provenance: str = "closed-form-example"
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.c_pe > 0:
            raise ValueError("c_pe must be positive")
        if not 0.0 < self.p_pe <= 1.0:
            raise ValueError("p_pe must be in (0, 1]")

    @property
    def is_global(self) -> bool:
        return self.region.kind == "all"


def certificate_from_moments(mc: MomentCertificate,
                             region: RegionDescriptor) -> ExcitationCertificate:
    """Paley-Zygmund route from moment constants to (c_PE, p_PE)."""
    c_pe = 0.25 * mc.c_pe1**2
    p_pe = 0.25 / (mc.c_pe2 / mc.c_pe1**2 + 1.0)
    return ExcitationCertificate(region=region, c_pe=c_pe, p_pe=p_pe,
                                 provenance="from-moments", notes=mc.notes)


def pwa_moment_certificate(xbar_threshold: float, sigma_w: float,
                           ubar: float) -> MomentCertificate:
    """Closed-form moment constants for the PWA family on (-inf, 0.9 xbar].

    With z = 0.1 xbar / sigma_w and Phi/phi the standard normal cdf/pdf:

        b_w = sigma_w/sqrt(2 pi) * (1 - phi(z))/(Phi(z) - 1/2) * (Phi(z) - Phi(-z))
        b_s = (ubar/2) * (Phi(z) - Phi(-z))
        c_PE1 = b_w b_s / sqrt(b_w^2 + b_s^2)
        c_PE2 = max(sigma_w^2, ubar^2 / 3)

    ``xbar_threshold=inf`` gives the global limits b_w = sigma_w sqrt(2/pi),
    b_s = ubar/2.
    """
    if not (sigma_w > 0 and ubar > 0 and xbar_threshold > 0):
        raise ValueError("all parameters must be positive")
    z = 0.1 * xbar_threshold / sigma_w
    cdf_gap = normal_cdf(z) - normal_cdf(-z)
    if z == inf:
        ratio = 2.0  # limit of (1 - phi(z)) / (Phi(z) - 1/2)
    else:
        ratio = (1.0 - normal_pdf(z)) / (normal_cdf(z) - 0.5)
    b_w = sigma_w / sqrt(2.0 * pi) * ratio * cdf_gap
    b_s = 0.5 * ubar * cdf_gap
    c_pe1 = b_w * b_s / sqrt(b_w**2 + b_s**2)
    c_pe2 = max(sigma_w**2, ubar**2 / 3.0)
    return MomentCertificate(c_pe1=c_pe1, c_pe2=c_pe2,
                             notes=(f"b_w={b_w:.12g}", f"b_s={b_s:.12g}"))


def double_integrator_certificate(sigma_w: float, ubar1: float,
                                  ubar2: float) -> MomentCertificate:
    """Closed-form moment constants for the double integrator (global region).

        c_PE1 = min( sigma_w ubar2 / (2 (sqrt(pi) ubar1 + 2 sigma_w)),
                     sigma_w / sqrt(pi) )
        c_PE2 = 3 (max(sigma_w^2, ubar2^2/3) + 4 ubar1^2)

    The source derivation displays the variance bound in one place as
    3 max(sigma_w^2, ubar2^2/3 + 4 ubar1^2) but defines c_PE2 as above; the
    definitions differ whenever sigma_w^2 > ubar2^2/3, and the larger (safe)
    one is used here.  Both values are carried in the notes rather than
    silently reconciled.
    """
    if not (sigma_w > 0 and ubar2 > 0):
        raise ValueError("sigma_w and ubar2 must be positive")
    if ubar1 < 0:
        raise ValueError("ubar1 must be >= 0")
    c_pe1 = min(sigma_w * ubar2 / (2.0 * (sqrt(pi) * ubar1 + 2.0 * sigma_w)),
                sigma_w / sqrt(pi))
    c_pe2 = 3.0 * (max(sigma_w**2, ubar2**2 / 3.0) + 4.0 * ubar1**2)
    c_pe2_display_variant = 3.0 * max(sigma_w**2, ubar2**2 / 3.0 + 4.0 * ubar1**2)
    return MomentCertificate(
        c_pe1=c_pe1, c_pe2=c_pe2,
        notes=(f"c_pe2_display_variant={c_pe2_display_variant:.12g}",),
    )


# ---------------------------------------------------------------------------
# Monte Carlo verification
# ---------------------------------------------------------------------------

def unit_sphere_directions(d: int, count: int = 64) -> np.ndarray:
    """Deterministic low-discrepancy grid on S^{d-1} plus the coordinate axes."""
    axes = np.concatenate([np.eye(d), -np.eye(d)])
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        angles = 2.0 * pi * (np.arange(count) + 0.5) / count
        pts = np.column_stack([np.cos(angles), np.sin(angles)])
    elif d == 3:
        # Fibonacci sphere
        i = np.arange(count) + 0.5
        phi_ang = np.arccos(1.0 - 2.0 * i / count)
        theta_ang = pi * (1.0 + sqrt(5.0)) * i
        pts = np.column_stack([
            np.sin(phi_ang) * np.cos(theta_ang),
            np.sin(phi_ang) * np.sin(theta_ang),
            np.cos(phi_ang),
        ])
    else:
        # Halton-like deterministic normals, normalised
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(count, d))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return np.concatenate([pts, axes])


@dataclass(frozen=True)
class GridReport:
    """Outcome of one Monte Carlo excitation check over a (x, zeta, theta) grid.

    The verdict is sampled-theta evidence for the universally quantified
    condition, not a proof; ``notes`` records the grid and slack used.
    """

    passed: bool
    min_observed_mean: float
    max_observed_var: float = float("nan")
    min_observed_tail: float = float("nan")
    worst_point: tuple = ()
    notes: tuple[str, ...] = ()


def _theta_grid(spec: SystemSpec, num_params: int,
                rng: np.random.Generator, radius: float = 10.0) -> list[np.ndarray]:
    """Parameter probes: zero, ball samples, and a large-norm extreme point."""
    thetas = [np.zeros((spec.d, spec.n))]
    for _ in range(max(num_params - 2, 0)):
        raw = rng.normal(size=(spec.d, spec.n))
        thetas.append(project_frobenius_ball(raw * radius, radius))
    if num_params >= 2:
        thetas.append(rng.normal(size=(spec.d, spec.n)) * 1e6)
    return thetas


def _projected_features(spec: SystemSpec, x: np.ndarray, theta: np.ndarray,
                        directions: np.ndarray, n_samples: int,
                        rng: np.random.Generator) -> np.ndarray:
    """|zeta^T psi(x+W, alpha(x+W, S, theta))| for N joint draws, all directions.

    Returns shape ``(n_samples, n_directions)``.
    """
    from .systems import batch_projected_features

    W = spec.process_noise.sample(rng, n_samples)
    S = spec.exploratory_noise.sample(rng, n_samples)
    feats = batch_projected_features(spec, x, theta, W, S)
    if feats is None:
        feats = np.empty((n_samples, spec.d))
        for i in range(n_samples):
            xw = x + W[i]
            u = np.atleast_1d(np.asarray(spec.alpha(xw, S[i], theta), dtype=float))
            feats[i] = spec.psi(xw, u)
    return np.abs(feats @ directions.T)


def mc_verify_moments(spec: SystemSpec, region: RegionDescriptor,
                      claimed: MomentCertificate,
                      num_states: int = 5, num_directions: int = 64,
                      num_params: int = 3, n_samples: int = 10_000,
                      seed: int = 0, slack: float = 0.05) -> GridReport:
    """Check the claimed moment bounds on a sampled (x, zeta, theta) grid.

    Passes iff at every grid point the CLT 95% lower bound on the mean is
    >= c_PE1 (1 - slack) and the upper bound on the variance is
    <= c_PE2 (1 + slack).
    """
    rng = substream(seed, 0)
    states = region.sample(rng, num_states, spec.n)
    if len(states) == 0:
        raise ValueError("region sampler produced no states")
    directions = unit_sphere_directions(spec.d, num_directions)
    thetas = _theta_grid(spec, num_params, rng)
    z95 = 1.959963984540054
    min_mean = inf
    max_var = -inf
    worst = ()
    ok = True
    for xi, x in enumerate(states):
        for ti, theta in enumerate(thetas):
            proj = _projected_features(spec, x, theta, directions, n_samples, rng)
            means = proj.mean(axis=0)
            variances = proj.var(axis=0, ddof=1)
            mean_lo = means - z95 * np.sqrt(variances / n_samples)
            # variance upper confidence via CLT on the squared deviations
            sq = (proj - means) ** 2
            var_se = sq.std(axis=0, ddof=1) / sqrt(n_samples)
            var_hi = variances + z95 * var_se
            j = int(np.argmin(mean_lo))
            if means[j] < min_mean:
                min_mean = float(means[j])
                worst = (xi, ti, j)
            max_var = max(max_var, float(variances.max()))
            if np.any(mean_lo < claimed.c_pe1 * (1.0 - slack)) or \
               np.any(var_hi > claimed.c_pe2 * (1.0 + slack)):
                ok = False
    return GridReport(
        passed=ok, min_observed_mean=min_mean, max_observed_var=max_var,
        worst_point=worst,
        notes=(f"grid={num_states}x{len(thetas)}x{len(directions)}",
               f"N={n_samples}", f"slack={slack}",
               "sampled-theta evidence, not a proof"),
    )


def mc_excitation_probability(spec: SystemSpec, region: RegionDescriptor,
                              cert: ExcitationCertificate,
                              num_states: int = 5, num_directions: int = 64,
                              num_params: int = 3, n_samples: int = 10_000,
                              seed: int = 0) -> GridReport:
    """Check the tail condition P(|zeta^T psi|^2 >= c_PE) >= p_PE directly.

    Passes iff the Wilson 95% lower bound on the empirical tail probability
    is >= p_PE at every sampled grid point.
    """
    rng = substream(seed, 1)
    states = region.sample(rng, num_states, spec.n)
    if len(states) == 0:
        raise ValueError("region sampler produced no states")
    directions = unit_sphere_directions(spec.d, num_directions)
    thetas = _theta_grid(spec, num_params, rng)
    min_tail = inf
    worst = ()
    ok = True
    for xi, x in enumerate(states):
        for ti, theta in enumerate(thetas):
            proj = _projected_features(spec, x, theta, directions, n_samples, rng)
            hits = (proj**2 >= cert.c_pe).sum(axis=0)
            lows = np.array([wilson_lower(int(h), n_samples) for h in hits])
            j = int(np.argmin(lows))
            if lows[j] < min_tail:
                min_tail = float(lows[j])
                worst = (xi, ti, j)
            if lows[j] < cert.p_pe:
                ok = False
    return GridReport(
        passed=ok, min_observed_mean=float("nan"), min_observed_tail=min_tail,
        worst_point=worst,
        notes=(f"grid={num_states}x{len(thetas)}x{len(directions)}",
               f"N={n_samples}", f"c_pe={cert.c_pe:.6g}", f"p_pe={cert.p_pe:.6g}",
               "sampled-theta evidence, not a proof"),
    )


# ---------------------------------------------------------------------------
# Empirical probe of the block-martingale small-ball failure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BmsbProbeReport:
    """Nested Monte Carlo estimate of the small-ball failure event.

    ``outer_probability`` estimates
    P( (1/k) sum_i P(|zeta^T Z(j+i)| >= gamma_sb | F(j)) < p ) for
    zeta = [0, 1]^T; a positive estimate exhibits the mechanism that defeats
    the almost-sure small-ball requirement on this plant.
    """

    outer_probability: float
    outer_wilson_lower: float
    outer_wilson_upper: float
    mean_inner_average: float
    n_outer: int
    n_inner: int
    notes: tuple[str, ...] = ()


def bmsb_failure_probe(xbar_threshold: float, sigma_w: float, ubar: float,
                       k: int, gamma_sb: float, p: float, j: int,
                       n_outer: int = 200, n_inner: int = 500,
                       seed: int = 0, x0: float = 1.0,
                       forced_start: float | None = None) -> BmsbProbeReport:
    """Estimate the small-ball failure probability for the PWA plant.

    Outer samples draw the trajectory up to time ``j`` (or start from
    ``forced_start``, mirroring the conditioning on an excursion above the
    threshold); inner rollouts estimate the conditional probabilities
    P(|Z_2(j+i)| >= gamma_sb | X(j)) for i = 1..k.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("p must be in (0,1)")
    if k < 1 or j < 0:
        raise ValueError("k >= 1 and j >= 0 required")
    rng = substream(seed, 2)
    # outer states at time j
    if forced_start is not None:
        xj = np.full(n_outer, float(forced_start))
    else:
        xj = np.full(n_outer, x0)
        for _ in range(j):
            s = rng.uniform(-ubar, ubar, size=n_outer)
            w = rng.normal(0.0, sigma_w, size=n_outer)
            xj = 1.0 + xj + np.where(xj <= xbar_threshold, 0.1 * s, 0.0) + w

    # inner conditional rollouts, vectorised over (outer, inner); iteration i
    # covers Z(j+i+1), whose gated component is 1_{X(j+i) <= xbar} U(j+i),
    # with the same control realisation driving the transition
    inner_hits = np.zeros((n_outer, k))
    x = np.repeat(xj[:, None], n_inner, axis=1)
    for i in range(k):
        u = rng.uniform(-ubar, ubar, size=x.shape)
        z2 = np.where(x <= xbar_threshold, u, 0.0)
        inner_hits[:, i] = (np.abs(z2) >= gamma_sb).mean(axis=1)
        w = rng.normal(0.0, sigma_w, size=x.shape)
        x = 1.0 + x + 0.1 * z2 + w
    inner_avg = inner_hits.mean(axis=1)
    failures = int((inner_avg < p).sum())
    frac = failures / n_outer
    return BmsbProbeReport(
        outer_probability=frac,
        outer_wilson_lower=wilson_lower(failures, n_outer),
        outer_wilson_upper=1.0 - wilson_lower(n_outer - failures, n_outer),
        mean_inner_average=float(inner_avg.mean()),
        n_outer=n_outer, n_inner=n_inner,
        notes=(f"k={k}", f"gamma_sb={gamma_sb:g}", f"p={p:g}", f"j={j}",
               f"forced_start={forced_start}"),
    )
