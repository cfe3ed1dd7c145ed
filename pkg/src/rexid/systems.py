"""Closed-loop simulation and regularised least-squares estimation.

The plant is

    X(t+1) = f(X(t), U(t)) + theta_star^T psi(X(t), U(t)) + W(t+1)
    U(t)   = alpha(X(t), S(t), theta_hat(t-1)),   theta_hat(-1) = theta_hat(0) = vartheta0

and the estimator is ridge regression on the one-step residuals,

    theta_hat(t) = G(t)^{-1} sum_{s<=t} Z(s) (X(s) - f(X(s-1), U(s-1)))^T,
    G(t) = sum_{s<=t} Z(s) Z(s)^T + gamma I,   Z(s) = psi(X(s-1), U(s-1)).

``simulate`` runs the loop with a recursive rank-one estimator (periodically
refactorised); ``rls_direct`` solves the normal equations from scratch and is
kept as the test oracle for the recursion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import hypot, sqrt
from typing import Callable

import numpy as np

from .growth import GrowthFn, identity, monomial
from .noise import GAUSSIAN, UNIFORM, NoiseModel, substream

__all__ = [
    "GrowthCertificate",
    "SystemSpec",
    "EstimationRun",
    "SimulationOverflow",
    "RecursiveLeastSquares",
    "simulate",
    "draw_noise",
    "rls_direct",
    "gram_extremes",
    "spectral_error",
    "project_frobenius_ball",
    "batch_projected_features",
    "pwa_spec",
    "double_integrator_spec",
    "double_integrator_growth_bound",
    "PolyTerm",
    "PolynomialMap",
    "generic_spec",
]

# Simulation aborts once any |X(t)| grows past this (unstable plants can
# overflow float64 under adversarial configs).
STATE_OVERFLOW_LIMIT = 1e150

REFACTOR_EVERY = 512  # rank-one inverse updates between full refactorisations


class SimulationOverflow(RuntimeError):
    """Raised when a state exceeds the overflow limit; carries the partial run."""

    def __init__(self, message: str, partial_run: "EstimationRun"):
        super().__init__(message)
        self.partial_run = partial_run


@dataclass(frozen=True)
class GrowthCertificate:
    """Instance of the trajectory growth bound

        |x(t)| <= chi1(t) + chi2(|x0|) + chi3(sum sigma1(|u|))
                  + chi4(sum sigma2(|w|)) + c1,

    plus the feature bound |psi(x,u)| <= chi5(|(x,u)|).  Class requirements
    (chi1, chi3, sigma2 in Kinf 1-SE; chi4 in Kinf 2-SE; chi2, sigma1 in Kinf)
    are validated at construction.
    """

    chi1: GrowthFn
    chi2: GrowthFn
    chi3: GrowthFn
    chi4: GrowthFn
    chi5: GrowthFn
    sigma1: GrowthFn
    sigma2: GrowthFn
    c1: float = 0.0

    def __post_init__(self):
        if self.c1 < 0:
            raise ValueError("c1 must be >= 0")
        for name, fn, need_1se, need_2se in (
            ("chi1", self.chi1, True, False),
            ("chi2", self.chi2, False, False),
            ("chi3", self.chi3, True, False),
            ("chi4", self.chi4, False, True),
            ("sigma1", self.sigma1, False, False),
            ("sigma2", self.sigma2, True, False),
        ):
            flags = fn.classify()
            if not flags.is_Kinf:
                raise ValueError(f"{name} must be class K-infinity")
            if need_1se and not flags.is_1SE:
                raise ValueError(f"{name} must be 1-SE")
            if need_2se and not flags.is_2SE:
                raise ValueError(f"{name} must be 2-SE")
        if not self.chi5.classify().is_APB:
            raise ValueError("chi5 must be APB")

    @property
    def is_apb(self) -> bool:
        """True when chi1, chi3, chi4, sigma2 are all APB (polynomial growth)."""
        return all(f.classify().is_APB for f in (self.chi1, self.chi3, self.chi4, self.sigma2))

    @property
    def members(self) -> tuple:
        return (self.chi1, self.chi2, self.chi3, self.chi4, self.chi5,
                self.sigma1, self.sigma2)

    @property
    def has_unverified_members(self) -> bool:
        """True when any comparison function carries self-declared (rather
        than analytically derived) class flags; reports surface this."""
        return any(getattr(f, "verified", True) is False for f in self.members)


@dataclass(frozen=True)
class SystemSpec:
    """Full closed-loop problem instance.

    ``f``, ``psi``, ``alpha`` take/return 1-D numpy arrays; ``alpha`` receives
    the previous estimate as a ``d x n`` array and must return controls with
    |u| <= u_max (built-in families guarantee this by construction).
    """

    n: int
    m: int
    d: int
    q: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    alpha: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    theta_star: np.ndarray
    u_max: float
    process_noise: NoiseModel
    exploratory_noise: NoiseModel
    gamma: float
    vartheta0: np.ndarray
    growth: GrowthCertificate
    family: str = "generic"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float).reshape(self.d, self.n)
        v0 = np.asarray(self.vartheta0, dtype=float).reshape(self.d, self.n)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "vartheta0", v0)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.u_max < 0:
            raise ValueError("u_max must be >= 0")
        if self.process_noise.dim != self.n:
            raise ValueError("process noise dimension must match the state dimension")

    @property
    def sigma_w(self) -> float:
        """Sub-Gaussian variance-proxy scale of the process noise."""
        return sqrt(self.process_noise.variance_proxy)

    def probe_control_constraint(self, rng: np.random.Generator, trials: int = 256) -> float:
        """Randomised spot-check of |alpha| <= u_max; returns the max |u| seen."""
        worst = 0.0
        for _ in range(trials):
            x = rng.standard_t(3, size=self.n) * 10.0**rng.integers(0, 4)
            s = self.exploratory_noise.sample(rng)
            theta = rng.normal(size=(self.d, self.n)) * 10.0**rng.integers(0, 3)
            u = np.atleast_1d(np.asarray(self.alpha(x, s, theta), dtype=float))
            worst = max(worst, float(np.linalg.norm(u)))
        return worst


@dataclass
class EstimationRun:
    """Per-trajectory record of a closed-loop simulation.

    Index conventions match the recursion: ``states[t]`` is X(t) for
    t = 0..T; row ``t-1`` of ``controls``/``regressors``/``estimates``/
    ``errors``/``gram_*`` holds U(t-1), Z(t), theta_hat(t), |theta_hat(t) -
    theta_star| and the Gramian eigenvalue extremes at time t = 1..T.
    """

    states: np.ndarray
    controls: np.ndarray
    regressors: np.ndarray
    estimates: np.ndarray
    errors: np.ndarray
    gram_min_eig: np.ndarray
    gram_max_eig: np.ndarray
    seed: int | None = None

    @property
    def horizon(self) -> int:
        return len(self.errors)

    def to_csv_rows(self):
        """Rows (t, x_1..x_n, u_1..u_m, err, gmin, gmax) for t = 1..T."""
        for t in range(1, self.horizon + 1):
            yield (
                t,
                *self.states[t],
                *self.controls[t - 1],
                self.errors[t - 1],
                self.gram_min_eig[t - 1],
                self.gram_max_eig[t - 1],
            )


def spectral_error(theta_hat: np.ndarray, theta_star: np.ndarray) -> float:
    """Largest singular value of the estimate error matrix."""
    diff = np.asarray(theta_hat, dtype=float) - np.asarray(theta_star, dtype=float)
    return float(np.linalg.norm(diff, 2))


def gram_extremes(gram: np.ndarray) -> tuple[float, float]:
    """(min, max) eigenvalue of a symmetric positive-definite Gramian."""
    vals = np.linalg.eigvalsh(np.asarray(gram, dtype=float))
    return float(vals[0]), float(vals[-1])


def project_frobenius_ball(theta: np.ndarray, radius: float) -> np.ndarray:
    """Nearest point of the Frobenius ball of given radius (single-valued)."""
    nrm = float(np.linalg.norm(theta))
    if nrm <= radius or nrm == 0.0:
        return theta
    return theta * (radius / nrm)


class RecursiveLeastSquares:
    """Rank-one recursive solver for the regularised normal equations.

    Maintains G(t), its inverse P(t) via Sherman-Morrison updates, and the
    cross-moment ``b(t) = sum Z(s) y(s)^T``.  P drifts under long horizons, so
    it is refactorised from G every ``refactor_every`` updates.
    """

    def __init__(self, d: int, n: int, gamma: float, vartheta0: np.ndarray,
                 refactor_every: int = REFACTOR_EVERY):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.d = d
        self.n = n
        self.gamma = gamma
        self.vartheta0 = np.asarray(vartheta0, dtype=float).reshape(d, n).copy()
        self.gram = gamma * np.eye(d)
        self.inv_gram = np.eye(d) / gamma
        self.cross = np.zeros((d, n))
        self.count = 0
        self.refactor_every = refactor_every

    @property
    def estimate(self) -> np.ndarray:
        if self.count == 0:
            return self.vartheta0.copy()
        return self._solve()

    def _solve(self) -> np.ndarray:
        # one step of iterative refinement keeps the rank-one recursion within
        # oracle tolerance even on badly conditioned Gramians
        theta = self.inv_gram @ self.cross
        residual = self.cross - self.gram @ theta
        return theta + self.inv_gram @ residual

    def update(self, regressor: np.ndarray, target: np.ndarray) -> np.ndarray:
        """Fold in one (Z(t), X(t) - f(X(t-1),U(t-1))) pair; returns theta_hat(t)."""
        z = np.asarray(regressor, dtype=float).reshape(self.d)
        y = np.asarray(target, dtype=float).reshape(self.n)
        self.gram += np.outer(z, z)
        pz = self.inv_gram @ z
        self.inv_gram -= np.outer(pz, pz) / (1.0 + z @ pz)
        self.cross += np.outer(z, y)
        self.count += 1
        if self.count % self.refactor_every == 0:
            self.inv_gram = np.linalg.inv(self.gram)
        return self._solve()

    def gram_extremes(self) -> tuple[float, float]:
        return gram_extremes(self.gram)


def rls_direct(regressors, targets, gamma: float, vartheta0) -> np.ndarray:
    """Exact minimiser of the ridge objective via a fresh linear solve.

    With no data the estimate is ``vartheta0``.  This is the oracle path the
    recursive estimator is tested against.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    v0 = np.asarray(vartheta0, dtype=float)
    Z = np.asarray(regressors, dtype=float)
    if Z.size == 0:
        return v0.copy()
    Z = Z.reshape(len(Z), -1)
    Y = np.asarray(targets, dtype=float).reshape(len(Z), -1)
    d = Z.shape[1]
    gram = Z.T @ Z + gamma * np.eye(d)
    return np.linalg.solve(gram, Z.T @ Y)


def draw_noise(spec: SystemSpec, T: int, seed: int,
               stream_index: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-trajectory noise W(1..T), S(0..T-1) from substream (seed, index).

    This is exactly what :func:`simulate` consumes, so conditioning checks can
    re-derive a path's noise without storing it.
    """
    rng = substream(seed, stream_index)
    W = spec.process_noise.sample(rng, T)
    S = spec.exploratory_noise.sample(rng, T)
    return W, S


def simulate(spec: SystemSpec, x0, T: int, seed: int, stream_index: int = 0,
             noise_override=None) -> EstimationRun:
    """Run the closed loop for ``T`` steps; deterministic given the stream key.

    Monte Carlo callers pass one master ``seed`` and a per-trajectory
    ``stream_index``, which keeps results independent of worker scheduling.
    ``noise_override=(W, S)`` substitutes explicit noise sequences (shapes
    ``(T, n)`` and ``(T, q)``); used for hand-computed trajectory checks.
    Raises :class:`SimulationOverflow` when the state leaves the float range.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (spec.n,):
        raise ValueError(f"x0 must have shape ({spec.n},)")
    if noise_override is not None:
        W, S = noise_override
        W = np.asarray(W, dtype=float).reshape(T, spec.n)
        S = np.asarray(S, dtype=float).reshape(T, spec.q)
    else:
        W, S = draw_noise(spec, T, seed, stream_index)
    if spec.family == "pwa" and noise_override is None:
        return _simulate_pwa_fast(spec, float(x0[0]), T, W[:, 0], S[:, 0], seed)
    return _simulate_generic(spec, x0, T, W, S, seed)


def _batch_spectral_errors(estimates: np.ndarray, theta_star: np.ndarray) -> np.ndarray:
    svals = np.linalg.svd(estimates - theta_star[None, :, :], compute_uv=False)
    return svals[:, 0]


def _simulate_generic(spec: SystemSpec, x0, T, W, S, seed) -> EstimationRun:
    n, m, d = spec.n, spec.m, spec.d
    states = np.empty((T + 1, n))
    controls = np.empty((T, m))
    regressors = np.empty((T, d))
    estimates = np.empty((T, d, n))
    grams = np.empty((T, d, d))
    states[0] = x0

    rls = RecursiveLeastSquares(d, n, spec.gamma, spec.vartheta0)
    # Controls at step t use theta_hat(t-1); theta_hat(-1) = theta_hat(0) = vartheta0,
    # so the estimate computed at step t reaches the controller two steps later.
    theta_ctrl = spec.vartheta0    # theta_hat(t-1) for the current step
    theta_pending = spec.vartheta0  # theta_hat(t), promoted next step
    theta_star = spec.theta_star
    x = x0

    def finalize(upto: int) -> EstimationRun:
        eigs = np.linalg.eigvalsh(grams[:upto])
        return EstimationRun(
            states[: upto + 1], controls[:upto], regressors[:upto],
            estimates[:upto], _batch_spectral_errors(estimates[:upto], theta_star),
            eigs[:, 0], eigs[:, -1], seed=seed,
        )

    for t in range(T):
        u = np.atleast_1d(np.asarray(spec.alpha(x, S[t], theta_ctrl), dtype=float))
        z = np.asarray(spec.psi(x, u), dtype=float).reshape(d)
        fx = np.atleast_1d(np.asarray(spec.f(x, u), dtype=float))
        x_next = fx + theta_star.T @ z + W[t]
        controls[t] = u
        regressors[t] = z
        states[t + 1] = x_next
        theta = rls.update(z, x_next - fx)
        estimates[t] = theta
        grams[t] = rls.gram
        if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next)) > STATE_OVERFLOW_LIMIT:
            raise SimulationOverflow(
                f"state magnitude exceeded {STATE_OVERFLOW_LIMIT:g} at t={t + 1}",
                finalize(t + 1),
            )
        theta_ctrl = theta_pending
        theta_pending = theta
        x = x_next
    return finalize(T)


def _simulate_pwa_fast(spec: SystemSpec, x0: float, T: int,
                       W: np.ndarray, S: np.ndarray, seed) -> EstimationRun:
    """Scalar kernel for the built-in PWA family (n=1, d=2, random controls).

    Same recursion as the generic engine, written with scalar arithmetic; the
    two paths agree to floating-point reassociation error (tested).
    """
    xbar_th = spec.params["xbar_threshold"]
    th1 = float(spec.theta_star[0, 0])
    th2 = float(spec.theta_star[1, 0])
    gamma = spec.gamma
    states = np.empty(T + 1)
    controls = np.empty(T)
    regressors = np.empty((T, 2))
    estimates = np.empty((T, 2, 1))
    errors = np.empty(T)
    gmin = np.empty(T)
    gmax = np.empty(T)
    states[0] = x = x0

    g00 = g11 = gamma
    g01 = 0.0
    p00 = p11 = 1.0 / gamma
    p01 = 0.0
    b0 = b1 = 0.0
    refactor = REFACTOR_EVERY
    for t in range(T):
        u = S[t]
        z0 = x
        z1 = u if x <= xbar_th else 0.0
        x_next = 1.0 + th1 * z0 + th2 * z1 + W[t]
        y = x_next - 1.0
        g00 += z0 * z0
        g01 += z0 * z1
        g11 += z1 * z1
        pz0 = p00 * z0 + p01 * z1
        pz1 = p01 * z0 + p11 * z1
        denom = 1.0 + z0 * pz0 + z1 * pz1
        p00 -= pz0 * pz0 / denom
        p01 -= pz0 * pz1 / denom
        p11 -= pz1 * pz1 / denom
        b0 += z0 * y
        b1 += z1 * y
        if (t + 1) % refactor == 0:
            det = g00 * g11 - g01 * g01
            p00, p01, p11 = g11 / det, -g01 / det, g00 / det
        e0 = p00 * b0 + p01 * b1
        e1 = p01 * b0 + p11 * b1
        r0 = b0 - (g00 * e0 + g01 * e1)
        r1 = b1 - (g01 * e0 + g11 * e1)
        e0 += p00 * r0 + p01 * r1
        e1 += p01 * r0 + p11 * r1
        controls[t] = u
        regressors[t, 0] = z0
        regressors[t, 1] = z1
        states[t + 1] = x_next
        estimates[t, 0, 0] = e0
        estimates[t, 1, 0] = e1
        errors[t] = hypot(e0 - th1, e1 - th2)
        tr_half = 0.5 * (g00 + g11)
        disc = sqrt(max(tr_half * tr_half - (g00 * g11 - g01 * g01), 0.0))
        gmin[t] = tr_half - disc
        gmax[t] = tr_half + disc
        if not np.isfinite(x_next) or abs(x_next) > STATE_OVERFLOW_LIMIT:
            partial = EstimationRun(states[: t + 2].reshape(-1, 1),
                                    controls[: t + 1].reshape(-1, 1),
                                    regressors[: t + 1], estimates[: t + 1],
                                    errors[: t + 1], gmin[: t + 1], gmax[: t + 1],
                                    seed=seed)
            raise SimulationOverflow(
                f"state magnitude exceeded {STATE_OVERFLOW_LIMIT:g} at t={t + 1}", partial
            )
        x = x_next
    return EstimationRun(states.reshape(-1, 1), controls.reshape(-1, 1),
                         regressors, estimates, errors, gmin, gmax, seed=seed)


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------

def pwa_spec(xbar_threshold: float = 3500.0, ubar: float = 1.0,
             sigma_w: float = sqrt(0.1), gamma: float = 1e-4,
             vartheta0=None) -> SystemSpec:
    """Scalar piecewise-affine plant with purely random controls.

        f(x,u) = 1,  psi(x,u) = [x, 1_{x <= xbar_threshold} * u],
        theta_star = [1, 0.1]^T,  alpha(x,s,theta) = s,  s ~ Uniform[-ubar, ubar].

    The feature in the control direction dies once the state passes the
    threshold, so the plant is informative only on a region of the state
    space.  ``xbar_threshold = inf`` gives the globally excited variant.
    """
    xbar_threshold = float(xbar_threshold)

    def f(x, u):
        return np.array([1.0])

    def psi(x, u):
        return np.array([x[0], u[0] if x[0] <= xbar_threshold else 0.0])

    def alpha(x, s, theta):
        return np.array([s[0]])

    growth = GrowthCertificate(
        chi1=identity(), chi2=identity(), chi3=identity().scale(0.1),
        chi4=identity(), chi5=identity(), sigma1=identity(), sigma2=identity(),
        c1=0.0,
    )
    return SystemSpec(
        n=1, m=1, d=2, q=1, f=f, psi=psi, alpha=alpha,
        theta_star=np.array([[1.0], [0.1]]),
        u_max=ubar,
        process_noise=NoiseModel(GAUSSIAN, sigma_w, 1),
        exploratory_noise=NoiseModel(UNIFORM, ubar, 1),
        gamma=gamma,
        vartheta0=np.zeros((2, 1)) if vartheta0 is None else vartheta0,
        growth=growth,
        family="pwa",
        params={"xbar_threshold": xbar_threshold, "ubar": ubar, "sigma_w": sigma_w},
    )


def _double_integrator_feedback(ubar1: float, proj_radius: float):
    """Default inner policy: one-step least-squares pushback from the current
    (ball-projected) estimate, saturated at ubar1.

    Writing the projected estimate as thetahat^T = [Ahat | Bhat], the control
    minimising |Ahat x + Bhat u|^2 + |u|^2 is used, clipped to [-ubar1, ubar1].
    Any Borel-measurable policy bounded by ubar1 is admissible here.
    """

    def alpha2(x, theta):
        th = project_frobenius_ball(theta, proj_radius)
        A_hat = th[:2, :].T  # (2, 2)
        B_hat = th[2, :]     # (2,)
        u = -float(B_hat @ (A_hat @ x)) / (float(B_hat @ B_hat) + 1.0)
        return min(max(u, -ubar1), ubar1)

    return alpha2


def double_integrator_spec(sigma_w: float = 1.0, ubar1: float = 0.5,
                           ubar2: float = 1.0, gamma: float = 1e-4,
                           inner_policy: Callable | str = "feedback",
                           proj_radius: float = 10.0,
                           vartheta0=None) -> SystemSpec:
    """Stochastic double integrator under a bounded (not necessarily
    stabilising) inner policy plus uniform dither.

        X(t+1) = A X(t) + B U(t) + W(t+1),  A = [[1,0],[1,1]], B = [1,0]^T,
        psi(x,u) = [x1, x2, u],  theta_star^T = [A | B],
        U(t) = alpha2(X(t), theta_hat(t-1)) + S(t),  |alpha2| <= ubar1,
        S ~ Uniform[-ubar2, ubar2].

    ``inner_policy`` may be "feedback" (default saturated pushback), "zero"
    (alpha2 = 0), or any callable (x, theta) -> scalar bounded by ubar1.
    """
    if inner_policy == "feedback":
        alpha2 = _double_integrator_feedback(ubar1, proj_radius)
        policy_kind = "feedback"
    elif inner_policy == "zero":
        alpha2 = lambda x, theta: 0.0
        policy_kind = "zero"
    else:
        alpha2 = inner_policy
        policy_kind = "custom"

    def f(x, u):
        return np.zeros(2)

    def psi(x, u):
        return np.array([x[0], x[1], u[0]])

    def alpha(x, s, theta):
        return np.array([alpha2(x, theta) + s[0]])

    growth = GrowthCertificate(
        chi1=monomial(5.0, 2.0), chi2=monomial(2.5, 2.0),
        chi3=monomial(2.5, 2.0), chi4=monomial(5.0, 2.0),
        chi5=identity(), sigma1=identity(), sigma2=identity(),
        c1=2.5,
    )
    theta_star = np.array([[1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).T  # (3, 2)
    return SystemSpec(
        n=2, m=1, d=3, q=1, f=f, psi=psi, alpha=alpha,
        theta_star=theta_star,
        u_max=ubar1 + ubar2,
        process_noise=NoiseModel(GAUSSIAN, sigma_w, 2),
        exploratory_noise=NoiseModel(UNIFORM, ubar2, 1),
        gamma=gamma,
        vartheta0=np.zeros((3, 2)) if vartheta0 is None else vartheta0,
        growth=growth,
        family="double_integrator",
        params={"sigma_w": sigma_w, "ubar1": ubar1, "ubar2": ubar2,
                "inner_policy_kind": policy_kind, "proj_radius": proj_radius},
    )


def double_integrator_growth_bound(t, xi_norm, u_abs_sum, w_norm_sum):
    """Trajectory bound proved for the double integrator:

        |x(t)| <= 5|xi|^2 + 2.5 (sum |u(i)|)^2 + 5 (sum |w(i)|)^2
                  + 2.5 t^2 + 2.5
    """
    t = np.asarray(t, dtype=float)
    return (5.0 * xi_norm**2 + 2.5 * np.asarray(u_abs_sum)**2
            + 5.0 * np.asarray(w_norm_sum)**2 + 2.5 * t**2 + 2.5)


def batch_projected_features(spec: SystemSpec, x: np.ndarray, theta: np.ndarray,
                             W: np.ndarray, S: np.ndarray) -> np.ndarray | None:
    """Vectorised psi(x+W, alpha(x+W, S, theta)) for the built-in families.

    Returns an ``(N, d)`` array, or None when the family has no batch path
    (callers then fall back to the per-sample loop).
    """
    N = len(W)
    if spec.family == "pwa":
        xw = x[0] + W[:, 0]
        gate = xw <= spec.params["xbar_threshold"]
        return np.column_stack([xw, np.where(gate, S[:, 0], 0.0)])
    if spec.family == "double_integrator":
        xw = x[None, :] + W
        ubar1 = spec.params["ubar1"]
        inner = spec.params.get("inner_policy_kind", "feedback")
        if inner == "zero":
            u_fb = np.zeros(N)
        elif inner == "feedback":
            th = project_frobenius_ball(theta, spec.params.get("proj_radius", 10.0))
            A_hat = th[:2, :].T
            B_hat = th[2, :]
            u_fb = -(xw @ A_hat.T @ B_hat) / (float(B_hat @ B_hat) + 1.0)
            np.clip(u_fb, -ubar1, ubar1, out=u_fb)
        else:
            return None
        return np.column_stack([xw, u_fb + S[:, 0]])
    return None


# ---------------------------------------------------------------------------
# Generic declarative family: polynomial maps with indicator gates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyTerm:
    """One monomial ``coeff * prod x_i^{px_i} * prod u_j^{pu_j}`` feeding a
    single output coordinate, optionally gated by ``1_{x[gate_index] <= gate_threshold}``."""

    out_index: int
    coeff: float
    x_powers: tuple[int, ...]
    u_powers: tuple[int, ...]
    gate_index: int = -1
    gate_threshold: float = 0.0


@dataclass(frozen=True)
class PolynomialMap:
    """Declarative map (x, u) -> R^out_dim built from :class:`PolyTerm` rows."""

    out_dim: int
    n: int
    m: int
    terms: tuple[PolyTerm, ...]

    def __call__(self, x, u) -> np.ndarray:
        out = np.zeros(self.out_dim)
        for term in self.terms:
            if term.gate_index >= 0 and x[term.gate_index] > term.gate_threshold:
                continue
            val = term.coeff
            for i, p in enumerate(term.x_powers):
                if p:
                    val *= x[i] ** p
            for j, p in enumerate(term.u_powers):
                if p:
                    val *= u[j] ** p
            out[term.out_index] += val
        return out

    def interval_bound(self, radius: float, u_max: float) -> np.ndarray:
        """Per-output bound on |map| over |x_i| <= radius, |u_j| <= u_max.

        Conservative: gates are bounded by one and monomial signs are dropped.
        """
        hi = np.zeros(self.out_dim)
        for term in self.terms:
            val = abs(term.coeff)
            val *= radius ** sum(term.x_powers)
            val *= u_max ** sum(term.u_powers)
            hi[term.out_index] += val
        return hi


def generic_spec(n: int, m: int, d: int, f_map: PolynomialMap,
                 psi_map: PolynomialMap, theta_star, gamma: float,
                 process_noise: NoiseModel, exploratory_noise: NoiseModel,
                 growth: GrowthCertificate, feedback_gain=None,
                 u_clip: float = 0.0, vartheta0=None) -> SystemSpec:
    """Declarative family: polynomial ``f``/``psi`` and a clipped linear
    feedback plus dither policy ``u = clip(K x, u_clip) + s`` with
    ``u_max = u_clip + dither half-width``.
    """
    if f_map.out_dim != n or psi_map.out_dim != d:
        raise ValueError("polynomial map output dimensions must match n and d")
    K = np.zeros((m, n)) if feedback_gain is None else np.asarray(feedback_gain, float)
    if exploratory_noise.dim != m:
        raise ValueError("generic family requires dither dimension == control dimension")
    if u_clip < 0:
        raise ValueError("u_clip must be >= 0")

    def alpha(x, s, theta):
        fb = K @ x
        nrm = float(np.linalg.norm(fb))
        if nrm > u_clip:
            fb = fb * (u_clip / nrm) if nrm > 0 else fb
        return fb + s

    u_max = u_clip + exploratory_noise.scale * sqrt(m)
    return SystemSpec(
        n=n, m=m, d=d, q=exploratory_noise.dim,
        f=f_map, psi=psi_map, alpha=alpha,
        theta_star=theta_star, u_max=u_max,
        process_noise=process_noise, exploratory_noise=exploratory_noise,
        gamma=gamma,
        vartheta0=np.zeros((d, n)) if vartheta0 is None else vartheta0,
        growth=growth, family="generic",
        params={"f_map": f_map, "psi_map": psi_map, "u_clip": u_clip},
    )
