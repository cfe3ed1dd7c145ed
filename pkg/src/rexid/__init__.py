"""rexid: closed-loop identification of unstable stochastic nonlinear systems.

Simulates linearly parameterised plants under bounded policies, runs
regularised least-squares estimation, certifies regional/global excitation,
and evaluates the full non-asymptotic error-bound pipeline (noise, state and
regressor envelopes, burn-in and excited times, error bounds and their
convergence-rate envelope), with Monte Carlo verification throughout.
"""
from .bounds import (
    BoundProfile,
    BurnInResult,
    ImprovementConditionViolated,
    RateReport,
    XNat,
    burn_in_time,
    error_bound,
    excited_time,
    extended_error_bound,
    gramian_upper_beta,
    rate_envelope,
    reachable_containment,
    regressor_bound_zbar,
    state_bound_xbar,
)
from .config import ExperimentConfig, load_config
from .excitation import (
    ExcitationCertificate,
    MomentCertificate,
    RegionDescriptor,
    all_space,
    ball,
    bmsb_failure_probe,
    certificate_from_moments,
    double_integrator_certificate,
    half_line,
    mc_excitation_probability,
    mc_verify_moments,
    pwa_moment_certificate,
)
from .experiments import (
    CoverageReport,
    coverage_experiment,
    reproduce_example1,
    reproduce_example2,
)
from .growth import ClassFlags, DeclaredGrowthFn, GrowthFn, constant, identity, monomial
from .noise import NoiseModel, noise_bound_wbar, substream
from .systems import (
    EstimationRun,
    GrowthCertificate,
    RecursiveLeastSquares,
    SimulationOverflow,
    SystemSpec,
    double_integrator_spec,
    draw_noise,
    gram_extremes,
    pwa_spec,
    rls_direct,
    simulate,
    spectral_error,
)

__version__ = "0.1.0"
