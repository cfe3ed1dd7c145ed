import numpy as np
import pytest

from rexid.noise import GAUSSIAN, UNIFORM, NoiseModel
from rexid.systems import (
    GrowthCertificate,
    PolynomialMap,
    PolyTerm,
    RecursiveLeastSquares,
    SimulationOverflow,
    double_integrator_spec,
    draw_noise,
    generic_spec,
    gram_extremes,
    project_frobenius_ball,
    pwa_spec,
    rls_direct,
    simulate,
    spectral_error,
)
from rexid.growth import identity


def zeros_noise(T, n, q):
    return np.zeros((T, n)), np.zeros((T, q))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_pwa_one_step_hand_value():
    # x0 = 1, no noise, zero control: X(1) = 1 + 1*1 + 0.1*0 = 2
    run = simulate(pwa_spec(), [1.0], 1, 0, noise_override=zeros_noise(1, 1, 1))
    assert run.states[1, 0] == pytest.approx(2.0)


def test_zero_dynamics():
    spec = generic_spec(
        n=1, m=1, d=1,
        f_map=PolynomialMap(1, 1, 1, ()),
        psi_map=PolynomialMap(1, 1, 1, (PolyTerm(0, 1.0, (1,), (0,)),)),
        theta_star=np.zeros((1, 1)), gamma=1e-2,
        process_noise=NoiseModel(GAUSSIAN, 1.0, 1),
        exploratory_noise=NoiseModel(UNIFORM, 1.0, 1),
        growth=GrowthCertificate(identity(), identity(), identity(), identity(),
                                 identity(), identity(), identity()),
    )
    run = simulate(spec, [5.0], 10, 0, noise_override=zeros_noise(10, 1, 1))
    np.testing.assert_allclose(run.states[1:], 0.0)


def test_double_integrator_hand_iteration():
    spec = double_integrator_spec(inner_policy="zero")
    run = simulate(spec, [1.0, 0.0], 2, 0, noise_override=zeros_noise(2, 2, 1))
    np.testing.assert_allclose(run.states[1], [1.0, 1.0])
    np.testing.assert_allclose(run.states[2], [1.0, 2.0])


def test_simulate_deterministic():
    spec = pwa_spec()
    r1 = simulate(spec, [1.0], 500, 11, stream_index=4)
    r2 = simulate(spec, [1.0], 500, 11, stream_index=4)
    np.testing.assert_array_equal(r1.states, r2.states)
    np.testing.assert_array_equal(r1.errors, r2.errors)


def test_fast_kernel_matches_generic_engine():
    from rexid.systems import _simulate_generic

    spec = pwa_spec()
    T = 1500
    W, S = draw_noise(spec, T, 7, 3)
    fast = simulate(spec, [1.0], T, 7, stream_index=3)
    generic = _simulate_generic(spec, np.array([1.0]), T, W, S, 7)
    np.testing.assert_allclose(fast.states, generic.states, rtol=1e-9)
    np.testing.assert_allclose(fast.errors, generic.errors, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(fast.gram_max_eig, generic.gram_max_eig, rtol=1e-9)
    np.testing.assert_allclose(fast.gram_min_eig, generic.gram_min_eig,
                               rtol=1e-6, atol=1e-10)


def test_run_invariants():
    spec = pwa_spec()
    run = simulate(spec, [1.0], 300, 2)
    # regressors reproduce psi(states[t-1], controls[t-1]) exactly
    for t in (1, 57, 300):
        z = spec.psi(run.states[t - 1], run.controls[t - 1])
        np.testing.assert_array_equal(run.regressors[t - 1], z)
    assert np.all(run.gram_min_eig >= spec.gamma * (1 - 1e-9))
    assert np.all(np.diff(run.gram_max_eig) >= -1e-9)
    assert np.all(run.errors >= 0)


from hypothesis import given, settings, strategies as st


@settings(deadline=None, max_examples=20)
@given(
    sigma_w=st.floats(min_value=0.05, max_value=2.0),
    ubar=st.floats(min_value=0.1, max_value=3.0),
    gamma=st.floats(min_value=1e-6, max_value=10.0),
    threshold=st.floats(min_value=5.0, max_value=1e5),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_run_invariants_random_pwa(sigma_w, ubar, gamma, threshold, seed):
    spec = pwa_spec(xbar_threshold=threshold, ubar=ubar, sigma_w=sigma_w,
                    gamma=gamma)
    run = simulate(spec, [1.0], 120, seed)
    assert np.all(run.gram_min_eig >= gamma * (1 - 1e-9))
    assert np.all(np.diff(run.gram_max_eig) >= -1e-9 * run.gram_max_eig[:-1])
    assert np.all(np.abs(run.controls) <= ubar)
    assert np.all(run.errors >= 0)
    z = spec.psi(run.states[40], run.controls[40])
    np.testing.assert_array_equal(run.regressors[40], z)


def test_control_constraint_on_paths():
    for spec in (pwa_spec(), double_integrator_spec(),
                 double_integrator_spec(inner_policy="zero")):
        run = simulate(spec, [1.0] + [0.0] * (spec.n - 1), 400, 5)
        assert np.max(np.abs(np.linalg.norm(run.controls, axis=1))) <= spec.u_max + 1e-12


def test_control_constraint_probe():
    spec = double_integrator_spec()
    worst = spec.probe_control_constraint(np.random.default_rng(0))
    assert worst <= spec.u_max + 1e-12


def test_overflow_diagnostic_carries_partial_run():
    # open-loop unstable generic plant: x <- 3 x, no stabilisation
    spec = generic_spec(
        n=1, m=1, d=1,
        f_map=PolynomialMap(1, 1, 1, (PolyTerm(0, 3.0, (1,), (0,)),)),
        psi_map=PolynomialMap(1, 1, 1, (PolyTerm(0, 1.0, (1,), (0,)),)),
        theta_star=np.zeros((1, 1)), gamma=1e-2,
        process_noise=NoiseModel(GAUSSIAN, 1.0, 1),
        exploratory_noise=NoiseModel(UNIFORM, 1.0, 1),
        growth=GrowthCertificate(identity(), identity(), identity(), identity(),
                                 identity(), identity(), identity()),
    )
    with pytest.raises(SimulationOverflow) as err:
        simulate(spec, [1.0], 10_000, 0)
    partial = err.value.partial_run
    assert 0 < partial.horizon < 10_000
    assert np.abs(partial.states[-1]) > 1e150


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def test_rls_no_data_returns_initial_estimate():
    v0 = np.array([[0.3], [0.7]])
    rls = RecursiveLeastSquares(2, 1, 0.5, v0)
    np.testing.assert_array_equal(rls.estimate, v0)
    np.testing.assert_array_equal(rls_direct([], [], 0.5, v0), v0)


def test_rls_scalar_single_datum():
    # z = 1, y = theta*: minimiser of (y - theta)^2 + gamma theta^2
    gamma, theta_star = 0.25, 2.0
    rls = RecursiveLeastSquares(1, 1, gamma, np.zeros((1, 1)))
    est = rls.update([1.0], [theta_star])
    assert est[0, 0] == pytest.approx(theta_star / (1.0 + gamma))


def test_rls_small_gamma_recovers_truth():
    rng = np.random.default_rng(3)
    theta_star = rng.normal(size=(2, 1))
    Z = rng.normal(size=(10, 2))
    Y = Z @ theta_star
    est = rls_direct(Z, Y, 1e-10, np.zeros((2, 1)))
    assert np.max(np.abs(est - theta_star)) < 1e-6


def test_rls_huge_gamma_shrinks_to_zero():
    rng = np.random.default_rng(4)
    Z = rng.normal(size=(20, 3))
    Y = rng.normal(size=(20, 2))
    est = rls_direct(Z, Y, 1e12, np.zeros((3, 2)))
    assert np.max(np.abs(est)) < 1e-6 * np.max(np.abs(Y))


def test_recursive_matches_direct_random_instances():
    # a slice of the full 200-instance acceptance check
    rng = np.random.default_rng(5)
    for _ in range(40):
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
        scale = max(np.max(np.abs(direct)), 1e-30)
        assert np.max(np.abs(est - direct)) / scale < 1e-8


def test_gram_extremes_identity():
    assert gram_extremes(0.5 * np.eye(3)) == (pytest.approx(0.5), pytest.approx(0.5))


def test_gram_extremes_rank_one():
    z = np.array([2.0, 0.0])
    g = np.eye(2) + np.outer(z, z)
    lo, hi = gram_extremes(g)
    assert lo == pytest.approx(1.0)
    assert hi == pytest.approx(5.0)


def test_gram_extremes_bracket_rayleigh_quotients():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(3, 3))
    g = A @ A.T + 0.1 * np.eye(3)
    lo, hi = gram_extremes(g)
    for _ in range(100):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        q = v @ g @ v
        assert lo - 1e-12 <= q <= hi + 1e-12


def test_spectral_error_examples():
    assert spectral_error(np.eye(2), np.eye(2)) == 0.0
    assert spectral_error(np.diag([3.0, 1.0]), np.zeros((2, 2))) == pytest.approx(3.0)


def test_spectral_error_power_iteration_oracle():
    rng = np.random.default_rng(7)
    diff = rng.normal(size=(3, 2))
    v = rng.normal(size=2)
    for _ in range(500):
        v = diff.T @ (diff @ v)
        v /= np.linalg.norm(v)
    sigma_max = float(np.sqrt(v @ diff.T @ diff @ v))
    assert spectral_error(diff, np.zeros((3, 2))) == pytest.approx(sigma_max, rel=1e-8)


def test_project_frobenius_ball():
    theta = np.array([[3.0], [4.0]])
    proj = project_frobenius_ball(theta, 1.0)
    assert np.linalg.norm(proj) == pytest.approx(1.0)
    np.testing.assert_allclose(proj / np.linalg.norm(proj),
                               theta / np.linalg.norm(theta))
    np.testing.assert_array_equal(project_frobenius_ball(theta, 10.0), theta)


# ---------------------------------------------------------------------------
# spec validation and polynomial maps
# ---------------------------------------------------------------------------

def test_growth_certificate_class_validation():
    from rexid.growth import constant

    # a constant sigma2 is not class K-infinity, so the certificate is invalid
    with pytest.raises(ValueError):
        GrowthCertificate(
            chi1=identity(), chi2=identity(), chi3=identity(), chi4=identity(),
            chi5=identity(), sigma1=identity(), sigma2=constant(1.0),
        )


def test_growth_certificate_flags_user_declared_members():
    from rexid.growth import ClassFlags, DeclaredGrowthFn

    sqrt_fn = DeclaredGrowthFn(lambda r: np.sqrt(r),
                               ClassFlags(True, True, True, True, True))
    cert = GrowthCertificate(
        chi1=identity(), chi2=sqrt_fn, chi3=identity(), chi4=identity(),
        chi5=identity(), sigma1=identity(), sigma2=identity(),
    )
    assert cert.has_unverified_members
    assert not pwa_spec().growth.has_unverified_members


def test_polynomial_map_gate_and_interval():
    pm = PolynomialMap(1, 1, 1, (
        PolyTerm(0, 2.0, (1,), (0,)),
        PolyTerm(0, 1.0, (0,), (1,), gate_index=0, gate_threshold=5.0),
    ))
    assert pm(np.array([1.0]), np.array([3.0]))[0] == pytest.approx(5.0)
    assert pm(np.array([6.0]), np.array([3.0]))[0] == pytest.approx(12.0)
    np.testing.assert_allclose(pm.interval_bound(2.0, 1.0), [5.0])


def test_spec_rejects_bad_shapes():
    with pytest.raises(ValueError):
        pwa_spec(gamma=0.0)
    with pytest.raises(ValueError):
        double_integrator_spec(sigma_w=1.0).process_noise.__class__("gauss", -1.0, 2)
