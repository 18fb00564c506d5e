import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from climhouse.economy import (
    GridMismatchError,
    NotHurwitzError,
    PathGrid,
    ProductivityParams,
    check_hurwitz,
    conditional_law_a,
    conditional_law_z,
    integrated_productivity,
    lyapunov_residual,
    simulate_a,
    simulate_z,
    stationary_covariance,
    upsilon,
)


def scalar(gamma=1.0, sigma=1.0, mu=0.0, varsigma=1.0, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ProductivityParams([mu], [[gamma]], [[sigma]], varsigma, check_stability=gamma > 0, **kw)


def random_params(seed, n=3):
    r = np.random.default_rng(seed)
    q, _ = np.linalg.qr(r.standard_normal((n, n)))
    gamma = q @ np.diag(r.uniform(0.2, 2.0, n)) @ q.T + 0.2 * r.standard_normal((n, n))
    gamma = gamma + max(0.0, 0.1 - np.linalg.eigvals(gamma).real.min()) * np.eye(n)
    sigma = r.standard_normal((n, n)) * 0.5 + np.eye(n)
    return ProductivityParams(r.standard_normal(n) * 0.01, gamma, sigma, 0.5)


# --- parameter invariants ---------------------------------------------------


def test_params_reject_non_hurwitz_gamma():
    with pytest.raises(NotHurwitzError, match="eigenvalue"):
        ProductivityParams([0.0, 0.0], [[1.0, 0.0], [0.0, -0.5]], np.eye(2))


def test_params_relaxed_stability_only_warns():
    with pytest.warns(UserWarning, match="Hurwitz"):
        p = ProductivityParams([0.0], [[-1.0]], [[1.0]], check_stability=False)
    with pytest.raises(NotHurwitzError):
        stationary_covariance(p)


@pytest.mark.parametrize("bad", [0.0, 1.5, -0.1])
def test_params_varsigma_range(bad):
    with pytest.raises(ValueError, match="varsigma"):
        ProductivityParams([0.0], [[1.0]], [[1.0]], bad)


def test_params_singular_sigma_rejected():
    with pytest.raises(ValueError, match="sigma"):
        ProductivityParams([0.0, 0.0], np.eye(2), [[1.0, 1.0], [1.0, 1.0]])


def test_params_are_immutable():
    p = scalar()
    with pytest.raises(ValueError):
        p.gamma[0, 0] = 3.0


def test_default_z0_law_is_noise_covariance():
    p = random_params(0)
    np.testing.assert_allclose(p.z0_cov, p.sigma @ p.sigma.T)
    np.testing.assert_allclose(p.with_stationary_z0().z0_cov, stationary_covariance(p))


# --- upsilon ----------------------------------------------------------------


def test_upsilon_zero_gamma_is_h_identity():
    np.testing.assert_allclose(upsilon(scalar(gamma=0.0), 2.0), [[2.0]], rtol=1e-10)


def test_upsilon_h_zero():
    np.testing.assert_array_equal(upsilon(random_params(1), 0.0), np.zeros((3, 3)))


def test_upsilon_scalar_value():
    assert upsilon(scalar(), 1.0)[0, 0] == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert upsilon(scalar(), 1.0)[0, 0] == pytest.approx(0.632121, abs=1e-6)


def test_upsilon_negative_h():
    with pytest.raises(ValueError):
        upsilon(scalar(), -1.0)


def test_upsilon_near_singular_uses_quadrature():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ProductivityParams([0.0, 0.0], [[1.0, 0.0], [0.0, 1e-14]], np.eye(2), check_stability=False)
    got = upsilon(p, 3.0)
    np.testing.assert_allclose(got, np.diag([1 - math.exp(-3), 3.0]), rtol=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_upsilon_derivative_is_exponential(seed):
    from climhouse.numerics import matrix_exponential

    p = random_params(seed)
    h, eps = 0.7, 1e-5
    deriv = (upsilon(p, h + eps) - upsilon(p, h - eps)) / (2 * eps)
    np.testing.assert_allclose(deriv, matrix_exponential(-p.gamma, h), atol=1e-6)


# --- conditional laws -------------------------------------------------------


def test_law_z_degenerate_h():
    law = conditional_law_z(random_params(2), [1.0, 2.0, 3.0], 0.0)
    np.testing.assert_array_equal(law.mean, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(law.cov, np.zeros((3, 3)))


def test_law_z_deterministic_decay():
    # Sigma must be non-singular, so a vanishing noise level stands in for zero
    law = conditional_law_z(scalar(sigma=1e-12), [1.0], math.log(2))
    assert law.mean[0] == pytest.approx(0.5, abs=1e-14)
    assert law.cov[0, 0] == pytest.approx(0.0, abs=1e-20)


def test_law_z_scalar_variance():
    law = conditional_law_z(scalar(), [0.0], 1.0)
    assert law.cov[0, 0] == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-8)
    assert law.cov[0, 0] == pytest.approx(0.432332, abs=1e-6)


def test_law_a_drift_only():
    p = scalar(sigma=1e-12, mu=0.3)
    law = conditional_law_a(p, [2.0], [0.0], 1.5)
    assert law.mean[0] == pytest.approx(2.0 + 0.45)
    assert law.cov[0, 0] == pytest.approx(0.0, abs=1e-20)


def test_law_a_h_zero():
    law = conditional_law_a(random_params(3), [1.0, 1.0, 1.0], [5.0, 5.0, 5.0], 0.0)
    np.testing.assert_array_equal(law.mean, [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(law.cov, 0.0)


def test_law_a_scalar_closed_form():
    # int_0^1 (1 - e^{-u})^2 du
    want = 1 - 2 * (1 - math.exp(-1)) + (1 - math.exp(-2)) / 2
    assert conditional_law_a(scalar(), [0.0], [0.0], 1.0).cov[0, 0] == pytest.approx(want, rel=1e-8)


def test_law_a_matches_exact_ou_monte_carlo():
    # exact OU transitions on a fine grid; the time integral by the trapezoid rule
    n_paths, n_sub, h = 1_000_000, 100, 1.0
    r = np.random.default_rng(2024)
    dt = h / n_sub
    decay = math.exp(-dt)
    sd = math.sqrt((1 - decay**2) / 2)
    z = np.zeros(n_paths)
    integral = np.zeros(n_paths)
    for _ in range(n_sub):
        z_new = decay * z + sd * r.standard_normal(n_paths)
        integral += 0.5 * dt * (z + z_new)
        z = z_new
    law = conditional_law_a(scalar(), [0.0], [0.0], h)
    var = integral.var()
    se = var * math.sqrt(2 / (n_paths - 1))
    assert abs(var - law.cov[0, 0]) < 3 * se + 1e-4 * var
    assert abs(integral.mean()) < 3 * math.sqrt(var / n_paths)


@pytest.mark.parametrize("seed", range(5))
def test_law_z_covariance_monotone_in_h(seed):
    p = random_params(seed)
    prev = np.zeros((3, 3))
    for h in (0.1, 0.5, 1.0, 3.0):
        cov = conditional_law_z(p, np.zeros(3), h).cov
        assert np.linalg.eigvalsh(cov - prev).min() > -1e-10
        prev = cov


@pytest.mark.parametrize("seed", range(3))
def test_law_z_converges_to_stationary(seed):
    p = random_params(seed)
    lam = np.linalg.eigvals(p.gamma).real.min()
    cov = conditional_law_z(p, np.zeros(3), 20.0 / lam, rtol=1e-10).cov
    s = stationary_covariance(p)
    assert np.linalg.norm(cov - s) / np.linalg.norm(s) < 1e-3


# --- stationary covariance ----------------------------------------------------


def test_stationary_scalar():
    assert stationary_covariance(scalar(gamma=2.0, sigma=3.0))[0, 0] == pytest.approx(9 / 4)


def test_stationary_identity():
    p = ProductivityParams([0.0, 0.0], np.eye(2), np.eye(2))
    np.testing.assert_allclose(stationary_covariance(p), 0.5 * np.eye(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_lyapunov_residual_property(seed):
    p = random_params(seed, n=4)
    s = stationary_covariance(p)
    assert lyapunov_residual(p, s) <= 1e-9 * np.linalg.norm(p.noise_cov)
    assert np.linalg.eigvalsh(s).min() > -1e-12


def test_check_hurwitz_reports_eigenvalue():
    with pytest.raises(NotHurwitzError, match=r"-0\.5"):
        check_hurwitz(np.diag([1.0, -0.5]))


# --- simulation ---------------------------------------------------------------


def test_simulate_constant_path():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ProductivityParams([0.0], [[0.0]], [[1e-100]], check_stability=False)
    grid = simulate_z(p, 0.0, 1.0, 10, 3, seed=1, z0=[2.5])
    np.testing.assert_allclose(grid.values, 2.5)


def test_simulate_deterministic_euler_decay():
    p = scalar(sigma=1e-100)
    grid = simulate_z(p, 0.0, 2.0, 2000, 1, seed=0, z0=[1.0])
    err = np.abs(grid.values[0, :, 0] - np.exp(-grid.times))
    assert err.max() < 2 * grid.dt


def test_simulate_brownian_variance():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ProductivityParams([0.0], [[0.0]], [[1.0]], check_stability=False)
    grid = simulate_z(p, 0.0, 1.0, 4, 100_000, seed=3, z0=[0.0])
    var = grid.values[:, -1, 0].var()
    assert 0.97 <= var <= 1.03


def test_simulate_is_seed_deterministic():
    p = random_params(5)
    a = simulate_z(p, 0.0, 1.0, 8, 50, seed=9)
    b = simulate_z(p, 0.0, 1.0, 8, 50, seed=9)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.increments, b.increments)
    c = simulate_z(p, 0.0, 1.0, 8, 50, seed=10)
    assert not np.array_equal(a.values, c.values)


def test_simulate_path_identity_independent_of_batch():
    p = random_params(6)
    big = simulate_z(p, 0.0, 1.0, 8, 40, seed=4)
    small = simulate_z(p, 0.0, 1.0, 8, 5, seed=4)
    assert np.array_equal(big.values[:5], small.values)


@pytest.mark.parametrize("bad", [dict(n_steps=0, n_paths=1), dict(n_steps=1, n_paths=0)])
def test_simulate_rejects_bad_sizes(bad):
    with pytest.raises(ValueError):
        simulate_z(scalar(), 0.0, 1.0, seed=0, **bad)


def test_euler_weak_bias_halves():
    # E[Z_1^2] from z0 = 0 is (1 - e^{-2}) / 2 for Gamma = Sigma = 1
    exact = (1 - math.exp(-2)) / 2
    p = scalar()
    ratios = []
    for seed in (1, 2, 3):
        biases = []
        for n_steps in (5, 10):
            z = simulate_z(p, 0.0, 1.0, n_steps, 200_000, seed=seed, z0=[0.0])
            biases.append(np.mean(z.values[:, -1, 0] ** 2) - exact)
        ratios.append(biases[0] / biases[1])
    assert all(1.6 <= r <= 2.4 for r in ratios), ratios


def test_simulate_a_pure_drift():
    p = scalar(sigma=1e-100, mu=0.2)
    z = simulate_z(p, 1.0, 3.0, 8, 2, seed=0, z0=[0.0])
    a = simulate_a(p, z, a0=[1.0])
    np.testing.assert_allclose(a.values[:, :, 0], np.tile(1.0 + 0.2 * (z.times - 1.0), (2, 1)), atol=1e-12)
    assert a.values[0, 0, 0] == 1.0


def test_integrated_productivity_left_rectangle():
    p = scalar(mu=0.0, varsigma=0.5)
    values = np.array([[[1.0], [2.0], [4.0]]])
    grid = PathGrid(0.0, 2.0, 2, values)
    got = integrated_productivity(p, grid, [0.5, 1.0, 1.5, 2.0], a0=[0.0])[0, :, 0]
    np.testing.assert_allclose(got, 0.5 * np.array([0.5, 1.0, 1.0 + 1.0, 3.0]))


def test_integrated_productivity_outside_grid():
    p = scalar()
    z = simulate_z(p, 0.0, 1.0, 4, 1, seed=0)
    with pytest.raises(GridMismatchError):
        integrated_productivity(p, z, [1.5])


def test_simulate_a_moments_match_law():
    p = scalar(mu=0.1, varsigma=0.8)
    z = simulate_z(p, 0.0, 1.0, 200, 100_000, seed=11, z0=[0.5])
    a = simulate_a(p, z, a0=[0.0]).values[:, -1, 0]
    law = conditional_law_a(p, [0.0], [0.5], 1.0)
    se_mean = a.std() / math.sqrt(a.size)
    assert abs(a.mean() - law.mean[0]) < 3 * se_mean + 0.01 * abs(law.mean[0])
    assert a.var() == pytest.approx(law.cov[0, 0], rel=0.05)
