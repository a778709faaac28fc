"""Finite-dimensional convex-potential diffusion tests."""

import numpy as np
import pytest

from parahom import (
    ConfigError,
    convex_diffusion_simulate,
    cosine_perturbed_potential,
    exact_gaussian_path,
    feynman_kac_estimate,
    path_action_hessian_probe,
    quadratic_potential,
    stationary_moments_check,
)


# -- potentials ---------------------------------------------------------------


def test_quadratic_potential_validation():
    with pytest.raises(ConfigError):
        quadratic_potential(np.array([[1.0, 2.0], [0.0, 1.0]]))  # not symmetric
    with pytest.raises(ConfigError):
        quadratic_potential(np.array([[1.0, 2.0], [2.0, 1.0]]))  # indefinite
    W = quadratic_potential(np.diag([1.0, 4.0]), [1.0, 1.0])
    assert W.lam == 1.0 and W.Lam == 4.0 and W.k == 2


def test_quadratic_potential_derivatives():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([0.3, -0.2])
    W = quadratic_potential(A, b)
    p = np.array([0.7, -1.1])
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (W.value(p + e) - W.value(p - e)) / (2 * h)
        assert W.grad(p)[j] == pytest.approx(fd, abs=1e-8)
    assert np.allclose(W.hess(p), A)
    assert W.laplacian(p) == pytest.approx(np.trace(A))
    assert W.hessian_window_check(np.stack([p, -p]))


def test_cosine_perturbed_potential():
    with pytest.raises(ConfigError):
        cosine_perturbed_potential(1.0)
    W = cosine_perturbed_potential(0.3)
    assert W.lam == pytest.approx(0.7) and W.Lam == pytest.approx(1.3)
    p = np.array([0.9])
    assert W.grad(p)[0] == pytest.approx(0.9 - 0.3 * np.sin(0.9))
    assert W.hess(p)[0, 0] == pytest.approx(1.0 - 0.3 * np.cos(0.9))


# -- path simulation ----------------------------------------------------------------


def test_simulate_zero_noise_exponential_decay():
    W = quadratic_potential(np.eye(1))
    dt, n = 0.01, 100
    path = convex_diffusion_simulate(W, dt, n, noise_scale=0.0, phi0=[2.0])
    assert path.values[-1, 0] == pytest.approx(2.0 * np.exp(-0.5), abs=3e-3)


def test_simulate_stability_guard_and_determinism():
    W = quadratic_potential(np.diag([1.0, 4.0]))
    with pytest.raises(ConfigError):
        convex_diffusion_simulate(W, 0.5, 10)
    p1 = convex_diffusion_simulate(W, 0.1, 50, seed=3)
    p2 = convex_diffusion_simulate(W, 0.1, 50, seed=3)
    assert np.array_equal(p1.values, p2.values)


def test_euler_matches_exact_integrator_first_order():
    A = np.array([[1.5, 0.4], [0.4, 0.8]])
    b = np.array([0.2, -0.1])
    W = quadratic_potential(A, b)
    errs = []
    for dt, n in [(0.1, 10), (0.05, 20)]:
        path = convex_diffusion_simulate(W, dt, n, noise_scale=0.0, phi0=[1.0, -1.0])
        exact = exact_gaussian_path(A, b, dt, np.zeros((n, 2)), phi0=[1.0, -1.0])
        errs.append(np.abs(path.values - exact).max())
    assert errs[1] < 0.7 * errs[0]  # first order in dt
    # with noise the exact integrator stays pathwise O(dt)-close
    path, incr = convex_diffusion_simulate(W, 0.05, 200, seed=4, return_increments=True)
    exact = exact_gaussian_path(A, b, 0.05, incr)
    assert np.abs(path.values - exact).max() < 0.15


# -- stationary moments --------------------------------------------------------------


def test_stationary_mean_two_dimensional():
    out = stationary_moments_check(
        np.diag([1.0, 4.0]), [1.0, 1.0], lags=[], dt=0.1, n_keep=20000, seed=5
    )
    assert np.allclose(out["mean_oracle"], [1.0, 0.25])
    assert out["mean_passes"], out


def test_stationary_covariance_scalar():
    out = stationary_moments_check(
        [[2.0]], [0.0], lags=[0.0, 1.0], dt=0.02, n_keep=40000, seed=6
    )
    lag0, lag1 = out["lags"]
    assert lag0["oracle"][0, 0] == pytest.approx(0.5)
    assert lag1["oracle"][0, 0] == pytest.approx(0.5 * np.exp(-1.0))
    assert lag0["passes"] and lag1["passes"], out
    assert abs(lag0["cov_hat"][0, 0] - 0.5) < 0.05


# -- Feynman--Kac estimator -------------------------------------------------------------


def test_feynman_kac_constant_function_is_exact():
    W = quadratic_potential(np.eye(1))
    out = feynman_kac_estimate(W, lambda p: np.ones(p.shape[0]), 2.0, 500, 0.02, seed=7)
    assert out["estimate"] == pytest.approx(1.0, abs=1e-14)
    assert out["sigma"] == pytest.approx(0.0, abs=1e-14)


def test_feynman_kac_second_moment_quadratic():
    W = quadratic_potential(np.eye(1))
    out = feynman_kac_estimate(
        W, lambda p: p[:, 0] ** 2, T=5.0, n_paths=30000, dt=0.01, seed=8
    )
    assert not out["degenerate"]
    assert abs(out["estimate"] - 1.0) <= 3.0 * out["sigma"] + 0.03


def test_feynman_kac_matches_time_average_perturbed():
    W = cosine_perturbed_potential(0.3)
    fk = feynman_kac_estimate(
        W, lambda p: p[:, 0] ** 2, T=5.0, n_paths=30000, dt=0.01, seed=9
    )
    path = convex_diffusion_simulate(W, 0.02, 120000, seed=10)
    vals = path.values[20000:, 0] ** 2
    ta = float(vals.mean())
    ta_sigma = float(vals[::50].std() / np.sqrt(vals[::50].size / 20.0))
    assert abs(fk["estimate"] - ta) <= 3.0 * np.hypot(fk["sigma"], ta_sigma) + 0.03


def test_feynman_kac_degeneracy_flag():
    W = quadratic_potential(np.eye(1))
    out = feynman_kac_estimate(W, lambda p: p[:, 0] ** 2, 30.0, 200, 0.05, seed=11)
    assert out["degenerate"]


# -- path-action log-concavity probe ------------------------------------------------


def test_action_hessian_quadratic_positive():
    W = quadratic_potential(np.eye(1))
    path = np.linspace(-1.0, 1.0, 21)
    out = path_action_hessian_probe(W, path, h=0.25)
    assert out["log_concave"] and out["min_eigenvalue"] > 0
    H = out["hessian"]
    assert np.allclose(H, H.T, atol=1e-12)


def test_action_hessian_negative_direction_perturbed():
    # W = phi^2/2 + eps cos phi: the transformed potential
    # U = -(1/2) W'' + (1/4) (W')^2 dips concave near phi = 3 pi / 2,
    # and a long enough constant path window exposes a negative mode
    W = cosine_perturbed_potential(0.3)
    n_pts, h = 41, 0.25  # window length 10
    path = np.full(n_pts, 1.5 * np.pi)
    out = path_action_hessian_probe(W, path, h=h)
    assert out["min_eigenvalue"] < -1e-3
    assert not out["log_concave"]
    # the same window on the unperturbed quadratic stays positive
    W0 = quadratic_potential(np.eye(1))
    out0 = path_action_hessian_probe(W0, np.full(n_pts, 1.5 * np.pi), h=h)
    assert out0["min_eigenvalue"] > 0


def test_action_hessian_guard():
    W = quadratic_potential(np.eye(1))
    with pytest.raises(ConfigError):
        path_action_hessian_probe(W, np.array([0.0, 1.0]), h=0.1)
