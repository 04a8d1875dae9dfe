"""Kernel prior, coordinate transforms, and regressor construction."""

import numpy as np
import pytest

from stablepem.kernels import (
    DECAY_BOUNDS,
    SCALE_BOUNDS,
    TRANSFORMED_BOUNDS,
    Hyperparameters,
    build_regressors,
    from_transformed,
    in_bounds,
    kernel_cholesky,
    output_covariance,
    stable_spline_kernel,
    to_transformed,
)


def test_kernel_closed_form_values():
    eta = Hyperparameters(scale=2.0, decay=0.5, noise_variance=1.0)
    k = stable_spline_kernel(eta, 3)
    # K[t, s] = c beta^max(t, s) with t, s starting at 1
    expected = 2.0 * np.array(
        [
            [0.5, 0.25, 0.125],
            [0.25, 0.25, 0.125],
            [0.125, 0.125, 0.125],
        ]
    )
    np.testing.assert_allclose(k, expected, atol=1e-15)


def test_kernel_positive_definite_across_box():
    rng = np.random.default_rng(4)
    for _ in range(25):
        eta = Hyperparameters(
            scale=float(np.exp(rng.uniform(np.log(1e-6), np.log(1e4)))),
            decay=float(rng.uniform(0.01, 0.99)),
            noise_variance=1.0,
        )
        p = int(rng.integers(1, 25))
        k = stable_spline_kernel(eta, p)
        np.testing.assert_allclose(k, k.T, atol=0)
        # normalized eigenvalues stay positive even for strong decay
        w = np.linalg.eigvalsh(k / k[0, 0])
        assert np.min(w) > 0


def test_kernel_cholesky_matches_dense():
    eta = Hyperparameters(scale=3.0, decay=0.8, noise_variance=1.0)
    lk = kernel_cholesky(eta, 12)
    np.testing.assert_allclose(lk @ lk.T, stable_spline_kernel(eta, 12), atol=1e-12)
    assert np.all(np.diag(lk) > 0)
    np.testing.assert_allclose(np.triu(lk, 1), 0.0, atol=0)


def test_transform_round_trip_on_grid():
    rng = np.random.default_rng(6)
    for _ in range(50):
        eta = Hyperparameters(
            scale=float(np.exp(rng.uniform(np.log(1e-6), np.log(1e4)))),
            decay=float(rng.uniform(0.01, 0.99)),
            noise_variance=0.7,
        )
        back = from_transformed(to_transformed(eta), 0.7)
        assert back.scale == pytest.approx(eta.scale, rel=1e-12)
        assert back.decay == pytest.approx(eta.decay, rel=1e-12)
        assert back.noise_variance == 0.7


def test_transformed_bounds_match_box_corners():
    lo = from_transformed(TRANSFORMED_BOUNDS[:, 0], 1.0)
    hi = from_transformed(TRANSFORMED_BOUNDS[:, 1], 1.0)
    assert lo.scale == pytest.approx(SCALE_BOUNDS[0], rel=1e-9)
    assert lo.decay == pytest.approx(DECAY_BOUNDS[0], rel=1e-9)
    assert hi.scale == pytest.approx(SCALE_BOUNDS[1], rel=1e-9)
    assert hi.decay == pytest.approx(DECAY_BOUNDS[1], rel=1e-9)


def test_in_bounds_predicate():
    assert in_bounds(TRANSFORMED_BOUNDS.mean(axis=1))
    assert in_bounds(TRANSFORMED_BOUNDS[:, 0])
    assert not in_bounds(TRANSFORMED_BOUNDS[:, 1] + 0.1)
    assert not in_bounds([np.nan, 0.0])


def test_hyperparameters_validation():
    with pytest.raises(ValueError, match="scale"):
        Hyperparameters(scale=2e4, decay=0.5, noise_variance=1.0)
    with pytest.raises(ValueError, match="decay"):
        Hyperparameters(scale=1.0, decay=0.995, noise_variance=1.0)
    with pytest.raises(ValueError, match="noise_variance"):
        Hyperparameters(scale=1.0, decay=0.5, noise_variance=0.0)


def test_build_regressors_against_explicit_loop():
    rng = np.random.default_rng(8)
    y = rng.standard_normal(15)
    u = rng.standard_normal(15)
    p = 4
    reg = build_regressors(y, u, p)
    for t in range(15):
        for k in range(1, p + 1):
            want_y = y[t - k] if t - k >= 0 else 0.0
            want_u = u[t - k] if t - k >= 0 else 0.0
            assert reg.output_lags[t, k - 1] == want_y
            assert reg.input_lags[t, k - 1] == want_u
    stacked = reg.stacked()
    assert stacked.shape == (15, 2 * p)
    np.testing.assert_array_equal(stacked[:, :p], reg.output_lags)


def test_build_regressors_validation():
    with pytest.raises(ValueError, match="equal length"):
        build_regressors(np.zeros(5), np.zeros(6), 2)
    with pytest.raises(ValueError, match="p must satisfy"):
        build_regressors(np.zeros(5), np.zeros(5), 5)


def test_output_covariance_matches_dense_formula():
    rng = np.random.default_rng(10)
    y = rng.standard_normal(20)
    u = rng.standard_normal(20)
    reg = build_regressors(y, u, 3)
    eta = Hyperparameters(scale=1.5, decay=0.6, noise_variance=0.3)
    cov = output_covariance(eta, reg)
    k = stable_spline_kernel(eta, 3)
    dense = (
        reg.output_lags @ k @ reg.output_lags.T
        + reg.input_lags @ k @ reg.input_lags.T
        + 0.3 * np.eye(20)
    )
    np.testing.assert_allclose(cov.matrix, dense, atol=1e-12)
    rhs = rng.standard_normal(20)
    np.testing.assert_allclose(cov.solve(rhs), np.linalg.solve(dense, rhs), atol=1e-9)
    sign, logdet = np.linalg.slogdet(dense)
    assert sign > 0
    assert cov.logdet() == pytest.approx(logdet, rel=1e-10)
