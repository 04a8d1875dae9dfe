"""Estimator front end: parameter handling, fitting, and stabilizer paths."""

import numpy as np
import pytest
from sklearn.base import clone

from stablepem.estimator import PemRegressor
from stablepem.lti import ArmaxModel, Polynomial, simulate_armax

_MCMC_SIZES = dict(
    n_hyper=250, burn_in=250, n_stable=250, n_components=30, kappa_draws=250
)


@pytest.fixture(scope="module")
def damped_series():
    model = ArmaxModel(
        a=Polynomial.from_roots([0.5, -0.3]),
        b=Polynomial([1.0, 0.4]),
        c=Polynomial([1.0, 0.2], monic=True),
        k_gain=1.0,
    )
    rng = np.random.default_rng(0)
    u = rng.standard_normal(150)
    e = 0.3 * rng.standard_normal(150)
    return u, simulate_armax(model, u, e)


def test_get_params_set_params_clone():
    est = PemRegressor(p=6, stabilizer="lmi", seed=3)
    params = est.get_params()
    assert params["p"] == 6
    assert params["stabilizer"] == "lmi"
    assert params["seed"] == 3
    est.set_params(p=4)
    assert est.p == 4
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert not hasattr(twin, "forward_")


def test_fit_stable_series_attributes_and_predict(damped_series):
    u, y = damped_series
    est = PemRegressor(p=6, stabilizer="lmi", expansion_length=100).fit(u, y)
    assert est.stabilized_ is False
    assert est.spectral_radius_ < 1.0
    assert est.forward_ is est.eb_forward_
    assert est.predictor_.f.size == 6
    assert est.hyperparameters_.noise_variance > 0.0
    assert est.diagnostics_ == {}
    u_new = np.linspace(-1.0, 1.0, 40)
    pred = est.predict(u_new)
    assert pred.shape == (40,)
    np.testing.assert_allclose(
        pred, np.convolve(u_new, est.forward_.p_ir)[:40], atol=1e-12
    )
    one_step = est.predict_one_step(u[:50], y[:50])
    assert one_step.shape == (50,)


def test_column_input_matches_flat_input(damped_series):
    u, y = damped_series
    a = PemRegressor(p=5).fit(u, y)
    b = PemRegressor(p=5).fit(u.reshape(-1, 1), np.asarray(y).reshape(-1, 1))
    np.testing.assert_array_equal(a.forward_.p_ir, b.forward_.p_ir)
    np.testing.assert_array_equal(
        a.predict(u[:30]), b.predict(u[:30].reshape(-1, 1))
    )


def test_invalid_stabilizer_rejected(damped_series):
    u, y = damped_series
    with pytest.raises(ValueError, match="stabilizer"):
        PemRegressor(p=4, stabilizer="ridge").fit(u, y)


def test_unfitted_estimator_raises():
    est = PemRegressor(p=4)
    with pytest.raises(RuntimeError, match="not fitted"):
        est.predict([1.0, 2.0, 3.0])
    with pytest.raises(RuntimeError, match="not fitted"):
        est.spectral_radius_


def test_none_stabilizer_reports_instability(unstable_case):
    data = unstable_case.data_id
    est = PemRegressor(p=30).fit(data.u, data.y)
    assert est.spectral_radius_ >= 1.0
    assert est.stabilized_ is False
    assert est.forward_.spectral_radius == unstable_case.result.forward.spectral_radius


def test_lmi_stabilizer_repairs_unstable_fit(unstable_case):
    data = unstable_case.data_id
    est = PemRegressor(p=30, stabilizer="lmi").fit(data.u, data.y)
    assert est.stabilized_ is True
    assert est.spectral_radius_ < 1.0
    assert est.eb_forward_.spectral_radius >= 1.0
    assert est.predictor_ is not None
    # the input side of the predictor is untouched by the projection
    np.testing.assert_array_equal(
        est.predictor_.g, unstable_case.result.predictor.g
    )


def test_ml_pf_stabilizer_repairs_unstable_fit(unstable_case):
    data = unstable_case.data_id
    est = PemRegressor(p=30, stabilizer="ml-pf").fit(data.u, data.y)
    assert est.stabilized_ is True
    assert est.spectral_radius_ < 1.0
    assert est.predict_one_step(data.u, data.y).shape == (data.n_samples,)


def test_mcmc_mean_stabilizer_has_no_predictor(unstable_case):
    data = unstable_case.data_id
    est = PemRegressor(p=30, stabilizer="mcmc-mean", seed=4, **_MCMC_SIZES)
    est.fit(data.u, data.y)
    assert est.stabilized_ is True
    assert est.spectral_radius_ < 1.0
    assert est.predictor_ is None
    assert est.diagnostics_["hyper_acceptance"] > 0.0
    assert est.predict(data.u[:30]).shape == (30,)
    with pytest.raises(ValueError, match="averaged stable model"):
        est.predict_one_step(data.u, data.y)


def test_mcmc_map_stabilizer_seed_determinism(unstable_case):
    data = unstable_case.data_id
    a = PemRegressor(p=30, stabilizer="mcmc-map", seed=4, **_MCMC_SIZES)
    b = PemRegressor(p=30, stabilizer="mcmc-map", seed=4, **_MCMC_SIZES)
    c = PemRegressor(p=30, stabilizer="mcmc-map", seed=5, **_MCMC_SIZES)
    for est in (a, b, c):
        est.fit(data.u, data.y)
        assert est.spectral_radius_ < 1.0
        assert est.predictor_ is not None
    np.testing.assert_array_equal(a.forward_.p_ir, b.forward_.p_ir)
    np.testing.assert_array_equal(a.predictor_.f, b.predictor_.f)
    assert not np.array_equal(a.predictor_.f, c.predictor_.f)
