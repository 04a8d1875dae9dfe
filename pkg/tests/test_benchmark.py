"""Monte Carlo harness: generators, scoring, records, and reports."""

import json

import numpy as np
import pytest

from stablepem.benchmark import (
    BenchmarkConfig,
    MethodOutcome,
    RunRecord,
    canonical_json,
    config_from_json,
    generate_armax_model,
    generate_dataset,
    load_records,
    record_from_json,
    record_to_json,
    relative_error,
    report_from_records,
    run_monte_carlo,
    run_single,
    save_records,
)
from stablepem.kernels import Hyperparameters
from stablepem.lti import (
    ArmaxModel,
    ForwardModel,
    Polynomial,
    PredictorEstimate,
    armax_impulse_responses,
    poly_roots,
    simulate_armax,
)


def test_model_fixed_dynamics_and_random_zeros():
    rng_seeds = [0, 1, 17, 123]
    for s in rng_seeds:
        model = generate_armax_model(s, channel_variances=(1.0, 1.0))
        np.testing.assert_array_equal(model.a.coeffs, [1.0, -0.996, 0.992016])
        # the pole pair sits at 0.996 exp(+-i pi/3)
        poles = poly_roots(model.a)
        np.testing.assert_allclose(np.abs(poles), [0.996, 0.996], atol=1e-12)
        np.testing.assert_allclose(
            np.abs(np.angle(poles)), [np.pi / 3, np.pi / 3], atol=1e-12
        )
        assert model.b.degree == 1 and model.b.coeffs[0] == 1.0
        assert abs(model.b.coeffs[1]) < 0.9
        assert model.c.degree == 2 and model.c.monic
        c_roots = poly_roots(model.c)
        assert np.all(np.abs(c_roots.imag) < 1e-12)
        assert np.all((c_roots.real >= 0.65) & (c_roots.real <= 0.73))


def test_gain_from_channel_variance_seam():
    model = generate_armax_model(0, channel_variances=(3.7, 3.7))
    assert model.k_gain == 1.0
    model = generate_armax_model(0, channel_variances=(4.0, 1.0))
    assert model.k_gain == 2.0


def test_gain_matches_documented_calibration():
    # replay the documented recipe on the same stream: B and C draws,
    # then one 12000 sample simulation per channel with the first 2000
    # discarded, k = sqrt(var_e / var_u)
    rng = np.random.default_rng(0)
    r = rng.uniform(-0.9, 0.9)
    r1, r2 = rng.uniform(0.65, 0.73, 2)
    a = Polynomial([1.0, -0.996, 0.992016], monic=True)
    b = Polynomial([1.0, -r])
    c = Polynomial.from_roots([r1, r2])
    one = Polynomial([1.0], monic=True)
    y_u = simulate_armax(
        ArmaxModel(a=a, b=b, c=one, k_gain=1.0),
        rng.standard_normal(12000),
        np.zeros(12000),
    )[2000:]
    y_e = simulate_armax(
        ArmaxModel(a=a, b=Polynomial([1.0]), c=c, k_gain=1.0),
        np.zeros(12000),
        rng.standard_normal(12000),
    )[2000:]
    k_expect = float(np.sqrt(np.var(y_e) / np.var(y_u)))
    assert generate_armax_model(0).k_gain == k_expect


def test_gain_equalizes_long_run_channel_variances():
    # re-simulate each channel with fresh noise: the poles at radius
    # 0.996 give a correlation time near 250 samples, so a 10^4 sample
    # variance carries tens of percent of scatter; check a loose band
    # per seed and a tight one on the geometric mean
    ratios = []
    for s in range(5):
        model = generate_armax_model(s)
        rng = np.random.default_rng(10_000 + s)
        one = Polynomial([1.0], monic=True)
        plant = ArmaxModel(a=model.a, b=model.b, c=one, k_gain=model.k_gain)
        noise = ArmaxModel(a=model.a, b=Polynomial([1.0]), c=model.c, k_gain=1.0)
        y_u = simulate_armax(plant, rng.standard_normal(12000), np.zeros(12000))[2000:]
        y_e = simulate_armax(noise, np.zeros(12000), rng.standard_normal(12000))[2000:]
        ratio = np.var(y_u) / np.var(y_e)
        assert 0.3 < ratio < 3.0
        ratios.append(ratio)
    assert 0.7 < np.exp(np.mean(np.log(ratios))) < 1.5


def test_model_generation_deterministic():
    a = generate_armax_model(42)
    b = generate_armax_model(42)
    assert a.k_gain == b.k_gain
    np.testing.assert_array_equal(a.b.coeffs, b.b.coeffs)
    np.testing.assert_array_equal(a.c.coeffs, b.c.coeffs)
    c = generate_armax_model(43)
    assert not np.array_equal(a.b.coeffs, c.b.coeffs)


def test_dataset_draw_order_and_determinism():
    model = generate_armax_model(3, channel_variances=(1.0, 1.0))
    cfg_a = BenchmarkConfig(runs=1, t_id=100, t_test=200, p=4)
    cfg_b = BenchmarkConfig(runs=1, t_id=100, t_test=900, p=4)
    id_a, test_a = generate_dataset(model, cfg_a, 5)
    id_a2, _ = generate_dataset(model, cfg_a, 5)
    np.testing.assert_array_equal(id_a.u, id_a2.u)
    np.testing.assert_array_equal(id_a.y, id_a2.y)
    # identification draws come first, so the id record must not depend
    # on the test length
    id_b, test_b = generate_dataset(model, cfg_b, 5)
    np.testing.assert_array_equal(id_a.u, id_b.u)
    np.testing.assert_array_equal(id_a.y, id_b.y)
    assert test_b.n_samples == 900 and test_a.n_samples == 200
    assert id_a.seed == 5
    ss = np.random.SeedSequence(7)
    id_c, _ = generate_dataset(model, cfg_a, ss)
    assert id_c.seed is None


def test_dataset_noise_free_keeps_input_draws():
    model = generate_armax_model(4, channel_variances=(1.0, 1.0))
    cfg = BenchmarkConfig(runs=1, t_id=60, t_test=60, p=4)
    noisy_id, _ = generate_dataset(model, cfg, 11)
    clean_id, _ = generate_dataset(model, cfg, 11, noise_free=True)
    np.testing.assert_array_equal(noisy_id.u, clean_id.u)
    assert not np.array_equal(noisy_id.y, clean_id.y)
    # the clean output is exactly the deterministic plant response
    expect = simulate_armax(model, clean_id.u, np.zeros(60))
    np.testing.assert_array_equal(clean_id.y, expect)


def test_relative_error_zero_at_truth_and_scales():
    model = generate_armax_model(6, channel_variances=(1.0, 1.0))
    p_ir, h_ir = armax_impulse_responses(model, 200)
    exact = ForwardModel(p_ir=p_ir, h_ir=h_ir, spectral_radius=0.996)
    assert relative_error(model, exact) == 0.0
    # doubling the plant response alone contributes half its relative norm
    doubled = ForwardModel(p_ir=2.0 * p_ir, h_ir=h_ir, spectral_radius=0.996)
    assert relative_error(model, doubled) == pytest.approx(0.5, rel=1e-12)
    short = ForwardModel(p_ir=p_ir[:50], h_ir=h_ir[:50], spectral_radius=0.996)
    with pytest.raises(ValueError, match="shorter"):
        relative_error(model, short)
    # at length 1 the true plant response is all zeros by the input delay
    with pytest.raises(ValueError, match="zero norm"):
        relative_error(model, exact, length=1)


def test_method_outcome_contract():
    fwd = ForwardModel(p_ir=[0.0, 1.0], h_ir=[1.0, 0.5], spectral_radius=0.5)
    ok = MethodOutcome(method="lmi", forward=fwd, err=0.3, dominant_pole=0.5, seconds=1.0)
    assert ok.error_message is None
    fail = MethodOutcome(
        method="lmi",
        forward=None,
        err=None,
        dominant_pole=None,
        seconds=0.1,
        error_message="SdpError: no",
    )
    assert fail.forward is None
    with pytest.raises(ValueError):
        MethodOutcome(
            method="lmi", forward=fwd, err=0.3, dominant_pole=1.2, seconds=1.0
        )
    with pytest.raises(ValueError):
        MethodOutcome(method="lmi", forward=None, err=0.3, dominant_pole=0.5, seconds=1.0)


def test_config_validation():
    with pytest.raises(ValueError, match="runs"):
        BenchmarkConfig(runs=0)
    with pytest.raises(ValueError, match="t_id"):
        BenchmarkConfig(t_id=60, p=30)
    with pytest.raises(ValueError, match="unknown methods"):
        BenchmarkConfig(methods=("lmi", "ridge"))
    with pytest.raises(ValueError, match="repeat"):
        BenchmarkConfig(methods=("lmi", "lmi"))
    with pytest.raises(ValueError, match="n_jobs"):
        BenchmarkConfig(n_jobs=0)
    with pytest.raises(ValueError, match="kappa_policy"):
        BenchmarkConfig(kappa_policy="zero")
    cfg = BenchmarkConfig(methods=["mcmc-mean"])
    assert cfg.methods == ("mcmc-mean",)


def test_run_single_stable_draw_has_no_outcomes():
    cfg = BenchmarkConfig(runs=1, seed=2, methods=("lmi",))
    rec = run_single(cfg, 0)
    assert not rec.unstable
    assert rec.outcomes == {}
    assert rec.eb_spectral_radius < 1.0
    assert rec.eb_err > 0.0


def test_run_single_deterministic():
    cfg = BenchmarkConfig(runs=2, seed=2, methods=())
    a = run_single(cfg, 1)
    b = run_single(cfg, 1)
    assert a.unstable and b.unstable
    np.testing.assert_array_equal(a.eb_predictor.f, b.eb_predictor.f)
    np.testing.assert_array_equal(a.eb_predictor.g, b.eb_predictor.g)
    assert a.eb_spectral_radius == b.eb_spectral_radius
    assert a.eb_err == b.eb_err


def test_record_round_trip_lossless(tmp_path):
    model = generate_armax_model(8, channel_variances=(2.0, 0.5))
    fwd = ForwardModel(
        p_ir=[0.0, 0.25, 0.125], h_ir=[1.0, -0.5, 0.25], spectral_radius=0.5
    )
    outcomes = {
        "lmi": MethodOutcome(
            method="lmi",
            forward=fwd,
            err=0.31,
            dominant_pole=0.5,
            seconds=1.25,
            predictor=PredictorEstimate(f=[0.5, -0.1], g=[1.0, 0.2]),
            extra={"newton_iterations": 12.0},
        ),
        "ml-pf": MethodOutcome(
            method="ml-pf",
            forward=None,
            err=None,
            dominant_pole=None,
            seconds=0.5,
            error_message="PenaltyStabilizationError: stalled",
        ),
    }
    rec = RunRecord(
        index=3,
        model=model,
        eb_predictor=PredictorEstimate(f=[1.1, -0.3], g=[0.9, 0.0]),
        eb_hyperparameters=Hyperparameters(scale=2.0, decay=0.8, noise_variance=0.4),
        eb_spectral_radius=1.01,
        eb_err=0.9,
        unstable=True,
        outcomes=outcomes,
        seconds_identify=0.04,
    )
    doc = record_to_json(rec)
    back = record_from_json(doc)
    assert canonical_json(record_to_json(back)) == canonical_json(doc)
    np.testing.assert_array_equal(back.outcomes["lmi"].predictor.f, [0.5, -0.1])
    assert back.outcomes["ml-pf"].predictor is None
    assert back.outcomes["ml-pf"].error_message.startswith("Penalty")

    cfg = BenchmarkConfig(runs=1, t_id=100, p=4)
    path = tmp_path / "records.json"
    save_records(path, [rec], cfg)
    cfg_back, recs_back = load_records(path)
    assert cfg_back == BenchmarkConfig(runs=1, t_id=100, p=4)
    assert canonical_json(record_to_json(recs_back[0])) == canonical_json(doc)
    bad = json.loads(path.read_text())
    bad["schema"] = "other-v9"
    path.write_text(json.dumps(bad))
    with pytest.raises(ValueError, match="schema"):
        load_records(path)


def test_config_json_round_trip_drops_execution_fields(tmp_path):
    cfg = BenchmarkConfig(
        runs=3, seed=9, methods=("lmi",), output_dir=str(tmp_path), n_jobs=4,
        make_plots=False,
    )
    from stablepem.benchmark import _config_to_json

    doc = _config_to_json(cfg)
    assert "output_dir" not in doc and "n_jobs" not in doc and "make_plots" not in doc
    back = config_from_json(doc)
    assert back.runs == 3 and back.seed == 9 and back.methods == ("lmi",)
    assert back.output_dir is None and back.n_jobs == 1


@pytest.fixture(scope="module")
def tiny_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = BenchmarkConfig(runs=2, seed=2, methods=("lmi",), output_dir=str(out))
    return cfg, run_monte_carlo(cfg), out


def test_report_fields_and_purity(tiny_sweep):
    cfg, result, _ = tiny_sweep
    report = result.report
    assert report["schema"] == "stablepem-report-v1"
    assert report["runs"] == 2
    assert report["n_unstable"] == 1
    assert report["unstable_indices"] == [1]
    assert report["unstable_fraction"] == pytest.approx(0.5)
    assert "output_dir" not in report["config"]
    lmi = report["methods"]["lmi"]
    assert lmi["n_success"] == 1 and lmi["n_failed"] == 0
    assert lmi["dominant_pole"]["max"] < 1.0
    assert lmi["err"]["n"] == 1
    assert report["eb"]["err_all"]["n"] == 2
    # the report is a pure function of the records
    again = report_from_records(result.records, cfg)
    assert canonical_json(again) == canonical_json(report)


def test_written_outputs_reproduce_byte_identically(tiny_sweep, tmp_path):
    cfg, _, out_a = tiny_sweep
    import dataclasses

    out_b = tmp_path / "again"
    out_b.mkdir()
    cfg_b = dataclasses.replace(cfg, output_dir=str(out_b))
    run_monte_carlo(cfg_b)
    stable_files = [
        "report.json",
        "summary.csv",
        "unstable_runs.csv",
        "impulse_errors.svg",
        "dominant_poles.svg",
    ]
    for name in stable_files:
        a = (out_a / name).read_bytes()
        b = (out_b / name).read_bytes()
        assert a == b, f"{name} differs between executions"
    # records carry timings, so only their experiment content must agree
    _, recs_a = load_records(out_a / "records.json")
    _, recs_b = load_records(out_b / "records.json")
    for ra, rb in zip(recs_a, recs_b):
        da, db = record_to_json(ra), record_to_json(rb)
        da.pop("seconds_identify"), db.pop("seconds_identify")
        for oc in da["outcomes"].values():
            oc.pop("seconds")
        for oc in db["outcomes"].values():
            oc.pop("seconds")
        assert canonical_json(da) == canonical_json(db)


def test_parallel_execution_matches_sequential():
    cfg_seq = BenchmarkConfig(runs=2, seed=2, methods=())
    cfg_par = BenchmarkConfig(runs=2, seed=2, methods=(), n_jobs=2)
    seq = run_monte_carlo(cfg_seq)
    par = run_monte_carlo(cfg_par)
    for a, b in zip(seq.records, par.records):
        np.testing.assert_array_equal(a.eb_predictor.f, b.eb_predictor.f)
        assert a.eb_spectral_radius == b.eb_spectral_radius
        assert a.unstable == b.unstable


def test_sampling_seed_independent_of_method_subset():
    # the chain seed is derived from the run sequence alone, so the
    # posterior mean cannot depend on which sampling summaries were
    # requested
    base = dict(
        runs=2, seed=2, n_hyper=250, burn_in=250, n_stable=250,
        n_components=30, kappa_draws=250,
    )
    rec_both = run_single(BenchmarkConfig(methods=("mcmc-mean", "mcmc-map"), **base), 1)
    rec_mean = run_single(BenchmarkConfig(methods=("mcmc-mean",), **base), 1)
    np.testing.assert_array_equal(
        rec_both.outcomes["mcmc-mean"].forward.p_ir,
        rec_mean.outcomes["mcmc-mean"].forward.p_ir,
    )
    assert rec_both.outcomes["mcmc-map"].extra.get("shared_chain") == 1.0
    assert "shared_chain" not in rec_mean.outcomes["mcmc-mean"].extra
