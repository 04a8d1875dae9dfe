"""Monte Carlo benchmark of the stabilization methods.

Generates second order ARMAX systems with fixed oscillatory poles at
modulus 0.996, simulates identification data at unit signal-to-noise
ratio, runs the empirical Bayes pipeline, and applies every configured
stabilization method to the runs whose implied forward model comes out
unstable.  Records, aggregate report, CSV tables, and SVG boxplots are
all deterministic functions of the master seed; wall clock timings are
kept in the records file only, so the report file is byte stable.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from ._svg import write_boxplot
from .bayes import Dataset, GramCache, identify
from .kernels import Hyperparameters
from .lmi import project_stable
from .lti import (
    ArmaxModel,
    ForwardModel,
    Polynomial,
    PredictorEstimate,
    armax_impulse_responses,
    predictor_to_forward,
    simulate_armax,
)
from .mcmc import stabilize_mcmc
from .penalty import stabilize_ml_pf

__all__ = [
    "METHODS",
    "BenchmarkConfig",
    "MethodOutcome",
    "RunRecord",
    "BenchmarkResult",
    "generate_armax_model",
    "generate_dataset",
    "relative_error",
    "run_single",
    "run_monte_carlo",
    "report_from_records",
    "save_records",
    "load_records",
    "write_outputs",
    "canonical_json",
]

METHODS = ("lmi", "ml-pf", "mcmc-mean", "mcmc-map")

RECORDS_SCHEMA = "stablepem-records-v1"
REPORT_SCHEMA = "stablepem-report-v1"

# horizon and discarded transient for the gain calibration simulations;
# the retained window is 10^4 samples
_GAIN_HORIZON = 12000
_GAIN_BURN = 2000


@dataclass(frozen=True)
class BenchmarkConfig:
    """Settings for one Monte Carlo sweep.

    ``methods`` selects the stabilizers applied to unstable runs; the
    two sampling estimates share a single chain when both are present.
    ``output_dir`` of None keeps everything in memory.
    """

    runs: int = 500
    t_id: int = 400
    t_test: int = 1000
    p: int = 30
    seed: int = 0
    methods: tuple = METHODS
    output_dir: str | None = None
    expansion_length: int = 200
    n_hyper: int = 2000
    burn_in: int = 2000
    n_stable: int = 2000
    n_components: int = 200
    kappa_policy: str = "estimate"
    kappa_draws: int = 2000
    make_plots: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.t_id <= 2 * self.p:
            raise ValueError("t_id must exceed 2 * p")
        if self.t_test < 2:
            raise ValueError("t_test must be >= 2")
        if self.expansion_length < 1:
            raise ValueError("expansion_length must be >= 1")
        methods = tuple(self.methods)
        unknown = set(methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if len(set(methods)) != len(methods):
            raise ValueError("methods must not repeat")
        object.__setattr__(self, "methods", methods)
        if self.kappa_policy not in ("estimate", "unit"):
            raise ValueError("kappa_policy must be 'estimate' or 'unit'")
        for name in ("n_hyper", "burn_in", "n_stable", "n_components", "kappa_draws"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_jobs == 0:
            raise ValueError("n_jobs must be nonzero")
        if self.output_dir is not None:
            object.__setattr__(self, "output_dir", str(self.output_dir))


def generate_armax_model(seed, *, channel_variances=None) -> ArmaxModel:
    """Draw one benchmark system.

    A(z) has the fixed conjugate pole pair 0.996 e^{+-j pi/3}, B is
    monic degree 1 with a real root uniform on (-0.9, 0.9), C is monic
    degree 2 with two independent real roots uniform on [0.65, 0.73].
    The input gain k equalizes the long run variances of the plant and
    noise channels, estimated from 10^4 retained samples of each
    channel driven by unit variance white noise.

    Parameters
    ----------
    seed : int or SeedSequence
    channel_variances : (float, float), optional
        Test seam replacing the simulated (noise, plant) channel
        variances, so k = sqrt(var_e / var_u) directly.
    """
    rng = np.random.default_rng(seed)
    a = Polynomial([1.0, -0.996, 0.992016], monic=True)
    r = rng.uniform(-0.9, 0.9)
    b = Polynomial([1.0, -r])
    r1, r2 = rng.uniform(0.65, 0.73, 2)
    c = Polynomial.from_roots([r1, r2])
    if channel_variances is not None:
        var_e, var_u = float(channel_variances[0]), float(channel_variances[1])
    else:
        one = Polynomial([1.0], monic=True)
        y_u = simulate_armax(
            ArmaxModel(a=a, b=b, c=one, k_gain=1.0),
            rng.standard_normal(_GAIN_HORIZON),
            np.zeros(_GAIN_HORIZON),
        )[_GAIN_BURN:]
        y_e = simulate_armax(
            ArmaxModel(a=a, b=Polynomial([1.0]), c=c, k_gain=1.0),
            np.zeros(_GAIN_HORIZON),
            rng.standard_normal(_GAIN_HORIZON),
        )[_GAIN_BURN:]
        var_e, var_u = float(np.var(y_e)), float(np.var(y_u))
    return ArmaxModel(a=a, b=b, c=c, k_gain=float(np.sqrt(var_e / var_u)))


def generate_dataset(
    model: ArmaxModel,
    cfg: BenchmarkConfig,
    seed,
    *,
    noise_free: bool = False,
) -> tuple[Dataset, Dataset]:
    """Identification and test records for one system.

    Input and innovation sequences are independent unit variance white
    Gaussian noise, identification draws first so the identification
    record does not depend on the test length.  ``noise_free`` zeroes
    the innovations after drawing them, preserving the input draws.
    """
    rng = np.random.default_rng(seed)
    tag = int(seed) if isinstance(seed, (int, np.integer)) else None
    sets = []
    for t_len in (cfg.t_id, cfg.t_test):
        u = rng.standard_normal(t_len)
        e = rng.standard_normal(t_len)
        if noise_free:
            e = np.zeros(t_len)
        sets.append(Dataset(u=u, y=simulate_armax(model, u, e), seed=tag))
    return sets[0], sets[1]


def relative_error(
    true_model: ArmaxModel, est: ForwardModel, length: int = 200
) -> float:
    """Symmetric relative impulse response error of an estimate.

    Half the relative Euclidean error on the plant response plus half
    the relative error on the noise response, both truncated at
    ``length`` terms.
    """
    if est.length < length:
        raise ValueError("estimate is shorter than the comparison length")
    p_true, h_true = armax_impulse_responses(true_model, length)
    np_true = float(np.linalg.norm(p_true))
    nh_true = float(np.linalg.norm(h_true))
    if np_true == 0.0 or nh_true == 0.0:
        raise ValueError("true impulse response has zero norm")
    err_p = np.linalg.norm(p_true - est.p_ir[:length]) / np_true
    err_h = np.linalg.norm(h_true - est.h_ir[:length]) / nh_true
    return float(0.5 * err_p + 0.5 * err_h)


@dataclass(frozen=True, eq=False)
class MethodOutcome:
    """Result of one stabilization method on one unstable run.

    ``predictor`` carries the stabilized coefficients when the method
    produces a finite order predictor; the averaged sampling estimate
    has none, only its forward expansion.
    """

    method: str
    forward: ForwardModel | None
    err: float | None
    dominant_pole: float | None
    seconds: float
    error_message: str | None = None
    predictor: PredictorEstimate | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.error_message is None:
            if self.forward is None or self.err is None or self.dominant_pole is None:
                raise ValueError("successful outcome must carry model, err, and pole")
            if not self.err >= 0.0:
                raise ValueError("err must be nonnegative")
            if not self.dominant_pole < 1.0:
                raise ValueError("successful stabilization must have dominant pole < 1")

    @property
    def ok(self) -> bool:
        return self.error_message is None


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Everything persisted about one Monte Carlo run."""

    index: int
    model: ArmaxModel
    eb_predictor: PredictorEstimate
    eb_hyperparameters: Hyperparameters
    eb_spectral_radius: float
    eb_err: float
    unstable: bool
    outcomes: dict
    seconds_identify: float

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("index must be >= 0")
        for name, outcome in self.outcomes.items():
            if name != outcome.method:
                raise ValueError("outcome key must match its method name")


class BenchmarkResult:
    """Records plus the aggregate report of one sweep."""

    def __init__(self, records: list, report: dict):
        self.records = records
        self.report = report


def _mcmc_seed(run_seq: np.random.SeedSequence) -> np.random.SeedSequence:
    # spawn key 2, after the model and data children
    return run_seq.spawn(1)[0]


def run_single(cfg: BenchmarkConfig, index: int) -> RunRecord:
    """Execute one Monte Carlo run: generate, identify, stabilize."""
    run_seq = np.random.SeedSequence(entropy=(cfg.seed, index))
    s_model, s_data = run_seq.spawn(2)
    model = generate_armax_model(s_model)
    data_id, _ = generate_dataset(model, cfg, s_data)

    t0 = time.perf_counter()
    res = identify(data_id, cfg.p, expansion_length=cfg.expansion_length)
    seconds_identify = time.perf_counter() - t0
    eb_err = relative_error(model, res.forward, cfg.expansion_length)
    rho_eb = res.forward.spectral_radius
    unstable = rho_eb >= 1.0

    outcomes: dict = {}
    if unstable and cfg.methods:
        gram = GramCache.build(data_id, cfg.p)
        sampling = tuple(m for m in cfg.methods if m.startswith("mcmc"))
        s_mcmc = _mcmc_seed(run_seq) if sampling else None

        if "lmi" in cfg.methods:
            outcomes["lmi"] = _try_method(
                "lmi", lambda: _run_lmi(res, cfg.expansion_length), model, cfg
            )
        if "ml-pf" in cfg.methods:
            outcomes["ml-pf"] = _try_method(
                "ml-pf", lambda: _run_ml_pf(res, gram, cfg.expansion_length), model, cfg
            )
        if sampling:
            t1 = time.perf_counter()
            try:
                out = stabilize_mcmc(
                    None,
                    res.hyperparameters,
                    gram=gram,
                    n_hyper=cfg.n_hyper,
                    burn_in=cfg.burn_in,
                    n_stable=cfg.n_stable,
                    n_components=cfg.n_components,
                    kappa_policy=cfg.kappa_policy,
                    kappa_draws=cfg.kappa_draws,
                    expansion_length=cfg.expansion_length,
                    seed=s_mcmc,
                )
            except Exception as exc:  # recorded, the sweep continues
                seconds = time.perf_counter() - t1
                for m in sampling:
                    outcomes[m] = MethodOutcome(
                        method=m,
                        forward=None,
                        err=None,
                        dominant_pole=None,
                        seconds=seconds,
                        error_message=f"{type(exc).__name__}: {exc}",
                    )
            else:
                seconds = time.perf_counter() - t1
                diag = {k: float(v) for k, v in out.diagnostics.items()}
                if len(sampling) == 2:
                    diag["shared_chain"] = 1.0
                for m in sampling:
                    fwd = out.mean_model if m == "mcmc-mean" else out.map_forward
                    est = None if m == "mcmc-mean" else out.map_predictor
                    outcomes[m] = MethodOutcome(
                        method=m,
                        forward=fwd,
                        err=relative_error(model, fwd, cfg.expansion_length),
                        dominant_pole=fwd.spectral_radius,
                        seconds=seconds,
                        predictor=est,
                        extra=dict(diag),
                    )
    return RunRecord(
        index=index,
        model=model,
        eb_predictor=res.predictor,
        eb_hyperparameters=res.hyperparameters,
        eb_spectral_radius=rho_eb,
        eb_err=eb_err,
        unstable=unstable,
        outcomes=outcomes,
        seconds_identify=seconds_identify,
    )


def _run_lmi(res, length: int) -> tuple[ForwardModel, PredictorEstimate]:
    f_hat = project_stable(res.predictor.f)
    est = PredictorEstimate(f=f_hat, g=res.predictor.g)
    return predictor_to_forward(est, length), est


def _run_ml_pf(res, gram, length: int) -> tuple[ForwardModel, PredictorEstimate]:
    _, est = stabilize_ml_pf(None, res.hyperparameters, gram=gram)
    return predictor_to_forward(est, length), est


def _try_method(name: str, thunk, model: ArmaxModel, cfg: BenchmarkConfig) -> MethodOutcome:
    t0 = time.perf_counter()
    try:
        fwd, est = thunk()
    except Exception as exc:  # recorded, the sweep continues
        return MethodOutcome(
            method=name,
            forward=None,
            err=None,
            dominant_pole=None,
            seconds=time.perf_counter() - t0,
            error_message=f"{type(exc).__name__}: {exc}",
        )
    return MethodOutcome(
        method=name,
        forward=fwd,
        err=relative_error(model, fwd, cfg.expansion_length),
        dominant_pole=fwd.spectral_radius,
        seconds=time.perf_counter() - t0,
        predictor=est,
    )


def run_monte_carlo(cfg: BenchmarkConfig, *, progress: bool = False) -> BenchmarkResult:
    """Run the full sweep and aggregate the report.

    Runs execute independently with seeds derived from the master seed
    and the run index, so any execution order (including parallel with
    ``n_jobs`` > 1) produces identical records apart from timings.
    Writes report files when the config names an output directory.
    """
    if cfg.n_jobs == 1:
        records = []
        for i in range(cfg.runs):
            rec = run_single(cfg, i)
            records.append(rec)
            if progress:
                flag = f"unstable rho={rec.eb_spectral_radius:.5f}" if rec.unstable else "stable"
                print(f"run {i + 1}/{cfg.runs}: {flag}", file=sys.stderr)
    else:
        records = Parallel(n_jobs=cfg.n_jobs)(
            delayed(run_single)(cfg, i) for i in range(cfg.runs)
        )
    report = report_from_records(records, cfg)
    if cfg.output_dir is not None:
        write_outputs(records, report, cfg)
    return BenchmarkResult(records=records, report=report)


def _quartiles(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {
        "n": int(v.size),
        "mean": float(np.mean(v)),
        "median": float(np.median(v)),
        "q25": float(np.percentile(v, 25.0)),
        "q75": float(np.percentile(v, 75.0)),
        "min": float(np.min(v)),
        "max": float(np.max(v)),
    }


def report_from_records(records: list, cfg: BenchmarkConfig) -> dict:
    """Aggregate statistics recomputable from persisted records.

    A pure function of the records and configuration: no timings or
    environment data enter, so the output is identical across reruns
    with the same seed.
    """
    records = sorted(records, key=lambda r: r.index)
    unstable = [r for r in records if r.unstable]
    report = {
        "schema": REPORT_SCHEMA,
        "config": _config_to_json(cfg),
        "runs": len(records),
        "n_unstable": len(unstable),
        "unstable_fraction": len(unstable) / len(records) if records else 0.0,
        "unstable_indices": [r.index for r in unstable],
        "eb": {
            "err_all": _quartiles([r.eb_err for r in records]) if records else None,
            "err_unstable": _quartiles([r.eb_err for r in unstable]) if unstable else None,
            "spectral_radius_unstable": (
                _quartiles([r.eb_spectral_radius for r in unstable]) if unstable else None
            ),
        },
        "methods": {},
    }
    for m in cfg.methods:
        outcomes = [r.outcomes[m] for r in unstable if m in r.outcomes]
        good = [o for o in outcomes if o.ok]
        failures = [
            {"index": r.index, "message": r.outcomes[m].error_message}
            for r in unstable
            if m in r.outcomes and not r.outcomes[m].ok
        ]
        report["methods"][m] = {
            "n_success": len(good),
            "n_failed": len(failures),
            "failures": failures,
            "err": _quartiles([o.err for o in good]) if good else None,
            "dominant_pole": (
                _quartiles([o.dominant_pole for o in good]) if good else None
            ),
        }
    return report


# execution details that do not alter the experiment and would make
# otherwise identical outputs differ between machines or invocations
_NON_EXPERIMENT_FIELDS = ("output_dir", "make_plots", "n_jobs")


def _config_to_json(cfg: BenchmarkConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["methods"] = list(d["methods"])
    for name in _NON_EXPERIMENT_FIELDS:
        d.pop(name, None)
    return d


def config_from_json(d: dict) -> BenchmarkConfig:
    d = {k: v for k, v in d.items() if k not in _NON_EXPERIMENT_FIELDS}
    d["methods"] = tuple(d.get("methods", METHODS))
    return BenchmarkConfig(**d)


def _forward_to_json(fwd: ForwardModel | None) -> dict | None:
    if fwd is None:
        return None
    return {
        "p_ir": [float(v) for v in fwd.p_ir],
        "h_ir": [float(v) for v in fwd.h_ir],
        "spectral_radius": float(fwd.spectral_radius),
    }


def _forward_from_json(d: dict | None) -> ForwardModel | None:
    if d is None:
        return None
    return ForwardModel(
        p_ir=np.asarray(d["p_ir"], dtype=float),
        h_ir=np.asarray(d["h_ir"], dtype=float),
        spectral_radius=float(d["spectral_radius"]),
    )


def record_to_json(rec: RunRecord) -> dict:
    """Lossless JSON form of one run record."""
    return {
        "index": rec.index,
        "model": {
            "a": [float(v) for v in rec.model.a.coeffs],
            "b": [float(v) for v in rec.model.b.coeffs],
            "c": [float(v) for v in rec.model.c.coeffs],
            "k_gain": float(rec.model.k_gain),
        },
        "eb": {
            "f": [float(v) for v in rec.eb_predictor.f],
            "g": [float(v) for v in rec.eb_predictor.g],
            "hyperparameters": {
                "scale": float(rec.eb_hyperparameters.scale),
                "decay": float(rec.eb_hyperparameters.decay),
                "noise_variance": float(rec.eb_hyperparameters.noise_variance),
            },
            "spectral_radius": float(rec.eb_spectral_radius),
            "err": float(rec.eb_err),
        },
        "unstable": rec.unstable,
        "outcomes": {
            m: {
                "method": o.method,
                "forward": _forward_to_json(o.forward),
                "err": None if o.err is None else float(o.err),
                "dominant_pole": None if o.dominant_pole is None else float(o.dominant_pole),
                "seconds": float(o.seconds),
                "error_message": o.error_message,
                "predictor": None
                if o.predictor is None
                else {
                    "f": [float(v) for v in o.predictor.f],
                    "g": [float(v) for v in o.predictor.g],
                },
                "extra": o.extra,
            }
            for m, o in rec.outcomes.items()
        },
        "seconds_identify": float(rec.seconds_identify),
    }


def record_from_json(d: dict) -> RunRecord:
    """Rebuild a run record from its JSON form."""
    model = ArmaxModel(
        a=Polynomial(np.asarray(d["model"]["a"], dtype=float), monic=True),
        b=Polynomial(np.asarray(d["model"]["b"], dtype=float)),
        c=Polynomial(np.asarray(d["model"]["c"], dtype=float), monic=True),
        k_gain=float(d["model"]["k_gain"]),
    )
    eb = d["eb"]
    hyper = Hyperparameters(
        scale=float(eb["hyperparameters"]["scale"]),
        decay=float(eb["hyperparameters"]["decay"]),
        noise_variance=float(eb["hyperparameters"]["noise_variance"]),
    )
    outcomes = {
        m: MethodOutcome(
            method=o["method"],
            forward=_forward_from_json(o["forward"]),
            err=o["err"],
            dominant_pole=o["dominant_pole"],
            seconds=o["seconds"],
            error_message=o["error_message"],
            predictor=None
            if o.get("predictor") is None
            else PredictorEstimate(
                f=np.asarray(o["predictor"]["f"], dtype=float),
                g=np.asarray(o["predictor"]["g"], dtype=float),
            ),
            extra=dict(o["extra"]),
        )
        for m, o in d["outcomes"].items()
    }
    return RunRecord(
        index=int(d["index"]),
        model=model,
        eb_predictor=PredictorEstimate(
            f=np.asarray(eb["f"], dtype=float), g=np.asarray(eb["g"], dtype=float)
        ),
        eb_hyperparameters=hyper,
        eb_spectral_radius=float(eb["spectral_radius"]),
        eb_err=float(eb["err"]),
        unstable=bool(d["unstable"]),
        outcomes=outcomes,
        seconds_identify=float(d["seconds_identify"]),
    )


def canonical_json(obj) -> str:
    """Serialize with sorted keys and fixed layout for byte stable files."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def save_records(path, records: list, cfg: BenchmarkConfig) -> None:
    doc = {
        "schema": RECORDS_SCHEMA,
        "config": _config_to_json(cfg),
        "records": [record_to_json(r) for r in records],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))


def load_records(path) -> tuple[BenchmarkConfig, list]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != RECORDS_SCHEMA:
        raise ValueError(f"unexpected records schema: {doc.get('schema')!r}")
    cfg = config_from_json(doc["config"])
    return cfg, [record_from_json(d) for d in doc["records"]]


def _method_columns(cfg: BenchmarkConfig) -> list:
    cols = []
    for m in cfg.methods:
        cols.extend([f"{m}_status", f"{m}_err", f"{m}_pole"])
    return cols


def write_outputs(records: list, report: dict, cfg: BenchmarkConfig) -> None:
    """Write records, report, CSV tables, and figures to the output directory."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_records(out / "records.json", records, cfg)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        fh.write(canonical_json(report))

    unstable = sorted((r for r in records if r.unstable), key=lambda r: r.index)
    with open(out / "unstable_runs.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "eb_spectral_radius", "eb_err"] + _method_columns(cfg))
        for r in unstable:
            row = [r.index, repr(r.eb_spectral_radius), repr(r.eb_err)]
            for m in cfg.methods:
                o = r.outcomes.get(m)
                if o is None:
                    row.extend(["missing", "", ""])
                elif o.ok:
                    row.extend(["ok", repr(o.err), repr(o.dominant_pole)])
                else:
                    row.extend(["failed", "", ""])
            writer.writerow(row)

    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "n_success", "n_failed", "err_median", "err_q25",
             "err_q75", "err_mean", "pole_median"]
        )
        eb_stats = report["eb"]["err_unstable"]
        if eb_stats is not None:
            writer.writerow(
                ["eb", eb_stats["n"], 0, repr(eb_stats["median"]), repr(eb_stats["q25"]),
                 repr(eb_stats["q75"]), repr(eb_stats["mean"]),
                 repr(report["eb"]["spectral_radius_unstable"]["median"])]
            )
        for m in cfg.methods:
            stats = report["methods"][m]
            err = stats["err"]
            pole = stats["dominant_pole"]
            writer.writerow(
                [m, stats["n_success"], stats["n_failed"],
                 repr(err["median"]) if err else "", repr(err["q25"]) if err else "",
                 repr(err["q75"]) if err else "", repr(err["mean"]) if err else "",
                 repr(pole["median"]) if pole else ""]
            )

    if cfg.make_plots and unstable:
        err_groups = {"eb": [r.eb_err for r in unstable]}
        pole_groups = {"eb": [r.eb_spectral_radius for r in unstable]}
        for m in cfg.methods:
            vals = [r.outcomes[m] for r in unstable if m in r.outcomes and r.outcomes[m].ok]
            if vals:
                err_groups[m] = [o.err for o in vals]
                pole_groups[m] = [o.dominant_pole for o in vals]
        write_boxplot(
            out / "impulse_errors.svg",
            err_groups,
            title="Relative impulse response errors on unstable runs",
            ylabel="err",
        )
        write_boxplot(
            out / "dominant_poles.svg",
            pole_groups,
            title="Dominant pole modulus after stabilization",
            ylabel="|pole|",
            reference=(1.0, "stability edge"),
        )
