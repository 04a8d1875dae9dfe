"""Command line interface: identify, stabilize, benchmark, report.

Datasets travel as three column CSV (t, u, y) with a header row, models
as JSON documents with an explicit schema tag.  Exit codes: 0 success,
1 usage or input format error, 2 numerical failure inside a solver.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bayes import Dataset, GramCache, OptimizationError, identify
from .benchmark import (
    METHODS,
    BenchmarkConfig,
    config_from_json,
    load_records,
    report_from_records,
    run_monte_carlo,
    write_outputs,
)
from .kernels import CovarianceError, Hyperparameters
from .lmi import SdpError, project_stable
from .lti import (
    PredictorEstimate,
    RootFindingError,
    predictor_to_forward,
    spectral_radius,
)
from .mcmc import McmcError, stabilize_mcmc
from .penalty import PenaltyStabilizationError, stabilize_ml_pf

MODEL_SCHEMA = "stablepem-model-v1"
FORWARD_SCHEMA = "stablepem-forward-v1"

_NUMERICAL_ERRORS = (
    SdpError,
    PenaltyStabilizationError,
    McmcError,
    CovarianceError,
    OptimizationError,
    RootFindingError,
    np.linalg.LinAlgError,
    OverflowError,
    FloatingPointError,
)


class UsageError(Exception):
    """Bad arguments or malformed input files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_dataset(path: str) -> Dataset:
    t_prev = None
    u, y = [], []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise UsageError(f"{path}: empty file")
            cols = [h.strip().lower() for h in header]
            if cols[:3] != ["t", "u", "y"]:
                raise UsageError(
                    f"{path}: expected header 't,u,y', got {','.join(header)!r}"
                )
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < 3:
                    raise UsageError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
                try:
                    t_val = float(row[0])
                    u.append(float(row[1]))
                    y.append(float(row[2]))
                except ValueError as exc:
                    raise UsageError(f"{path}:{lineno}: {exc}") from exc
                if t_prev is not None and t_val <= t_prev:
                    raise UsageError(f"{path}:{lineno}: time column must increase")
                t_prev = t_val
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if len(y) < 2:
        raise UsageError(f"{path}: need at least 2 data rows")
    try:
        return Dataset(u=np.array(u), y=np.array(y))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _write_json(path: str, doc: dict) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON: {exc}") from exc


def _model_doc(est: PredictorEstimate, eta: Hyperparameters, extra: dict) -> dict:
    doc = {
        "schema": MODEL_SCHEMA,
        "p": est.p,
        "f": [float(v) for v in est.f],
        "g": [float(v) for v in est.g],
        "spectral_radius": spectral_radius(est.f),
        "hyperparameters": {
            "scale": float(eta.scale),
            "decay": float(eta.decay),
            "noise_variance": float(eta.noise_variance),
        },
    }
    doc["stable"] = doc["spectral_radius"] < 1.0
    doc.update(extra)
    return doc


def _load_model_doc(path: str) -> tuple[PredictorEstimate, Hyperparameters]:
    doc = _read_json(path)
    if doc.get("schema") != MODEL_SCHEMA:
        raise UsageError(
            f"{path}: expected schema {MODEL_SCHEMA!r}, got {doc.get('schema')!r}"
        )
    try:
        est = PredictorEstimate(
            f=np.asarray(doc["f"], dtype=float), g=np.asarray(doc["g"], dtype=float)
        )
        h = doc["hyperparameters"]
        eta = Hyperparameters(
            scale=float(h["scale"]),
            decay=float(h["decay"]),
            noise_variance=float(h["noise_variance"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: bad model document: {exc}") from exc
    return est, eta


def _cmd_identify(args) -> int:
    data = _read_dataset(args.infile)
    res = identify(data, args.p, expansion_length=args.expansion_length)
    doc = _model_doc(res.predictor, res.hyperparameters, {})
    _write_json(args.out, doc)
    state = "stable" if doc["stable"] else "unstable"
    print(f"identified p={args.p} spectral radius {doc['spectral_radius']:.6f} ({state})")
    return 0


def _cmd_stabilize(args) -> int:
    est, eta = _load_model_doc(args.model)
    rho = spectral_radius(est.f)
    if rho < 1.0:
        print("already stable; copying model unchanged")
        _write_json(args.out, _model_doc(est, eta, {"stabilized_by": None}))
        return 0
    if args.method == "lmi":
        f_hat = project_stable(est.f)
        out_est = PredictorEstimate(f=f_hat, g=est.g)
        _write_json(args.out, _model_doc(out_est, eta, {"stabilized_by": "lmi"}))
        print(f"lmi projection: spectral radius {spectral_radius(f_hat):.6f}")
        return 0
    if args.data is None:
        raise UsageError(f"method {args.method!r} needs --data (the identification CSV)")
    data = _read_dataset(args.data)
    if data.n_samples <= 2 * est.p:
        raise UsageError("dataset shorter than twice the model order")
    gram = GramCache.build(data, est.p)
    if args.method == "ml-pf":
        eta_hat, out_est = stabilize_ml_pf(None, eta, gram=gram)
        _write_json(args.out, _model_doc(out_est, eta_hat, {"stabilized_by": "ml-pf"}))
        print(f"ml-pf: spectral radius {spectral_radius(out_est.f):.6f}")
        return 0
    out = stabilize_mcmc(
        None,
        eta,
        gram=gram,
        kappa_policy=args.kappa_policy,
        n_hyper=args.n_hyper,
        burn_in=args.burn_in,
        n_stable=args.n_stable,
        n_components=args.n_components,
        kappa_draws=args.kappa_draws,
        expansion_length=args.expansion_length,
        seed=args.seed,
    )
    if args.method == "mcmc-map":
        doc = _model_doc(out.map_predictor, eta, {"stabilized_by": "mcmc-map"})
        _write_json(args.out, doc)
        print(f"mcmc-map: spectral radius {doc['spectral_radius']:.6f}")
        return 0
    fwd = out.mean_model
    _write_json(
        args.out,
        {
            "schema": FORWARD_SCHEMA,
            "p_ir": [float(v) for v in fwd.p_ir],
            "h_ir": [float(v) for v in fwd.h_ir],
            "spectral_radius": float(fwd.spectral_radius),
            "stable": bool(fwd.stable),
            "stabilized_by": "mcmc-mean",
        },
    )
    print(f"mcmc-mean: spectral radius {fwd.spectral_radius:.6f}")
    return 0


_CONFIG_KEYS = {f.name for f in dataclasses.fields(BenchmarkConfig)}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: malformed TOML: {exc}") from exc
    table = raw.get("benchmark", raw)
    unknown = set(table) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {sorted(unknown)}")
    return dict(table)


def _cmd_benchmark(args) -> int:
    values = _load_config(args.config)
    for name in ("seed", "runs", "p", "kappa_policy", "n_jobs"):
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
    if args.out is not None:
        values["output_dir"] = args.out
    if "methods" in values:
        values["methods"] = tuple(values["methods"])
    try:
        cfg = BenchmarkConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad benchmark configuration: {exc}") from exc
    result = run_monte_carlo(cfg, progress=args.progress)
    rep = result.report
    print(
        f"runs {rep['runs']}  unstable {rep['n_unstable']} "
        f"({100.0 * rep['unstable_fraction']:.1f}%)"
    )
    for m in cfg.methods:
        stats = rep["methods"][m]
        err = stats["err"]
        med = f"{err['median']:.4f}" if err else "n/a"
        print(f"  {m}: ok {stats['n_success']} failed {stats['n_failed']} median err {med}")
    if cfg.output_dir is not None:
        print(f"outputs in {cfg.output_dir}")
    return 0


def _cmd_report(args) -> int:
    try:
        cfg, records = load_records(args.records)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load records: {exc}") from exc
    cfg = dataclasses.replace(cfg, output_dir=args.out)
    report = report_from_records(records, cfg)
    write_outputs(records, report, cfg)
    print(f"report written to {args.out}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="stablepem", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_id = sub.add_parser("identify", help="fit a predictor from a t,u,y CSV")
    p_id.add_argument("--in", dest="infile", required=True, help="input CSV path")
    p_id.add_argument("--p", type=int, default=30, help="predictor order")
    p_id.add_argument("--expansion-length", type=int, default=200)
    p_id.add_argument("--out", default="-", help="model JSON path, - for stdout")
    p_id.set_defaults(func=_cmd_identify)

    p_st = sub.add_parser("stabilize", help="repair an unstable identified model")
    p_st.add_argument("--model", required=True, help="model JSON from identify")
    p_st.add_argument("--method", required=True, choices=METHODS)
    p_st.add_argument("--data", help="identification CSV, needed except for lmi")
    p_st.add_argument("--seed", type=int, default=0)
    p_st.add_argument("--kappa-policy", choices=("estimate", "unit"), default="estimate")
    p_st.add_argument("--n-hyper", type=int, default=2000)
    p_st.add_argument("--burn-in", type=int, default=2000)
    p_st.add_argument("--n-stable", type=int, default=2000)
    p_st.add_argument("--n-components", type=int, default=200)
    p_st.add_argument("--kappa-draws", type=int, default=2000)
    p_st.add_argument("--expansion-length", type=int, default=200)
    p_st.add_argument("--out", default="-", help="output JSON path, - for stdout")
    p_st.set_defaults(func=_cmd_stabilize)

    p_be = sub.add_parser("benchmark", help="run the Monte Carlo sweep")
    p_be.add_argument("--config", help="TOML config, keys as in BenchmarkConfig")
    p_be.add_argument("--seed", type=int, help="master seed override")
    p_be.add_argument("--runs", type=int, help="run count override")
    p_be.add_argument("--p", type=int, help="predictor order override")
    p_be.add_argument("--kappa-policy", dest="kappa_policy", choices=("estimate", "unit"))
    p_be.add_argument("--n-jobs", dest="n_jobs", type=int)
    p_be.add_argument("--out", help="output directory override")
    p_be.add_argument("--progress", action="store_true", help="per run progress on stderr")
    p_be.set_defaults(func=_cmd_benchmark)

    p_re = sub.add_parser("report", help="rebuild report files from records.json")
    p_re.add_argument("--records", required=True, help="records.json path")
    p_re.add_argument("--out", required=True, help="output directory")
    p_re.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
