"""Command-line front end: simulate, fit, forecast, diagnose and mc
subcommands. Every subcommand is deterministic given its flags; outputs are
plot-ready CSVs plus full-precision JSON where appropriate."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .carr import CarrParams, simulate
from .diagnostics import (
    forecast,
    forecast_variance,
    interval_coverage,
    prediction_metrics,
    summarize,
)
from .distributions import ConstantErrors, StandardizedGb2Errors, StandardizedLognormalErrors
from .estimators import EstimationError, FitConfig, fit
from .mc import StudyDesign, StudyError, export_histograms, run_study

WORKERS_ENV = "RANGEVOL_WORKERS"


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _float_tuple(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated number list") from None


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated integer list") from None


def _order(text: str) -> tuple[int, int]:
    parts = _int_tuple(text)
    if len(parts) != 2 or parts[0] < 1 or parts[1] < 0:
        raise argparse.ArgumentTypeError("order must be 'u,v' with u >= 1 and v >= 0")
    return parts


def _error_spec(args):
    if args.lognormal is not None:
        return StandardizedLognormalErrors(args.lognormal), {
            "kind": "lognormal",
            "sigma": args.lognormal,
        }
    if args.constant is not None:
        return ConstantErrors(args.constant), {"kind": "constant", "value": args.constant}
    a, p, q = args.gb2
    return StandardizedGb2Errors(a, p, q), {"kind": "gb2", "a": a, "p": p, "q": q}


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def cmd_simulate(args) -> int:
    params = CarrParams(args.omega, args.alpha, args.beta)
    errors, spec = _error_spec(args)
    series = simulate(params, errors, args.T, args.psi1, args.seed)
    out = Path(args.out)
    dataio.write_range_csv(out, series)
    sidecar = {
        "schema_version": dataio.SCHEMA_VERSION,
        "command": "simulate",
        "omega": args.omega,
        "alpha": list(args.alpha),
        "beta": list(args.beta),
        "psi1": args.psi1,
        "T": args.T,
        "seed": args.seed,
        "errors": spec,
        "rng": {"algorithm": dataio.RNG_ALGORITHM, "numpy": np.__version__},
    }
    dataio.write_json(out.with_suffix(".json"), sidecar)
    print(f"wrote {out} ({args.T} rows) and {out.with_suffix('.json')}")
    return 0


def cmd_fit(args) -> int:
    series = dataio.read_range_csv(args.input)
    u, v = args.order
    config = FitConfig(u=u, v=v, method=args.method, presample=args.presample)
    result = fit(series, config)
    dataio.write_json(args.out_json, dataio.fit_payload(result))
    dataio.write_fitted_csv(args.out_csv, series, result.psi_hat.psi, result.residuals)

    names = ["omega"] + [f"alpha{i}" for i in range(1, u + 1)] + [f"beta{j}" for j in range(1, v + 1)]
    ses = result.std_errors
    print(f"method={result.method} order=({u},{v}) T={len(series)}")
    for k, name in enumerate(names):
        se_txt = "-" if ses is None else dataio.fmt(ses[k])
        print(f"  {name:<8} {dataio.fmt(result.params.as_array()[k]):>12} ({se_txt})")
    if result.gb2_shape is not None:
        a, p, q = result.gb2_shape
        print(f"  gb2      a={dataio.fmt(a)} p={dataio.fmt(p)} q={dataio.fmt(q)}")
    if result.sigma_eps is not None:
        print(f"  sigma_eps {dataio.fmt(result.sigma_eps)}")
    print(f"  rmspe={dataio.fmt(result.rmspe)} mape={dataio.fmt(result.mape)}")
    if result.loglik is not None:
        print(f"  loglik={dataio.fmt(result.loglik)}")
    print(f"  converged={result.converged} iterations={result.iterations} ({result.message})")
    print(f"wrote {args.out_json} and {args.out_csv}")
    return 0


def cmd_forecast(args) -> int:
    loaded = dataio.load_fit_json(args.fit)
    series = dataio.read_range_csv(args.input)
    horizon = args.horizon
    actual = None
    insample = series
    if args.holdout is not None:
        if args.holdout >= len(series):
            raise ValueError(f"holdout {args.holdout} must be below the series length {len(series)}")
        if horizon > args.holdout:
            raise ValueError(f"horizon {horizon} exceeds the holdout of {args.holdout} rows")
        from .carr import RangeSeries

        cut = len(series) - args.holdout
        stamps = None if series.timestamps is None else series.timestamps[:cut]
        insample = RangeSeries(series.values[:cut], stamps)
        actual = series.values[cut : cut + horizon]
    fc = forecast(loaded, insample, horizon)
    fc = forecast_variance(loaded, fc)
    dataio.write_forecast_csv(args.out, fc, actual)
    if actual is not None:
        rmsfe, mafe = prediction_metrics(actual, fc.point)
        cov = interval_coverage(fc, actual)
        print(f"rmsfe={dataio.fmt(rmsfe)} mafe={dataio.fmt(mafe)} coverage={dataio.fmt(cov)}")
    print(f"wrote {args.out}")
    return 0


def cmd_diagnose(args) -> int:
    series = dataio.read_range_csv(args.input)
    report = summarize(series, acf_lags=args.lags)
    payload = {
        "schema_version": dataio.SCHEMA_VERSION,
        "n": report.n,
        "mean": report.mean,
        "median": report.median,
        "variance": report.variance,
        "skewness": report.skewness,
        "excess_kurtosis": report.excess_kurtosis,
        "minimum": report.minimum,
        "maximum": report.maximum,
        "ljung_box": [
            {"lag": t.lag, "statistic": t.statistic, "pvalue": t.pvalue} for t in report.ljung_box
        ],
    }
    dataio.write_json(args.out_json, payload)
    dataio.write_acf_csv(args.acf_csv, report.acf)
    print(f"n={report.n} mean={dataio.fmt(report.mean)} variance={dataio.fmt(report.variance)}")
    for t in report.ljung_box:
        print(f"Q{t.lag}={dataio.fmt(t.statistic)} p={dataio.fmt(t.pvalue)}")
    print(f"wrote {args.out_json} and {args.acf_csv}")
    return 0


def cmd_mc(args) -> int:
    params = CarrParams(args.omega, args.alpha, args.beta)
    if args.design == "gb2":
        errors = StandardizedGb2Errors(*args.gb2)
    else:
        errors = StandardizedLognormalErrors(args.sigma)
    methods = tuple(args.methods.split(","))
    design = StudyDesign(
        params=params,
        errors=errors,
        sample_sizes=args.T,
        replications=args.N,
        base_seed=args.seed,
        psi1=args.psi1,
        methods=methods,
    )
    keep_raw = args.hist_dir is not None
    result = run_study(design, workers=_workers(args), keep_raw=keep_raw)
    dataio.write_study_csv(args.out, result)
    if args.hist_dir is not None:
        hist_dir = Path(args.hist_dir)
        hist_dir.mkdir(parents=True, exist_ok=True)
        for t in design.sample_sizes:
            for method in methods:
                if method == "ml":
                    continue
                tables = export_histograms(result, t, method, bins=args.hist_bins)
                for name, table in tables.items():
                    dataio.write_histogram_csv(hist_dir / f"hist_T{t}_{method}_{name}.csv", table)
    for row in result.rows:
        se_txt = "-" if row.se is None else dataio.fmt(row.se)
        print(
            f"T={row.sample_size} {row.method:<3} {row.parameter:<7} "
            f"mean={dataio.fmt(row.mean)} bias={dataio.fmt(row.bias)} "
            f"sd={dataio.fmt(row.sd)} rmse={dataio.fmt(row.rmse)} se={se_txt}"
        )
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rangevol",
        description="CARR range-volatility modelling: simulation, fitting, forecasting, diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a CARR range series to CSV")
    sim.add_argument("--omega", type=_positive_float, required=True)
    sim.add_argument("--alpha", type=_float_tuple, default=(0.3,))
    sim.add_argument("--beta", type=_float_tuple, default=(0.4,))
    sim.add_argument("--psi1", type=_positive_float, default=0.5)
    sim.add_argument("--T", type=_positive_int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    err = sim.add_mutually_exclusive_group()
    err.add_argument("--gb2", type=_float_tuple, default=(1.0, 1.0, 2.0), help="a,p,q (standardized)")
    err.add_argument("--lognormal", type=_positive_float, default=None, help="log-scale sigma")
    err.add_argument("--constant", type=_positive_float, default=None, help="degenerate errors")
    sim.add_argument("--out", default="ranges.csv")
    sim.set_defaults(handler=cmd_simulate)

    fit_p = sub.add_parser("fit", help="fit a CARR model to a range CSV")
    fit_p.add_argument("--input", required=True)
    fit_p.add_argument("--method", choices=("ml", "lef", "cef"), default="cef")
    fit_p.add_argument("--order", type=_order, default=(1, 1))
    fit_p.add_argument("--presample", type=_positive_float, default=None)
    fit_p.add_argument("--out-json", default="fit.json")
    fit_p.add_argument("--out-csv", default="fitted.csv")
    fit_p.set_defaults(handler=cmd_fit)

    fc = sub.add_parser("forecast", help="multi-step forecasts with 95% limits from a fit JSON")
    fc.add_argument("--fit", required=True)
    fc.add_argument("--input", required=True)
    fc.add_argument("--horizon", type=_positive_int, default=14)
    fc.add_argument("--holdout", type=_positive_int, default=None,
                    help="reserve the last N rows as actuals for coverage")
    fc.add_argument("--out", default="forecast.csv")
    fc.set_defaults(handler=cmd_forecast)

    diag = sub.add_parser("diagnose", help="summary statistics, ACF and Ljung-Box tests")
    diag.add_argument("--input", required=True)
    diag.add_argument("--lags", type=_positive_int, default=30)
    diag.add_argument("--out-json", default="diagnostics.json")
    diag.add_argument("--acf-csv", default="acf.csv")
    diag.set_defaults(handler=cmd_diagnose)

    mc = sub.add_parser("mc", help="Monte Carlo study: bias/SD/RMSE/SE table per method")
    mc.add_argument("--design", choices=("gb2", "lognormal"), required=True)
    mc.add_argument("--gb2", type=_float_tuple, default=(1.0, 1.0, 2.0))
    mc.add_argument("--sigma", type=_positive_float, default=0.5)
    mc.add_argument("--omega", type=_positive_float, default=0.2)
    mc.add_argument("--alpha", type=_float_tuple, default=(0.3,))
    mc.add_argument("--beta", type=_float_tuple, default=(0.4,))
    mc.add_argument("--psi1", type=_positive_float, default=0.5)
    mc.add_argument("--T", type=_int_tuple, default=(500,))
    mc.add_argument("--N", type=_positive_int, default=200)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--methods", default="ml,lef,cef")
    mc.add_argument("--workers", type=_positive_int, default=None,
                    help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
    mc.add_argument("--out", default="study.csv")
    mc.add_argument("--hist-dir", default=None)
    mc.add_argument("--hist-bins", type=_positive_int, default=30)
    mc.set_defaults(handler=cmd_mc)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError, KeyError, EstimationError, StudyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
