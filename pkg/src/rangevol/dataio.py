"""CSV and JSON input/output for the command-line front end.

Input CSV schemas:
  A) header ``t,range`` or ``date,range``  -- one positive range per row;
  B) header ``date,high,low`` (or ``t,high,low``) -- positive prices, from
     which the range is 100 * (ln high - ln low).

Parse errors name the offending line. Table/CSV output is printed with six
significant digits; JSON keeps full precision.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .carr import CarrParams, RangeSeries
from .distributions import ErrorMoments

SCHEMA_VERSION = 1
RNG_ALGORITHM = "PCG64"


def fmt(x) -> str:
    """Six significant digits, the table precision used everywhere."""
    return f"{float(x):.6g}"


def read_range_csv(path) -> RangeSeries:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: file is empty")
        cols = [c.strip().lower() for c in header]
        if len(cols) == 2 and cols[0] in ("t", "date") and cols[1] == "range":
            mode = "range"
        elif len(cols) == 3 and cols[0] in ("t", "date") and cols[1:] == ["high", "low"]:
            mode = "highlow"
        else:
            raise ValueError(
                f"{path}: unsupported header {','.join(header)!r}; expected "
                "'t,range', 'date,range' or 'date,high,low'"
            )
        values: list[float] = []
        stamps: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(cols):
                raise ValueError(f"{path}:{lineno}: expected {len(cols)} columns, got {len(row)}")
            stamps.append(row[0].strip())
            try:
                nums = [float(c) for c in row[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: could not parse {row[1:]!r} as numbers") from None
            if mode == "range":
                (r,) = nums
                if not math.isfinite(r) or r <= 0:
                    raise ValueError(f"{path}:{lineno}: range must be a positive real, got {r!r}")
            else:
                high, low = nums
                if not (math.isfinite(high) and math.isfinite(low)) or high <= 0 or low <= 0:
                    raise ValueError(f"{path}:{lineno}: prices must be positive reals, got {row[1:]!r}")
                if high < low:
                    raise ValueError(f"{path}:{lineno}: high {high!r} is below low {low!r}")
                r = 100.0 * (math.log(high) - math.log(low))
                if r <= 0:
                    raise ValueError(
                        f"{path}:{lineno}: high equals low; a zero range cannot enter the model"
                    )
            values.append(r)
    if not values:
        raise ValueError(f"{path}: no data rows")
    return RangeSeries(np.asarray(values), stamps)


def write_range_csv(path, series: RangeSeries) -> None:
    path = Path(path)
    stamps = series.timestamps or [str(t) for t in range(1, len(series) + 1)]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "range"])
        for t, r in zip(stamps, series.values):
            writer.writerow([t, fmt(r)])


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def fit_payload(result, seed: int | None = None) -> dict:
    """Full-precision JSON document for one fit (re-ingestable by forecast)."""
    u, v = result.params.order
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": result.method,
        "order": [u, v],
        "estimates": {
            "omega": result.params.omega,
            "alpha": list(result.params.alpha),
            "beta": list(result.params.beta),
        },
        "std_errors": None
        if result.std_errors is None
        else {
            "omega": float(result.std_errors[0]),
            "alpha": [float(s) for s in result.std_errors[1 : 1 + u]],
            "beta": [float(s) for s in result.std_errors[1 + u :]],
        },
        "sigma_eps": result.sigma_eps,
        "error_moments": None
        if result.error_moments is None
        else {
            "mu_eps": result.error_moments.mu_eps,
            "sigma_eps": result.error_moments.sigma_eps,
            "gamma_eps": result.error_moments.gamma_eps,
            "kappa_eps": result.error_moments.kappa_eps,
        },
        "gb2_shape": None
        if result.gb2_shape is None
        else {"a": result.gb2_shape[0], "p": result.gb2_shape[1], "q": result.gb2_shape[2]},
        "rmspe": result.rmspe,
        "mape": result.mape,
        "loglik": result.loglik,
        "eq_norm": result.eq_norm,
        "converged": result.converged,
        "iterations": result.iterations,
        "message": result.message,
        "presample": result.presample,
        "info_matrix": None if result.info_matrix is None else np.asarray(result.info_matrix).tolist(),
    }
    if seed is not None:
        payload["seed"] = seed
    return payload


@dataclass
class LoadedFit:
    """The slice of a fit JSON that forecasting needs."""

    method: str
    params: CarrParams
    presample: float
    info_matrix: np.ndarray | None
    error_moments: ErrorMoments | None


def load_fit_json(path) -> LoadedFit:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    est = doc["estimates"]
    params = CarrParams(est["omega"], tuple(est["alpha"]), tuple(est["beta"]))
    mom = doc.get("error_moments")
    moments = None if mom is None else ErrorMoments(
        mom["mu_eps"], mom["sigma_eps"], mom["gamma_eps"], mom["kappa_eps"]
    )
    info = doc.get("info_matrix")
    return LoadedFit(
        method=doc["method"],
        params=params,
        presample=float(doc["presample"]),
        info_matrix=None if info is None else np.asarray(info, dtype=float),
        error_moments=moments,
    )


def write_fitted_csv(path, series: RangeSeries, psi: np.ndarray, resid: np.ndarray) -> None:
    stamps = series.timestamps or [str(t) for t in range(1, len(series) + 1)]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "range", "psi_hat", "residual"])
        for t, r, p, e in zip(stamps, series.values, psi, resid):
            writer.writerow([t, fmt(r), fmt(p), fmt(e)])


def write_forecast_csv(path, fc, actual=None) -> None:
    header = ["h", "point", "var", "lo95", "hi95"]
    if actual is not None:
        header.append("actual")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for h in range(fc.horizon):
            row = [str(h + 1), fmt(fc.point[h]), fmt(fc.variance[h]), fmt(fc.lo95[h]), fmt(fc.hi95[h])]
            if actual is not None:
                row.append(fmt(actual[h]))
            writer.writerow(row)


def write_acf_csv(path, acf_values: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag", "acf"])
        for lag, value in enumerate(acf_values):
            writer.writerow([str(lag), fmt(value)])


def write_study_csv(path, result) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["T", "method", "parameter", "mean", "bias", "sd", "rmse", "se", "n_used", "n_failed"]
        )
        for row in result.rows:
            writer.writerow(
                [
                    str(row.sample_size),
                    row.method,
                    row.parameter,
                    fmt(row.mean),
                    fmt(row.bias),
                    fmt(row.sd),
                    fmt(row.rmse),
                    "" if row.se is None else fmt(row.se),
                    str(row.n_used),
                    str(row.n_failed),
                ]
            )


def write_histogram_csv(path, table: dict[str, np.ndarray]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count", "normal_density"])
        for left, right, count, dens in zip(
            table["bin_left"], table["bin_right"], table["count"], table["normal_density"]
        ):
            writer.writerow([fmt(left), fmt(right), str(int(count)), fmt(dens)])
