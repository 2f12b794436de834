"""Monte Carlo study harness: replicated simulation, multi-method fitting,
and Mean/Bias/SD/RMSE/SE summary tables with histogram exports.

Replication i uses seed base_seed + i, so a study is reproducible bit for
bit and a shorter study is a prefix of a longer one with the same base
seed. Replications are independent and can fan out over a process pool;
results are merged in replication order, so the worker count never changes
the table. Failed fits are excluded from the summaries and reported; more
than 20% failures in any (sample size, method) cell aborts the study.

Conventions: SD and RMSE use the divisor-N variance, which makes
RMSE^2 = Bias^2 + SD^2 an exact identity. SE is the average over
replications of sqrt(diag(I^{-1})) from the method's information matrix;
the ML column is left empty.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .carr import CarrParams, RangeSeries, simulate_path
from .estimators import (
    BoundaryWarning,
    EstimationError,
    FitConfig,
    FitResult,
    fit_cef,
    fit_lef,
    fit_ml,
    info_matrix_cef,
    info_matrix_lef,
)

_METHOD_ORDER = ("ml", "lef", "cef")


class StudyError(RuntimeError):
    """The study design failed (for example too many non-converged fits)."""


@dataclass(frozen=True)
class StudyDesign:
    """True parameters, error law, sample-size grid and replication plan."""

    params: CarrParams
    errors: object
    sample_sizes: tuple[int, ...]
    replications: int
    base_seed: int = 0
    psi1: float = 0.5
    methods: tuple[str, ...] = ("ml", "lef", "cef")

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_sizes", tuple(int(t) for t in self.sample_sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.replications < 2:
            raise ValueError("need at least 2 replications")
        if not self.sample_sizes or min(self.sample_sizes) < 50:
            raise ValueError("every sample size must be at least 50")
        if self.psi1 <= 0:
            raise ValueError("psi1 must be positive")
        unknown = set(self.methods) - set(_METHOD_ORDER)
        if not self.methods or unknown:
            raise ValueError(f"methods must be drawn from {_METHOD_ORDER}, got {self.methods}")
        if not hasattr(self.errors, "sample"):
            raise ValueError("errors must provide sample(n, seed)")

    def parameter_names(self) -> list[str]:
        u, v = self.params.order
        return (
            ["omega"]
            + [f"alpha{i}" for i in range(1, u + 1)]
            + [f"beta{j}" for j in range(1, v + 1)]
        )


@dataclass
class StudyRow:
    """One (sample size, method, parameter) cell of the summary table."""

    sample_size: int
    method: str
    parameter: str
    mean: float
    bias: float
    sd: float
    rmse: float
    se: float | None
    n_used: int
    n_failed: int


@dataclass
class StudyResult:
    design: StudyDesign
    rows: list[StudyRow]
    failures: dict[tuple[int, str], int]
    min_info_gain_eig: float
    estimates: dict[tuple[int, str], np.ndarray] = field(default_factory=dict)
    std_errors: dict[tuple[int, str], np.ndarray] = field(default_factory=dict)

    def row(self, sample_size: int, method: str, parameter: str) -> StudyRow:
        for r in self.rows:
            if (r.sample_size, r.method, r.parameter) == (sample_size, method, parameter):
                return r
        raise KeyError((sample_size, method, parameter))

    def cell(self, sample_size: int, method: str) -> list[StudyRow]:
        return [r for r in self.rows if (r.sample_size, r.method) == (sample_size, method)]


def _info_gain_min_eig(result: FitResult) -> float | None:
    """Smallest eigenvalue of I_cef - I_lef at this fit's path and moments."""
    mom = result.error_moments
    if mom is None or mom.cef_denominator < 1e-6:
        return None
    diff = info_matrix_cef(result.psi_hat, mom) - info_matrix_lef(result.psi_hat, mom)
    return float(np.linalg.eigvalsh(diff)[0])


def _replicate(design: StudyDesign, sample_size: int, i: int) -> dict:
    seed = design.base_seed + i
    r, _ = simulate_path(design.params, design.errors, sample_size, design.psi1, seed)
    series = RangeSeries(r)
    u, v = design.params.order
    out: dict[str, tuple | str] = {}
    lef_result = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        for method in (m for m in _METHOD_ORDER if m in design.methods):
            cfg = FitConfig(u=u, v=v, method=method)
            try:
                if method == "ml":
                    fr = fit_ml(series, cfg)
                elif method == "lef":
                    fr = fit_lef(series, cfg)
                    lef_result = fr
                else:
                    fr = fit_cef(series, cfg, init=lef_result)
                ses = None if fr.std_errors is None else np.asarray(fr.std_errors)
                out[method] = (fr.params.as_array(), ses, _info_gain_min_eig(fr))
            except (EstimationError, ValueError, np.linalg.LinAlgError) as exc:
                out[method] = f"seed {seed}: {exc}"
    return out


def run_study(design: StudyDesign, workers: int = 1, keep_raw: bool = False) -> StudyResult:
    """Run the full replication grid and summarize it.

    `workers` > 1 fans replications out across processes; the merge is in
    replication order, so the output is identical for any worker count.
    """
    workers = max(1, int(workers))
    # compile the kernels once in the parent so workers load from cache
    simulate_path(design.params, design.errors, 50, design.psi1, design.base_seed)

    tasks = [(t, i) for t in design.sample_sizes for i in range(design.replications)]
    if workers == 1:
        raw = [_replicate(design, t, i) for t, i in tasks]
    else:
        raw = Parallel(n_jobs=workers)(delayed(_replicate)(design, t, i) for t, i in tasks)

    names = design.parameter_names()
    truth = design.params.as_array()
    rows: list[StudyRow] = []
    failures: dict[tuple[int, str], int] = {}
    estimates: dict[tuple[int, str], np.ndarray] = {}
    std_errors: dict[tuple[int, str], np.ndarray] = {}
    min_eig = np.inf

    per_cell: dict[tuple[int, str], list] = {
        (t, m): [] for t in design.sample_sizes for m in design.methods
    }
    for (t, _i), rep in zip(tasks, raw):
        for m in design.methods:
            per_cell[(t, m)].append(rep[m])

    for t in design.sample_sizes:
        for m in (mm for mm in _METHOD_ORDER if mm in design.methods):
            cell = per_cell[(t, m)]
            ok = [entry for entry in cell if not isinstance(entry, str)]
            n_failed = len(cell) - len(ok)
            failures[(t, m)] = n_failed
            if n_failed > 0.2 * len(cell):
                examples = [entry for entry in cell if isinstance(entry, str)][:3]
                raise StudyError(
                    f"{n_failed}/{len(cell)} replications failed for T={t}, method={m}; "
                    f"first failures: {examples}"
                )
            est = np.array([e[0] for e in ok])
            ses = np.array([e[1] for e in ok if e[1] is not None])
            eigs = [e[2] for e in ok if e[2] is not None]
            if eigs:
                min_eig = min(min_eig, min(eigs))
            if keep_raw:
                estimates[(t, m)] = est
                if ses.size:
                    std_errors[(t, m)] = ses
            mean = est.mean(axis=0)
            sd = est.std(axis=0)
            rmse = np.sqrt(np.mean((est - truth) ** 2, axis=0))
            se_mean = ses.mean(axis=0) if (m != "ml" and ses.size) else None
            for k, name in enumerate(names):
                rows.append(
                    StudyRow(
                        sample_size=t,
                        method=m,
                        parameter=name,
                        mean=float(mean[k]),
                        bias=float(mean[k] - truth[k]),
                        sd=float(sd[k]),
                        rmse=float(rmse[k]),
                        se=None if se_mean is None else float(se_mean[k]),
                        n_used=len(ok),
                        n_failed=n_failed,
                    )
                )
    return StudyResult(
        design=design,
        rows=rows,
        failures=failures,
        min_info_gain_eig=float(min_eig) if np.isfinite(min_eig) else np.nan,
        estimates=estimates,
        std_errors=std_errors,
    )


def export_histograms(
    result: StudyResult, sample_size: int, method: str, bins: int = 30
) -> dict[str, dict[str, np.ndarray]]:
    """Plot-ready histogram columns per parameter, with the Gaussian overlay
    N(true value, mean SE^2) evaluated at the bin centers."""
    key = (int(sample_size), method)
    if key not in result.estimates:
        raise ValueError(
            f"no raw estimates for T={sample_size}, method={method!r}; "
            "run the study with keep_raw=True"
        )
    if method == "ml":
        raise ValueError("the ML cell has no SE column, so its overlay is undefined")
    est = result.estimates[key]
    names = result.design.parameter_names()
    truth = result.design.params.as_array()
    out: dict[str, dict[str, np.ndarray]] = {}
    for k, name in enumerate(names):
        se = result.row(sample_size, method, name).se
        counts, edges = np.histogram(est[:, k], bins=int(bins))
        centers = 0.5 * (edges[:-1] + edges[1:])
        out[name] = {
            "bin_left": edges[:-1],
            "bin_right": edges[1:],
            "count": counts,
            "normal_density": stats.norm.pdf(centers, loc=truth[k], scale=se),
        }
    return out
