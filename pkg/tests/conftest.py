"""Shared fixtures: the expensive replication studies run once per session
and are reused by the Monte Carlo tests and the acceptance suite."""

import os

import pytest

from rangevol.carr import CarrParams
from rangevol.distributions import StandardizedGb2Errors, StandardizedLognormalErrors
from rangevol.mc import StudyDesign, run_study

TRUE_PARAMS = CarrParams(0.2, (0.3,), (0.4,))
GB2_BASE_SEED = 1000
LOGNORMAL_BASE_SEED = 5000


def study_workers() -> int:
    env = os.environ.get("RANGEVOL_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@pytest.fixture(scope="session")
def gb2_study():
    """GB2(1,1,2) design, T=2000, N=500, all three methods, raw retained."""
    design = StudyDesign(
        params=TRUE_PARAMS,
        errors=StandardizedGb2Errors(1.0, 1.0, 2.0),
        sample_sizes=(2000,),
        replications=500,
        base_seed=GB2_BASE_SEED,
        methods=("ml", "lef", "cef"),
    )
    return run_study(design, workers=study_workers(), keep_raw=True)


@pytest.fixture(scope="session")
def gb2_study_n200():
    """Desk-scale CEF-only study (N=200) at the same base seed."""
    design = StudyDesign(
        params=TRUE_PARAMS,
        errors=StandardizedGb2Errors(1.0, 1.0, 2.0),
        sample_sizes=(2000,),
        replications=200,
        base_seed=GB2_BASE_SEED,
        methods=("cef",),
    )
    return run_study(design, workers=study_workers(), keep_raw=True)


@pytest.fixture(scope="session")
def lognormal_grid_study():
    """Mis-specification design over the full sample-size grid, N=500."""
    design = StudyDesign(
        params=TRUE_PARAMS,
        errors=StandardizedLognormalErrors(0.5),
        sample_sizes=(500, 1000, 1500, 2000),
        replications=500,
        base_seed=LOGNORMAL_BASE_SEED,
        methods=("lef", "cef"),
    )
    return run_study(design, workers=study_workers(), keep_raw=True)
