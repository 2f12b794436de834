import numpy as np
import pytest

from rangevol.carr import CarrParams
from rangevol.distributions import ConstantErrors, StandardizedLognormalErrors
from rangevol.estimators import EstimationError
from rangevol.mc import StudyDesign, StudyError, export_histograms, run_study

from _stats import rmse_with_se

TRUTH = CarrParams(0.2, (0.3,), (0.4,))
LOGN = StandardizedLognormalErrors(0.5)


def _design(**kw):
    base = dict(
        params=TRUTH,
        errors=LOGN,
        sample_sizes=(100,),
        replications=4,
        base_seed=0,
        methods=("lef", "cef"),
    )
    base.update(kw)
    return StudyDesign(**base)


class TestStudyDesign:
    def test_validation(self):
        with pytest.raises(ValueError):
            _design(replications=1)
        with pytest.raises(ValueError):
            _design(sample_sizes=(10,))
        with pytest.raises(ValueError):
            _design(methods=("bayes",))
        with pytest.raises(ValueError):
            _design(errors=object())

    def test_parameter_names(self):
        design = StudyDesign(
            params=CarrParams(0.1, (0.2, 0.1), (0.3,)),
            errors=LOGN,
            sample_sizes=(100,),
            replications=2,
        )
        assert design.parameter_names() == ["omega", "alpha1", "alpha2", "beta1"]


class TestRunStudy:
    def test_degenerate_constant_sampler(self):
        # identical deterministic data in every replication: zero spread
        design = _design(errors=ConstantErrors(1.0), replications=2, sample_sizes=(100,),
                        methods=("lef",))
        result = run_study(design, keep_raw=True)
        est = result.estimates[(100, "lef")]
        assert est.shape[0] == 2
        assert np.array_equal(est[0], est[1])
        for row in result.rows:
            assert row.sd == 0.0

    def test_bit_identical_reruns(self):
        design = _design(replications=4, sample_sizes=(100,))
        a = run_study(design)
        b = run_study(design)
        for ra, rb in zip(a.rows, b.rows):
            assert (ra.mean, ra.bias, ra.sd, ra.rmse, ra.se) == (rb.mean, rb.bias, rb.sd, rb.rmse, rb.se)

    def test_rmse_identity_with_divisor_n(self):
        design = _design(replications=6, sample_sizes=(150,))
        result = run_study(design)
        for row in result.rows:
            assert row.rmse**2 == pytest.approx(row.bias**2 + row.sd**2, rel=1e-10)

    def test_failures_are_excluded_and_reported(self, monkeypatch):
        import rangevol.mc as mc_module

        real_fit_lef = mc_module.fit_lef
        calls = {"n": 0}

        def flaky(series, config):
            calls["n"] += 1
            if calls["n"] == 2:
                raise EstimationError("synthetic failure")
            return real_fit_lef(series, config)

        monkeypatch.setattr(mc_module, "fit_lef", flaky)
        design = _design(replications=6, sample_sizes=(100,), methods=("lef",))
        result = run_study(design, keep_raw=True)
        assert result.failures[(100, "lef")] == 1
        assert result.estimates[(100, "lef")].shape[0] == 5
        assert result.rows[0].n_used == 5
        assert result.rows[0].n_failed == 1

    def test_too_many_failures_abort(self, monkeypatch):
        import rangevol.mc as mc_module

        def always_fail(series, config):
            raise EstimationError("synthetic failure")

        monkeypatch.setattr(mc_module, "fit_lef", always_fail)
        design = _design(replications=4, sample_sizes=(100,), methods=("lef",))
        with pytest.raises(StudyError, match="failed"):
            run_study(design)

    def test_info_gain_eigenvalue_recorded(self):
        design = _design(replications=4, sample_sizes=(200,))
        result = run_study(design)
        assert np.isfinite(result.min_info_gain_eig)
        assert result.min_info_gain_eig >= -1e-10


class TestHistograms:
    def test_identical_estimates_occupy_one_bin(self):
        design = _design(errors=ConstantErrors(1.0), replications=3, sample_sizes=(100,),
                        methods=("lef",))
        result = run_study(design, keep_raw=True)
        tables = export_histograms(result, 100, "lef", bins=7)
        for table in tables.values():
            assert (table["count"] > 0).sum() == 1
            assert table["count"].sum() == 3

    def test_counts_conserve_successes(self):
        design = _design(replications=6, sample_sizes=(150,))
        result = run_study(design, keep_raw=True)
        tables = export_histograms(result, 150, "cef", bins=5)
        n_ok = result.estimates[(150, "cef")].shape[0]
        for table in tables.values():
            assert table["count"].sum() == n_ok
            assert np.all(table["normal_density"] >= 0)
            assert np.all(table["bin_right"] > table["bin_left"])

    def test_requires_raw_retention_and_se_column(self):
        design = _design(replications=4, sample_sizes=(100,))
        result = run_study(design)
        with pytest.raises(ValueError, match="keep_raw"):
            export_histograms(result, 100, "cef")
        design_ml = _design(replications=2, sample_sizes=(100,), methods=("ml",))
        result_ml = run_study(design_ml, keep_raw=True)
        with pytest.raises(ValueError, match="ML"):
            export_histograms(result_ml, 100, "ml")


class TestLargeStudyProperties:
    """Slow checks riding on the session-scoped replication studies."""

    def test_consistency_trend_over_sample_sizes(self, lognormal_grid_study):
        result = lognormal_grid_study
        sizes = result.design.sample_sizes
        truth = TRUTH.as_array()
        names = result.design.parameter_names()
        for method in ("lef", "cef"):
            for k, name in enumerate(names):
                sds, rmses, biases, slacks = [], [], [], []
                for t in sizes:
                    row = result.row(t, method, name)
                    est = result.estimates[(t, method)][:, k]
                    sds.append(row.sd)
                    rmses.append(row.rmse)
                    biases.append(abs(row.bias))
                    slacks.append(2.0 * est.std(ddof=1) / np.sqrt(est.size))
                for i in range(len(sizes) - 1):
                    assert sds[i + 1] < sds[i] + slacks[i]
                    assert rmses[i + 1] < rmses[i] + slacks[i]
                    assert biases[i + 1] < biases[i] + slacks[i]

    def test_sd_matches_average_se_for_cef(self, lognormal_grid_study):
        for name in ("omega", "alpha1", "beta1"):
            row = lognormal_grid_study.row(2000, "cef", name)
            assert abs(row.sd / row.se - 1.0) < 0.15

    def test_info_gain_nonnegative_across_grid(self, lognormal_grid_study):
        assert lognormal_grid_study.min_info_gain_eig >= -1e-10

    def test_mis_specification_effiency_ordering(self, lognormal_grid_study):
        # at every grid size the combined equation is at least as efficient
        # as the linear one, up to Monte Carlo noise
        result = lognormal_grid_study
        truth = TRUTH.as_array()
        for t in result.design.sample_sizes:
            for k in range(3):
                cef_rmse, cef_se = rmse_with_se(result.estimates[(t, "cef")][:, k], truth[k])
                lef_rmse, lef_se = rmse_with_se(result.estimates[(t, "lef")][:, k], truth[k])
                assert cef_rmse <= lef_rmse + 2.0 * float(np.hypot(cef_se, lef_se))
