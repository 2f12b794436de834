import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangevol.carr import CarrParams, PsiPath, RangeSeries, psi_path, simulate_path
from rangevol.distributions import (
    ConstantErrors,
    ErrorMoments,
    StandardizedGb2Errors,
    StandardizedLognormalErrors,
)
from rangevol.estimators import (
    EstimationError,
    FitConfig,
    _cef_weights,
    _lef_g,
    carr_gb2_loglik,
    fit,
    fit_cef,
    fit_lef,
    fit_ml,
    info_matrix_cef,
    info_matrix_lef,
    residuals,
)

TRUTH = CarrParams(0.2, (0.3,), (0.4,))
GB2 = StandardizedGb2Errors(1.0, 1.0, 2.0)
LOGN = StandardizedLognormalErrors(0.5)


def _series(sampler, n, seed, psi1=0.5, params=TRUTH):
    r, _ = simulate_path(params, sampler, n, psi1, seed)
    return RangeSeries(r)


class TestFitConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            FitConfig(u=0, v=1)
        with pytest.raises(ValueError):
            FitConfig(method="mle")
        with pytest.raises(ValueError):
            FitConfig(tolerance=0.0)
        with pytest.raises(ValueError):
            FitConfig(presample=-1.0)
        with pytest.raises(ValueError):
            FitConfig(gb2_start=(1.0, 1.0, 0.5))

    def test_method_dispatch_guard(self):
        series = _series(GB2, 300, 0)
        with pytest.raises(ValueError, match="handles"):
            fit_lef(series, FitConfig(method="cef"))

    def test_short_series_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            fit_lef(RangeSeries(np.array([1.0, 2.0])), FitConfig(u=2, v=2, method="lef"))


class TestLef:
    def test_equation_zero_at_truth_on_exact_data(self):
        r, _ = simulate_path(TRUTH, ConstantErrors(1.0), 400, 0.5, 1)
        g = _lef_g(0.2, np.array([0.3]), np.array([0.4]), r, 0.5)
        assert np.max(np.abs(g)) < 1e-14

    def test_solver_contract_on_noisy_data(self):
        result = fit_lef(_series(GB2, 1500, 21), FitConfig(method="lef"))
        assert result.converged
        assert result.eq_norm < 1e-8
        assert result.std_errors is not None and np.all(result.std_errors > 0)
        assert np.all(result.residuals > 0)

    def test_exact_recovery_when_identified(self):
        # constant errors give noiseless data; CARR(1,0) leaves no feedback
        # ambiguity, so the root is the generating point
        truth = CarrParams(0.2, (0.8,), ())
        r, _ = simulate_path(truth, ConstantErrors(1.0), 2000, 0.5, 1)
        result = fit_lef(RangeSeries(r), FitConfig(u=1, v=0, method="lef", presample=0.5))
        assert np.max(np.abs(result.params.as_array() - truth.as_array())) < 1e-8

    def test_mean_estimates_near_truth(self):
        # loose desk-scale version of the replication study
        estimates = []
        for seed in range(40):
            try:
                result = fit_lef(_series(GB2, 1000, 3000 + seed), FitConfig(method="lef"))
            except EstimationError:
                continue
            estimates.append(result.params.as_array())
        mean = np.mean(estimates, axis=0)
        assert np.max(np.abs(mean - TRUTH.as_array())) < 0.08

    def test_non_convergence_carries_best_iterate(self):
        series = _series(GB2, 600, 2)
        # an impossible tolerance cannot be met; the error reports the
        # best iterate found
        with pytest.raises(EstimationError) as exc_info:
            fit_lef(series, FitConfig(method="lef", tolerance=1e-300))
        assert exc_info.value.best_params is not None


class TestCef:
    def test_weight_reduction_at_zero_higher_moments(self):
        psi = np.array([0.5, 1.0, 2.0])
        moments = ErrorMoments(1.0, 0.7, 0.0, 0.0)
        a1, a2 = _cef_weights(psi, moments)
        s2 = 0.49
        assert a1 == pytest.approx(-1.0 / (psi**2 * s2), rel=1e-14)
        assert a2 == pytest.approx(-2.0 * s2 * psi / (2.0 * psi**4 * s2 * s2), rel=1e-14)

    def test_solver_contract_and_residual_mean(self):
        result = fit_cef(_series(LOGN, 2000, 5), FitConfig(method="cef"))
        assert result.eq_norm < 1e-8
        assert result.residuals.mean() == pytest.approx(1.0, abs=0.02)

    def test_mean_estimates_near_truth(self):
        estimates = []
        for seed in range(40):
            try:
                result = fit_cef(_series(GB2, 1000, 6000 + seed), FitConfig(method="cef"))
            except EstimationError:
                continue
            estimates.append(result.params.as_array())
        mean = np.mean(estimates, axis=0)
        assert np.max(np.abs(mean - TRUTH.as_array())) < 0.08

    def test_degenerate_variance_returns_linear_root(self):
        truth = CarrParams(0.2, (0.8,), ())
        r, _ = simulate_path(truth, ConstantErrors(1.0), 2000, 0.5, 1)
        result = fit_cef(RangeSeries(r), FitConfig(u=1, v=0, method="cef", presample=0.5))
        assert np.max(np.abs(result.params.as_array() - truth.as_array())) < 1e-8
        assert "degenerate" in result.message
        assert result.std_errors is None

    def test_two_point_errors_hit_weight_guard(self):
        class TwoPoint:
            def sample(self, n, seed):
                rng = np.random.default_rng(seed)
                return np.where(rng.random(n) < 0.5, 0.7, 1.3)

        r, _ = simulate_path(TRUTH, TwoPoint(), 1500, 0.5, 3)
        with pytest.raises(EstimationError, match="ill-conditioned"):
            fit_cef(RangeSeries(r), FitConfig(method="cef", presample=0.5))

    def test_init_must_match(self):
        series = _series(LOGN, 500, 9)
        other = fit_lef(series, FitConfig(method="lef", presample=0.9))
        with pytest.raises(ValueError, match="same series"):
            fit_cef(series, FitConfig(method="cef"), init=other)

    def test_martingale_unbiasedness_and_orthogonality(self):
        # at the true parameters and true analytic moments, the two
        # martingale differences have zero conditional mean and are
        # orthogonal; check the sample versions over replications
        mom = LOGN.moments()
        h1_means, h2_means, cross_means = [], [], []
        for seed in range(300):
            r, psi = simulate_path(TRUTH, LOGN, 500, 0.5, 40_000 + seed)
            h1 = r - psi
            h2 = h1**2 - psi**2 * mom.sigma_eps**2 - mom.gamma_eps * mom.sigma_eps * psi * h1
            h1_means.append(h1.mean())
            h2_means.append(h2.mean())
            cross_means.append((h1 * h2).mean())
        for values in (h1_means, h2_means, cross_means):
            values = np.asarray(values)
            se = values.std(ddof=1) / np.sqrt(values.size)
            assert abs(values.mean()) < 3.0 * se


class TestInfoMatrices:
    def test_single_term_toy(self):
        path = PsiPath(np.array([1.0]), np.array([[1.0, 0.0, 0.0]]))
        moments = ErrorMoments(1.0, 1.0, 0.0, 0.0)
        info = info_matrix_lef(path, moments)
        expected = np.zeros((3, 3))
        expected[0, 0] = 1.0
        assert np.allclose(info, expected, atol=1e-15)

    def test_matches_loop_resummation(self):
        rng = np.random.default_rng(12)
        psi = rng.uniform(0.5, 2.0, 40)
        grad = rng.normal(size=(40, 3))
        path = PsiPath(psi, grad)
        moments = ErrorMoments(1.0, 0.8, 1.2, 4.0)
        expected_lef = np.zeros((3, 3))
        expected_cef = np.zeros((3, 3))
        gain = (moments.gamma_eps * moments.mu_eps - 2.0 * moments.sigma_eps) ** 2
        for t in range(40):
            g = grad[t][:, None]
            w1 = moments.mu_eps**2 / (psi[t] ** 2 * moments.sigma_eps**2)
            w2 = gain / (psi[t] ** 2 * moments.sigma_eps**2 * moments.cef_denominator)
            expected_lef += w1 * (g @ g.T)
            expected_cef += (w1 + w2) * (g @ g.T)
        assert np.allclose(info_matrix_lef(path, moments), expected_lef, rtol=1e-12)
        assert np.allclose(info_matrix_cef(path, moments), expected_cef, rtol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        sigma=st.floats(0.2, 3.0),
        gamma=st.floats(-1.5, 4.0),
        extra=st.floats(0.01, 10.0),
    )
    def test_information_gain_is_psd(self, seed, sigma, gamma, extra):
        rng = np.random.default_rng(seed)
        psi = rng.uniform(0.2, 3.0, 25)
        grad = rng.normal(size=(25, 3))
        path = PsiPath(psi, grad)
        moments = ErrorMoments(1.0, sigma, gamma, gamma**2 - 2.0 + extra)
        diff = info_matrix_cef(path, moments) - info_matrix_lef(path, moments)
        scale = max(1.0, float(np.max(np.abs(diff))))
        assert float(np.linalg.eigvalsh(diff)[0]) >= -1e-10 * scale

    def test_equality_when_gain_vanishes(self):
        # gamma * mu = 2 * sigma zeroes the quadratic term exactly
        rng = np.random.default_rng(3)
        path = PsiPath(rng.uniform(0.5, 2.0, 30), rng.normal(size=(30, 3)))
        moments = ErrorMoments(1.0, 0.5, 1.0, 1.0)
        assert np.array_equal(info_matrix_cef(path, moments), info_matrix_lef(path, moments))

    def test_cef_guard(self):
        path = PsiPath(np.array([1.0]), np.array([[1.0, 0.0, 0.0]]))
        moments = ErrorMoments(0.0, 1.0, 0.0, -2.0)
        with pytest.raises(EstimationError, match="floor"):
            info_matrix_cef(path, moments)


class TestMl:
    def test_loglik_at_optimum_dominates_truth(self):
        series = _series(GB2, 800, 17)
        result = fit_ml(series, FitConfig(method="ml"))
        at_truth = carr_gb2_loglik(series, (1.0, 1.0, 2.0), TRUTH, result.presample)
        assert result.loglik >= at_truth - 1e-8
        assert result.gb2_shape is not None
        assert result.std_errors is not None

    def test_mean_estimates_near_truth(self):
        estimates = []
        for seed in range(40):
            try:
                result = fit_ml(_series(GB2, 1000, 9000 + seed), FitConfig(method="ml"))
            except EstimationError:
                continue
            estimates.append(result.params.as_array())
        mean = np.mean(estimates, axis=0)
        assert np.max(np.abs(mean - TRUTH.as_array())) < 0.08

    @pytest.mark.filterwarnings("ignore::rangevol.estimators.BoundaryWarning")
    def test_iid_data_recovers_level(self):
        # alpha = beta = 0 truth: only the unconditional level and a ~ zero
        # alpha are identified (omega and beta trade off when alpha is 0);
        # under the heavy-tailed errors the likelihood location needs not
        # equal the sample mean, so the check is against the truth
        truth = CarrParams(0.5, (0.0,), (0.0,))
        r, _ = simulate_path(truth, GB2, 1500, 0.5, 23)
        series = RangeSeries(r)
        result = fit_ml(series, FitConfig(method="ml"))
        level = result.params.omega / (1.0 - result.params.persistence)
        assert abs(level - truth.omega) < 0.15
        assert result.params.alpha[0] < 0.1

    def test_std_errors_consistent_with_info_matrix(self):
        result = fit_ml(_series(GB2, 1200, 31), FitConfig(method="ml"))
        ses = np.sqrt(np.diag(np.linalg.inv(result.info_matrix)))
        assert np.allclose(ses, result.std_errors, rtol=1e-8)


class TestResiduals:
    def test_unit_residuals_on_exact_fit(self):
        r, psi = simulate_path(TRUTH, ConstantErrors(1.0), 200, 0.5, 0)
        series = RangeSeries(r)
        path = psi_path(TRUTH, series, 0.5)
        assert np.allclose(residuals(series, path), 1.0, atol=1e-14)

    def test_recovers_generating_errors_after_transient(self):
        eps_true = LOGN.sample(1500, 55)

        class Replay:
            def sample(self, n, seed):
                return eps_true[:n]

        r, _ = simulate_path(TRUTH, Replay(), 1500, 0.5, 0)
        series = RangeSeries(r)
        # estimation-style initialization: presample is the sample mean
        path = psi_path(TRUTH, series, float(r.mean()))
        eps_hat = residuals(series, path)
        rel = np.abs(eps_hat[50:] - eps_true[50:]) / eps_true[50:]
        assert np.max(rel) < 1e-3

    def test_length_mismatch(self):
        series = RangeSeries(np.array([1.0, 2.0]))
        path = psi_path(TRUTH, RangeSeries(np.array([1.0, 2.0, 3.0])), 1.0)
        with pytest.raises(ValueError):
            residuals(series, path)


class TestDispatch:
    def test_fit_routes_by_method(self):
        series = _series(LOGN, 400, 77)
        assert fit(series, FitConfig(method="lef")).method == "lef"
        assert fit(series, FitConfig(method="cef")).method == "cef"
        assert fit(series, FitConfig(method="ml")).method == "ml"
