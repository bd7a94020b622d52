import numpy as np
import pytest
from hypothesis import given, strategies as st

from rombayes.enkf import enkf_update
from rombayes.pce import PceExpansion, build_multiindex
from rombayes.prior import GaussianPrior, sample_prior
from rombayes.enkf import ForecastSet, add_forecast_noise
from rombayes.sensitivity import (
    estimate_linear_map,
    improved_kalman_gain,
    linear_posterior_variance,
    screen_variables,
    sensitivity_analysis,
    sobol_first_order,
    variance_ratio,
)


def test_ratio_examples():
    prior = GaussianPrior(np.zeros(3), np.array([1.0, 2.0, 0.5]))
    np.testing.assert_allclose(variance_ratio(prior, prior.variance), 1.0)
    np.testing.assert_array_equal(variance_ratio(prior, np.zeros(3)), 0.0)
    masked = prior.restricted([0])
    np.testing.assert_array_equal(variance_ratio(masked, np.zeros(3)), [0.0, 1.0, 1.0])


def test_scalar_conjugate_ratio():
    prior = GaussianPrior([0.0], [1.0])
    var = linear_posterior_variance(np.eye(1), prior, np.eye(1))
    assert variance_ratio(prior, var)[0] == pytest.approx(0.5)
    assert improved_kalman_gain(np.eye(1), prior, np.eye(1))[0, 0] == pytest.approx(0.5)
    np.testing.assert_array_equal(improved_kalman_gain(np.zeros((2, 1)), prior, np.eye(2)), 0.0)


def test_sobol_examples():
    iset = build_multiindex(2, 1)
    s = sobol_first_order(PceExpansion(iset, [[0.0, 1.0, 2.0]]))
    np.testing.assert_allclose(s.values, [0.2, 0.8], atol=1e-10)
    s = sobol_first_order(PceExpansion(build_multiindex(3, 1), [[5.0, 1.0, 0.0, 0.0]]))
    np.testing.assert_allclose(s.values, [1.0, 0.0, 0.0])
    iset2 = build_multiindex(2, 2)
    col = iset2.indices.tolist().index([1, 1])
    coeffs = np.zeros((1, iset2.size))
    coeffs[0, col] = 3.0
    np.testing.assert_allclose(sobol_first_order(PceExpansion(iset2, coeffs)).values, 0.0)


def test_sobol_zero_variance_flag():
    with pytest.warns(UserWarning, match="zero variance"):
        s = sobol_first_order(PceExpansion(build_multiindex(2, 1), [[1.0, 0.0, 0.0]]))
    assert s.zero_variance and np.all(s.values == 0)


def test_sobol_sum_bounded_on_random_expansions():
    rng = np.random.default_rng(0)
    iset = build_multiindex(3, 3)
    for _ in range(100):
        s = sobol_first_order(PceExpansion(iset, rng.standard_normal((2, iset.size))))
        assert s.values.sum() <= 1 + 1e-10 and np.all(s.values >= 0)
    lin = build_multiindex(4, 1)
    s = sobol_first_order(PceExpansion(lin, rng.standard_normal((3, lin.size))))
    assert s.values.sum() == pytest.approx(1.0, abs=1e-10)


def test_linear_map_examples(rng):
    q = rng.standard_normal((200, 5))
    h = estimate_linear_map(q, 2.0 * q[:, 1])
    expected = np.zeros((1, 5))
    expected[0, 1] = 2.0
    np.testing.assert_allclose(h.matrix, expected, atol=1e-6)
    np.testing.assert_array_equal(estimate_linear_map(q, np.full(200, 3.0)).matrix, 0.0)
    a = rng.standard_normal((3, 5))
    h = estimate_linear_map(q, q @ a.T + 1.0)
    np.testing.assert_allclose(h.matrix, a, atol=1e-4)
    np.testing.assert_allclose(h.intercept, 1.0 + q.mean(axis=0) @ a.T, atol=1e-10)


def test_improved_gain_beats_statistical_gain(rng):
    s, m = 6, 4
    h = rng.standard_normal((m, s))
    prior = GaussianPrior(np.zeros(s), rng.uniform(0.5, 1.5, s))
    c_eps = 0.1 * np.eye(m)
    c_q = np.diag(prior.variance)
    exact = np.diag(c_q - c_q @ h.T @ np.linalg.solve(h @ c_q @ h.T + c_eps, h @ c_q))
    ens = sample_prior(prior, 100, seed=3)
    clean = ens.members @ h.T
    fc = add_forecast_noise(ForecastSet(clean, np.arange(m, dtype=float), False, np.arange(100), clean), np.sqrt(np.diag(c_eps)), 4)
    report, lmap = sensitivity_analysis(prior, ens.members, fc.noiseless, np.diag(c_eps))
    improved = report.ratio * prior.variance
    np.testing.assert_allclose(improved, exact, rtol=1e-8, atol=1e-10)
    statistical = enkf_update(ens, fc, np.zeros(m)).variance()
    assert np.max(np.abs(statistical - exact)) > np.max(np.abs(improved - exact))


def test_improved_gain_matches_statistical_gain_for_large_z(rng):
    from rombayes.enkf import kalman_gain, statistical_covariance

    s, m = 3, 2
    h = rng.standard_normal((m, s))
    prior = GaussianPrior(np.zeros(s), np.ones(s))
    ens = sample_prior(prior, 100_000, seed=7)
    clean = ens.members @ h.T
    fc = add_forecast_noise(ForecastSet(clean, np.arange(m, dtype=float), False, np.arange(100_000), clean), np.full(m, 0.5), 8)
    k_stat, _ = kalman_gain(statistical_covariance(ens.members, fc.predictions), statistical_covariance(fc.predictions, fc.predictions))
    k_imp = improved_kalman_gain(h, prior, 0.25 * np.eye(m))
    np.testing.assert_allclose(k_stat, k_imp, rtol=0.01, atol=0.01 * np.abs(k_imp).max())


def test_screening_rule():
    with pytest.warns(UserWarning, match="no variable"):
        assert screen_variables(np.ones(4)).size == 0
    np.testing.assert_array_equal(screen_variables([0.3, 0.99, 1.0], 0.95), [0])
    with pytest.raises(ValueError):
        screen_variables([0.5], 1.0)


@given(st.lists(st.floats(0.0, 2.0), min_size=1, max_size=30), st.floats(0.01, 0.99))
def test_screening_property(ratios, threshold):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        active = screen_variables(ratios, threshold)
    r = np.asarray(ratios)
    assert set(active.tolist()) == set(np.flatnonzero(r < threshold).tolist())
