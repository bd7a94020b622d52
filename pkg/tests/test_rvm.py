import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rombayes.pce import build_multiindex, evaluate_basis
from rombayes.rvm import RvmConfig, fit_forecast_pce, rvm_fit


def _design(rng, n, p):
    return rng.standard_normal((n, p))


def test_zero_targets():
    res = rvm_fit(np.ones((5, 3)), np.zeros(5))
    assert np.all(res.weights == 0) and res.active_set.size == 0


def test_noiseless_single_column(rng):
    x = _design(rng, 30, 100)
    res = rvm_fit(x, 3.0 * x[:, 5])
    assert res.active_set.tolist() == [5]
    assert res.weights[5] == pytest.approx(3.0, abs=1e-6)
    assert res.noise_variance <= 1e-10


def test_noisy_two_sparse(rng):
    x = _design(rng, 50, 200)
    w = np.zeros(200)
    w[2], w[7] = 2.0, -1.0
    t = x @ w + 0.01 * rng.standard_normal(50)
    res = rvm_fit(x, t)
    assert {2, 7} <= set(res.active_set.tolist())
    assert np.all(np.abs(res.weights - w) <= 3 * res.posterior_std + 1e-12)
    assert 0.5e-4 <= res.noise_variance <= 2e-4


def test_pruned_weights_are_exactly_zero(rng):
    x = _design(rng, 40, 60)
    res = rvm_fit(x, x[:, :3] @ [1.0, -2.0, 0.5] + 0.05 * rng.standard_normal(40))
    assert np.all(res.weights[res.pruned] == 0.0)
    assert np.all(np.isinf(res.precisions[res.pruned]))


def test_evidence_non_decreasing(rng):
    x = _design(rng, 40, 80)
    res = rvm_fit(x, x[:, 1] - x[:, 4] + 0.1 * rng.standard_normal(40))
    trace = res.evidence_trace
    assert np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1]))


def test_least_squares_limit(rng):
    x = _design(rng, 60, 5)
    t = x @ rng.standard_normal(5) + 0.1 * rng.standard_normal(60)
    cfg = RvmConfig(prune_threshold=np.inf, noise_variance=1e-10, max_iter=200)
    res = rvm_fit(x, t, cfg)
    ls, *_ = np.linalg.lstsq(x, t, rcond=None)
    np.testing.assert_allclose(res.weights, ls, atol=1e-6)


def test_permutation_equivariance(rng):
    x = _design(rng, 30, 40)
    t = 2 * x[:, 3] - x[:, 11] + 0.01 * rng.standard_normal(30)
    perm = rng.permutation(40)
    a = rvm_fit(x, t)
    b = rvm_fit(x[:, perm], t)
    np.testing.assert_allclose(b.weights, a.weights[perm], atol=1e-8)


def test_all_pruned_returns_flagged_zero_model():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((30, 5))
    t = rng.standard_normal(30)
    with pytest.warns(UserWarning, match="pruned"):
        res = rvm_fit(x, t, RvmConfig(prune_threshold=1e-3))
    assert res.all_pruned
    assert res.noise_variance == pytest.approx(np.var(t))


def test_bad_input():
    with pytest.raises(ValueError):
        rvm_fit(np.ones((3, 2)), np.ones(4))
    with pytest.raises(ValueError):
        rvm_fit(np.full((3, 2), np.nan), np.ones(3))
    with pytest.raises(ValueError):
        RvmConfig(max_iter=0)


def test_degree_one_forecast(rng):
    iset = build_multiindex(3, 2)
    xi = rng.standard_normal((80, 3))
    pce, report = fit_forecast_pce(xi, 1.5 + 0.7 * xi[:, :1], iset)
    nz = set(np.flatnonzero(pce.coefficients[0]).tolist())
    assert nz <= {0, 1} and 1 in nz
    assert pce.coefficients[0, 1] == pytest.approx(0.7, abs=1e-6)
    assert report.n_active[0] == len(nz)


def test_constant_forecast(rng):
    iset = build_multiindex(2, 2)
    xi = rng.standard_normal((30, 2))
    pce, _ = fit_forecast_pce(xi, np.full((30, 1), 4.0), iset)
    np.testing.assert_allclose(pce.coefficients[0], [4.0, 0, 0, 0, 0, 0], atol=1e-8)


def test_undersampled_paper_size():
    rng = np.random.default_rng(0)
    iset = build_multiindex(93, 2)
    xi = rng.standard_normal((1000, 93))
    y = 0.5 + xi[:, 0] - 0.2 * xi[:, 1] * xi[:, 2]
    t0 = time.perf_counter()
    pce, report = fit_forecast_pce(xi, y[:, None], iset)
    assert pce.coefficients.shape == (1, 4465)
    assert report.n_terms == 4465
    assert time.perf_counter() - t0 < 60
    psi = evaluate_basis(iset, rng.standard_normal((200, 93)))
    test_pts = rng.standard_normal((200, 93))
    truth = 0.5 + test_pts[:, 0] - 0.2 * test_pts[:, 1] * test_pts[:, 2]
    assert np.max(np.abs(pce.evaluate(test_pts)[:, 0] - truth)) < 1e-3


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_sparse_recovery_property(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((40, 60))
    support = rng.choice(60, k, replace=False)
    w = np.zeros(60)
    w[support] = rng.choice([-1, 1], k) * rng.uniform(0.5, 2.0, k)
    res = rvm_fit(x, x @ w)
    assert np.all(res.weights[res.pruned] == 0.0)
    np.testing.assert_allclose(res.weights, w, atol=1e-5)
