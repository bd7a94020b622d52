import numpy as np
import pytest
from hypothesis import given, strategies as st

from rombayes.errors import DivergenceError, IncompatibleDiscretizationError, StepFailureError
from rombayes.fom import Grid1D, SnapshotMatrix, convection_operator, diffusion_operator, sine_profile, simulate_burgers
from rombayes.pod import PodBasis, compute_pod
from rombayes.rom import (
    CorrectionVector,
    ReducedSystem,
    assemble_reduced_operators,
    integrate_batch,
    integrate_rom,
    n_correction_params,
    permute_correction,
    relative_l2_error,
    weighted_relative_error,
)


def _linear(n=3, rate=-1.0):
    return ReducedSystem(np.eye(n), rate * np.eye(n), np.zeros((n, n, n)), 1.0)


@pytest.mark.parametrize("n,s", [(2, 12), (6, 252), (10, 1100), (11, 1452)])
def test_parameter_count(n, s):
    assert n_correction_params(n) == s


def test_pack_unpack_round_trip(rng):
    a, c = rng.standard_normal((4, 4)), rng.standard_normal((4, 4, 4))
    q = CorrectionVector.pack(a, c)
    a2, c2 = q.unpack()
    np.testing.assert_array_equal(a, a2)
    np.testing.assert_array_equal(c, c2)
    assert q.values[1 * 4 + 2] == a[1, 2]
    assert q.values[16 + (1 * 4 + 2) * 4 + 3] == c[1, 2, 3]
    with pytest.raises(ValueError):
        CorrectionVector(4, np.zeros(10))


def _basis_on(grid, rng, n_modes=2):
    s = SnapshotMatrix(rng.standard_normal((grid.n_cells, 6)), np.arange(6.0), grid.weights)
    return compute_pod(s, n_modes)


def test_gram_is_identity_for_pod_basis(rng):
    g = Grid1D(32)
    sys_ = assemble_reduced_operators(_basis_on(g, rng, 4), g, 0.01)
    np.testing.assert_allclose(sys_.gram, np.eye(4), atol=1e-10)


def test_constant_mode_has_zero_diffusion():
    g = Grid1D(16)
    b = PodBasis(np.ones((16, 1)), [1.0], g.weights)
    sys_ = assemble_reduced_operators(b, g, 0.1, boundary="periodic")
    assert abs(sys_.diffusion[0, 0]) < 1e-12


def test_operators_match_brute_force_loop(rng):
    g = Grid1D(16)
    b = _basis_on(g, rng)
    sys_ = assemble_reduced_operators(b, g, 0.01)
    phi, w, dx, n = b.modes, g.weights, g.dx, 16
    for i in range(2):
        for j in range(2):
            lap = np.empty(n)
            for c in range(n):
                left = phi[c - 1, j] if c > 0 else -phi[0, j]
                right = phi[c + 1, j] if c < n - 1 else -phi[-1, j]
                lap[c] = (left - 2 * phi[c, j] + right) / dx**2
            assert sys_.diffusion[i, j] == pytest.approx(np.sum(w * phi[:, i] * lap), abs=1e-12 * max(1.0, abs(sys_.diffusion[i, j])))
            for k in range(2):
                prod = phi[:, j] * phi[:, k]
                der = np.empty(n)
                for c in range(n):
                    left = prod[c - 1] if c > 0 else prod[0]
                    right = prod[c + 1] if c < n - 1 else prod[-1]
                    der[c] = (right - left) / (4 * dx)
                assert sys_.convection[i, j, k] == pytest.approx(np.sum(w * phi[:, i] * der), abs=1e-12)


def test_grid_mismatch():
    b = PodBasis.identity(4)
    with pytest.raises(IncompatibleDiscretizationError):
        assemble_reduced_operators(b, Grid1D(5), 0.1)


def test_zero_operators_keep_state():
    sys_ = ReducedSystem(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2, 2)), 1.0)
    tr = integrate_rom(sys_, None, [1.0, -2.0], np.linspace(0, 1, 5), dt=0.1)
    np.testing.assert_array_equal(tr.states, [[1.0, -2.0]] * 5)


def test_exponential_decay_accuracy():
    times = np.linspace(0, 1, 11)
    a0 = np.array([1.0, 0.5, -0.3])
    tr = integrate_rom(_linear(), None, a0, times, dt=1e-3)
    exact = a0 * np.exp(-times)[:, None]
    assert np.max(np.abs(tr.states - exact) / np.abs(exact)) <= 1e-5


def test_bdf2_second_order():
    times = np.array([0.0, 1.0])
    errs = []
    for dt in (0.02, 0.01, 0.005):
        tr = integrate_rom(_linear(1), None, [1.0], times, dt=dt)
        errs.append(abs(tr.states[-1, 0] - np.exp(-1.0)))
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)
    assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.5)


def test_determinism_and_zero_correction(rng):
    truth_sys = ReducedSystem(np.eye(3), -np.eye(3) + 0.1 * rng.standard_normal((3, 3)), 0.1 * rng.standard_normal((3, 3, 3)), 1.0)
    times = np.linspace(0, 2, 9)
    a = integrate_rom(truth_sys, CorrectionVector.zeros(3), [1, 0, 0], times, dt=0.01).states
    b = integrate_rom(truth_sys, None, [1, 0, 0], times, dt=0.01).states
    np.testing.assert_array_equal(a, b)


def test_correction_acts_like_operator_change(rng):
    base = ReducedSystem(np.eye(3), -np.eye(3), 0.1 * rng.standard_normal((3, 3, 3)), 0.5)
    q = CorrectionVector(3, 0.05 * rng.standard_normal(n_correction_params(3)))
    times = np.linspace(0, 1, 6)
    a = integrate_rom(base, q, [1, 0.5, 0], times, dt=0.01).states
    b = integrate_rom(base.corrected(q), None, [1, 0.5, 0], times, dt=0.01).states
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_permutation_equivariance(rng):
    base = ReducedSystem(np.eye(3), -np.eye(3) + 0.2 * rng.standard_normal((3, 3)), 0.2 * rng.standard_normal((3, 3, 3)), 1.0)
    q = CorrectionVector(3, 0.01 * rng.standard_normal(36))
    a0 = np.array([1.0, 0.2, -0.4])
    perm = np.array([2, 0, 1])
    times = np.linspace(0, 1, 5)
    ref = integrate_rom(base, q, a0, times, dt=0.01).states
    out = integrate_rom(base.permuted(perm), permute_correction(q, perm), a0[perm], times, dt=0.01).states
    np.testing.assert_allclose(out, ref[:, perm], atol=1e-12)


def test_batch_matches_single_runs(rng):
    base = ReducedSystem(np.eye(3), -np.eye(3), 0.1 * rng.standard_normal((3, 3, 3)), 1.0)
    qs = 0.05 * rng.standard_normal((4, 36))
    times = np.linspace(0, 1, 5)
    states, failed = integrate_batch(base, qs, [1, 0, 0], times, dt=0.01)
    assert not failed.any()
    for z in range(4):
        single = integrate_rom(base, CorrectionVector(3, qs[z]), [1, 0, 0], times, dt=0.01).states
        np.testing.assert_allclose(states[z], single, rtol=1e-13, atol=1e-15)


def test_non_identity_gram_is_solved():
    gram = np.diag([2.0, 4.0])
    sys_ = ReducedSystem(gram, -np.eye(2), np.zeros((2, 2, 2)), 1.0)
    tr = integrate_rom(sys_, None, [1.0, 1.0], np.array([0.0, 1.0]), dt=1e-3)
    np.testing.assert_allclose(tr.states[-1], np.exp([-0.5, -0.25]), rtol=1e-5)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blow_up_is_reported():
    conv = np.zeros((1, 1, 1))
    conv[0, 0, 0] = -1.0  # a' = a^2 blows up at t = 1
    sys_ = ReducedSystem(np.eye(1), np.zeros((1, 1)), conv, 1.0)
    with pytest.raises((DivergenceError, StepFailureError)) as info:
        integrate_rom(sys_, None, [1.0], np.linspace(0, 3, 4), dt=0.01)
    assert info.value.time is not None
    states, failed = integrate_batch(sys_, np.zeros((1, 2)), [1.0], np.linspace(0, 3, 4), dt=0.01, raise_on_failure=False)
    assert failed[0] and np.all(np.isnan(states[0, -1]))


def test_relative_error_examples(rng):
    ref = SnapshotMatrix(rng.standard_normal((10, 4)), np.arange(4.0), np.full(10, 0.1))
    same = relative_l2_error(ref, ref)
    np.testing.assert_array_equal(same, 0.0)
    zero = SnapshotMatrix(np.zeros((10, 4)), ref.times, ref.weights)
    np.testing.assert_allclose(relative_l2_error(ref, zero), 1.0)
    scaled = SnapshotMatrix(1.1 * ref.values, ref.times, ref.weights)
    np.testing.assert_allclose(relative_l2_error(ref, scaled), 0.1, atol=1e-14)


def test_relative_error_flags_zero_reference():
    with pytest.warns(UserWarning, match="undefined"):
        out = weighted_relative_error(np.zeros((2, 3)), np.ones((2, 3)))
    assert np.all(np.isnan(out))


def test_rom_tracks_burgers_reference():
    g = Grid1D(64)
    snaps = simulate_burgers(g, 0.05, sine_profile(g), t_end=0.5, dt=1e-3, save_every=10, scheme="bdf2")
    b = compute_pod(snaps, 6)
    sys_ = assemble_reduced_operators(b, g, 0.05)
    from rombayes.pod import project_snapshots, reconstruct

    a = project_snapshots(snaps, b).coefficients
    tr = integrate_rom(sys_, None, a[0], snaps.times, dt=1e-3)
    err = relative_l2_error(snaps, reconstruct(tr.states, b, snaps.times))
    assert np.max(err) < 0.05


@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_linear_decay_property(rate, a0):
    tr = integrate_rom(_linear(1, -rate), None, [a0], np.array([0.0, 0.5]), dt=1e-3)
    assert tr.states[-1, 0] == pytest.approx(a0 * np.exp(-rate * 0.5), rel=1e-5, abs=1e-12)
