import numpy as np
import pytest
from hypothesis import given, strategies as st

from rombayes.errors import DivergenceError
from rombayes.fom import (
    Grid1D,
    QuadraticTruth,
    SnapshotMatrix,
    burgers_rhs,
    oscillator_truth,
    simulate_burgers,
    simulate_quadratic_truth,
    sine_profile,
)
from rombayes.rom import CorrectionVector, integrate_rom


def test_grid_spacing_and_centers():
    g = Grid1D(8, -1.0, 1.0)
    assert g.dx == pytest.approx(0.25)
    assert np.all(np.diff(g.centers) > 0)
    assert g.centers[0] == pytest.approx(-0.875)
    np.testing.assert_allclose(g.weights, 0.25)


@pytest.mark.parametrize("args", [(0,), (4, 1.0, 1.0), (2.5,)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValueError):
        Grid1D(*args)


def test_snapshot_matrix_invariants():
    with pytest.raises(ValueError):
        SnapshotMatrix(np.zeros((3, 2)), [0.0, 1.0, 2.0], np.ones(3))
    with pytest.raises(ValueError):
        SnapshotMatrix(np.zeros((3, 2)), [1.0, 0.0], np.ones(3))
    with pytest.raises(ValueError):
        SnapshotMatrix(np.zeros((3, 2)), [0.0, 1.0], [1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        SnapshotMatrix(np.full((3, 2), np.nan), [0.0, 1.0], np.ones(3))


def test_zero_initial_state_stays_zero():
    g = Grid1D(32)
    s = simulate_burgers(g, 0.05, np.zeros(32), t_end=0.2, dt=0.01)
    assert np.all(s.values == 0.0)
    np.testing.assert_allclose(s.weights, g.dx)


@pytest.mark.parametrize("c", [-0.7, 0.0, 1.3])
def test_constant_state_is_exact_solution(c):
    g = Grid1D(24)
    s = simulate_burgers(g, 0.02, np.full(24, c), boundary=(c, c), t_end=0.3, dt=0.01)
    np.testing.assert_allclose(s.values, c, atol=1e-13)


def test_energy_decays_for_large_viscosity():
    g = Grid1D(64)
    u0 = sine_profile(g)
    coarse = simulate_burgers(g, 1.0, u0, t_end=0.2, dt=2e-3, save_every=5)
    fine = simulate_burgers(g, 1.0, u0, t_end=0.2, dt=1e-3, save_every=10)
    for s in (coarse, fine):
        energy = np.sqrt(np.sum(s.weights[:, None] * s.values**2, axis=0))
        assert np.all(np.diff(energy) < 0)
    # half-step reference agrees to first order
    assert np.max(np.abs(coarse.values - fine.values)) < 1e-2


def test_bdf2_converges_at_second_order():
    g = Grid1D(64)
    u0 = sine_profile(g)
    finals = [
        simulate_burgers(g, 0.05, u0, t_end=0.4, dt=dt, save_every=int(round(0.4 / dt)), scheme="bdf2").values[:, -1]
        for dt in (0.02, 0.01, 0.005)
    ]
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert 3.5 < ratio < 4.5


def test_periodic_translation_invariance():
    g = Grid1D(40)
    u0 = 1.0 + 0.3 * np.sin(2 * np.pi * g.centers)
    a = simulate_burgers(g, 0.02, u0, boundary="periodic", t_end=0.2, dt=0.01)
    b = simulate_burgers(g, 0.02, np.roll(u0, 7), boundary="periodic", t_end=0.2, dt=0.01)
    np.testing.assert_allclose(np.roll(a.values, 7, axis=0), b.values, atol=1e-12)
    # conservative flux: the mean is preserved on a periodic domain
    np.testing.assert_allclose(a.values.mean(axis=0), u0.mean(), atol=1e-12)


def test_burgers_jacobian_matches_finite_differences(rng):
    g = Grid1D(10)
    u = rng.standard_normal(10)
    for boundary in ((0.3, -0.2), "periodic"):
        rhs, jac = burgers_rhs(u, g, 0.1, boundary)
        if boundary != "periodic":
            dense = np.diag(jac[1]) + np.diag(jac[0, 1:], 1) + np.diag(jac[2, :-1], -1)
        else:
            dense = jac
        fd = np.empty((10, 10))
        h = 1e-6
        for j in range(10):
            e = np.zeros(10)
            e[j] = h
            fd[:, j] = (burgers_rhs(u + e, g, 0.1, boundary)[0] - burgers_rhs(u - e, g, 0.1, boundary)[0]) / (2 * h)
        np.testing.assert_allclose(dense, fd, atol=1e-5)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_error_names_step():
    g = Grid1D(8)
    with pytest.raises(DivergenceError) as info:
        simulate_burgers(g, 0.0, np.full(8, 1e200), boundary=(1e200, 1e200), t_end=0.1, dt=0.05)
    assert info.value.step == 1
    assert "step 1" in str(info.value)


def test_quadratic_truth_with_zero_correction_matches_rom():
    truth = oscillator_truth(4, correction={})
    times = np.linspace(0, 2, 11)
    a0 = np.array([1.0, 0.0, 0.5, 0.0])
    direct = integrate_rom(truth.system(), CorrectionVector.zeros(4), a0, times, dt=0.01).states
    np.testing.assert_array_equal(simulate_quadratic_truth(truth, a0, times, dt=0.01), direct)


def _truth(diffusion, convection):
    n = diffusion.shape[0]
    return QuadraticTruth(n, np.eye(n), diffusion, convection, CorrectionVector.zeros(n))


def test_quadratic_truth_exponential_decay():
    truth = _truth(-np.eye(3), np.zeros((3, 3, 3)))
    times = np.linspace(0, 1, 11)
    a0 = np.array([1.0, -2.0, 0.5])
    out = simulate_quadratic_truth(truth, a0, times, dt=1e-3)
    exact = a0 * np.exp(-times)[:, None]
    assert np.max(np.abs(out - exact) / np.abs(exact)) <= 1e-4


def test_antisymmetric_convection_conserves_norm(rng):
    raw = rng.standard_normal((4, 4, 4))
    # a . (a^T C a) = sum_ijk a_i a_j a_k C_ijk vanishes when C is antisymmetric in (i, j)
    conv = raw - raw.transpose(1, 0, 2)
    a = rng.standard_normal(4)
    assert abs(np.einsum("i,ijk,j,k->", a, conv, a, a)) < 1e-12
    truth = _truth(np.zeros((4, 4)), conv)
    a0 = np.array([0.3, -0.2, 0.1, 0.25])
    out = simulate_quadratic_truth(truth, a0, np.linspace(0, 2, 21), dt=1e-3)
    norms = np.linalg.norm(out, axis=1)
    np.testing.assert_allclose(norms, norms[0], rtol=1e-4)


def test_zero_tensors_give_constant_trajectory():
    truth = _truth(np.zeros((3, 3)), np.zeros((3, 3, 3)))
    a0 = np.array([0.2, 0.4, -1.0])
    out = simulate_quadratic_truth(truth, a0, np.linspace(0, 1, 5), dt=0.1)
    np.testing.assert_array_equal(out, np.tile(a0, (5, 1)))


def test_oscillator_truth_is_energy_neutral(rng):
    truth = oscillator_truth(6, coupling=0.3, seed=3)
    a = rng.standard_normal(6)
    assert abs(a @ np.einsum("ijk,j,k->i", truth.convection, a, a)) < 1e-12
    assert np.count_nonzero(truth.true_correction.values) == 5


@given(st.integers(2, 40), st.floats(0.0, 0.5), st.floats(0.0, 1.0))
def test_snapshots_are_finite_with_positive_weights(n, nu, amp):
    g = Grid1D(n)
    s = simulate_burgers(g, nu, amp * sine_profile(g), t_end=0.05, dt=0.01)
    assert np.all(np.isfinite(s.values))
    assert np.all(s.weights > 0)
    assert s.values.shape == (n, 6)
