"""Desk-scale full-order snapshot generators.

Two sources of training data:

* a 1-D viscous Burgers solver, ``u_t + (u^2/2)_x = nu u_xx`` on a uniform
  cell-centred grid with Dirichlet ghost values, and
* a synthetic quadratic ODE with a known correction, integrated by the very
  same integrator the ROM uses.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import solve_banded

from .errors import DivergenceError, StepFailureError


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    x_min: float = 0.0
    x_max: float = 1.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError("n_cells must be a positive integer")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self):
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def weights(self):
        return np.full(self.n_cells, self.dx)


@dataclass(frozen=True)
class SnapshotMatrix:
    """Full-order states as columns, ``values`` is ``N_c x N_t``."""

    values: np.ndarray
    times: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        times = np.array(self.times, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if values.ndim != 2:
            raise ValueError("snapshot values must be a 2-D array")
        if values.shape[1] != times.size:
            raise ValueError(f"{values.shape[1]} snapshot columns but {times.size} times")
        if values.shape[0] != weights.size:
            raise ValueError(f"{values.shape[0]} cells but {weights.size} weights")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("cell weights must be positive")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(times)) and np.all(np.isfinite(weights))):
            raise ValueError("snapshot data contain non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights)

    @property
    def n_cells(self):
        return self.values.shape[0]

    @property
    def n_times(self):
        return self.values.shape[1]

    def select_times(self, mask):
        mask = np.asarray(mask)
        return SnapshotMatrix(self.values[:, mask], self.times[mask], self.weights)


def _ghosted(v, boundary):
    """Pad ``v`` (cells along axis 0) with homogeneous ghost rows."""
    if boundary == "dirichlet":
        lo, hi = -v[:1], -v[-1:]
    elif boundary == "neumann":
        lo, hi = v[:1], v[-1:]
    elif boundary == "periodic":
        lo, hi = v[-1:], v[:1]
    else:
        raise ValueError(f"unknown boundary kind {boundary!r}")
    return np.concatenate([lo, v, hi], axis=0)


def diffusion_operator(v, dx, boundary="dirichlet"):
    """Second-order central Laplacian of cell data (columns of ``v``)."""
    g = _ghosted(np.asarray(v, dtype=float), boundary)
    return (g[2:] - 2.0 * g[1:-1] + g[:-2]) / dx**2


def convection_operator(products, dx, boundary="dirichlet"):
    """Central conservative derivative of ``p/2`` for a product field
    ``p = v * w``; bilinear in ``(v, w)``.

    Ghost products follow from the ghost values of the factors, so a
    Dirichlet ghost ``-v_0`` contributes ``v_0 w_0``.
    """
    p = np.asarray(products, dtype=float)
    if boundary == "dirichlet":
        boundary = "neumann"
    g = _ghosted(p, boundary)
    return (g[2:] - g[:-2]) / (4.0 * dx)


def _flux_plus(u):
    return 0.5 * np.maximum(u, 0.0) ** 2


def _flux_minus(u):
    return 0.5 * np.minimum(u, 0.0) ** 2


def burgers_rhs(u, grid, nu, boundary):
    """Semi-discrete Burgers right-hand side with an Engquist-Osher upwind
    flux.

    ``boundary`` is either a ``(left, right)`` pair of Dirichlet values,
    imposed through ghost values ``2 g - u``, or ``"periodic"``.  Returns the
    right-hand side and its Jacobian: tridiagonal bands in ``solve_banded``
    layout for Dirichlet data, a dense matrix for periodic data.
    """
    dx = grid.dx
    periodic = isinstance(boundary, str)
    if periodic:
        ext = np.concatenate([u[-1:], u, u[:1]])
    else:
        g_left, g_right = boundary
        ext = np.concatenate([[2.0 * g_left - u[0]], u, [2.0 * g_right - u[-1]]])
    flux = _flux_plus(ext[:-1]) + _flux_minus(ext[1:])
    rhs = -(flux[1:] - flux[:-1]) / dx + nu * (ext[2:] - 2.0 * ext[1:-1] + ext[:-2]) / dx**2

    n = u.size
    pos = np.maximum(ext, 0.0)
    neg = np.minimum(ext, 0.0)
    d_right = pos[1:-1].copy()  # dF_{i+1/2}/du_i
    d_left = neg[1:-1].copy()  # dF_{i-1/2}/du_i
    diag = -(d_right - d_left) / dx - 2.0 * nu / dx**2
    if not periodic:
        # ghost values depend on the first/last cell
        diag[0] += -pos[0] / dx - nu / dx**2
        diag[-1] += neg[-1] / dx - nu / dx**2
    upper = -neg[2:-1] / dx + nu / dx**2  # dL_i/du_{i+1}
    lower = pos[1:-2] / dx + nu / dx**2  # dL_{i+1}/du_i
    if periodic:
        jac = np.diag(diag) + np.diag(upper, 1) + np.diag(lower, -1)
        jac[0, -1] += pos[0] / dx + nu / dx**2
        jac[-1, 0] += -neg[-1] / dx + nu / dx**2
        return rhs, jac
    bands = np.zeros((3, n))
    bands[0, 1:] = upper
    bands[1] = diag
    bands[2, :-1] = lower
    return rhs, bands


def simulate_burgers(
    grid,
    nu,
    initial,
    boundary=(0.0, 0.0),
    t_end=1.0,
    dt=1e-3,
    save_every=1,
    scheme="euler",
    newton_tol=1e-12,
    newton_max_iter=50,
):
    """Integrate viscous Burgers implicitly and collect snapshots.

    Parameters
    ----------
    grid : Grid1D
    nu : float
        Viscosity, ``nu >= 0``.
    initial : (n_cells,) array
    boundary : (float, float) or "periodic"
        Left/right Dirichlet values, or a periodic domain.
    t_end, dt : float
        The number of steps is ``round(t_end / dt)``.
    save_every : int
        Store every ``save_every``-th step; the initial state is always kept.
    scheme : {"euler", "bdf2"}
        Backward Euler (default), or BDF2 started with one Euler step.

    Returns
    -------
    SnapshotMatrix
        Weights are the cell widths.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if nu < 0:
        raise ValueError("viscosity must be non-negative")
    if int(save_every) != save_every or save_every < 1:
        raise ValueError("save_every must be a positive integer")
    if scheme not in ("euler", "bdf2"):
        raise ValueError(f"unknown scheme {scheme!r}")
    u = np.array(initial, dtype=float)
    if u.shape != (grid.n_cells,):
        raise ValueError(f"initial state must have {grid.n_cells} entries")
    n_steps = int(round(t_end / dt))
    if isinstance(boundary, str):
        if boundary != "periodic":
            raise ValueError(f"unknown boundary {boundary!r}")
        periodic = True
    else:
        boundary = (float(boundary[0]), float(boundary[1]))
        periodic = False
    eye = np.zeros((3, grid.n_cells))
    eye[1] = 1.0

    saved = [u.copy()]
    times = [0.0]
    u_prev = None
    for step in range(1, n_steps + 1):
        if scheme == "bdf2" and u_prev is not None:
            base = (4.0 * u - u_prev) / 3.0
            beta = 2.0 * dt / 3.0
        else:
            base = u
            beta = dt
        x = u.copy()
        for it in range(newton_max_iter):
            rhs, bands = burgers_rhs(x, grid, nu, boundary)
            res = x - base - beta * rhs
            if not np.all(np.isfinite(res)):
                raise DivergenceError(
                    f"Burgers state became non-finite at step {step} (t={step * dt:.6g})",
                    step=step,
                    time=step * dt,
                )
            if np.max(np.abs(res)) <= newton_tol * max(1.0, np.max(np.abs(x))):
                break
            if periodic:
                delta = np.linalg.solve(np.eye(grid.n_cells) - beta * bands, res)
            else:
                delta = solve_banded((1, 1), eye - beta * bands, res)
            x = x - delta
            if np.max(np.abs(delta)) <= 4.0 * np.finfo(float).eps * max(1.0, np.max(np.abs(x))):
                break
        else:
            raise StepFailureError(
                f"Newton did not converge at Burgers step {step} (t={step * dt:.6g})",
                step=step,
                time=step * dt,
            )
        if not np.all(np.isfinite(x)):
            raise DivergenceError(
                f"Burgers state became non-finite at step {step} (t={step * dt:.6g})",
                step=step,
                time=step * dt,
            )
        u_prev, u = u, x
        if step % save_every == 0:
            saved.append(u.copy())
            times.append(step * dt)
    return SnapshotMatrix(np.stack(saved, axis=1), np.asarray(times), grid.weights)


@dataclass(frozen=True)
class QuadraticTruth:
    """A quadratic reduced system together with the correction that
    generates the synthetic measurements."""

    dim: int
    gram: np.ndarray
    diffusion: np.ndarray
    convection: np.ndarray
    true_correction: object
    nu: float = 1.0

    def __post_init__(self):
        n = self.dim
        gram = np.asarray(self.gram, dtype=float)
        diffusion = np.asarray(self.diffusion, dtype=float)
        convection = np.asarray(self.convection, dtype=float)
        if gram.shape != (n, n) or diffusion.shape != (n, n) or convection.shape != (n, n, n):
            raise ValueError("truth tensors are inconsistent with dim")
        if self.true_correction.n_modes != n:
            raise ValueError("true correction has the wrong number of modes")
        for arr in (gram, diffusion, convection):
            if not np.all(np.isfinite(arr)):
                raise ValueError("truth tensors must be finite")
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "diffusion", diffusion)
        object.__setattr__(self, "convection", convection)

    def system(self):
        """The uncorrected reduced system (what a modeller would assemble)."""
        from .rom import ReducedSystem

        return ReducedSystem(self.gram, self.diffusion, self.convection, self.nu)


def simulate_quadratic_truth(truth, a0, times, dt=None, **newton):
    """Trajectory ``(N_t, N_r)`` of the truth system with its correction on.

    Runs :func:`rombayes.rom.integrate_rom` so that identification tests see
    no integrator mismatch between data and model.
    """
    from .rom import integrate_rom

    return integrate_rom(truth.system(), truth.true_correction, a0, times, dt=dt, **newton).states


def oscillator_truth(
    n_modes=6, nu=1.0, damping=0.05, coupling=0.02, seed=0, correction=None
):
    """Damped rotating mode pairs with energy-conserving quadratic coupling.

    Pairs ``(2k, 2k+1)`` rotate at frequency ``1 + 0.6 k`` and decay at
    ``damping``.  The convection tensor satisfies ``a . (a^T C a) = 0``, so
    the quadratic term redistributes energy without creating it.

    ``correction`` maps flat correction indices to values.  By default five
    entries are switched on, see :func:`default_truth_correction`.  The
    leading pair started from ``e_0`` is the intended initial condition.
    """
    from .rom import CorrectionVector, n_correction_params

    if n_modes < 2:
        raise ValueError("need at least two modes")
    rng = np.random.default_rng(seed)
    n = n_modes
    diffusion = -damping * np.eye(n)
    for k in range(n // 2):
        omega = 1.0 + 0.6 * k
        diffusion[2 * k, 2 * k + 1] = omega
        diffusion[2 * k + 1, 2 * k] = -omega
    diffusion /= nu
    raw = rng.standard_normal((n, n, n)) * coupling
    sym = 0.5 * (raw + raw.transpose(0, 2, 1))
    # cyclic antisymmetrization in (i, j) of the symmetric part keeps a.(a^T C a) = 0
    convection = sym - sym.transpose(1, 0, 2)
    if correction is None:
        correction = default_truth_correction(diffusion, convection)
    values = np.zeros(n_correction_params(n))
    for idx, val in correction.items():
        values[int(idx)] = val
    return QuadraticTruth(
        dim=n,
        gram=np.eye(n),
        diffusion=diffusion,
        convection=convection,
        true_correction=CorrectionVector(n, values),
        nu=nu,
    )


def default_truth_correction(diffusion, convection, relative_scale=0.01, multiple=2.0):
    """Five non-zero correction entries, each ``multiple`` block stds away from zero.

    The block std is ``relative_scale`` times the mean operator magnitude,
    which is what :func:`rombayes.prior.build_prior` uses, so the truth sits
    at a fixed distance from the prior mean in prior units.  Four entries
    alter damping and frequency of the leading pair; the fifth lets the
    leading pair force mode 2 quadratically.
    """
    n = diffusion.shape[0]
    sigma_a = relative_scale * float(np.mean(np.abs(diffusion)))
    sigma_c = relative_scale * float(np.mean(np.abs(convection)))
    c0 = n * n
    return {
        0 * n + 1: multiple * sigma_a,
        1 * n + 0: -multiple * sigma_a,
        0 * n + 0: -multiple * sigma_a,
        1 * n + 1: -multiple * sigma_a,
        c0 + (2 * n + 0) * n + 0: multiple * sigma_c,
    }


def sine_profile(grid, amplitude=1.0, wavenumber=1):
    """``amplitude * sin(k pi (x - x_min) / L)`` at the cell centres."""
    length = grid.x_max - grid.x_min
    return amplitude * np.sin(wavenumber * math.pi * (grid.centers - grid.x_min) / length)
