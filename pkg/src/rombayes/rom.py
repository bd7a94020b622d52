"""Galerkin reduced operators and the corrected quadratic reduced ODE.

The reduced model reads

    M a' = nu (A + A~) a - a^T (C + C~) a,

where ``(a^T C a)_i = sum_jk a_j C_ijk a_k``.  ``A~`` and ``C~`` are the
additive corrections that the smoothers identify.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .errors import (
    DivergenceError,
    IncompatibleDiscretizationError,
    RomBayesWarning,
    StepFailureError,
)
from .fom import Grid1D, SnapshotMatrix, convection_operator, diffusion_operator


def n_correction_params(n_modes):
    """Length of the flattened correction, ``N_r**2 * (1 + N_r)``."""
    return n_modes * n_modes * (1 + n_modes)


@dataclass(frozen=True)
class ReducedSystem:
    gram: np.ndarray
    diffusion: np.ndarray
    convection: np.ndarray
    nu: float

    def __post_init__(self):
        gram = np.array(self.gram, dtype=float)
        diffusion = np.array(self.diffusion, dtype=float)
        convection = np.array(self.convection, dtype=float)
        n = gram.shape[0]
        if gram.shape != (n, n) or diffusion.shape != (n, n) or convection.shape != (n, n, n):
            raise ValueError(
                f"inconsistent operator shapes {gram.shape}, {diffusion.shape}, {convection.shape}"
            )
        for name, arr in (("gram", gram), ("diffusion", diffusion), ("convection", convection)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        if not np.allclose(gram, gram.T, rtol=1e-10, atol=1e-12):
            raise ValueError("gram matrix is not symmetric")
        if not math.isfinite(self.nu):
            raise ValueError("viscosity must be finite")
        for arr in (gram, diffusion, convection):
            arr.flags.writeable = False
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "diffusion", diffusion)
        object.__setattr__(self, "convection", convection)
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def n_modes(self):
        return self.gram.shape[0]

    def corrected(self, correction):
        """Return the system with ``correction`` folded into its operators."""
        a_t, c_t = correction.unpack()
        return ReducedSystem(self.gram, self.diffusion + a_t, self.convection + c_t, self.nu)

    def permuted(self, perm):
        perm = np.asarray(perm)
        return ReducedSystem(
            self.gram[np.ix_(perm, perm)],
            self.diffusion[np.ix_(perm, perm)],
            self.convection[np.ix_(perm, perm, perm)],
            self.nu,
        )


@dataclass(frozen=True)
class CorrectionVector:
    """Flattened ``(A~, C~)``: the ``N_r**2`` entries of ``A~`` row-major,
    then the ``N_r**3`` entries of ``C~`` in ``(i, j, k)`` order."""

    n_modes: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size != n_correction_params(self.n_modes):
            raise ValueError(
                f"correction for {self.n_modes} modes needs "
                f"{n_correction_params(self.n_modes)} values, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("correction has non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n_modes):
        return cls(n_modes, np.zeros(n_correction_params(n_modes)))

    @classmethod
    def pack(cls, diffusion, convection):
        diffusion = np.asarray(diffusion, dtype=float)
        convection = np.asarray(convection, dtype=float)
        n = diffusion.shape[0]
        if diffusion.shape != (n, n) or convection.shape != (n, n, n):
            raise ValueError("correction blocks have inconsistent shapes")
        return cls(n, np.concatenate([diffusion.ravel(), convection.ravel()]))

    def unpack(self):
        n = self.n_modes
        return (
            self.values[: n * n].reshape(n, n).copy(),
            self.values[n * n:].reshape(n, n, n).copy(),
        )


def unpack_batch(values, n_modes):
    """Split a ``Z x s`` batch of flattened corrections into
    ``(Z x N x N, Z x N x N x N)`` blocks."""
    values = np.asarray(values, dtype=float)
    n = n_modes
    if values.ndim != 2 or values.shape[1] != n_correction_params(n):
        raise ValueError(f"expected (Z, {n_correction_params(n)}) corrections, got {values.shape}")
    z = values.shape[0]
    return values[:, : n * n].reshape(z, n, n), values[:, n * n:].reshape(z, n, n, n)


def permute_correction(correction, perm):
    a_t, c_t = correction.unpack()
    perm = np.asarray(perm)
    return CorrectionVector.pack(a_t[np.ix_(perm, perm)], c_t[np.ix_(perm, perm, perm)])


@dataclass(frozen=True)
class RomTrajectory:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] != times.size:
            raise ValueError("states must be (N_t, N_r) aligned with times")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory has non-finite entries")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)


def assemble_reduced_operators(basis, grid, nu, boundary="dirichlet"):
    """Galerkin projection of the discrete Burgers operators onto ``basis``.

    ``(A)_ij = <phi_i, D phi_j>_W`` and ``(C)_ijk = <phi_i, K(phi_j, phi_k)>_W``
    with ``D`` the cell-centred Laplacian and ``K`` the central (bilinear)
    part of the conservative convective flux, both with homogeneous ghost
    values.  The upwind dissipation of the full-order flux is left out of
    the projection; it is one of the contributions the correction absorbs.
    """
    if not isinstance(grid, Grid1D):
        raise TypeError("grid must be a Grid1D")
    modes = basis.modes
    if modes.shape[0] != grid.n_cells:
        raise IncompatibleDiscretizationError(
            f"basis has {modes.shape[0]} cells, grid has {grid.n_cells}"
        )
    if not np.allclose(basis.weights, grid.dx, rtol=1e-12, atol=0.0):
        raise IncompatibleDiscretizationError("basis weights do not match the grid cell measure")
    if getattr(basis, "mean", None) is not None and np.any(basis.mean != 0.0):
        raise IncompatibleDiscretizationError(
            "mean-centred bases yield an affine ROM, which is not supported"
        )
    w = basis.weights
    wphi = modes * w[:, None]
    n = modes.shape[1]
    gram = modes.T @ wphi
    gram = 0.5 * (gram + gram.T)
    d_phi = diffusion_operator(modes, grid.dx, boundary)
    diffusion = wphi.T @ d_phi
    pairs = modes[:, :, None] * modes[:, None, :]
    k_pairs = convection_operator(pairs.reshape(grid.n_cells, n * n), grid.dx, boundary)
    convection = (wphi.T @ k_pairs).reshape(n, n, n)
    return ReducedSystem(gram, diffusion, convection, nu)


def _fine_grid(times, dt):
    """Integration grid containing every output time; returns it and the
    indices of the output times inside it."""
    if dt is None:
        return times.copy(), np.arange(times.size)
    if dt <= 0:
        raise ValueError("dt must be positive")
    pieces = [times[:1]]
    out_idx = [0]
    for t0, t1 in zip(times[:-1], times[1:]):
        n_sub = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
        pieces.append(t0 + (t1 - t0) * np.arange(1, n_sub + 1) / n_sub)
        pieces[-1][-1] = t1
        out_idx.append(out_idx[-1] + n_sub)
    return np.concatenate(pieces), np.asarray(out_idx)


def _rhs_and_jacobian(y, nu, a_tot, c_sym):
    # c_sym: (Z, N*N, N) flattening of C_ijk + C_ikj, so that
    # (C_sym y)_ij is the Jacobian of a^T C a and half of it times y is the term itself
    z, n = y.shape
    cy = (c_sym @ y[:, :, None]).reshape(z, n, n)
    quad = 0.5 * (cy @ y[:, :, None])[..., 0]
    rhs = nu * (a_tot @ y[:, :, None])[..., 0] - quad
    jac = nu * a_tot - cy
    return rhs, jac


def integrate_batch(
    system,
    corrections,
    a0,
    times,
    dt=None,
    newton_tol=1e-12,
    newton_max_iter=25,
    raise_on_failure=True,
):
    """Integrate a batch of corrected ROMs with BDF2 (implicit Euler start).

    Parameters
    ----------
    system : ReducedSystem
    corrections : (Z, s) array
        One flattened correction per batch member.
    a0 : (N_r,) or (Z, N_r) array
    times : (N_t,) array
        Strictly increasing output times; ``times[0]`` is the initial time.
    dt : float, optional
        Largest internal step.  Without it the integrator steps exactly on
        ``times``.
    raise_on_failure : bool
        If False, failing members are flagged instead of raising.

    Returns
    -------
    states : (Z, N_t, N_r) array
        NaN rows for failed members.
    failed : (Z,) bool array
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a non-empty 1-D array")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    n = system.n_modes
    a_corr, c_corr = unpack_batch(corrections, n)
    z = a_corr.shape[0]
    a_tot = system.diffusion[None] + a_corr
    c_tot = system.convection[None] + c_corr
    c_sym = (c_tot + c_tot.transpose(0, 1, 3, 2)).reshape(-1, n * n, n)
    a0 = np.asarray(a0, dtype=float)
    y = np.broadcast_to(a0, (z, n)).astype(float, copy=True)
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state has non-finite entries")
    gram = system.gram
    nu = system.nu

    grid, out_idx = _fine_grid(times, dt)
    states = np.full((z, times.size, n), np.nan)
    failed = np.zeros(z, dtype=bool)
    out_pos = 0
    if out_idx[0] == 0:
        states[:, 0] = y
        out_pos = 1

    y_prev = None
    h_prev = None
    eye_floor = 4.0 * np.finfo(float).eps
    for step in range(1, grid.size):
        h = grid[step] - grid[step - 1]
        if y_prev is None:
            beta = h
            r = y
            guess = y.copy()
        else:
            w = h / h_prev
            # c1 y - c2 y_prev with c1 = 1 + c2, written to be exact for constant states
            c2 = w * w / (1.0 + 2.0 * w)
            beta = h * (1.0 + w) / (1.0 + 2.0 * w)
            r = y + c2 * (y - y_prev)
            guess = y + w * (y - y_prev)
        mr = r @ gram.T
        x = guess
        live = ~failed
        converged = failed.copy()
        for it in range(newton_max_iter + 1):
            todo = ~converged
            if not np.any(todo):
                break
            if np.all(todo):
                xs, a_sub, c_sub = x, a_tot, c_sym
            else:
                xs, a_sub, c_sub = x[todo], a_tot[todo], c_sym[todo]
            rhs, jac = _rhs_and_jacobian(xs, nu, a_sub, c_sub)
            mx = xs @ gram.T
            res = mx - mr[todo] - beta * rhs
            scale = np.maximum(1.0, np.max(np.abs(mx), axis=1))
            finite = np.all(np.isfinite(res), axis=1)
            # the predictor alone is never accepted: small states would pass the
            # absolute test without any correction
            ok = finite & (np.max(np.abs(res), axis=1) <= newton_tol * scale) & (it > 0)
            idx = np.flatnonzero(todo)
            converged[idx[ok]] = True
            bad = idx[~finite]
            if bad.size:
                converged[bad] = True
                failed[bad] = True
            pending = finite & ~ok
            if not np.any(pending):
                break
            j_mat = gram[None] - beta * jac[pending]
            try:
                delta = np.linalg.solve(j_mat, res[pending][..., None])[..., 0]
            except np.linalg.LinAlgError:
                delta = np.stack([_safe_solve(m, v) for m, v in zip(j_mat, res[pending])])
            sub = idx[pending]
            x[sub] = x[sub] - delta
            stalled = np.max(np.abs(delta), axis=1) <= eye_floor * np.maximum(
                1.0, np.max(np.abs(x[sub]), axis=1)
            )
            # roundoff floor reached: further iterations cannot reduce the residual
            converged[sub[stalled & np.all(np.isfinite(x[sub]), axis=1)]] = True
        nonconv = ~converged & live
        if np.any(nonconv):
            if raise_on_failure:
                raise StepFailureError(
                    f"Newton did not converge in {newton_max_iter} iterations at step {step} "
                    f"(t={grid[step]:.6g})",
                    step=step,
                    time=grid[step],
                )
            failed |= nonconv
        blown = live & ~np.all(np.isfinite(x), axis=1)
        newly = (failed & live) | blown
        if np.any(newly):
            if raise_on_failure:
                raise DivergenceError(
                    f"non-finite reduced state at step {step} (t={grid[step]:.6g})",
                    step=step,
                    time=grid[step],
                )
            failed |= newly
        x[failed] = 0.0
        y_prev, y, h_prev = y, x, h
        if out_pos < out_idx.size and out_idx[out_pos] == step:
            states[:, out_pos] = y
            out_pos += 1
    states[failed] = np.nan
    return states, failed


def _safe_solve(mat, vec):
    try:
        return np.linalg.solve(mat, vec)
    except np.linalg.LinAlgError:
        return np.full_like(vec, np.nan)


def integrate_rom(system, correction, a0, times, dt=None, newton_tol=1e-12, newton_max_iter=25):
    """Integrate the corrected reduced ODE and return a :class:`RomTrajectory`.

    Shares its code path with :func:`integrate_batch` (a batch of one), so
    ensemble forecasts and single runs produce identical trajectories.
    """
    if correction is None:
        correction = CorrectionVector.zeros(system.n_modes)
    if correction.n_modes != system.n_modes:
        raise ValueError("correction and system disagree on the number of modes")
    states, _ = integrate_batch(
        system,
        correction.values[None, :],
        a0,
        times,
        dt=dt,
        newton_tol=newton_tol,
        newton_max_iter=newton_max_iter,
    )
    return RomTrajectory(np.asarray(times, dtype=float), states[0])


def relative_l2_error(reference, candidate):
    """Per-time relative error ``||u_ref - u||_W / ||u_ref||_W``.

    Times where the reference norm vanishes are returned as NaN and reported
    through a warning.
    """
    if reference.values.shape != candidate.values.shape:
        raise IncompatibleDiscretizationError("snapshot shapes differ")
    if not np.allclose(reference.weights, candidate.weights, rtol=1e-12, atol=0.0):
        raise IncompatibleDiscretizationError("snapshot weights differ")
    if not np.allclose(reference.times, candidate.times, rtol=1e-12, atol=1e-12):
        raise IncompatibleDiscretizationError("snapshot times differ")
    return weighted_relative_error(reference.values.T, candidate.values.T, reference.weights)


def weighted_relative_error(reference, candidate, weights=None):
    """Row-wise relative error of ``(N_t, n)`` arrays under a diagonal weight."""
    reference = np.asarray(reference, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    w = np.ones(reference.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    num = np.sqrt(np.sum(w * (reference - candidate) ** 2, axis=1))
    den = np.sqrt(np.sum(w * reference**2, axis=1))
    out = np.full(num.shape, np.nan)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    if not np.all(nz):
        warnings.warn(
            f"relative error undefined at time indices {np.flatnonzero(~nz).tolist()} "
            "(zero reference norm)",
            RomBayesWarning,
            stacklevel=2,
        )
    return out


def snapshot_from_states(states, times, basis):
    """Lift ``(N_t, N_r)`` amplitudes to a :class:`SnapshotMatrix`."""
    from .pod import reconstruct

    return reconstruct(np.asarray(states), basis, times=times)


__all__ = [
    "CorrectionVector",
    "ReducedSystem",
    "RomTrajectory",
    "SnapshotMatrix",
    "assemble_reduced_operators",
    "integrate_batch",
    "integrate_rom",
    "n_correction_params",
    "relative_l2_error",
    "unpack_batch",
    "weighted_relative_error",
]
