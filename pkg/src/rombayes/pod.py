"""Proper orthogonal decomposition by the method of snapshots."""

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleDiscretizationError, RankDeficiencyError
from .fom import SnapshotMatrix


@dataclass(frozen=True)
class PodBasis:
    """Columns of ``modes`` are orthonormal in ``<u, v> = sum(w * u * v)``."""

    modes: np.ndarray
    singular_values: np.ndarray
    weights: np.ndarray
    mean: np.ndarray = None

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=float)
        sv = np.asarray(self.singular_values, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if modes.ndim != 2 or modes.shape[0] != weights.size or modes.shape[1] != sv.size:
            raise ValueError("inconsistent basis shapes")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if np.any(sv < 0) or np.any(np.diff(sv) > 0):
            raise ValueError("singular values must be non-negative and non-increasing")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "singular_values", sv)
        object.__setattr__(self, "weights", weights)
        if self.mean is not None:
            object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).ravel())

    @property
    def n_modes(self):
        return self.modes.shape[1]

    @property
    def n_cells(self):
        return self.modes.shape[0]

    @classmethod
    def identity(cls, n):
        """Trivial basis for data that already live in modal coordinates."""
        return cls(np.eye(n), np.ones(n), np.ones(n))


@dataclass(frozen=True)
class MeasurementSet:
    coefficients: np.ndarray
    times: np.ndarray
    noise_std: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        times = np.asarray(self.times, dtype=float).ravel()
        noise = np.asarray(self.noise_std, dtype=float).ravel()
        if coeffs.ndim != 2 or coeffs.shape[0] != times.size or coeffs.shape[1] != noise.size:
            raise ValueError("inconsistent measurement shapes")
        if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(noise))):
            raise ValueError("measurements must be finite")
        if np.any(noise < 0):
            raise ValueError("noise standard deviations must be non-negative")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("measurement times must be strictly increasing")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "noise_std", noise)

    def window(self, t_start, t_end, include_start=True):
        lo = self.times >= t_start if include_start else self.times > t_start
        mask = lo & (self.times <= t_end + 1e-12 * max(1.0, abs(t_end)))
        return MeasurementSet(self.coefficients[mask], self.times[mask], self.noise_std)

    def with_noise(self, noise_std):
        return MeasurementSet(self.coefficients, self.times, noise_std)


def _fix_signs(modes):
    idx = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[idx, np.arange(modes.shape[1])])
    signs[signs == 0] = 1.0
    return modes * signs


def compute_pod(snapshots, n_modes, mean_center=False, rank_tol=None):
    """Leading POD modes of ``snapshots`` in the weighted inner product.

    Eigen-decomposes the ``N_t x N_t`` correlation ``U^T W U`` and lifts the
    eigenvectors back to space.  Modes are re-orthonormalised once against
    ``W`` to remove the roundoff that squaring the data introduces, and
    signed so that each mode's largest-magnitude entry is positive.

    Raises
    ------
    RankDeficiencyError
        If ``n_modes`` exceeds the numerical rank of the snapshot set.
    """
    n_cells, n_times = snapshots.values.shape
    if int(n_modes) != n_modes or n_modes < 1 or n_modes > min(n_cells, n_times):
        raise ValueError(f"n_modes must lie in [1, {min(n_cells, n_times)}]")
    w = snapshots.weights
    u = snapshots.values
    mean = None
    if mean_center:
        mean = u.mean(axis=1)
        u = u - mean[:, None]
    corr = u.T @ (u * w[:, None])
    corr = 0.5 * (corr + corr.T)
    lam, vecs = np.linalg.eigh(corr)
    order = np.argsort(lam)[::-1]
    lam = np.clip(lam[order], 0.0, None)
    vecs = vecs[:, order]
    sv = np.sqrt(lam)
    if rank_tol is None:
        rank_tol = max(n_cells, n_times) * np.finfo(float).eps
    # eigenvalues of U^T W U carry absolute error ~ eps * lam_max
    cutoff = np.sqrt(rank_tol) * sv[0] if sv[0] > 0 else np.inf
    rank = int(np.sum(sv > cutoff))
    if n_modes > rank:
        raise RankDeficiencyError(
            f"requested {n_modes} modes but the snapshots have numerical rank {rank}", rank
        )
    modes = u @ vecs[:, :n_modes] / sv[:n_modes]
    gram = modes.T @ (modes * w[:, None])
    chol = np.linalg.cholesky(0.5 * (gram + gram.T))
    modes = np.linalg.solve(chol, modes.T).T
    modes = _fix_signs(modes)
    return PodBasis(modes, sv[:n_modes], w.copy(), mean)


def energy_fraction(snapshots, n_modes, mean_center=False):
    """Share of the squared singular values captured by ``n_modes`` modes."""
    u = snapshots.values
    if mean_center:
        u = u - u.mean(axis=1, keepdims=True)
    lam = np.linalg.eigvalsh(u.T @ (u * snapshots.weights[:, None]))
    lam = np.clip(np.sort(lam)[::-1], 0.0, None)
    return float(np.sum(lam[:n_modes]) / np.sum(lam))


def project_snapshots(snapshots, basis):
    """Weighted projection coefficients ``a_ij = <u(t_i), phi_j>_W``.

    Noise levels start at zero; see :func:`rombayes.prior.default_noise`.
    """
    if snapshots.n_cells != basis.n_cells or not np.allclose(
        snapshots.weights, basis.weights, rtol=1e-12, atol=0.0
    ):
        raise IncompatibleDiscretizationError("snapshot and basis weights differ")
    u = snapshots.values
    if basis.mean is not None:
        u = u - basis.mean[:, None]
    coeffs = u.T @ (basis.modes * basis.weights[:, None])
    return MeasurementSet(coeffs, snapshots.times, np.zeros(basis.n_modes))


def reconstruct(coefficients, basis, times=None):
    """Field ``sum_j a_ij phi_j`` for each row ``i`` of ``coefficients``."""
    coefficients = np.atleast_2d(np.asarray(coefficients, dtype=float))
    if coefficients.shape[1] != basis.n_modes:
        raise ValueError(
            f"coefficients have {coefficients.shape[1]} columns, basis has {basis.n_modes} modes"
        )
    values = basis.modes @ coefficients.T
    if basis.mean is not None:
        values = values + basis.mean[:, None]
    if times is None:
        times = np.arange(coefficients.shape[0], dtype=float)
    return SnapshotMatrix(values, times, basis.weights)
