"""Hermite polynomial chaos and the square-root PCE form of the Kalman update."""

from dataclasses import dataclass
from functools import cached_property
import math
import warnings

import numpy as np

from .enkf import kalman_gain
from .errors import ConditioningError, ConditioningWarning

MAX_TERMS = 10_000_000
CLIP_RTOL = 1e-12


def n_terms(m, p):
    """Cardinality ``C(m + p, p)`` of the total-degree set."""
    return math.comb(m + p, p)


@dataclass(frozen=True, eq=False)
class MultiIndexSet:
    """Total-degree multi-indices in graded lexicographic order.

    Each index is stored as the sorted list of variables it involves, with
    repetition: ``(2, 0, 1)`` is ``[0, 0, 2]``.  ``vars`` and ``powers`` give
    the equivalent (variable, power) pairs padded with power 0, which is all
    basis evaluation needs.  The dense ``P x m`` array is built on request.
    """

    m: int
    p: int
    terms: np.ndarray

    @cached_property
    def _pair_arrays(self):
        return _pairs(self.terms)

    @property
    def vars(self):
        return self._pair_arrays[0]

    @property
    def powers(self):
        return self._pair_arrays[1]

    @cached_property
    def degree(self):
        return np.sum(self.terms >= 0, axis=1)

    @property
    def size(self):
        return self.terms.shape[0]

    def __len__(self):
        return self.size

    @property
    def indices(self):
        dense = np.zeros((self.size, self.m), dtype=np.int64)
        rows = np.repeat(np.arange(self.size), self.vars.shape[1])
        np.add.at(dense, (rows, self.vars.ravel()), self.powers.ravel())
        return dense

    def __eq__(self, other):
        return (
            isinstance(other, MultiIndexSet)
            and self.m == other.m
            and self.p == other.p
            and np.array_equal(self.terms, other.terms)
        )

    def __hash__(self):
        return hash((self.m, self.p, self.size))


def _pairs(terms):
    """Collapse sorted variable lists into (variable, power) pairs."""
    n, p = terms.shape
    if p == 0:
        return np.zeros((n, 0), dtype=np.int64), np.zeros((n, 0), dtype=np.int64)
    valid = terms >= 0
    starts = valid.copy()
    starts[:, 1:] &= terms[:, 1:] != terms[:, :-1]
    # slot r holds the r-th distinct variable; its power is the run length
    run_id = np.cumsum(starts, axis=1) - 1
    vars_ = np.zeros_like(terms)
    powers = np.zeros_like(terms)
    for j in range(p):
        rows = np.flatnonzero(valid[:, j])
        powers[rows, run_id[rows, j]] += 1
        rows = np.flatnonzero(starts[:, j])
        vars_[rows, run_id[rows, j]] = terms[rows, j]
    return vars_, powers


def build_multiindex(m, p):
    """Complete total-degree set of ``m`` variables up to degree ``p``.

    Ordered by degree, then lexicographically with the first variable
    varying slowest, so for ``m = p = 2`` the order is
    ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)``.
    """
    if int(m) != m or int(p) != p or m < 1 or p < 0:
        raise ValueError("need integers m >= 1 and p >= 0")
    m, p = int(m), int(p)
    total = n_terms(m, p)
    if total > MAX_TERMS:
        raise ValueError(f"{total} multi-indices exceed the limit of {MAX_TERMS}")
    blocks = [np.full((1, p), -1, dtype=np.int64)]
    level = np.zeros((1, 0), dtype=np.int64)
    for d in range(1, p + 1):
        last = level[:, -1] if d > 1 else np.zeros(1, dtype=np.int64)
        counts = m - last
        parent = np.repeat(np.arange(level.shape[0]), counts)
        # children of each parent append v = last, last + 1, ..., m - 1
        offsets = np.arange(parent.size) - np.repeat(np.cumsum(counts) - counts, counts)
        new = np.repeat(last, counts) + offsets
        level = np.column_stack([level[parent], new])
        padded = np.full((level.shape[0], p), -1, dtype=np.int64)
        padded[:, :d] = level
        blocks.append(padded)
    terms = np.concatenate(blocks)
    assert terms.shape[0] == total
    return MultiIndexSet(m, p, terms)


def hermite_table(x, p):
    """``He_0 .. He_p`` at ``x``, stacked on a new last axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (p + 1,))
    out[..., 0] = 1.0
    if p >= 1:
        out[..., 1] = x
    for n in range(1, p):
        out[..., n + 1] = x * out[..., n] - n * out[..., n - 1]
    return out


def evaluate_basis(index_set, xi_samples):
    """Design matrix ``Psi[i, a] = prod_k He_{a_k}(xi_i[k])``."""
    xi = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    if xi.shape[1] != index_set.m:
        raise ValueError(f"samples have {xi.shape[1]} germs, index set {index_set.m}")
    if not np.all(np.isfinite(xi)):
        raise ValueError("germ samples must be finite")
    table = hermite_table(xi, index_set.p)
    design = np.ones((xi.shape[0], index_set.size))
    for j in range(index_set.vars.shape[1]):
        design *= table[:, index_set.vars[:, j], index_set.powers[:, j]]
    return design


@dataclass(frozen=True)
class NormDiagonal:
    """``E(Psi_a^2) = prod_k a_k!`` for every index."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0 or values[0] != 1.0 or np.any(values <= 0):
            raise ValueError("norms must be positive with the constant term equal to 1")
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, index_set):
        fact = np.array([math.factorial(k) for k in range(index_set.p + 1)], dtype=float)
        return cls(np.prod(fact[index_set.powers], axis=1) if index_set.p else np.ones(1))


@dataclass(frozen=True)
class PceExpansion:
    """``x(xi) = sum_a coefficients[:, a] Psi_a(xi)``; column 0 is the mean."""

    index_set: MultiIndexSet
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if coeffs.shape[1] != self.index_set.size:
            raise ValueError("coefficient columns must match the index set")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("PCE coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def dim(self):
        return self.coefficients.shape[0]

    @property
    def mean(self):
        return self.coefficients[:, 0].copy()

    def evaluate(self, xi_samples):
        """Realizations ``(N, d)`` at germ samples ``(N, m)``."""
        return evaluate_basis(self.index_set, xi_samples) @ self.coefficients.T

    def sample(self, count, seed):
        rng = np.random.default_rng(seed)
        return self.evaluate(rng.standard_normal((int(count), self.index_set.m)))


def pce_moments(expansion, norms=None):
    """Mean and covariance ``sum_{a>0} Delta_a c_a c_a^T``."""
    if norms is None:
        norms = NormDiagonal.of(expansion.index_set)
    fluct = expansion.coefficients[:, 1:]
    cov = (fluct * norms.values[1:]) @ fluct.T
    return expansion.mean, 0.5 * (cov + cov.T)


def gaussian_expansion(mean, std, index_set):
    """Exact PCE of independent Gaussians: germ ``k`` drives ``std[k]``.

    ``mean`` and ``std`` have one entry per germ variable.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    std = np.asarray(std, dtype=float).ravel()
    if mean.size != index_set.m or std.size != index_set.m:
        raise ValueError("one mean and std per germ variable is required")
    coeffs = np.zeros((mean.size, index_set.size))
    coeffs[:, 0] = mean
    if index_set.p >= 1:
        coeffs[np.arange(mean.size), 1 + np.arange(mean.size)] = std
    return PceExpansion(index_set, coeffs)


def _check_psd(cov, name, strict):
    """Raise (or warn) if ``cov`` has eigenvalues below ``-1e-12 trace``."""
    lam = np.linalg.eigvalsh(cov)
    tol = CLIP_RTOL * max(np.trace(cov), 0.0)
    if lam.size and lam.min() < -tol - np.finfo(float).tiny:
        msg = f"{name} covariance has eigenvalue {lam.min():.3e} below -{tol:.3e}"
        if strict:
            raise ConditioningError(msg)
        warnings.warn(msg + "; negative part clipped", ConditioningWarning, stacklevel=3)


def gmk_pce_update(prior, forecast, y, noise, norms=None, rcond=1e-10):
    """Square-root Gauss-Markov-Kalman update of a PCE.

    ``forecast`` is the noiseless forecast expansion over the same germ as
    ``prior``; the observation noise enters only through its covariance
    ``C_eps``.  The posterior keeps the prior's index set: its mean is the
    Kalman-updated mean and its fluctuation coefficients are ``S_f W^T``
    rescaled by ``Delta^{-1/2}``, where ``S_f = q~ Delta^{1/2}`` and ``W`` is
    the symmetric square root that maps the prior factor onto the posterior
    covariance.

    Returns
    -------
    PceExpansion
        Posterior over the prior's germ.
    """
    if prior.index_set != forecast.index_set:
        raise ValueError("prior and forecast must share the index set")
    if norms is None:
        norms = NormDiagonal.of(prior.index_set)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != forecast.dim:
        raise ValueError(f"data have {y.size} entries, forecast {forecast.dim}")
    n_times = y.size // noise.std_per_mode.size if hasattr(noise, "std_per_mode") else None
    if n_times is not None:
        c_eps = noise.flat_std(n_times) ** 2
    else:
        c_eps = np.asarray(noise, dtype=float).ravel() ** 2
    if c_eps.size != y.size:
        raise ValueError("noise model does not match the data dimension")
    if not (np.all(np.isfinite(c_eps)) and np.all(np.isfinite(y))):
        raise ValueError("data and noise must be finite")

    sqrt_norm = np.sqrt(norms.values[1:])
    s_f = prior.coefficients[:, 1:] * sqrt_norm
    s_y = forecast.coefficients[:, 1:] * sqrt_norm
    c_f = s_f @ s_f.T
    c_qy = s_f @ s_y.T
    c_y = s_y @ s_y.T + np.diag(c_eps)
    c_y = 0.5 * (c_y + c_y.T)
    _check_psd(c_y, "forecast", strict=True)
    gain, _ = kalman_gain(c_qy, c_y, rcond)

    mean_a = prior.mean + gain @ (y - forecast.mean)
    c_a = c_f - gain @ c_y @ gain.T
    c_a = 0.5 * (c_a + c_a.T)
    _check_psd(c_a, "posterior", strict=False)

    # S_f = U s V^T; W^T = V B^{1/2} V^T with B = s^-1 U^T C_a U s^-1
    u, sv, vt = np.linalg.svd(s_f, full_matrices=False)
    keep = sv > rcond * (sv[0] if sv.size else 0.0)
    u, sv, vt = u[:, keep], sv[keep], vt[keep]
    b = (u.T @ c_a @ u) / np.outer(sv, sv)
    lam, vecs = np.linalg.eigh(0.5 * (b + b.T))
    root = (vecs * np.sqrt(np.clip(lam, 0.0, None))) @ vecs.T
    s_a = (u * sv) @ root @ vt

    coeffs = np.empty_like(prior.coefficients)
    coeffs[:, 0] = mean_a
    coeffs[:, 1:] = s_a / sqrt_norm
    return PceExpansion(prior.index_set, coeffs)
