"""Variance-ratio and Sobol sensitivity of the correction parameters, and screening."""

from dataclasses import dataclass
import warnings

import numpy as np

from .enkf import pseudo_inverse
from .errors import RomBayesWarning
from .pce import NormDiagonal
from .rvm import RvmConfig, _Gram, rvm_fit


@dataclass(frozen=True)
class SensitivityReport:
    ratio: np.ndarray
    active_set: np.ndarray
    threshold: float
    sobol_first: np.ndarray = None

    def rows(self):
        active = np.zeros(self.ratio.size, dtype=bool)
        active[self.active_set] = True
        return [(k, float(self.ratio[k]), bool(active[k])) for k in range(self.ratio.size)]


@dataclass(frozen=True)
class SobolIndices:
    values: np.ndarray
    zero_variance: bool = False


@dataclass(frozen=True)
class LinearMap:
    """Affine fit ``y ~ intercept + matrix @ (q - q_mean)``."""

    matrix: np.ndarray
    intercept: np.ndarray
    q_mean: np.ndarray


def variance_ratio(prior, posterior_var):
    """``J_k = var(q_a,k) / var(q_f,k)``; frozen coordinates report 1."""
    posterior_var = np.asarray(posterior_var, dtype=float).ravel()
    if posterior_var.size != prior.size:
        raise ValueError("posterior variance does not match the prior size")
    ratio = np.ones(prior.size)
    act = prior.active_mask
    ratio[act] = posterior_var[act] / prior.variance[act]
    return np.clip(ratio, 0.0, None)


def sobol_first_order(expansion, norms=None):
    """First-order Sobol indices of every germ variable.

    Output-wise partial variances are summed before dividing, so each output
    is weighted by its own variance.  Only indices that involve a single
    variable contribute, which makes the measure blind to interactions.
    """
    iset = expansion.index_set
    if norms is None:
        norms = NormDiagonal.of(iset)
    energy = expansion.coefficients**2 * norms.values
    per_term = energy.sum(axis=0)
    total = float(per_term[1:].sum())
    if total == 0.0:
        warnings.warn("expansion has zero variance; Sobol indices set to 0", RomBayesWarning, stacklevel=2)
        return SobolIndices(np.zeros(iset.m), True)
    # single-variable terms have exactly one non-zero power
    single = np.sum(iset.powers > 0, axis=1) == 1
    owner = iset.vars[:, 0]
    partial = np.bincount(owner[single], weights=per_term[single], minlength=iset.m)
    return SobolIndices(partial / total, False)


def estimate_linear_map(q_samples, y_samples, config=None):
    """Sparse linear surrogate of the forward map from paired samples.

    Each output is regressed with :func:`rombayes.rvm.rvm_fit` on centred
    inputs.  Inputs are scaled to unit sample std for the fit (the RVM
    prior is not scale invariant) and the weights mapped back afterwards.
    Constant inputs receive zero weight.
    """
    q = np.asarray(q_samples, dtype=float)
    y = np.asarray(y_samples, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if q.ndim != 2 or q.shape[0] != y.shape[0]:
        raise ValueError("q and y need one row per sample")
    if q.shape[0] < 2:
        raise ValueError("at least two samples are required")
    q_mean = q.mean(axis=0)
    y_mean = y.mean(axis=0)
    qc = q - q_mean
    scale = qc.std(axis=0)
    live = scale > 0
    design = qc[:, live] / scale[live]
    matrix = np.zeros((y.shape[1], q.shape[1]))
    if design.shape[1]:
        g = _Gram(design)
        yc = y - y_mean
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RomBayesWarning)
            for k in range(y.shape[1]):
                res = rvm_fit(design, yc[:, k], config or RvmConfig(), _gram=g)
                matrix[k, live] = res.weights / scale[live]
    return LinearMap(matrix, y_mean, q_mean)


def improved_kalman_gain(h, prior, c_eps, rcond=1e-10):
    """``C_q H^T (H C_q H^T + C_eps)^+`` with the exact prior covariance."""
    h = np.atleast_2d(np.asarray(h, dtype=float))
    c_eps = np.asarray(c_eps, dtype=float)
    if c_eps.ndim == 1:
        c_eps = np.diag(c_eps)
    if h.shape[1] != prior.size or c_eps.shape != (h.shape[0], h.shape[0]):
        raise ValueError("gain operands have inconsistent shapes")
    cq = prior.active_variance
    cqh = cq[:, None] * h.T
    pinv, _ = pseudo_inverse(h @ cqh + c_eps, rcond)
    return cqh @ pinv


def linear_posterior_variance(h, prior, c_eps, rcond=1e-10):
    """Diagonal of ``C_q - K H C_q`` for the improved gain."""
    h = np.atleast_2d(np.asarray(h, dtype=float))
    gain = improved_kalman_gain(h, prior, c_eps, rcond)
    cq = prior.active_variance
    return np.clip(cq - np.einsum("ij,ji->i", gain, h) * cq, 0.0, None)


def screen_variables(ratios, threshold=0.95):
    """Indices with ``J_k < threshold``; an empty result only warns."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    ratios = np.asarray(ratios, dtype=float).ravel()
    active = np.flatnonzero(ratios < threshold)
    if active.size == 0:
        warnings.warn(
            "no variable passed screening; identification will use all of them",
            RomBayesWarning,
            stacklevel=2,
        )
    return active


def sensitivity_analysis(prior, q_samples, y_samples, c_eps, threshold=0.95, config=None):
    """Screen the prior from a pilot ensemble with the improved gain.

    Returns the report and the fitted linear map.
    """
    lmap = estimate_linear_map(q_samples, y_samples, config)
    ratio = variance_ratio(prior, linear_posterior_variance(lmap.matrix, prior, c_eps))
    active = screen_variables(ratio, threshold)
    return SensitivityReport(ratio, active, threshold), lmap
