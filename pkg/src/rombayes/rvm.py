"""Sparse Bayesian learning (relevance vector machine) for PCE coefficients."""

from dataclasses import dataclass
import warnings

import numpy as np
from scipy import linalg

from .errors import IterationFailureError, RomBayesWarning
from .pce import PceExpansion, evaluate_basis

LOG_2PI = np.log(2.0 * np.pi)
PRUNE_START = 1


@dataclass(frozen=True)
class RvmConfig:
    max_iter: int = 500
    prune_threshold: float = 1e12
    tol: float = 1e-6
    noise_variance: float = None
    noise_floor: float = 1e-15
    exact_pruning: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.prune_threshold <= 0 or self.tol <= 0:
            raise ValueError("prune_threshold and tol must be positive")
        if self.noise_variance is not None and self.noise_variance <= 0:
            raise ValueError("a fixed noise variance must be positive")


@dataclass(frozen=True)
class RvmResult:
    weights: np.ndarray
    precisions: np.ndarray
    pruned: np.ndarray
    noise_variance: float
    active_set: np.ndarray
    posterior_covariance: np.ndarray
    evidence_trace: np.ndarray
    all_pruned: bool = False

    @property
    def posterior_std(self):
        """Posterior std of every weight; pruned weights have std 0."""
        std = np.zeros(self.weights.size)
        std[self.active_set] = np.sqrt(np.clip(np.diag(self.posterior_covariance), 0.0, None))
        return std


class _Gram:
    """Design products reused across iterations and outputs."""

    def __init__(self, design):
        self.design = design
        self.n, self.p = design.shape
        self.gram = design.T @ design if self.p <= max(self.n, 2000) else None

    def block(self, idx):
        if self.gram is not None:
            return self.gram[np.ix_(idx, idx)]
        sub = self.design[:, idx]
        return sub.T @ sub


@dataclass
class _Fit:
    idx: np.ndarray
    mu: np.ndarray
    diag: np.ndarray
    rss: float
    evidence: float
    big_s: np.ndarray
    big_q: np.ndarray
    sigma: np.ndarray = None


def _posterior(g, idx, alpha, sigma2, target, proj):
    """Posterior on the active columns, with log evidence and the
    sparsity/quality factors ``S_k = phi_k^T C^-1 phi_k``, ``Q_k = phi_k^T C^-1 t``."""
    n = g.n
    phi = g.design[:, idx]
    a = alpha[idx]
    sigma = None
    if idx.size <= n:
        cross = g.block(idx)
        prec = cross / sigma2 + np.diag(a)
        chol = linalg.cholesky(prec, lower=True, check_finite=False)
        mu = linalg.cho_solve((chol, True), proj[idx] / sigma2, check_finite=False)
        inv_chol = linalg.solve_triangular(chol, np.eye(idx.size), lower=True, check_finite=False)
        sigma = inv_chol.T @ inv_chol
        diag = np.diag(sigma).copy()
        logdet_prec = 2.0 * np.sum(np.log(np.diag(chol)))
        logdet_c = logdet_prec - np.sum(np.log(a)) + n * np.log(sigma2)
        big_s = np.diag(cross) / sigma2 - np.sum((cross @ sigma) * cross, axis=1) / sigma2**2
        big_q = proj[idx] / sigma2 - cross @ mu / sigma2
    else:
        # Woodbury: work with the N x N marginal covariance C instead
        scaled = phi / a
        cmat = sigma2 * np.eye(n) + scaled @ phi.T
        chol = linalg.cholesky(cmat, lower=True, check_finite=False)
        half = linalg.solve_triangular(chol, phi, lower=True, check_finite=False)
        white = linalg.solve_triangular(chol, target, lower=True, check_finite=False)
        big_s = np.sum(half**2, axis=0)
        big_q = half.T @ white
        # Sigma = A^-1 - A^-1 Phi^T C^-1 Phi A^-1, never formed
        diag = 1.0 / a - big_s / a**2
        mu = big_q / a
        logdet_c = 2.0 * np.sum(np.log(np.diag(chol)))
    resid = target - phi @ mu
    rss = float(resid @ resid)
    fit = rss / sigma2 + float(np.sum(a * mu**2))
    evidence = -0.5 * (n * LOG_2PI + logdet_c + fit)
    return _Fit(idx, mu, diag, rss, evidence, big_s, big_q, sigma)


def _irrelevant(fit, alpha):
    """Active columns whose evidence-optimal precision is infinite.

    With the other columns fixed, the evidence as a function of one
    precision peaks at a finite value only if ``q^2 > s`` (sparsity and
    quality factors of Tipping and Faul), so removing such a column cannot
    lower the evidence.
    """
    a = alpha[fit.idx]
    denom = a - fit.big_s
    with np.errstate(divide="ignore", invalid="ignore"):
        small_s = a * fit.big_s / denom
        small_q = a * fit.big_q / denom
    return np.isfinite(small_s) & (small_q**2 <= small_s)


def _zero_model(p, sigma2, trace, flagged):
    return RvmResult(
        weights=np.zeros(p),
        precisions=np.full(p, np.inf),
        pruned=np.ones(p, dtype=bool),
        noise_variance=float(sigma2),
        active_set=np.zeros(0, dtype=int),
        posterior_covariance=np.zeros((0, 0)),
        evidence_trace=np.asarray(trace, dtype=float),
        all_pruned=flagged,
    )


def rvm_fit(design, targets, config=None, _gram=None):
    """Evidence maximisation for ``targets ~ N(design @ w, sigma2)``.

    Each weight has prior ``N(0, 1/alpha_k)``.  The precisions are
    re-estimated with MacKay's fixed point ``alpha = gamma / mu^2``; when that
    step lowers the evidence the monotone EM step is taken instead, so the
    recorded evidence never decreases.  Weights whose precision exceeds
    ``prune_threshold`` are set to exactly zero and leave the model.
    """
    config = config or RvmConfig()
    design = np.asarray(design, dtype=float)
    target = np.asarray(targets, dtype=float).ravel()
    if design.ndim != 2 or design.shape[0] != target.size or target.size < 1:
        raise ValueError("design must be N x P with one target per row")
    if not (np.all(np.isfinite(design)) and np.all(np.isfinite(target))):
        raise ValueError("design and targets must be finite")
    g = _gram or _Gram(design)
    n, p = design.shape
    energy = float(target @ target) / n
    floor = max(config.noise_floor * energy, np.finfo(float).tiny)
    if energy == 0.0:
        return _zero_model(p, config.noise_variance or floor, [], False)
    fixed = config.noise_variance is not None
    var_t = float(np.var(target))
    sigma2 = config.noise_variance if fixed else max(0.1 * (var_t if var_t > 0 else energy), floor)
    alpha = np.ones(p)
    active = np.ones(p, dtype=bool)
    proj = design.T @ target
    trace = []

    fit = _posterior(g, np.flatnonzero(active), alpha, sigma2, target, proj)
    trace.append(fit.evidence)
    for it in range(config.max_iter):
        if config.exact_pruning and np.isfinite(config.prune_threshold) and it >= PRUNE_START:
            dead = _irrelevant(fit, alpha)
            if np.any(dead) and not np.all(dead):
                trial_active = active.copy()
                trial_active[fit.idx[dead]] = False
                trial = _posterior(g, np.flatnonzero(trial_active), alpha, sigma2, target, proj)
                if trial.evidence >= fit.evidence - 1e-8 * abs(fit.evidence):
                    active, fit = trial_active, trial
                    trace.append(fit.evidence)
        idx, mu, diag = fit.idx, fit.mu, fit.diag
        gamma = np.clip(1.0 - alpha[idx] * diag, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            mackay = np.where(mu != 0, gamma / mu**2, np.inf)
        accepted = None
        for kind, new_alpha in (("mackay", mackay), ("em", 1.0 / (mu**2 + diag))):
            trial_alpha = alpha.copy()
            trial_alpha[idx] = new_alpha
            trial_active = active & (trial_alpha <= config.prune_threshold)
            if fixed:
                trial_sigma2 = sigma2
            elif kind == "mackay":
                dof = n - float(np.sum(gamma))
                trial_sigma2 = fit.rss / dof if dof > 0 else sigma2
            else:
                trial_sigma2 = (fit.rss + sigma2 * float(np.sum(gamma))) / n
            trial_sigma2 = max(trial_sigma2, floor)
            trial_idx = np.flatnonzero(trial_active)
            if trial_idx.size == 0:
                accepted = (trial_alpha, trial_active, trial_sigma2, None)
                break
            try:
                trial = _posterior(g, trial_idx, trial_alpha, trial_sigma2, target, proj)
            except linalg.LinAlgError:
                continue
            if not np.isfinite(trial.evidence):
                continue
            if kind == "em" or trial.evidence >= fit.evidence - 1e-8 * abs(fit.evidence):
                accepted = (trial_alpha, trial_active, trial_sigma2, trial)
                break
        if accepted is None:
            raise IterationFailureError("evidence became non-finite during re-estimation")
        alpha, active, sigma2, trial = accepted
        if trial is None:
            warnings.warn("all coefficients were pruned", RomBayesWarning, stacklevel=2)
            return _zero_model(p, var_t if var_t > 0 else energy, trace, True)
        change = abs(trial.evidence - fit.evidence) / max(abs(fit.evidence), 1.0)
        fit = trial
        trace.append(fit.evidence)
        if change < config.tol:
            break

    sigma = fit.sigma
    if sigma is None:
        sigma = _posterior(g, fit.idx, alpha, sigma2, target, proj).sigma
        if sigma is None:
            phi = design[:, fit.idx]
            sigma = np.linalg.inv(phi.T @ phi / sigma2 + np.diag(alpha[fit.idx]))
    weights = np.zeros(p)
    weights[fit.idx] = fit.mu
    return RvmResult(
        weights=weights,
        precisions=np.where(active, alpha, np.inf),
        pruned=~active,
        noise_variance=float(sigma2),
        active_set=fit.idx,
        posterior_covariance=sigma,
        evidence_trace=np.asarray(trace),
    )


@dataclass(frozen=True)
class SparsityReport:
    n_active: np.ndarray
    n_terms: int
    noise_variance: np.ndarray

    def rows(self):
        return [
            (k, int(self.n_active[k]), self.n_terms, float(self.noise_variance[k]))
            for k in range(self.n_active.size)
        ]


def fit_forecast_pce(xi_samples, forecast_values, index_set, config=None):
    """Fit one sparse PCE per forecast output against a shared design.

    Returns
    -------
    (PceExpansion, SparsityReport)
    """
    design = evaluate_basis(index_set, xi_samples)
    values = np.asarray(forecast_values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != design.shape[0]:
        raise ValueError("one forecast row per germ sample is required")
    g = _Gram(design)
    coeffs = np.zeros((values.shape[1], index_set.size))
    n_active = np.zeros(values.shape[1], dtype=int)
    noise = np.zeros(values.shape[1])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RomBayesWarning)
        for k in range(values.shape[1]):
            res = rvm_fit(design, values[:, k], config, _gram=g)
            coeffs[k] = res.weights
            n_active[k] = res.active_set.size
            noise[k] = res.noise_variance
    return PceExpansion(index_set, coeffs), SparsityReport(n_active, index_set.size, noise)
