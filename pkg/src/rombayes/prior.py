"""Gaussian prior over the correction vector and the observation noise."""

from dataclasses import dataclass, replace
import warnings

import numpy as np

from .errors import ConditioningWarning, RomBayesWarning
from .rom import n_correction_params

PRIOR_FLOOR = 1e-6
NOISE_FLOOR = 1e-9
BLOCK_MEAN_MIN = 1e-14


@dataclass(frozen=True)
class GaussianPrior:
    mean: np.ndarray
    std: np.ndarray
    active_mask: np.ndarray = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        std = np.asarray(self.std, dtype=float).ravel()
        mask = (
            np.ones(mean.size, dtype=bool)
            if self.active_mask is None
            else np.asarray(self.active_mask, dtype=bool).ravel()
        )
        if std.size != mean.size or mask.size != mean.size:
            raise ValueError("prior mean, std and mask must have equal length")
        if not np.all(np.isfinite(mean)):
            raise ValueError("prior mean must be finite")
        if np.any(~np.isfinite(std)) or np.any(std[mask] <= 0):
            raise ValueError("prior std must be positive on active entries")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "active_mask", mask)

    @property
    def size(self):
        return self.mean.size

    @property
    def variance(self):
        return self.std**2

    @property
    def active_variance(self):
        """Prior variance with frozen coordinates set to zero."""
        return np.where(self.active_mask, self.std**2, 0.0)

    def restricted(self, active_set):
        """Freeze every coordinate outside ``active_set`` at its mean."""
        mask = np.zeros(self.size, dtype=bool)
        mask[np.asarray(active_set, dtype=int)] = True
        return replace(self, active_mask=mask & self.active_mask)


@dataclass(frozen=True)
class NoiseModel:
    std_per_mode: np.ndarray

    def __post_init__(self):
        std = np.asarray(self.std_per_mode, dtype=float).ravel()
        if np.any(~np.isfinite(std)) or np.any(std < 0):
            raise ValueError("noise std must be finite and non-negative")
        object.__setattr__(self, "std_per_mode", std)

    @property
    def structure(self):
        return "diagonal"

    def flat_std(self, n_times):
        """Std of the time-major flattened observation vector."""
        return np.tile(self.std_per_mode, n_times)

    def covariance(self, n_times):
        return np.diag(self.flat_std(n_times) ** 2)


def build_prior(system, relative_scale=0.01, floor=PRIOR_FLOOR, interpret="std"):
    """Zero-mean prior with one scale per correction block.

    The diffusion block gets ``relative_scale * mean(|A|)`` and the
    convection block ``relative_scale * mean(|C|)``.  With
    ``interpret="variance"`` those numbers are read as variances instead.
    A block whose mean magnitude is below 1e-14 falls back to ``floor``.
    """
    if relative_scale <= 0:
        raise ValueError("relative_scale must be positive")
    if interpret not in ("std", "variance"):
        raise ValueError("interpret must be 'std' or 'variance'")
    n = system.n_modes
    scales = []
    for name, block in (("diffusion", system.diffusion), ("convection", system.convection)):
        m = float(np.mean(np.abs(block)))
        if m < BLOCK_MEAN_MIN:
            warnings.warn(
                f"{name} operator is numerically zero; prior std falls back to {floor:g}",
                RomBayesWarning,
                stacklevel=2,
            )
            scales.append(floor)
            continue
        value = relative_scale * m
        scales.append(np.sqrt(value) if interpret == "variance" else value)
    std = np.concatenate([np.full(n * n, scales[0]), np.full(n**3, scales[1])])
    assert std.size == n_correction_params(n)
    return GaussianPrior(np.zeros(std.size), std)


def default_noise(measurements, relative_scale=0.001, floor=NOISE_FLOOR):
    """Per-mode noise std ``relative_scale * max_t |a_j(t)|``."""
    coeffs = measurements.coefficients
    if coeffs.size == 0:
        raise ValueError("measurements are empty")
    if relative_scale < 0:
        raise ValueError("relative_scale must be non-negative")
    peak = np.max(np.abs(coeffs), axis=0)
    if relative_scale == 0:
        warnings.warn(
            "zero observation noise: the forecast covariance may be singular and the "
            "Kalman gain badly conditioned",
            ConditioningWarning,
            stacklevel=2,
        )
        return NoiseModel(np.zeros(peak.size))
    std = relative_scale * peak
    dead = peak == 0
    if np.any(dead):
        warnings.warn(
            f"modes {np.flatnonzero(dead).tolist()} are identically zero; noise std set to {floor:g}",
            RomBayesWarning,
            stacklevel=2,
        )
        std[dead] = floor
    return NoiseModel(std)


def sample_prior(prior, count, seed):
    """``count`` independent draws as an :class:`~rombayes.enkf.Ensemble`."""
    from .enkf import Ensemble

    if count < 2:
        raise ValueError("an ensemble needs at least two members")
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((int(count), prior.size))
    members = prior.mean + np.where(prior.active_mask, prior.std, 0.0) * draws
    members[:, ~prior.active_mask] = prior.mean[~prior.active_mask]
    return Ensemble(members, seed)
