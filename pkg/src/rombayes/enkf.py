"""Ensemble (sampling) form of the linear Gauss-Markov-Kalman smoother."""

from dataclasses import dataclass
import warnings

import numpy as np

from .errors import ForecastDivergenceError, RomBayesWarning
from .rom import integrate_batch

MAX_DIVERGED_FRACTION = 0.10


@dataclass(frozen=True)
class Ensemble:
    members: np.ndarray
    seed: int = 0

    def __post_init__(self):
        members = np.asarray(self.members, dtype=float)
        if members.ndim != 2 or members.shape[0] < 2:
            raise ValueError("an ensemble is a (Z, s) array with Z >= 2")
        if not np.all(np.isfinite(members)):
            raise ValueError("ensemble members must be finite")
        object.__setattr__(self, "members", members)

    @property
    def size(self):
        return self.members.shape[0]

    def mean(self):
        return self.members.mean(axis=0)

    def variance(self):
        return self.members.var(axis=0, ddof=1)


@dataclass(frozen=True)
class ForecastSet:
    """Flattened forecasts ``y_f`` (time-major, mode-minor) per member.

    ``member_index`` lists the ensemble rows that did not diverge; only those
    rows appear in ``predictions``.
    """

    predictions: np.ndarray
    obs_times: np.ndarray
    noise_applied: bool
    member_index: np.ndarray
    noiseless: np.ndarray = None

    def __post_init__(self):
        pred = np.asarray(self.predictions, dtype=float)
        idx = np.asarray(self.member_index, dtype=int)
        if pred.ndim != 2 or pred.shape[0] != idx.size:
            raise ValueError("one forecast row per retained member is required")
        if not np.all(np.isfinite(pred)):
            raise ValueError("forecasts must be finite")
        object.__setattr__(self, "predictions", pred)
        object.__setattr__(self, "member_index", idx)
        object.__setattr__(self, "obs_times", np.asarray(self.obs_times, dtype=float))


def forecast_ensemble(
    ensemble,
    system,
    a0,
    obs_times,
    noise=None,
    seed=0,
    t0=None,
    dt=None,
    **newton,
):
    """Push every member through the corrected ROM and sample it at ``obs_times``.

    The ROM starts from ``a0`` at ``t0`` (default ``obs_times[0]``).  With a
    noise model, independent Gaussian noise is drawn per member, time and mode
    from ``seed`` and added, so the result is the forecast ``y_f``; the
    noiseless forecasts are kept alongside.

    Members whose integration fails are dropped.  If more than 10% fail the
    whole forecast is rejected, which usually means the prior is too wide.
    """
    obs_times = np.asarray(obs_times, dtype=float)
    if t0 is None:
        t0 = obs_times[0]
    if obs_times[0] < t0:
        raise ValueError("observation times precede the initial time")
    include_t0 = obs_times[0] == t0
    grid = obs_times if include_t0 else np.concatenate([[t0], obs_times])
    states, failed = integrate_batch(
        system, ensemble.members, a0, grid, dt=dt, raise_on_failure=False, **newton
    )
    if not include_t0:
        states = states[:, 1:]
    n_failed = int(failed.sum())
    if n_failed > MAX_DIVERGED_FRACTION * ensemble.size:
        raise ForecastDivergenceError(
            f"{n_failed} of {ensemble.size} ensemble members diverged "
            f"(limit {MAX_DIVERGED_FRACTION:.0%}); the prior is probably too wide",
            n_failed,
            ensemble.size,
        )
    if n_failed:
        warnings.warn(
            f"{n_failed} diverged members removed from the forecast", RomBayesWarning, stacklevel=2
        )
    keep = np.flatnonzero(~failed)
    clean = states.reshape(ensemble.size, -1)
    forecast = ForecastSet(clean[keep], obs_times, False, keep, clean[keep])
    if noise is None:
        return forecast
    return add_forecast_noise(forecast, noise, seed, n_members=ensemble.size)


def add_forecast_noise(forecast, noise, seed, n_members=None):
    """Add the modelling error to noiseless forecasts.

    Draws are generated for all ``n_members`` original rows so the noise a
    member receives does not depend on which other members diverged.
    """
    base = forecast.noiseless if forecast.noiseless is not None else forecast.predictions
    n_times = forecast.obs_times.size
    std = noise.flat_std(n_times) if hasattr(noise, "flat_std") else np.asarray(noise, dtype=float)
    if std.size != base.shape[1]:
        raise ValueError("noise model does not match the forecast dimension")
    if n_members is None:
        n_members = int(forecast.member_index.max()) + 1
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((n_members, base.shape[1]))[forecast.member_index]
    return ForecastSet(base + draws * std, forecast.obs_times, True, forecast.member_index, base)


def _centered(x):
    xc = x - x.mean(axis=0)
    # constant columns are exactly constant: remove mean-roundoff residue
    const = np.all(x == x[:1], axis=0)
    xc[:, const] = 0.0
    return xc


def statistical_covariance(x, y):
    """Unbiased cross-covariance ``X~^T Y~ / (Z - 1)`` of row samples.

    The reduction runs in einsum's fixed loop order (no BLAS), so the result
    is bitwise reproducible and ``cov(x, y) == cov(y, x).T`` exactly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise ValueError("sample counts differ")
    z = x.shape[0]
    if z < 2:
        raise ValueError("covariance needs at least two samples")
    return np.einsum("zi,zj->ij", _centered(x), _centered(y)) / (z - 1)


def pseudo_inverse(mat, rcond=1e-10):
    """Symmetric pseudo-inverse by eigen-decomposition; returns ``(pinv, rank)``."""
    mat = np.asarray(mat, dtype=float)
    sym = 0.5 * (mat + mat.T)
    lam, vecs = np.linalg.eigh(sym)
    top = np.max(np.abs(lam)) if lam.size else 0.0
    if top == 0.0:
        return np.zeros_like(sym), 0
    keep = np.abs(lam) > rcond * top
    v = vecs[:, keep]
    return (v / lam[keep]) @ v.T, int(keep.sum())


def kalman_gain(c_qy, c_y, rcond=1e-10):
    """``K = C_qy C_y^+``; returns the gain and the rank kept in ``C_y^+``."""
    c_qy = np.atleast_2d(np.asarray(c_qy, dtype=float))
    c_y = np.atleast_2d(np.asarray(c_y, dtype=float))
    if c_y.shape[0] != c_y.shape[1] or c_qy.shape[1] != c_y.shape[0]:
        raise ValueError("gain operands have inconsistent shapes")
    pinv, rank = pseudo_inverse(c_y, rcond)
    return c_qy @ pinv, rank


def enkf_update(ensemble, forecasts, y, rcond=1e-10, active_mask=None, return_gain=False):
    """Smoother update ``q_a = q_f + K (y - y_f)`` applied member by member.

    Covariances come from the retained members only, and the returned
    ensemble contains exactly those members.  No perturbation is added to
    ``y``: the modelling error already lives in ``y_f``.
    """
    y = np.asarray(y, dtype=float).ravel()
    pred = forecasts.predictions
    if pred.shape[1] != y.size:
        raise ValueError(f"data have {y.size} entries, forecasts {pred.shape[1]}")
    if not forecasts.noise_applied:
        warnings.warn(
            "forecasts carry no modelling error; the update treats the data as exact",
            RomBayesWarning,
            stacklevel=2,
        )
    q_f = ensemble.members[forecasts.member_index]
    gain, rank = kalman_gain(statistical_covariance(q_f, pred), statistical_covariance(pred, pred), rcond)
    if active_mask is not None:
        gain[~np.asarray(active_mask, dtype=bool)] = 0.0
    q_a = q_f + (y[None, :] - pred) @ gain.T
    posterior = Ensemble(q_a, ensemble.seed)
    if return_gain:
        return posterior, gain, rank
    return posterior
