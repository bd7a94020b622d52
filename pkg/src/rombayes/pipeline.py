"""Config-driven workflow: simulate, reduce, screen, identify, validate, report.

Each stage writes its artifacts under ``<output_dir>/cache/<stage>-<key>``
where ``key`` hashes the config sections the stage depends on together
with the keys of its upstream stages.  A stage whose directory is already
complete is loaded instead of recomputed.
"""

from dataclasses import dataclass, field
import hashlib
import json
from pathlib import Path
import platform
import shutil
import warnings

import numpy as np
import scipy

from . import textio
from .enkf import Ensemble, enkf_update, forecast_ensemble
from .errors import RomBayesError, RomBayesWarning, StageError
from .fom import (
    Grid1D,
    SnapshotMatrix,
    oscillator_truth,
    default_truth_correction,
    simulate_burgers,
    simulate_quadratic_truth,
    sine_profile,
)
from .pce import PceExpansion, build_multiindex, gmk_pce_update
from .pod import MeasurementSet, PodBasis, compute_pod, energy_fraction, project_snapshots, reconstruct
from .prior import GaussianPrior, build_prior, default_noise
from .rom import assemble_reduced_operators, integrate_batch, weighted_relative_error
from .rvm import RvmConfig, fit_forecast_pce
from .sensitivity import SensitivityReport, sensitivity_analysis

SCHEMA = "rom-bayes/1"
QUANTILE_LEVELS = (0.005, 0.995)
STAGES = ("simulate", "pod", "rom", "sensitivity", "identify", "validate", "report")

# independent random streams derived from the configured seeds
STREAM_PRIOR, STREAM_NOISE, STREAM_GERM, STREAM_QUANTILE = 0, 1, 2, 3


def rng_for(seed, stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream]))


def seed_for(seed, stream):
    return int(np.random.SeedSequence([int(seed), stream]).generate_state(1)[0])


@dataclass
class Problem:
    """Everything identification needs, in modal coordinates."""

    snapshots: SnapshotMatrix
    basis: PodBasis
    system: object
    measurements: MeasurementSet
    field_space: bool
    energy: float = None


@dataclass
class QuantileBands:
    times: np.ndarray
    levels: tuple
    lower: np.ndarray
    upper: np.ndarray


@dataclass
class RunReport:
    times: np.ndarray
    error_series: dict
    quantile_bands: dict
    sensitivity: SensitivityReport = None
    sparsity: object = None
    provenance: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


# ----------------------------------------------------------------------------
# stage cache


class StageCache:
    def __init__(self, root):
        self.root = Path(root) / "cache"
        self.written = []

    def key(self, stage, cfg, sections, upstream=()):
        h = hashlib.sha256()
        h.update(stage.encode())
        h.update(cfg.digest(*sections).encode())
        for key in upstream:
            h.update(key.encode())
        return h.hexdigest()[:16]

    def dir(self, stage, key):
        return self.root / f"{stage}-{key}"

    def complete(self, stage, key):
        return (self.dir(stage, key) / "DONE").exists()

    def begin(self, stage, key):
        path = self.dir(stage, key)
        if path.exists():
            shutil.rmtree(path)
        path.mkdir(parents=True)
        return path

    def finish(self, stage, key):
        path = self.dir(stage, key)
        (path / "DONE").write_text(key + "\n")
        self.written.extend(sorted(str(p) for p in path.iterdir()))


def _run_stage(name, cache, fn):
    try:
        return fn()
    except StageError:
        raise
    except (RomBayesError, ValueError, FloatingPointError, np.linalg.LinAlgError, OSError) as exc:
        raise StageError(name, exc, cache.written) from exc


# ----------------------------------------------------------------------------
# stage bodies


def _initial_field(fom, grid):
    if fom.initial == "zero":
        return np.zeros(grid.n_cells)
    if fom.initial == "constant":
        return np.full(grid.n_cells, fom.offset)
    return fom.offset + sine_profile(grid, fom.amplitude, fom.wavenumber)


def _truth(fom):
    base = oscillator_truth(fom.n_modes, damping=fom.damping, coupling=fom.coupling, seed=fom.truth_seed)
    corr = default_truth_correction(base.diffusion, base.convection, multiple=fom.truth_multiple)
    return oscillator_truth(
        fom.n_modes,
        damping=fom.damping,
        coupling=fom.coupling,
        seed=fom.truth_seed,
        correction=corr,
    )


def simulate_stage(cfg):
    fom = cfg.fom
    if fom.kind == "burgers":
        grid = Grid1D(fom.n_cells, fom.x_min, fom.x_max)
        boundary = fom.boundary if fom.boundary == "periodic" else tuple(map(float, fom.boundary))
        snaps = simulate_burgers(
            grid,
            fom.nu,
            _initial_field(fom, grid),
            boundary=boundary,
            t_end=fom.t_end,
            dt=fom.dt,
            save_every=fom.save_every,
            scheme=fom.scheme,
        )
        if fom.discard_before > 0:
            snaps = snaps.select_times(snaps.times >= fom.discard_before - 1e-12)
        return snaps
    truth = _truth(fom)
    times = np.linspace(0.0, fom.t_end, fom.n_times)
    states = simulate_quadratic_truth(
        truth, np.asarray(fom.a0, dtype=float), times, dt=cfg.rom.dt,
        newton_tol=cfg.rom.newton_tol, newton_max_iter=cfg.rom.newton_max_iter,
    )
    return SnapshotMatrix(states.T, times, np.ones(fom.n_modes))


def pod_stage(cfg, snaps):
    if cfg.fom.kind == "quadratic_truth":
        return PodBasis.identity(cfg.fom.n_modes)
    return compute_pod(snaps, cfg.pod.n_modes, mean_center=cfg.pod.mean_center)


def rom_stage(cfg, basis):
    fom = cfg.fom
    if fom.kind == "quadratic_truth":
        return _truth(fom).system()
    grid = Grid1D(fom.n_cells, fom.x_min, fom.x_max)
    boundary = "periodic" if fom.boundary == "periodic" else "dirichlet"
    return assemble_reduced_operators(basis, grid, fom.nu, boundary=boundary)


def _split(cfg, measurements):
    times = measurements.times
    train, val = cfg.windows(times[0], times[-1])
    return train, val


def _observations(cfg, problem):
    """Initial state, observation times and flattened data of the training window."""
    meas = problem.measurements
    (t0, t1), _ = _split(cfg, meas)
    window = meas.window(t0, t1)
    if window.times.size < 2:
        raise ValueError("training window holds fewer than two snapshots")
    a0 = window.coefficients[0]
    noise = default_noise(window, cfg.noise.relative_scale, cfg.noise.floor)
    return window.times[0], a0, window.times[1:], window.coefficients[1:].ravel(), noise


def _newton(cfg):
    return {"newton_tol": cfg.rom.newton_tol, "newton_max_iter": cfg.rom.newton_max_iter}


def _prior(cfg, system):
    return build_prior(system, cfg.prior.relative_scale, cfg.prior.floor, cfg.prior.interpret)


def sensitivity_stage(cfg, problem):
    prior = _prior(cfg, problem.system)
    t0, a0, obs_t, _, noise = _observations(cfg, problem)
    sens = cfg.sensitivity
    rng = rng_for(sens.seed, STREAM_PRIOR)
    members = prior.mean + prior.std * rng.standard_normal((sens.pilot_Z, prior.size))
    pilot = Ensemble(members, sens.seed)
    fc = forecast_ensemble(pilot, problem.system, a0, obs_t, None, t0=t0, dt=cfg.rom.dt, **_newton(cfg))
    c_eps = noise.flat_std(obs_t.size) ** 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RomBayesWarning)
        report, _ = sensitivity_analysis(
            prior, members[fc.member_index], fc.predictions, c_eps, sens.threshold, _rvm(cfg)
        )
    return report


def _rvm(cfg):
    r = cfg.rvm
    return RvmConfig(r.max_iter, r.prune_threshold, r.tol, r.noise_variance)


def _active_set(cfg, prior, report):
    """Identification variables: screened set capped at ``m_active`` by J."""
    if report is None or report.active_set.size == 0:
        active = np.arange(prior.size)
        ranking = None
    else:
        active = report.active_set
        ranking = report.ratio
    cap = cfg.smoother.m_active
    if active.size > cap and ranking is not None:
        order = np.argsort(ranking[active], kind="stable")[:cap]
        active = np.sort(active[order])
    return active


@dataclass
class Identification:
    prior: GaussianPrior
    active: np.ndarray
    prior_ensemble: Ensemble = None
    enkf: Ensemble = None
    pce: PceExpansion = None
    sparsity: object = None


def identify_stage(cfg, problem, report):
    sm = cfg.smoother
    prior = _prior(cfg, problem.system)
    active = _active_set(cfg, prior, report)
    if cfg.smoother.kind in ("pce", "both") and active.size > sm.m_active:
        raise ValueError(
            f"{active.size} variables exceed smoother.m_active={sm.m_active}; enable screening"
        )
    restricted = prior.restricted(active)
    t0, a0, obs_t, y, noise = _observations(cfg, problem)
    n_samples = sm.N_samples if sm.kind == "pce" else sm.Z

    # shared germ draws: q = mean + std * xi on the active coordinates
    xi = rng_for(sm.seed, STREAM_GERM).standard_normal((n_samples, active.size))
    members = np.tile(restricted.mean, (n_samples, 1))
    members[:, active] += xi * restricted.std[active]
    ensemble = Ensemble(members, sm.seed)
    forecast = forecast_ensemble(
        ensemble, problem.system, a0, obs_t, noise, seed=seed_for(sm.seed, STREAM_NOISE),
        t0=t0, dt=cfg.rom.dt, **_newton(cfg),
    )
    result = Identification(prior=restricted, active=active, prior_ensemble=ensemble)
    if sm.kind in ("enkf", "both"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RomBayesWarning)
            result.enkf = enkf_update(ensemble, forecast, y, rcond=sm.rcond, active_mask=restricted.active_mask)
    if sm.kind in ("pce", "both"):
        iset = build_multiindex(active.size, sm.p)
        # rows are all s parameters; frozen ones are constants
        coeffs = np.zeros((prior.size, iset.size))
        coeffs[:, 0] = restricted.mean
        coeffs[active, 1 + np.arange(active.size)] = restricted.std[active]
        prior_pce = PceExpansion(iset, coeffs)
        fpce, sparsity = fit_forecast_pce(
            xi[forecast.member_index], forecast.noiseless, iset, _rvm(cfg)
        )
        result.pce = gmk_pce_update(prior_pce, fpce, y, noise, rcond=sm.rcond)
        result.sparsity = sparsity
    return result


def _trajectories(system, corrections, a0, times, cfg):
    states, failed = integrate_batch(
        system, corrections, a0, times, dt=cfg.rom.dt, raise_on_failure=False, **_newton(cfg)
    )
    return states, failed


def compute_quantile_bands(posterior, system, a0, times, levels=QUANTILE_LEVELS, n_samples=10000, seed=0, dt=None, **newton):
    """Empirical per-mode quantiles of the corrected-ROM response.

    An :class:`Ensemble` is propagated member by member; a
    :class:`PceExpansion` over the correction is sampled ``n_samples``
    times from ``seed``.  Quantiles use the inverted empirical CDF, so with
    two members the 0.5% and 99.5% bands are the pointwise min and max.
    Diverged trajectories are dropped under the same 10% rule as
    :func:`rombayes.enkf.forecast_ensemble`.
    """
    if isinstance(posterior, PceExpansion):
        q = posterior.sample(n_samples, seed)
    else:
        q = posterior.members
    ens = Ensemble(q, seed)
    fc = forecast_ensemble(ens, system, a0, times, None, t0=times[0], dt=dt, **newton)
    states = fc.predictions.reshape(fc.predictions.shape[0], times.size, -1)
    lower = np.quantile(states, levels[0], axis=0, method="inverted_cdf")
    upper = np.quantile(states, levels[1], axis=0, method="inverted_cdf")
    return QuantileBands(np.asarray(times), tuple(levels), lower, upper)


def _error_series(cfg, problem, corrections, a0, times):
    """Validation error for each correction, NaN where the ROM diverged."""
    states, failed = _trajectories(problem.system, corrections, a0, times, cfg)
    meas = problem.measurements
    idx = np.searchsorted(meas.times, times)
    out = []
    for z in range(states.shape[0]):
        if failed[z]:
            out.append(np.full(times.size, np.nan))
            continue
        out.append(_eps(problem, states[z], idx, times))
    return out


def _eps(problem, states, idx, times):
    snaps = problem.snapshots
    if not problem.field_space:
        return weighted_relative_error(snaps.values[:, idx].T, states)
    recon = reconstruct(states, problem.basis, times)
    return weighted_relative_error(snaps.values[:, idx].T, recon.values.T, snaps.weights)


def validate_stage(cfg, problem, ident):
    meas = problem.measurements
    (t0, _), (v0, v1) = _split(cfg, meas)
    horizon = meas.times[(meas.times >= t0 - 1e-12) & (meas.times <= v1 + 1e-12)]
    a0 = meas.window(t0, t0).coefficients[0]
    in_val = (horizon >= v0 - 1e-12) & (horizon <= v1 + 1e-12)
    val_times = horizon[in_val]
    idx = np.searchsorted(meas.times, val_times)

    if problem.field_space:
        proj = reconstruct(meas.coefficients[idx], problem.basis, val_times)
        snaps = problem.snapshots
        eps_proj = weighted_relative_error(snaps.values[:, idx].T, proj.values.T, snaps.weights)
    else:
        eps_proj = np.zeros(val_times.size)

    s = ident.prior.size
    candidates = {"uncorrected": np.zeros(s)}
    if ident.enkf is not None:
        candidates["enkf"] = ident.enkf.mean()
    if ident.pce is not None:
        candidates["pce"] = ident.pce.mean
    names = list(candidates)
    series = _error_series(cfg, problem, np.array([candidates[k] for k in names]), a0, horizon)
    errors = {"projection": eps_proj}
    for name, eps in zip(names, series):
        errors[name] = eps[in_val]

    sm = cfg.smoother
    newton = _newton(cfg)
    bands = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RomBayesWarning)
        bands["prior"] = compute_quantile_bands(
            ident.prior_ensemble, problem.system, a0, horizon, dt=cfg.rom.dt, **newton
        )
        if ident.enkf is not None:
            bands["enkf"] = compute_quantile_bands(
                ident.enkf, problem.system, a0, horizon, dt=cfg.rom.dt, **newton
            )
        if ident.pce is not None:
            bands["pce"] = compute_quantile_bands(
                ident.pce, problem.system, a0, horizon, n_samples=sm.quantile_samples,
                seed=seed_for(sm.seed, STREAM_QUANTILE), dt=cfg.rom.dt, **newton,
            )
    return val_times, errors, bands, horizon


# ----------------------------------------------------------------------------
# artifact (de)serialisation for the cache


def _save_problem(path, snaps, basis, system):
    textio.write_snapshots(path / "snapshots.txt", snaps)
    textio.write_basis(path / "basis.txt", basis)
    textio.write_rom(path / "rom.txt", system)


def _save_sensitivity(path, report):
    textio.write_csv(path / "sensitivity.csv", ("index", "ratio", "active"), report.rows())
    (path / "threshold.txt").write_text(textio.fmt(report.threshold) + "\n")


def _load_sensitivity(path):
    _, table = textio.read_csv(path / "sensitivity.csv")
    threshold = float((path / "threshold.txt").read_text())
    active = np.flatnonzero(table[:, 2] > 0.5)
    return SensitivityReport(table[:, 1], active, threshold)


def _save_identification(path, ident):
    textio.write_csv(
        path / "prior.csv", ("index", "mean", "std", "active"),
        [(k, ident.prior.mean[k], ident.prior.std[k], bool(ident.prior.active_mask[k])) for k in range(ident.prior.size)],
    )
    textio.write_ensemble(path / "prior_ensemble.txt", ident.prior_ensemble)
    if ident.enkf is not None:
        textio.write_ensemble(path / "posterior_enkf.txt", ident.enkf)
    if ident.pce is not None:
        textio.write_pce(path / "posterior_pce.txt", ident.pce)
        textio.write_csv(path / "sparsity.csv", ("output_index", "n_active", "P", "sigma2"), ident.sparsity.rows())


def _load_identification(path):
    from .rvm import SparsityReport

    _, table = textio.read_csv(path / "prior.csv")
    mask = table[:, 3] > 0.5
    prior = GaussianPrior(table[:, 1], table[:, 2], mask)
    ident = Identification(prior=prior, active=np.flatnonzero(mask))
    ident.prior_ensemble = textio.read_ensemble(path / "prior_ensemble.txt")
    if (path / "posterior_enkf.txt").exists():
        ident.enkf = textio.read_ensemble(path / "posterior_enkf.txt")
    if (path / "posterior_pce.txt").exists():
        ident.pce = textio.read_pce(path / "posterior_pce.txt")
        _, sp = textio.read_csv(path / "sparsity.csv")
        ident.sparsity = SparsityReport(sp[:, 1].astype(int), int(sp[0, 2]) if sp.size else 0, sp[:, 3])
    return ident


def _savetxt(path, arr):
    np.savetxt(path, np.atleast_2d(arr), fmt="%.17g")


def _save_validation(path, val_times, errors, bands, horizon):
    _savetxt(path / "times.txt", val_times)
    _savetxt(path / "horizon.txt", horizon)
    for name, eps in errors.items():
        _savetxt(path / f"eps_{name}.txt", eps)
    for name, band in bands.items():
        _savetxt(path / f"band_{name}_lower.txt", band.lower)
        _savetxt(path / f"band_{name}_upper.txt", band.upper)


def _load_validation(path):
    load = lambda name: np.loadtxt(path / name, ndmin=2)
    val_times = load("times.txt")[0]
    horizon = load("horizon.txt")[0]
    errors = {}
    for name in ("projection", "uncorrected", "enkf", "pce"):
        if (path / f"eps_{name}.txt").exists():
            errors[name] = load(f"eps_{name}.txt")[0]
    bands = {}
    for name in ("prior", "enkf", "pce"):
        if (path / f"band_{name}_lower.txt").exists():
            bands[name] = QuantileBands(
                horizon, QUANTILE_LEVELS, load(f"band_{name}_lower.txt"), load(f"band_{name}_upper.txt")
            )
    return val_times, errors, bands, horizon


def _measurements(cfg, snaps, basis):
    if cfg.fom.kind == "quadratic_truth":
        return MeasurementSet(snaps.values.T, snaps.times, np.zeros(basis.n_modes))
    return project_snapshots(snaps, basis)


# ----------------------------------------------------------------------------
# driver


def run_pipeline(cfg, until="report", output_dir=None):
    """Run the stage graph up to ``until`` and return a :class:`RunReport`.

    Stages that are not reached are listed in ``RunReport.skipped``.  Any
    failure is re-raised as :class:`rombayes.errors.StageError` naming the
    stage and listing the artifacts already written.
    """
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}")
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = StageCache(out)
    stop = STAGES.index(until)
    report = RunReport(times=np.zeros(0), error_series={}, quantile_bands={})

    # simulate + pod + rom share one artifact directory per stage
    k_sim = cache.key("simulate", cfg, ("fom", "rom"))
    k_pod = cache.key("pod", cfg, ("pod",), (k_sim,))
    k_rom = cache.key("rom", cfg, (), (k_pod,))

    def simulate():
        d = cache.dir("simulate", k_sim)
        if cache.complete("simulate", k_sim):
            return textio.read_snapshots(d / "snapshots.txt")
        d = cache.begin("simulate", k_sim)
        snaps = simulate_stage(cfg)
        textio.write_snapshots(d / "snapshots.txt", snaps)
        cache.finish("simulate", k_sim)
        return snaps

    snaps = _run_stage("simulate", cache, simulate)
    if stop == 0:
        return _finish(cfg, out, report, cache, until)

    def pod():
        d = cache.dir("pod", k_pod)
        if cache.complete("pod", k_pod):
            return textio.read_basis(d / "basis.txt")
        d = cache.begin("pod", k_pod)
        basis = pod_stage(cfg, snaps)
        textio.write_basis(d / "basis.txt", basis)
        cache.finish("pod", k_pod)
        return basis

    basis = _run_stage("pod", cache, pod)
    if cfg.fom.kind == "burgers":
        report.summary["energy_fraction"] = energy_fraction(snaps, cfg.pod.n_modes, cfg.pod.mean_center)
    if stop == 1:
        return _finish(cfg, out, report, cache, until)

    def rom():
        d = cache.dir("rom", k_rom)
        if cache.complete("rom", k_rom):
            return textio.read_rom(d / "rom.txt")
        d = cache.begin("rom", k_rom)
        system = rom_stage(cfg, basis)
        textio.write_rom(d / "rom.txt", system)
        cache.finish("rom", k_rom)
        return system

    system = _run_stage("rom", cache, rom)
    problem = Problem(
        snapshots=snaps,
        basis=basis,
        system=system,
        measurements=_measurements(cfg, snaps, basis),
        field_space=cfg.fom.kind == "burgers",
    )
    if stop == 2:
        return _finish(cfg, out, report, cache, until)

    windows = ("train_window", "validate_window", "prior", "noise")
    k_sens = cache.key("sensitivity", cfg, windows + ("sensitivity", "rvm"), (k_rom,))

    def sensitivity():
        if not cfg.sensitivity.enabled:
            return None
        d = cache.dir("sensitivity", k_sens)
        if cache.complete("sensitivity", k_sens):
            return _load_sensitivity(d)
        d = cache.begin("sensitivity", k_sens)
        rep = sensitivity_stage(cfg, problem)
        _save_sensitivity(d, rep)
        cache.finish("sensitivity", k_sens)
        return rep

    sens = _run_stage("sensitivity", cache, sensitivity)
    report.sensitivity = sens
    if sens is not None:
        report.summary["n_active"] = int(sens.active_set.size)
        report.summary["n_parameters"] = int(sens.ratio.size)
    if stop == 3:
        return _finish(cfg, out, report, cache, until)

    k_id = cache.key("identify", cfg, windows + ("smoother", "rvm"), (k_rom, k_sens))

    def identify():
        d = cache.dir("identify", k_id)
        if cache.complete("identify", k_id):
            return _load_identification(d)
        d = cache.begin("identify", k_id)
        ident = identify_stage(cfg, problem, sens)
        _save_identification(d, ident)
        cache.finish("identify", k_id)
        return ident

    ident = _run_stage("identify", cache, identify)
    report.sparsity = ident.sparsity
    if stop == 4:
        return _finish(cfg, out, report, cache, until)

    k_val = cache.key("validate", cfg, windows + ("smoother",), (k_id,))

    def validate():
        d = cache.dir("validate", k_val)
        if cache.complete("validate", k_val):
            return _load_validation(d)
        d = cache.begin("validate", k_val)
        result = validate_stage(cfg, problem, ident)
        _save_validation(d, *result)
        cache.finish("validate", k_val)
        return result

    val_times, errors, bands, horizon = _run_stage("validate", cache, validate)
    report.times = val_times
    report.error_series = errors
    report.quantile_bands = bands
    report.summary.update(
        {f"mean_eps_{k}": float(np.mean(v)) for k, v in errors.items()}
    )
    report.summary["data"] = problem.measurements.coefficients[
        np.searchsorted(problem.measurements.times, horizon)
    ]
    if stop == 5:
        return _finish(cfg, out, report, cache, until)
    return _finish(cfg, out, report, cache, until, emit=True)


def _versions():
    from . import __version__

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "rombayes": __version__,
    }


def _finish(cfg, out, report, cache, until, emit=False):
    reached = STAGES.index(until)
    report.provenance = {
        "config_hash": cfg.digest(),
        "seeds": {"smoother": cfg.smoother.seed, "sensitivity": cfg.sensitivity.seed},
        "versions": _versions(),
        "stages_run": list(STAGES[: reached + 1]),
    }
    if emit:
        emit_report(report, out, cfg)
    return report


def emit_report(report, output_dir, cfg=None):
    """Write the CSV/JSON result files; omitted stages are listed as skipped.

    ``errors.csv``
        ``t,eps_uncorrected,eps_projection,eps_enkf,eps_pce``; a smoother
        that did not run leaves its column empty.
    ``quantiles_mode<k>.csv``
        ``t,data,prior_lo,prior_hi,enkf_lo,enkf_hi,pce_lo,pce_hi``.
    ``sensitivity.csv``
        ``index,ratio,active``.
    ``sparsity.csv``
        ``output_index,n_active,P,sigma2``.
    ``report.json``
        Provenance, summary numbers and the file list.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, skipped = [], []

    def write(name, header, rows):
        try:
            textio.write_csv(out / name, header, rows)
        except OSError as exc:
            raise OSError(f"cannot write {out / name}: {exc}") from exc
        files.append(name)

    errs = report.error_series
    if errs:
        cols = ("uncorrected", "projection", "enkf", "pce")
        rows = []
        for i, t in enumerate(report.times):
            rows.append([t] + [errs[c][i] if c in errs else None for c in cols])
        write("errors.csv", ("t",) + tuple(f"eps_{c}" for c in cols), rows)
    else:
        skipped.append("errors.csv")

    bands = report.quantile_bands
    if bands:
        horizon = bands["prior"].times
        data = report.summary.get("data")
        n_modes = bands["prior"].lower.shape[1]
        for k in range(n_modes):
            rows = []
            for i, t in enumerate(horizon):
                row = [t, None if data is None else data[i, k]]
                for name in ("prior", "enkf", "pce"):
                    b = bands.get(name)
                    row += [None, None] if b is None else [b.lower[i, k], b.upper[i, k]]
                rows.append(row)
            write(
                f"quantiles_mode{k}.csv",
                ("t", "data", "prior_lo", "prior_hi", "enkf_lo", "enkf_hi", "pce_lo", "pce_hi"),
                rows,
            )
    else:
        skipped.append("quantiles_mode<k>.csv")

    if report.sensitivity is not None:
        write("sensitivity.csv", ("index", "ratio", "active"), report.sensitivity.rows())
    else:
        skipped.append("sensitivity.csv")
    if report.sparsity is not None:
        write("sparsity.csv", ("output_index", "n_active", "P", "sigma2"), report.sparsity.rows())
    else:
        skipped.append("sparsity.csv")

    (out / "plot_results.py").write_text(PLOT_STUB)
    files.append("plot_results.py")
    summary = {k: v for k, v in report.summary.items() if k != "data"}
    payload = {
        "schema": SCHEMA,
        "config": _config_echo(cfg),
        "provenance": report.provenance,
        "summary": {k: _json_number(v) for k, v in sorted(summary.items())},
        "files": sorted(files),
        "skipped": skipped,
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    report.files = sorted(files + ["report.json"])
    report.skipped = skipped
    return report.files


def _config_echo(cfg):
    if cfg is None:
        return None
    data = cfg.to_dict()
    data.pop("output_dir")
    return data


def _json_number(v):
    if isinstance(v, float):
        return float(textio.fmt(v)) if np.isfinite(v) else None
    return v


PLOT_STUB = '''"""Plot the CSV results of a pipeline run (needs matplotlib)."""
import csv
import glob
import sys

import matplotlib.pyplot as plt


def read(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) if r[k] else float("nan") for r in rows] for k in rows[0]}


def main(folder="."):
    err = read(f"{folder}/errors.csv")
    fig, ax = plt.subplots()
    for key in err:
        if key != "t":
            ax.semilogy(err["t"], err[key], label=key)
    ax.set_xlabel("t")
    ax.set_ylabel("relative L2 error")
    ax.legend()
    fig.savefig(f"{folder}/errors.png", dpi=150)
    for path in sorted(glob.glob(f"{folder}/quantiles_mode*.csv")):
        q = read(path)
        fig, ax = plt.subplots()
        ax.plot(q["t"], q["data"], "k", label="data")
        for name in ("prior", "enkf", "pce"):
            ax.fill_between(q["t"], q[name + "_lo"], q[name + "_hi"], alpha=0.3, label=name)
        ax.legend()
        fig.savefig(path.replace(".csv", ".png"), dpi=150)


if __name__ == "__main__":
    main(*sys.argv[1:])
'''
