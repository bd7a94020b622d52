"""Pipeline configuration: nested dataclasses loaded from YAML.

Unknown keys are rejected so that a misspelt tolerance fails loudly instead
of silently falling back to its default.
"""

from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
import hashlib
import json
from pathlib import Path
import typing

import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class FomConfig:
    kind: str = "burgers"
    # burgers
    n_cells: int = 128
    x_min: float = 0.0
    x_max: float = 1.0
    nu: float = 0.01
    boundary: typing.Any = (0.0, 0.0)
    initial: str = "sine"
    amplitude: float = 1.0
    wavenumber: int = 1
    offset: float = 0.0
    t_end: float = 2.0
    dt: float = 1e-3
    save_every: int = 10
    scheme: str = "euler"
    discard_before: float = 0.0
    # quadratic_truth
    n_modes: int = 6
    damping: float = 0.05
    coupling: float = 0.02
    truth_seed: int = 0
    truth_multiple: float = 2.0
    a0: typing.Any = (1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    n_times: int = 201


@dataclass(frozen=True)
class PodConfig:
    n_modes: int = 6
    mean_center: bool = False


@dataclass(frozen=True)
class RomConfig:
    dt: float = 2e-3
    newton_tol: float = 1e-12
    newton_max_iter: int = 25


@dataclass(frozen=True)
class PriorConfig:
    relative_scale: float = 0.01
    floor: float = 1e-6
    interpret: str = "std"


@dataclass(frozen=True)
class NoiseConfig:
    relative_scale: float = 0.001
    floor: float = 1e-9


@dataclass(frozen=True)
class SmootherConfig:
    kind: str = "enkf"
    Z: int = 1000
    m_active: int = 93
    p: int = 1
    N_samples: int = 1000
    seed: int = 1
    rcond: float = 1e-10
    quantile_samples: int = 10000


@dataclass(frozen=True)
class SensitivityConfig:
    enabled: bool = True
    pilot_Z: int = 500
    threshold: float = 0.95
    seed: int = 7


@dataclass(frozen=True)
class RvmSettings:
    max_iter: int = 500
    prune_threshold: float = 1e12
    tol: float = 1e-6
    noise_variance: typing.Optional[float] = None


@dataclass(frozen=True)
class PipelineConfig:
    fom: FomConfig = field(default_factory=FomConfig)
    pod: PodConfig = field(default_factory=PodConfig)
    rom: RomConfig = field(default_factory=RomConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    train_window: typing.Any = None
    validate_window: typing.Any = None
    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)
    rvm: RvmSettings = field(default_factory=RvmSettings)
    output_dir: str = "runs/default"

    def __post_init__(self):
        validate(self)

    def windows(self, t_start, t_end):
        """Training and validation windows, defaulting to a 20/80 split."""
        train = self.train_window
        if train is None:
            train = (t_start, t_start + 0.2 * (t_end - t_start))
        val = self.validate_window
        if val is None:
            val = (train[1], t_end)
        return tuple(map(float, train)), tuple(map(float, val))

    def to_dict(self):
        return _plain(asdict(self))

    def digest(self, *sections):
        """Hex digest of the named sections.

        By default every section except ``output_dir``, which does not
        influence any result.
        """
        data = self.to_dict()
        data = {k: data[k] for k in sections} if sections else {k: v for k, v in data.items() if k != "output_dir"}
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seed(self, seed):
        """Override every random stream from one integer."""
        return replace(
            self,
            smoother=replace(self.smoother, seed=int(seed)),
            sensitivity=replace(self.sensitivity, seed=int(seed) + 1),
        )


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate(cfg):
    fom = cfg.fom
    _check(fom.kind in ("burgers", "quadratic_truth"), f"unknown fom.kind {fom.kind!r}")
    _check(fom.n_cells > 0 and fom.n_modes > 0 and fom.n_times > 1, "counts must be positive")
    _check(fom.t_end > 0 and fom.dt > 0 and fom.save_every > 0, "time stepping must be positive")
    _check(fom.nu >= 0, "viscosity must be non-negative")
    _check(fom.scheme in ("euler", "bdf2"), f"unknown fom.scheme {fom.scheme!r}")
    _check(fom.initial in ("sine", "zero", "constant"), f"unknown fom.initial {fom.initial!r}")
    _check(
        fom.boundary == "periodic" or (isinstance(fom.boundary, (list, tuple)) and len(fom.boundary) == 2),
        "fom.boundary is 'periodic' or a pair of Dirichlet values",
    )
    if fom.kind == "quadratic_truth":
        _check(len(fom.a0) == fom.n_modes, "fom.a0 needs one entry per mode")
    _check(cfg.pod.n_modes > 0, "pod.n_modes must be positive")
    _check(cfg.rom.dt > 0 and cfg.rom.newton_max_iter > 0, "rom settings must be positive")
    _check(cfg.prior.relative_scale > 0, "prior.relative_scale must be positive")
    _check(cfg.prior.interpret in ("std", "variance"), "prior.interpret is 'std' or 'variance'")
    _check(cfg.noise.relative_scale >= 0, "noise.relative_scale must be non-negative")
    sm = cfg.smoother
    _check(sm.kind in ("enkf", "pce", "both"), f"unknown smoother.kind {sm.kind!r}")
    _check(sm.Z >= 2 and sm.N_samples >= 1 and sm.m_active >= 1 and sm.p >= 1, "smoother counts must be positive")
    _check(sm.quantile_samples >= 2, "smoother.quantile_samples must be at least 2")
    sens = cfg.sensitivity
    _check(sens.pilot_Z >= 2, "sensitivity.pilot_Z must be at least 2")
    _check(0 < sens.threshold < 1, "sensitivity.threshold must lie in (0, 1)")
    horizon = fom.t_end
    for name in ("train_window", "validate_window"):
        win = getattr(cfg, name)
        if win is not None:
            _check(len(win) == 2 and win[0] < win[1], f"{name} must be [start, end] with start < end")
            _check(win[0] >= 0 and win[1] <= horizon + 1e-12, f"{name} lies outside the simulated horizon")
    if cfg.train_window is not None and cfg.validate_window is not None:
        _check(cfg.train_window[1] <= cfg.validate_window[0] + 1e-12, "training must precede validation")


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {path or 'config'}")
    kwargs = {}
    hints = typing.get_type_hints(cls)
    for name, value in data.items():
        hint = hints[name]
        where = f"{path}.{name}" if path else name
        if is_dataclass(hint):
            kwargs[name] = _build(hint, value or {}, where)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        elif hint is float and isinstance(value, int) and not isinstance(value, bool):
            kwargs[name] = float(value)
        elif hint in (int, float, bool, str) and not isinstance(value, hint):
            raise ConfigError(f"{where} must be of type {hint.__name__}, got {value!r}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data):
    return _build(PipelineConfig, data or {}, "")


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
