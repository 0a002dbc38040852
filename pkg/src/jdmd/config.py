"""Experiment configuration: defaults, validation and TOML/JSON loading."""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Tuple, Union

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SYSTEMS = ("cartpole", "planar-multirotor")
LEARNERS = ("nominal", "edmd", "jdmd")

SYSTEM_DEFAULTS = {
    "cartpole": dict(
        ic_halfwidth=(0.2, 0.2, 0.1, 0.1),
        Q=(100.0, 100.0, 1.0, 1.0),
        R=(0.003,),
        ref_Q=(1.0, 10.0, 0.1, 0.1),
        ref_R=(0.5,),
        ref_Qf=(100.0, 100.0, 10.0, 10.0),
    ),
    "planar-multirotor": dict(
        ic_halfwidth=(1.0, 1.0, 0.3, 0.5, 0.5, 0.5),
        Q=(1.0, 1.0, 1.0, 0.1, 0.1, 0.1),
        R=(0.1, 0.1),
        ref_Q=(1.0, 1.0, 1.0, 0.1, 0.1, 0.1),
        ref_R=(0.1, 0.1),
        ref_Qf=(100.0, 100.0, 100.0, 10.0, 10.0, 10.0),
    ),
}

# file keys that differ from attribute names
_ALIASES = {"lambda": "lam"}


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of a data-collection / training / evaluation run.

    Plant constants not stated in the literature (masses, damping, deadband,
    noise levels, initial-condition boxes) are documented defaults here and
    recorded in every report.
    """

    system: str = "cartpole"
    seed: int = 0
    num_train_trajectories: int = 10
    num_test_trajectories: int = 10
    num_validation_trajectories: int = 5
    trajectory_length_s: float = 5.0
    hold_s: float = 1.5
    sample_rate_hz: float = 25.0
    allow_any_sample_rate: bool = False
    # uniform box half-widths around the reference start, per state coordinate
    ic_halfwidth: Optional[Tuple[float, ...]] = None
    test_ic_scale: float = 1.0
    control_noise_std: float = 0.5
    alpha: float = 0.01
    # a tuple is a grid searched by validation tracking error
    lam: Union[float, Tuple[float, ...]] = (1e-6, 1e-4, 1e-2, 1.0)
    batch_samples: int = 64
    lifting_bounds: str = "data"
    bound_inflation: float = 0.2

    # cartpole plant (true model values)
    mu: float = 0.2
    cart_mass: float = 1.0
    pole_mass: float = 0.2
    pole_length: float = 0.5
    damping: float = 0.005
    deadband: float = 0.1

    # planar multirotor plant (nominal values)
    mr_mass: float = 1.0
    mr_inertia: float = 0.01
    mr_arm: float = 0.25
    mr_drag: float = 0.3
    mr_perturbation: float = 0.05

    # tracking controller
    Q: Optional[Tuple[float, ...]] = None
    R: Optional[Tuple[float, ...]] = None
    Qf_scale: float = 100.0
    u_limit: Optional[float] = 40.0

    # reference generation
    ref_Q: Optional[Tuple[float, ...]] = None
    ref_R: Optional[Tuple[float, ...]] = None
    ref_Qf: Optional[Tuple[float, ...]] = None

    # success criterion
    stabilize_tol: float = 0.2
    stabilize_window_s: float = 1.0

    # sweeps
    mu_grid: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    n_grid: Tuple[int, ...] = tuple(range(1, 31))
    sample_grid: Tuple[int, ...] = (2, 3, 5, 10, 15, 20)
    sweep_seeds: int = 2
    hist_tests: int = 50
    hist_edmd_n: int = 20
    hist_jdmd_n: int = 3
    hist_bins: int = 20
    workers: int = 1

    def __post_init__(self):
        for name, value in SYSTEM_DEFAULTS.get(self.system, {}).items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        validate(self)

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out["lambda" if f.name == "lam" else f.name] = list(v) if isinstance(v, tuple) else v
        return out


def _fail(key, msg):
    raise ConfigError(msg, key)


def validate(c: ExperimentConfig) -> None:
    if c.system not in SYSTEMS:
        _fail("system", f"must be one of {SYSTEMS}")
    if not c.allow_any_sample_rate and not 20.0 <= c.sample_rate_hz <= 25.0:
        _fail("sample_rate_hz", "must lie in [20, 25] Hz (set allow_any_sample_rate to override)")
    if c.sample_rate_hz <= 0:
        _fail("sample_rate_hz", "must be positive")
    if not 0.0 <= c.alpha <= 1.0:
        _fail("alpha", f"must lie in [0, 1], got {c.alpha}")
    lams = c.lam if isinstance(c.lam, tuple) else (c.lam,)
    if not lams or any(v < 0 for v in lams):
        _fail("lambda", "must be nonnegative")
    for name in ("num_train_trajectories", "num_test_trajectories", "batch_samples",
                 "hist_tests", "hist_edmd_n", "hist_jdmd_n", "hist_bins", "workers",
                 "sweep_seeds"):
        if getattr(c, name) < 1:
            _fail(name, "must be at least 1")
    if c.num_validation_trajectories < 0:
        _fail("num_validation_trajectories", "must be nonnegative")
    for name in ("trajectory_length_s", "pole_length", "cart_mass", "pole_mass",
                 "mr_mass", "mr_inertia", "mr_arm", "stabilize_tol", "stabilize_window_s"):
        if not getattr(c, name) > 0:
            _fail(name, "must be positive")
    for name in ("mu", "damping", "deadband", "control_noise_std", "hold_s", "mr_drag",
                 "bound_inflation"):
        if getattr(c, name) < 0:
            _fail(name, "must be nonnegative")
    if c.lifting_bounds not in ("data", "fixed"):
        _fail("lifting_bounds", "must be 'data' or 'fixed'")
    n_x = 4 if c.system == "cartpole" else 6
    n_u = 1 if c.system == "cartpole" else 2
    if len(c.ic_halfwidth) != n_x:
        _fail("ic_halfwidth", f"needs {n_x} entries")
    if len(c.Q) != n_x or len(c.R) != n_u:
        _fail("Q", f"Q needs {n_x} and R {n_u} entries")
    if any(n < 1 for n in c.n_grid) or any(n < 1 for n in c.sample_grid):
        _fail("n_grid", "trajectory counts must be positive")
    if max(c.sample_grid) > max(c.n_grid):
        _fail("sample_grid", f"exceeds the largest sweep size {max(c.n_grid)}")
    if c.u_limit is not None and c.u_limit <= 0:
        _fail("u_limit", "must be positive")


_VECTOR_FIELDS = ("ic_halfwidth", "Q", "R", "ref_Q", "ref_R", "ref_Qf")


def _coerce(key, name, value, default):
    if name == "lam":
        if isinstance(value, (list, tuple)):
            return tuple(float(v) for v in value)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail(key, "expected a number or a list of numbers")
        return float(value)
    if isinstance(default, tuple) or name in _VECTOR_FIELDS:
        if not isinstance(value, (list, tuple)):
            _fail(key, "expected a list")
        return tuple(value)
    if name == "u_limit":
        return float(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            _fail(key, "expected a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or int(value) != value:
            _fail(key, "expected an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail(key, "expected a number")
        return float(value)
    return value


def config_from_dict(data: dict, **overrides) -> ExperimentConfig:
    """Build a validated config; unknown keys raise :class:`ConfigError`."""
    known = {f.name: f for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, value in {**data, **overrides}.items():
        name = _ALIASES.get(key, key)
        if name not in known:
            _fail(key, "unknown configuration key")
        default = known[name].default
        if value is None:
            kwargs[name] = None
        else:
            kwargs[name] = _coerce(key, name, value, default)
    return ExperimentConfig(**kwargs)


def load_config(path, **overrides) -> ExperimentConfig:
    """Load a TOML (``.toml``) or JSON config file and apply defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be a table/object")
    # allow everything under an optional [experiment] table
    if set(data) == {"experiment"}:
        data = data["experiment"]
    return config_from_dict(data, **overrides)
