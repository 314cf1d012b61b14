"""Experiment configuration: schema, presets, JSON round trip.

A configuration is a flat JSON object.  Validation is strict: unknown
keys are rejected by name, every step size must be an integer multiple
of the finest one, and all step sizes and checkpoint times must divide
the horizon so that trajectories at different resolutions line up
exactly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "load_config_dict",
    "parse_config",
    "preset_config",
]

ALL_SCHEMES = ("augmented_sav", "standard_sav", "implicit_nonlinear")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"config.{key}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one Monte-Carlo experiment."""

    # domain and mesh
    lx: float = 4.0
    ly: float = 4.0
    n_cells_x: int = 64
    n_cells_y: int = 64
    # physics
    epsilon: float = 0.04
    gamma: float = 1e-5
    alpha: float = 2.0
    # initial droplet (tanh profile across an origin-centred ellipse)
    ellipse_a: float = 0.75
    ellipse_b: float = 0.5
    # noise
    distribution: str = "rademacher"
    k_max: int = 10
    l_max: int = 10
    # time discretisation
    tau_min: float = 5e-4
    tau_levels: tuple[float, ...] = (5e-4, 1e-3, 2e-3, 4e-3)
    horizon: float = 0.5
    # sampling
    n_paths: int = 16
    base_seed: int = 1
    checkpoint_times: tuple[float, ...] = ()
    schemes: tuple[str, ...] = ALL_SCHEMES
    # solver knobs
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    n_workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "tau_levels", tuple(sorted(self.tau_levels)))
        object.__setattr__(self, "checkpoint_times", tuple(self.checkpoint_times))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        self.validate()

    def validate(self) -> None:
        for name in ("lx", "ly", "epsilon", "gamma", "tau_min", "horizon",
                     "ellipse_a", "ellipse_b"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"must be positive, got {getattr(self, name)}", name)
        if self.alpha < 0:
            raise ConfigError(f"must be non-negative, got {self.alpha}", "alpha")
        for name in ("n_cells_x", "n_cells_y"):
            if getattr(self, name) < 2:
                raise ConfigError(f"need at least 2 cells, got {getattr(self, name)}", name)
        if self.n_paths < 1:
            raise ConfigError(f"must be at least 1, got {self.n_paths}", "n_paths")
        if self.k_max < 0 or self.l_max < 0:
            raise ConfigError("mode cut-offs must be non-negative", "k_max")
        if self.distribution not in ("rademacher", "gaussian"):
            raise ConfigError(
                f"unknown distribution {self.distribution!r}", "distribution"
            )
        if not self.schemes:
            raise ConfigError("at least one scheme is required", "schemes")
        for scheme in self.schemes:
            if scheme not in ALL_SCHEMES:
                raise ConfigError(
                    f"unknown scheme {scheme!r}, expected one of {ALL_SCHEMES}",
                    "schemes",
                )
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("duplicate scheme", "schemes")
        if not self.tau_levels:
            raise ConfigError("at least one step size is required", "tau_levels")
        for tau in self.tau_levels:
            if not tau > 0:
                raise ConfigError(f"step sizes must be positive, got {tau}", "tau_levels")
            _integer_ratio(tau, self.tau_min, "tau_levels")
            _integer_ratio(self.horizon, tau, "horizon")
        if len(set(self.level_factors())) != len(self.tau_levels):
            raise ConfigError("duplicate step size", "tau_levels")
        for t in self.checkpoint_times:
            if not 0 < t <= self.horizon + 1e-12:
                raise ConfigError(
                    f"checkpoint {t} outside (0, horizon]", "checkpoint_times"
                )
            for tau in self.tau_levels:
                _integer_ratio(t, tau, "checkpoint_times")
        if self.newton_tol <= 0 or self.newton_max_iter < 1:
            raise ConfigError("invalid Newton settings", "newton_tol")
        if self.n_workers < 1:
            raise ConfigError(f"must be at least 1, got {self.n_workers}", "n_workers")

    def level_factors(self) -> tuple[int, ...]:
        """Each step size as an integer multiple of tau_min, ascending."""
        return tuple(
            _integer_ratio(tau, self.tau_min, "tau_levels") for tau in self.tau_levels
        )

    def n_fine_steps(self) -> int:
        return _integer_ratio(self.horizon, self.tau_min, "horizon")

    def to_dict(self) -> dict:
        raw = dataclasses.asdict(self)
        for key in ("tau_levels", "checkpoint_times", "schemes"):
            raw[key] = list(raw[key])
        return raw


def _integer_ratio(value: float, unit: float, key: str) -> int:
    ratio = value / unit
    nearest = round(ratio)
    if nearest < 1 or abs(ratio - nearest) > 1e-9 * max(1.0, abs(ratio)):
        raise ConfigError(
            f"{value} is not an integer multiple of {unit}", key
        )
    return int(nearest)


PRESETS: dict[str, dict] = {
    # moderate noise: full-size study with alpha = 2 and 21 x 21 modes
    "moderate": {
        "lx": 4.0,
        "ly": 4.0,
        "n_cells_x": 256,
        "n_cells_y": 256,
        "epsilon": 0.04,
        "gamma": 1e-5,
        "alpha": 2.0,
        "distribution": "rademacher",
        "k_max": 10,
        "l_max": 10,
        "tau_min": 5e-4,
        "tau_levels": [5e-4, 1e-3, 2e-3, 4e-3, 1e-2, 2e-2],
        "horizon": 4.0,
        "n_paths": 350,
        "base_seed": 1,
        "checkpoint_times": [0.5, 1.5, 2.0, 3.0, 4.0],
        "schemes": list(ALL_SCHEMES),
    },
    # strong noise: alpha = 10 with few modes and a finer step ladder
    "strong": {
        "lx": 4.0,
        "ly": 4.0,
        "n_cells_x": 256,
        "n_cells_y": 256,
        "epsilon": 0.04,
        "gamma": 1e-5,
        "alpha": 10.0,
        "distribution": "rademacher",
        "k_max": 3,
        "l_max": 3,
        "tau_min": 5e-5,
        "tau_levels": [5e-5, 1e-4, 2e-4, 4e-4, 1e-3, 2e-3],
        "horizon": 2.0,
        "n_paths": 350,
        "base_seed": 1,
        "checkpoint_times": [0.5, 1.0, 1.5, 2.0],
        "schemes": list(ALL_SCHEMES),
    },
}

_FIELD_TYPES = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _config_from_dict(raw: dict, source: str) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source} must contain a JSON object")
    unknown = set(raw) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError("unknown key", sorted(unknown)[0])
    kwargs = {}
    for key, value in raw.items():
        if key in ("tau_levels", "checkpoint_times", "schemes"):
            if not isinstance(value, (list, tuple)):
                raise ConfigError("must be a list", key)
            kwargs[key] = tuple(value)
        elif key == "distribution":
            if not isinstance(value, str):
                raise ConfigError("must be a string", key)
            kwargs[key] = value
        elif key in ("n_cells_x", "n_cells_y", "k_max", "l_max", "n_paths",
                     "base_seed", "newton_max_iter", "n_workers"):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"must be an integer, got {value!r}", key)
            kwargs[key] = value
        else:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"must be a number, got {value!r}", key)
            kwargs[key] = float(value)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as err:
        raise ConfigError(str(err)) from err


def load_config_dict(path) -> dict:
    """Read a JSON configuration file into a raw dict (no validation yet)."""
    try:
        with open(path) as handle:
            raw = json.load(handle)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return raw


def parse_config(path) -> ExperimentConfig:
    """Read and validate a JSON configuration file."""
    return _config_from_dict(load_config_dict(path), str(path))


def preset_config(name: str, **overrides) -> ExperimentConfig:
    """Instantiate a named preset, optionally overriding individual keys."""
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}, expected one of {sorted(PRESETS)}"
        )
    raw = dict(PRESETS[name])
    raw.update(overrides)
    return _config_from_dict(raw, f"preset {name}")
