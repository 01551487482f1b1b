"""Run configuration: flat key = value files, typed and strictly validated.

Precedence, lowest to highest: built-in defaults, config file, explicit
overrides (CLI flags), then the MONODRIFT_SEED environment variable.
Unknown keys, duplicate keys, and malformed values raise ConfigError
naming the offending key.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .experiment import ExperimentSpec, make_pair_grid
from .kernels import KernelSpec
from .nadaraya import EstimatorConfig
from .sde import SdeModel, builtin_model

ENV_SEED = "MONODRIFT_SEED"


class ConfigError(Exception):
    """A configuration file or value is invalid."""


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the CLI, defaulting to the built-in benchmark study."""

    model: str = "A"
    kernel: str = "gaussian"
    domain_lo: float = -1.0
    domain_hi: float = 1.0
    margin: float = 0.01
    burn_in: float = 0.5
    density_floor: float = 0.05
    horizon: float = 5.0
    n_steps: int = 50
    n_paths: int = 100
    repetitions: int = 100
    eta_grid: str = "0.05:1.75:35"
    lh_grid: str = "0.05:1.75:35"
    z_grid_points: int = 200
    curve_grid_points: int = 205
    n_figure_reps: int = 5
    seed: int = 1789
    out_dir: str = "out"
    verbosity: int = 1
    workers: int = 1
    theory_strict: bool = False


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(f"expected true/false, got {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"invalid value for key '{key}': {exc}") from exc


def parse_grid_spec(spec: str, key: str = "grid") -> np.ndarray:
    """Parse 'lo:hi:count' into a uniform grid of count points."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"key '{key}' must look like lo:hi:count, got {spec!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"invalid value for key '{key}': {exc}") from exc
    if count < 1 or not np.isfinite(lo) or not np.isfinite(hi) or hi < lo:
        raise ConfigError(f"key '{key}': need finite lo <= hi and count >= 1")
    return np.linspace(lo, hi, count)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key/value pairs of a config file; comments and blanks skipped."""
    seen: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key = value', got {stripped!r}"
            )
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        seen[key] = value
    return seen


def build_config(
    config_path: str | Path | None = None,
    overrides: Mapping[str, object] | None = None,
    env: Mapping[str, str] | None = None,
) -> RunConfig:
    """Assemble a RunConfig from defaults, file, overrides, environment."""
    cfg = RunConfig()
    if config_path is not None:
        path = Path(config_path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        raw = parse_config_text(text, source=str(path))
        cfg = replace(cfg, **{k: _coerce(k, v) for k, v in raw.items()})
    if overrides:
        unknown = set(overrides) - set(_FIELD_TYPES)
        if unknown:
            raise ConfigError(f"unknown key '{sorted(unknown)[0]}'")
        cfg = replace(cfg, **dict(overrides))
    env = os.environ if env is None else env
    if ENV_SEED in env:
        try:
            cfg = replace(cfg, seed=int(env[ENV_SEED]))
        except ValueError as exc:
            raise ConfigError(f"invalid value for key 'seed' ({ENV_SEED}): {exc}")
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.verbosity < 0:
        raise ConfigError(f"invalid value for key 'verbosity': {cfg.verbosity}")
    if cfg.workers < 1:
        raise ConfigError(f"invalid value for key 'workers': {cfg.workers}")
    if cfg.n_figure_reps < 0:
        raise ConfigError(
            f"invalid value for key 'n_figure_reps': {cfg.n_figure_reps}"
        )
    # delegate the numeric cross-checks to the typed constructors
    try:
        estimator_config(cfg)
        model_of(cfg)
        parse_grid_spec(cfg.eta_grid, "eta_grid")
        parse_grid_spec(cfg.lh_grid, "lh_grid")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(cfg: RunConfig) -> str:
    """Render a config that parses back to an identical RunConfig."""
    lines = ["# monodrift run configuration"]
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def model_of(cfg: RunConfig) -> SdeModel:
    return builtin_model(cfg.model)


def estimator_config(cfg: RunConfig) -> EstimatorConfig:
    return EstimatorConfig(
        domain_lo=cfg.domain_lo,
        domain_hi=cfg.domain_hi,
        margin=cfg.margin,
        burn_in=cfg.burn_in,
        density_floor=cfg.density_floor,
        kernel=KernelSpec(cfg.kernel),
        z_grid_points=cfg.z_grid_points,
    )


def experiment_spec(cfg: RunConfig) -> ExperimentSpec:
    return ExperimentSpec(
        model=model_of(cfg),
        cfg=estimator_config(cfg),
        n_paths=cfg.n_paths,
        n_steps=cfg.n_steps,
        horizon=cfg.horizon,
        repetitions=cfg.repetitions,
        eta_grid=tuple(float(v) for v in parse_grid_spec(cfg.eta_grid, "eta_grid")),
        lh_grid=make_pair_grid(parse_grid_spec(cfg.lh_grid, "lh_grid")),
        curve_grid_points=cfg.curve_grid_points,
        seed=cfg.seed,
    )
