"""Run configuration: schema, validation, canonical hashing."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class ModelConfig:
    dimension: int = 1
    num_links: int = 5
    local_dim: int = 3
    g: float = 1.0
    mass: float = 0.1
    electric_offset: str = "symmetric"
    link_amplitude: str = "unit"
    hopping_scale: float = 1.0
    boundary: float = 0.0


@dataclass(frozen=True)
class AnsatzConfig:
    family: str = "chain"  # chain | plaquette
    layers: int = 3
    include_plaquette_gate: bool = False
    init_seed: int = 1
    init_range: float = math.pi / 4.0


@dataclass(frozen=True)
class EvolutionConfig:
    mode: str = "vite"  # vite | vrte
    dt: float = 0.05
    steps: int = 2000
    integrator: str = "euler"  # euler | rk4
    cutoff: float = 1e-8
    tikhonov: float = 0.0
    grad_tolerance: float = 1e-6


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = "exact"  # exact | shift | hadamard | randomized
    shots: int | None = None
    seed: int = 0
    samples: int = 200  # randomized mode only


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    precision: int = 17


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    ansatz: AnsatzConfig = field(default_factory=AnsatzConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {
    "model": ModelConfig,
    "ansatz": AnsatzConfig,
    "evolution": EvolutionConfig,
    "estimator": EstimatorConfig,
    "output": OutputConfig,
}

_CHOICES = {
    ("model", "dimension"): (1, 2),
    ("model", "electric_offset"): ("symmetric", "as_printed"),
    ("model", "link_amplitude"): ("unit", "paper_u"),
    ("ansatz", "family"): ("chain", "plaquette"),
    ("evolution", "mode"): ("vite", "vrte"),
    ("evolution", "integrator"): ("euler", "rk4"),
    ("estimator", "mode"): ("exact", "shift", "hadamard", "randomized"),
}


def _coerce(section: str, key: str, value, target_type):
    if target_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if target_type is (int | None) or (key == "shots" and value is None):
        return value
    return value


def parse_config(data: dict) -> RunConfig:
    """Build a validated RunConfig from a nested dict; unknown keys are errors."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sections = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        fields = cls.__dataclass_fields__
        bad = set(raw) - set(fields)
        if bad:
            raise ConfigError(f"unknown keys in section {name!r}: {sorted(bad)}")
        kwargs = {}
        for key, value in raw.items():
            want = fields[key].type
            if want == "float" and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            kwargs[key] = value
        try:
            sections[name] = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad section {name!r}: {exc}") from exc
    cfg = RunConfig(**sections)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    for (section, key), allowed in _CHOICES.items():
        value = getattr(getattr(cfg, section), key)
        if value not in allowed:
            raise ConfigError(f"{section}.{key} must be one of {allowed}, got {value!r}")
    m = cfg.model
    for key in ("g", "mass", "hopping_scale", "boundary"):
        value = getattr(m, key)
        if not math.isfinite(value):
            raise ConfigError(f"model.{key} must be finite, got {value}")
    if m.dimension == 1 and m.num_links < 3:
        raise ConfigError("model.num_links must be at least 3 for a chain")
    if m.dimension == 2 and m.num_links != 4:
        raise ConfigError("the plaquette model has exactly 4 links")
    if m.local_dim != 3:
        raise ConfigError("only the qutrit build (local_dim = 3) is supported")
    if abs(m.g) < 1e-12:
        raise ConfigError("model.g must be nonzero")
    a = cfg.ansatz
    if a.layers < 1:
        raise ConfigError("ansatz.layers must be positive")
    if a.family == "chain" and m.dimension != 1:
        raise ConfigError("chain ansatz requires a 1D model")
    if a.family == "plaquette" and m.dimension != 2:
        raise ConfigError("plaquette ansatz requires the 2D model")
    if a.include_plaquette_gate and a.family != "plaquette":
        raise ConfigError("the four-body gate only extends the plaquette ansatz")
    e = cfg.evolution
    if e.dt <= 0 or not math.isfinite(e.dt):
        raise ConfigError("evolution.dt must be positive")
    if e.steps < 1:
        raise ConfigError("evolution.steps must be positive")
    if e.cutoff < 0 or e.tikhonov < 0:
        raise ConfigError("evolution.cutoff and tikhonov must be nonnegative")
    est = cfg.estimator
    if est.shots is not None and est.shots < 1:
        raise ConfigError("estimator.shots must be >= 1 when set")
    if est.mode == "randomized" and cfg.evolution.mode == "vite":
        raise ConfigError("the randomized estimator only provides anticommutators (vrte)")
    if est.mode == "shift" and cfg.evolution.mode == "vrte":
        raise ConfigError("the shift route has no real-time vector protocol")
    if cfg.output.precision < 1:
        raise ConfigError("output.precision must be positive")


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(data)


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
