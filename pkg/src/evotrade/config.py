"""YAML run configuration and run manifests.

An empty (or absent) config file reproduces the reference settings at full
scale; sections override individual fields. Every command writes a
manifest alongside its outputs; a manifest is itself a loadable config
(the config lives under the "config" key), so a run can be reproduced
byte-for-byte on the same build by pointing --config at it.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .agents import AgentParams
from .backtest import RiskConfig
from .evolution import EvoConfig

PACKAGE_VERSION = "0.1.0"


@dataclass
class CorpusConfig:
    n_runs: int = 200
    k_neighbors: int = 10

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("corpus n_runs must be positive")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")


@dataclass
class BacktestConfig:
    validation_start: str = "2010-01"
    validation_end: str = "2016-01"  # exclusive
    test_start: str = "2016-01"
    test_end: str = "2019-07"  # exclusive
    elite_k: int = 5
    episode_seconds: int = 1_000_000
    bucket_seconds: int = 10
    base_price: float = 100.0

    def __post_init__(self):
        if self.episode_seconds < self.bucket_seconds or self.bucket_seconds < 1:
            raise ValueError("need episode_seconds >= bucket_seconds >= 1")
        if self.elite_k < 1:
            raise ValueError("elite_k must be positive")


@dataclass
class RunConfig:
    seed: int = 0
    evolution: EvoConfig = field(default_factory=EvoConfig)
    agents: AgentParams = field(default_factory=AgentParams)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    risk: RiskConfig = field(default_factory=RiskConfig)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)


_SECTIONS = {
    "evolution": EvoConfig,
    "agents": AgentParams,
    "corpus": CorpusConfig,
    "risk": RiskConfig,
    "backtest": BacktestConfig,
}


class ConfigError(ValueError):
    pass


def _coerce_scalar(want, value, section, key):
    """Match a scalar to the field's annotated type.

    PyYAML follows YAML 1.1, where "1.0e6" (no exponent sign) is a string,
    so numeric-looking strings are converted rather than passed through to
    fail somewhere deep in a run.
    """
    bad = ConfigError(f"config field {section}.{key} expects {want}, got {value!r}")
    if want == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise bad
        try:
            return float(value)
        except ValueError:
            raise bad from None
    if want == "int":
        if isinstance(value, bool):
            raise bad
        if isinstance(value, float):
            if not value.is_integer():
                raise bad
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                raise bad from None
        if not isinstance(value, int):
            raise bad
        return value
    if want == "str" and not isinstance(value, str):
        raise bad
    return value


def _build_section(cls, data, section):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config section {section!r} must be a mapping")
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    unknown = set(data) - set(types)
    if unknown:
        raise ConfigError(f"unknown config field {section}.{sorted(unknown)[0]}")
    coerced = {}
    for key, value in data.items():
        if key == "static_probs" and isinstance(value, list):
            value = tuple(value)
        want = types[key]
        if not isinstance(want, str):
            want = getattr(want, "__name__", "")
        coerced[key] = _coerce_scalar(want, value, section, key)
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config section {section!r}: {e}") from None


def config_from_dict(data: dict) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    if "config" in data and isinstance(data.get("config"), dict):
        data = data["config"]  # manifest file: unwrap
    known = set(_SECTIONS) | {"seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config field {sorted(unknown)[0]}")

    sections = {name: _build_section(cls, data.get(name), name) for name, cls in _SECTIONS.items()}
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")

    cfg = RunConfig(seed=seed, **sections)
    # the agents section feeds the market builder inside evolution runs
    cfg.evolution.agents = cfg.agents
    if "seed" not in (data.get("evolution") or {}):
        cfg.evolution.seed = seed
    return cfg


def load_config(path=None) -> RunConfig:
    if path is None:
        return config_from_dict({})
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    out = {"seed": cfg.seed}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(cfg, name))
        if name == "evolution":
            section.pop("agents", None)  # serialized once, in its own section
            section["static_probs"] = list(section["static_probs"])
        out[name] = section
    return out


def write_manifest(cfg: RunConfig, path, command: str, kernel_backend: str,
                   extra: dict | None = None) -> None:
    meta = {"command": command, "package_version": PACKAGE_VERSION, "kernels": kernel_backend}
    if extra:
        meta.update(extra)
    doc = {"config": config_to_dict(cfg), "meta": meta}
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)
