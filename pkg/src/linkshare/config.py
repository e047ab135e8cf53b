"""Run configuration: one YAML file, fully defaulted, echoed into the manifest."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ._index import derive_seed
from .embeddings import EmbeddingConfig
from .model.forest import Hyperparams
from .model.selection import DEFAULT_SEARCH_SPACE


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


@dataclass
class PathsConfig:
    inputs: str | None = None         # raw JSONL inputs; default <out>/inputs
    aliases: str | None = None        # extra app-type aliases (JSON or YAML)


@dataclass
class AnalysisConfig:
    start_ts: int = 1_680_307_200     # 2023-04-01 00:00 UTC
    days: int = 91
    taste_window_days: int = 90
    dedup_taste: bool = False


@dataclass
class SamplingConfig:
    cap_per_bin: int | None = None    # None keeps every discovery share
    n_bins: int = 10


@dataclass
class StatsConfig:
    bin_kind: str = "quantile"
    n_bins: int = 10
    min_count: int = 30


@dataclass
class ModelConfig:
    hyperparams: Hyperparams = field(default_factory=lambda: Hyperparams(
        n_estimators=60, max_depth=14, min_samples_leaf=40, max_features=0.5))
    folds: int = 5
    search: bool = False
    n_fits: int = 10
    search_space: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_SEARCH_SPACE)))
    n_jobs: int = 1


@dataclass
class RunConfig:
    seed: int = 0
    synth_preset: str = "default"
    synth: dict = field(default_factory=dict)     # overrides on top of the preset
    paths: PathsConfig = field(default_factory=PathsConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def module_seed(self, name: str) -> int:
        return derive_seed(self.seed, name)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def hash(self) -> str:
        """Digest of everything except filesystem paths."""
        d = self.to_dict()
        d.pop("paths")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def synth_config(self):
        from .synth import preset

        overrides = dict(self.synth)
        if "embedding" not in overrides:
            overrides["embedding"] = dataclasses.replace(self.embedding)
        try:
            return preset(self.synth_preset, seed=self.seed, start_ts=self.analysis.start_ts,
                          analysis_days=self.analysis.days,
                          taste_window_days=self.analysis.taste_window_days, **overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"synth: {exc}") from None


_SECTIONS = {"paths": PathsConfig, "analysis": AnalysisConfig, "sampling": SamplingConfig,
             "embedding": EmbeddingConfig, "stats": StatsConfig}


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    top = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    kw = {}
    for name, cls in _SECTIONS.items():
        kw[name] = _build(cls, data.get(name), name)
    model = dict(data.get("model") or {})
    hp_data = model.pop("hyperparams", None)
    if hp_data is not None and not isinstance(hp_data, dict):
        raise ConfigError("model.hyperparams: expected a mapping")
    base = dataclasses.asdict(ModelConfig().hyperparams)
    hp = _build(Hyperparams, {**base, **(hp_data or {})}, "model.hyperparams")
    kw["model"] = _build(ModelConfig, {**model, "hyperparams": hp}, "model")
    for key in ("seed", "synth_preset", "synth"):
        if key in data:
            kw[key] = data[key]
    if not isinstance(kw.get("seed", 0), int) or isinstance(kw.get("seed", 0), bool):
        raise ConfigError("seed must be an integer")
    if not isinstance(kw.get("synth", {}), dict):
        raise ConfigError("synth: expected a mapping of overrides")
    cfg = RunConfig(**kw)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    a = cfg.analysis
    if a.days < 1 or a.taste_window_days < 1:
        raise ConfigError("analysis windows must be >= 1 day")
    if cfg.model.folds < 2:
        raise ConfigError("model.folds must be >= 2")
    if cfg.model.n_fits < 1:
        raise ConfigError("model.n_fits must be >= 1")
    if cfg.stats.bin_kind not in ("quantile", "width"):
        raise ConfigError("stats.bin_kind must be 'quantile' or 'width'")
    if cfg.stats.n_bins < 1 or cfg.sampling.n_bins < 1:
        raise ConfigError("bin counts must be >= 1")
    if cfg.sampling.cap_per_bin is not None and cfg.sampling.cap_per_bin < 0:
        raise ConfigError("sampling.cap_per_bin must be >= 0")
    if cfg.paths.aliases is not None and not Path(cfg.paths.aliases).exists():
        raise ConfigError(f"aliases file not found: {cfg.paths.aliases}")
    if cfg.paths.inputs is not None and not Path(cfg.paths.inputs).is_dir():
        raise ConfigError(f"inputs directory not found: {cfg.paths.inputs}")


def load(path=None, seed: int | None = None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
    if seed is not None:
        data["seed"] = seed
    return from_dict(data)
