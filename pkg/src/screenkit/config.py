"""Declarative pipeline configuration.

One YAML file drives every stage. Overrides are merged with documented
precedence: command-line flags beat environment variables beat the file.
Environment variables use the ``SCREENKIT_`` prefix with ``__`` separating
nesting levels, e.g. ``SCREENKIT_FUSION__IOU_KEEP_THRESHOLD=0.6``. Values are
parsed as YAML scalars so booleans and numbers come through typed.

The ``test`` profile keeps every threshold identical and only shrinks the
scale knobs (batch size, per-class seed minimum) to desk size.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .captions import CaptionLimits, RetryPolicy
from .fusion import FusionConfig
from .sampling import SamplerConfig
from .sourcing import OrchestratorConfig

ENV_PREFIX = "SCREENKIT_"


class ConfigError(Exception):
    pass


@dataclass
class PathsConfig:
    dataset_root: str = "data"
    journal: str = "data/journal.jsonl"
    fixtures: Optional[str] = None
    intake: str = "data/intake.txt"


@dataclass
class BackendsConfig:
    # "fixture:<dir>", "http:<url>" for the detector;
    # "template[:<template string>]", "fixture:<file>", "http:<url>" for the captioner.
    detector: str = "fixture:fixtures/detections"
    captioner: str = "template"
    classifier_fixture: Optional[str] = None


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8731
    reviewer_token: Optional[str] = None
    static_dir: Optional[str] = None


@dataclass
class StatsConfig:
    heatmap_grid: int = 64


@dataclass
class EvalConfig:
    taus: list[float] = field(default_factory=lambda: [0.2, 0.5, 0.7])


@dataclass
class PipelineConfig:
    seed: int = 0
    profile: str = "full"
    max_elements: int = 200
    paths: PathsConfig = field(default_factory=PathsConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    caption_limits: CaptionLimits = field(default_factory=CaptionLimits)
    caption_retry: RetryPolicy = field(default_factory=RetryPolicy)
    orchestrator: OrchestratorConfig = field(default_factory=OrchestratorConfig)
    backends: BackendsConfig = field(default_factory=BackendsConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        if self.profile not in ("test", "full"):
            raise ConfigError(f"profile must be test or full, got {self.profile!r}")
        if self.max_elements < 1:
            raise ConfigError("max_elements must be >= 1")

    def config_hash(self) -> str:
        """Stable fingerprint of the resolved configuration."""
        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]

    def to_json_dict(self) -> dict:
        def plain(obj: Any) -> Any:
            if hasattr(obj, "__dataclass_fields__"):
                return {
                    name: plain(getattr(obj, name))
                    for name in obj.__dataclass_fields__
                }
            if isinstance(obj, (list, tuple)):
                return [plain(v) for v in obj]
            return obj

        return plain(self)


_SECTION_TYPES = {
    "paths": PathsConfig,
    "fusion": FusionConfig,
    "sampler": SamplerConfig,
    "caption_limits": CaptionLimits,
    "caption_retry": RetryPolicy,
    "orchestrator": OrchestratorConfig,
    "backends": BackendsConfig,
    "service": ServiceConfig,
    "stats": StatsConfig,
    "eval": EvalConfig,
}
_SCALAR_KEYS = {"seed", "profile", "max_elements"}


def _deep_merge(base: dict, extra: Mapping) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, Mapping):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def env_overrides(env: Mapping[str, str]) -> dict:
    """Translate SCREENKIT_* variables into a nested override mapping."""
    tree: dict = {}
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        node = tree
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return tree


def _build_section(name: str, cls, data: Any):
    if not isinstance(data, Mapping):
        raise ConfigError(f"section {name!r} must be a mapping, got {type(data).__name__}")
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in section {name!r}: {exc}") from exc


def build_config(merged: Mapping) -> PipelineConfig:
    unknown = set(merged) - _SCALAR_KEYS - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key in _SCALAR_KEYS & set(merged):
        kwargs[key] = merged[key]
    for name, cls in _SECTION_TYPES.items():
        if name in merged:
            field_name = "caption_limits" if name == "caption_limits" else name
            kwargs[field_name] = _build_section(name, cls, merged[name])
    try:
        config = PipelineConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    # every stream of randomness hangs off the one top-level seed unless a
    # section pins its own
    if "rng_seed" not in merged.get("sampler", {}):
        config.sampler = replace(config.sampler, rng_seed=config.seed)
    if "seed" not in merged.get("orchestrator", {}):
        config.orchestrator = replace(config.orchestrator, seed=config.seed)

    if config.profile == "test":
        config.orchestrator = config.orchestrator.scaled_for_test_profile()
    return config


def load_config(
    path: Optional[str | Path] = None,
    env: Optional[Mapping[str, str]] = None,
    flag_overrides: Optional[Mapping] = None,
) -> PipelineConfig:
    """Load and merge: file, then env (SCREENKIT_*), then explicit flags."""
    merged: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping at top level")
        merged = loaded
    merged = _deep_merge(merged, env_overrides(env if env is not None else os.environ))
    if flag_overrides:
        merged = _deep_merge(merged, flag_overrides)
    return build_config(merged)
