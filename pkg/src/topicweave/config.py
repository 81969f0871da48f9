"""Declarative run configuration: one document, strict keys, stable hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .corpus import DEFAULT_SENTENCE_DELIMITER
from .embedding import TrainConfig
from .errors import ValidationError
from .mentions import DEFAULT_MENTION_CAP
from .pipeline import PipelineConfig
from .sentences import Bm25Params


@dataclass
class CorpusOptions:
    sentence_delimiter: str = DEFAULT_SENTENCE_DELIMITER
    min_count: int = 3

    def validate(self) -> None:
        if not self.sentence_delimiter or " " in self.sentence_delimiter:
            raise ValidationError("sentence_delimiter must be a non-empty token")
        if self.min_count < 1:
            raise ValidationError("min_count must be >= 1")


@dataclass
class SplitOptions:
    train_fraction: float = 0.6
    rng_seed: int = 42

    def validate(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError(
                f"train_fraction must be in (0, 1), got {self.train_fraction}"
            )


@dataclass
class MentionOptions:
    cap_per_term: int = DEFAULT_MENTION_CAP  # 0 disables the cap
    rng_seed: int = 7

    def validate(self) -> None:
        if self.cap_per_term < 0:
            raise ValidationError("cap_per_term must be >= 0 (0 disables the cap)")

    def effective_cap(self) -> int | None:
        return None if self.cap_per_term == 0 else self.cap_per_term


@dataclass
class EvalOptions:
    k: int = 20

    def validate(self) -> None:
        if self.k < 1:
            raise ValidationError("k must be >= 1")


@dataclass
class RunConfig:
    corpus: CorpusOptions = field(default_factory=CorpusOptions)
    split: SplitOptions = field(default_factory=SplitOptions)
    embedding: TrainConfig = field(default_factory=TrainConfig)
    mentions: MentionOptions = field(default_factory=MentionOptions)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    bm25: Bm25Params = field(default_factory=Bm25Params)
    evaluation: EvalOptions = field(default_factory=EvalOptions)

    def validate(self) -> None:
        self.corpus.validate()
        self.split.validate()
        self.embedding.validate()
        self.mentions.validate()
        self.pipeline.validate()
        self.bm25.validate()
        self.evaluation.validate()

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_SECTIONS = {
    "corpus": CorpusOptions,
    "split": SplitOptions,
    "embedding": TrainConfig,
    "mentions": MentionOptions,
    "pipeline": PipelineConfig,
    "bm25": Bm25Params,
    "evaluation": EvalOptions,
}


def _coerce(value: Any, target_type: Any, where: str) -> Any:
    if target_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, target_type) or (
        target_type in (int, float) and isinstance(value, bool)
    ):
        raise ValidationError(
            f"{where}: expected {getattr(target_type, '__name__', target_type)}, "
            f"got {type(value).__name__}"
        )
    return value


def _build_section(cls: type, data: Any, section: str) -> Any:
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(f"config section {section!r} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ValidationError(
            f"unknown key(s) in config section {section!r}: {', '.join(unknown)}"
        )
    type_map = {"int": int, "float": float, "str": str, "bool": bool}
    kwargs = {}
    for name, value in data.items():
        declared = fields[name].type
        target = type_map.get(declared, declared) if isinstance(declared, str) else declared
        kwargs[name] = _coerce(value, target, f"{section}.{name}")
    return cls(**kwargs)


def config_from_dict(data: dict[str, Any] | None) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError("config document must be a mapping")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ValidationError(f"unknown config section(s): {', '.join(unknown)}")
    sections = {
        name: _build_section(cls, data.get(name), name)
        for name, cls in _SECTIONS.items()
    }
    config = RunConfig(**sections)
    config.validate()
    return config


def load_config(path: str | Path | None) -> RunConfig:
    """Load a YAML (or JSON) config document; None gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: invalid config ({exc})") from exc
    return config_from_dict(data)


def apply_overrides(config: RunConfig, overrides: dict[str, dict[str, Any]]) -> RunConfig:
    """Apply CLI flag overrides expressed as {section: {key: value}}."""
    merged = config.to_dict()
    for section, values in overrides.items():
        for key, value in values.items():
            if value is None:
                continue
            merged.setdefault(section, {})[key] = value
    return config_from_dict(merged)
