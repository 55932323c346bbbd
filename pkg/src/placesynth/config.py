"""Run configuration: one JSON document holding every tunable default."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import SchemaError
from .planner import GuidanceConfig, PlannerConfig

CONFIG_SCHEMA_VERSION = 1


@dataclass
class AugmentConfig:
    p_c: float = 0.5
    p_m: float = 0.3
    tau_p: float = 0.9
    similarity: str = "embeddings"  # or "groups", or a path to a table JSON


@dataclass
class GenerateConfig:
    split: Optional[str] = "syn_easy"
    count_range: Optional[list] = None
    density: Optional[str] = None
    n_scenes: int = 20
    n_plans: int = 1
    library: Optional[str] = None


@dataclass
class EvalConfig:
    n_candidates: int = 8


_SECTIONS = {"augment": AugmentConfig, "generate": GenerateConfig, "eval": EvalConfig}


def _check_keys(data: dict, cls, where: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise SchemaError(f"unknown keys in {where}: {', '.join(unknown)}")


@dataclass
class RunConfig:
    seed: int = 0
    workers: Optional[int] = None
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        out = {"schema_version": CONFIG_SCHEMA_VERSION}
        out.update(asdict(self))
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise SchemaError("config must be a JSON object")
        data = dict(data)
        if "schema_version" not in data:
            raise SchemaError("config is missing schema_version")
        if data.pop("schema_version") != CONFIG_SCHEMA_VERSION:
            raise SchemaError(f"unsupported config schema_version (expected {CONFIG_SCHEMA_VERSION})")
        _check_keys(data, cls, "config")
        cfg = cls(seed=int(data.get("seed", 0)), workers=data.get("workers"))
        for name, sub in _SECTIONS.items():
            if name in data:
                _check_keys(data[name], sub, name)
                setattr(cfg, name, sub(**data[name]))
        if "planner" in data:
            planner = dict(data["planner"])
            _check_keys(planner, PlannerConfig, "planner")
            guidance = planner.get("guidance")
            if guidance is not None:
                _check_keys(guidance, GuidanceConfig, "planner.guidance")
            cfg.planner = PlannerConfig.from_dict(planner)
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
