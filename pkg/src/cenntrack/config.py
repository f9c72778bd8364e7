"""Run configuration: one JSON document, every field optional."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import SolverConfig
from .cost import CostParams
from .tracker import TrackerConfig
from .trainer import GAConfig, TrainerConfig


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    cost: CostParams = field(default_factory=CostParams)
    paths: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if k == "ga":
            v = _build(GAConfig, v, f"{where}.ga")
        elif k == "weight_range":
            v = tuple(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    sections = {"solver": SolverConfig, "trainer": TrainerConfig,
                "tracker": TrackerConfig, "cost": CostParams}
    unknown = set(data) - set(sections) - {"paths"}
    if unknown:
        raise ValueError(f"config: unknown sections {sorted(unknown)}")
    kwargs = {k: _build(cls, data[k], k) for k, cls in sections.items() if k in data}
    if "paths" in data:
        if not isinstance(data["paths"], dict):
            raise ValueError("paths: expected an object")
        kwargs["paths"] = dict(data["paths"])
    return RunConfig(**kwargs)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)
