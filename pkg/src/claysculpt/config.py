"""Run configuration: one YAML key-value file plus command-line overrides."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .errors import InvalidArgument
from .llm import LLMConfig

PLANNER_BACKENDS = ("template", "llm")
SUBGOAL_BACKENDS = ("heuristic", "llm")
ACTION_BACKENDS = ("geometric", "dm", "random")


@dataclass
class RunConfig:
    prompt: str = "line"
    planner_backend: str = "template"
    subgoal_backend: str = "heuristic"
    action_backend: str = "geometric"
    seed: int = 0
    max_rounds: int = 5
    max_plan_iters: int = 50
    n_clusters: int = 10
    n_points: int = 256
    noise_sigma: float = 0.0005
    workspace_lo: tuple = (-0.02, -0.02, -0.005)
    workspace_hi: tuple = (0.095, 0.095, 0.1)
    checkpoint: Optional[str] = None
    out_dir: str = "runs/episode"
    offline: bool = False
    snapshots: bool = True
    lookahead: bool = True
    llm: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if not self.prompt or not str(self.prompt).strip():
            raise InvalidArgument("prompt must be non-empty")
        if self.planner_backend not in PLANNER_BACKENDS:
            raise InvalidArgument(f"planner_backend must be one of {PLANNER_BACKENDS}")
        if self.subgoal_backend not in SUBGOAL_BACKENDS:
            raise InvalidArgument(f"subgoal_backend must be one of {SUBGOAL_BACKENDS}")
        if self.action_backend not in ACTION_BACKENDS:
            raise InvalidArgument(f"action_backend must be one of {ACTION_BACKENDS}")
        if self.offline and "llm" in (self.planner_backend, self.subgoal_backend):
            raise InvalidArgument("--offline forbids network (llm) backends")
        if self.action_backend == "dm":
            if not self.checkpoint:
                raise InvalidArgument("action_backend 'dm' needs a checkpoint path")
            if not Path(self.checkpoint).exists():
                raise InvalidArgument(f"checkpoint not found: {self.checkpoint}")
        if self.max_rounds < 0 or self.max_plan_iters < 1:
            raise InvalidArgument("max_rounds must be >= 0 and max_plan_iters >= 1")
        if not isinstance(self.seed, int):
            raise InvalidArgument("seed must be an explicit integer")
        LLMConfig.from_dict(self.llm)
        return self

    @property
    def llm_config(self) -> LLMConfig:
        return LLMConfig.from_dict(self.llm)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["workspace_lo"] = list(self.workspace_lo)
        d["workspace_hi"] = list(self.workspace_hi)
        return d

    def replace(self, **overrides) -> "RunConfig":
        data = asdict(self)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(**data)


def load_config(path=None, **overrides) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise InvalidArgument(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidArgument(f"config {path} must be a mapping")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
    for key in ("workspace_lo", "workspace_hi"):
        if key in data:
            data[key] = tuple(data[key])
    cfg = RunConfig(**data).replace(**overrides)
    return cfg.validate()
