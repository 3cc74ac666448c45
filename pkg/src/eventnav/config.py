"""Run configuration: one JSON file, validated up front, CLI-overridable.

Keys mirror the module knobs: ``paths.*`` for artifacts, ``backend.*`` for
the proposal backend, ``retrieval.*`` for the index, ``backtrack.*`` for the
controller, ``run.*`` for suite sizes and seeds, and ``datasets.*`` for
extraction field mappings. Anything absent falls back to a default that
matches the reported inference choices (topk 5, x 0.25).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .extraction import FieldMapping

BACKEND_MODES = ("mock", "replay", "remote")


@dataclass
class RunConfig:
    # paths
    kg: str | None = None
    index: str | None = None
    world: str | None = None
    episodes: str | None = None
    cassette: str | None = None
    report: str | None = None
    trajectories: str | None = None
    # backend
    mode: str = "mock"
    endpoint: str | None = None
    model: str = "default-model"
    record: bool = False
    # retrieval
    dimension: int = 256
    topk: int = 5
    # backtracking
    x: float = 0.25
    w_multiplier: float = 2.0
    d_avg: float | None = None
    max_replans: int = 3
    max_steps_per_subtask: int | None = None
    backtrack_enabled: bool = True
    # run / eval
    seed: int = 0
    jobs: int = 1
    epsilon: float = 0.3
    suites: int = 2
    episodes_per_suite: int = 12
    world_size: int = 100
    world_radius: float = 4.0
    max_episode_steps: int = 1000
    grid_x: tuple[float, ...] = (0.1, 0.25, 0.5)
    grid_w: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    # extraction
    mappings: dict[str, FieldMapping] = field(default_factory=dict)

    def validate(self) -> None:
        problems = []
        if self.topk < 1:
            problems.append("retrieval.topk must be >= 1")
        if self.dimension < 1:
            problems.append("retrieval.dim must be >= 1")
        if not 0.0 < self.x < 1.0:
            problems.append("backtrack.x must be in (0, 1)")
        if self.w_multiplier <= 0:
            problems.append("backtrack.w_multiplier must be > 0")
        if self.max_replans < 0:
            problems.append("backtrack.max_replans must be >= 0")
        if self.mode not in BACKEND_MODES:
            problems.append(f"backend.mode must be one of {BACKEND_MODES}")
        if self.mode == "remote" and not self.endpoint:
            problems.append("backend.mode=remote requires backend.endpoint")
        if self.mode == "replay" and not self.cassette:
            problems.append("backend.mode=replay requires paths.cassette")
        if self.jobs < 1:
            problems.append("run.jobs must be >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            problems.append("run.epsilon must be in [0, 1]")
        if problems:
            raise ConfigError("; ".join(problems))


_SECTION_KEYS = {
    "paths": {"kg", "index", "world", "episodes", "cassette", "report", "trajectories"},
    "backend": {"mode", "endpoint", "model", "record"},
    "retrieval": {"dim", "topk"},
    "backtrack": {"x", "w_multiplier", "d_avg", "max_replans",
                  "max_steps_per_subtask", "enabled"},
    "run": {"seed", "jobs", "epsilon", "suites", "episodes_per_suite",
            "world_size", "world_radius", "max_episode_steps", "grid_x", "grid_w"},
}

_RENAMES = {
    ("retrieval", "dim"): "dimension",
    ("backtrack", "enabled"): "backtrack_enabled",
}


def load_config(path: str | Path | None) -> RunConfig:
    """Read and validate a config file; ``None`` gives pure defaults."""
    cfg = RunConfig()
    if path is None:
        cfg.validate()
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")

    for section, keys in _SECTION_KEYS.items():
        block = raw.get(section, {})
        if not isinstance(block, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key, value in block.items():
            if key not in keys:
                raise ConfigError(f"unknown config key {section}.{key}")
            attr = _RENAMES.get((section, key), key)
            if attr in ("grid_x", "grid_w"):
                value = tuple(float(v) for v in value)
            setattr(cfg, attr, value)

    datasets = raw.get("datasets", {})
    if not isinstance(datasets, dict):
        raise ConfigError("config section 'datasets' must be an object")
    for tag, mapping in datasets.items():
        if not isinstance(mapping, dict):
            raise ConfigError(f"datasets.{tag} must be an object")
        unknown = set(mapping) - {"coarse_field", "subtasks_field", "paragraph_field"}
        if unknown:
            raise ConfigError(f"datasets.{tag} has unknown keys {sorted(unknown)}")
        cfg.mappings[tag] = FieldMapping(**mapping)

    extra = set(raw) - set(_SECTION_KEYS) - {"datasets"}
    if extra:
        raise ConfigError(f"unknown config sections {sorted(extra)}")
    cfg.validate()
    return cfg
