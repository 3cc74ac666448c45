"""Navigation-graph environment: the viewpoint world and generated episodes."""

from .navgraph import NavGraph, SimState, Viewpoint, apply_action
from .world import (
    Episode,
    coarse_text,
    generate_episodes,
    generate_world,
    load_episodes,
    save_episodes,
    subtask_text,
)

__all__ = [
    "NavGraph", "SimState", "Viewpoint", "apply_action",
    "Episode", "coarse_text", "generate_episodes", "generate_world",
    "load_episodes", "save_episodes", "subtask_text",
]
