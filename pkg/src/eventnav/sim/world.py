"""Synthetic worlds and episodes for desk-scale runs.

Worlds are seeded random geometric graphs on a 30 m square (z=0), trimmed to
their largest connected component, with a deterministic caption per
viewpoint. Episodes pick start/goal pairs at least 6 m apart and plant a
ground-truth waypoint every three hops along the shortest path, so every
generated episode is solvable by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DegenerateWorld, FormatError, NoPath
from .navgraph import NavGraph

EPISODE_FORMAT = "vln-episodes/1"

_ADJECTIVES = (
    "red", "blue", "green", "amber", "violet", "teal", "ivory", "slate",
    "copper", "olive", "coral", "navy",
)
_LANDMARKS = (
    "sofa", "bookshelf", "counter", "stairwell", "doorway", "window",
    "fireplace", "cabinet", "planter", "bench", "archway", "pillar",
)


def _caption(index: int) -> str:
    adj = _ADJECTIVES[index % len(_ADJECTIVES)]
    obj = _LANDMARKS[(index // len(_ADJECTIVES)) % len(_LANDMARKS)]
    return f"the {adj} {obj} zone {index:04d}"


def generate_world(n: int, radius: float = 4.0, seed: int = 0,
                   box: float = 30.0) -> NavGraph:
    """Seeded random geometric world; largest connected component only."""
    if n < 2:
        raise DegenerateWorld(f"need at least 2 viewpoints, got {n}")
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, box, size=(n, 2))
    adjacency: dict[int, set[int]] = {i: set() for i in range(n)}
    for i in range(n):
        deltas = points[i + 1:] - points[i]
        close = np.flatnonzero(np.einsum("ij,ij->i", deltas, deltas) <= radius * radius)
        for off in close:
            j = i + 1 + int(off)
            adjacency[i].add(j)
            adjacency[j].add(i)

    seen: set[int] = set()
    best: list[int] = []
    for root in range(n):
        if root in seen:
            continue
        component = [root]
        seen.add(root)
        queue = [root]
        while queue:
            u = queue.pop()
            for v in adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    component.append(v)
                    queue.append(v)
        if len(component) > len(best):
            best = component
    if len(best) < 2:
        raise DegenerateWorld("largest connected component has fewer than 2 viewpoints")

    keep = sorted(best)
    graph = NavGraph()
    for i in keep:
        graph.add_viewpoint(f"vp{i:04d}", float(points[i, 0]), float(points[i, 1]), 0.0, _caption(i))
    for i in keep:
        for j in sorted(adjacency[i]):
            if j > i:  # neighbors of a kept node are in the same component
                graph.add_edge(f"vp{i:04d}", f"vp{j:04d}")
    return graph


@dataclass
class Episode:
    """One navigation task: start, goal, instruction, ground-truth chain."""

    id: str
    start: str
    goal: str
    coarse_instruction: str
    gt_subtasks: list[tuple[str, str]] = field(default_factory=list)
    success_radius: float = 3.0


def subtask_text(caption: str) -> str:
    return f"walk to {caption}"


def coarse_text(caption: str) -> str:
    return f"go to {caption}"


def generate_episodes(graph: NavGraph, m: int, seed: int = 0,
                      min_separation: float = 6.0, hop_spacing: int = 3,
                      success_radius: float = 3.0) -> list[Episode]:
    """Sample ``m`` solvable episodes; deterministic per seed."""
    rng = np.random.default_rng(seed)
    ids = sorted(graph.viewpoints)
    if len(ids) < 2:
        raise DegenerateWorld("world has fewer than 2 viewpoints")
    episodes: list[Episode] = []
    attempts = 0
    while len(episodes) < m:
        attempts += 1
        if attempts > 200 * m:
            raise DegenerateWorld(
                f"could not place {m} episodes with separation >= {min_separation}"
            )
        i, j = rng.choice(len(ids), size=2, replace=False)
        start, goal = ids[int(i)], ids[int(j)]
        try:
            if graph.geodesic(start, goal) < min_separation:
                continue
        except NoPath:  # pragma: no cover - world is one component
            continue
        path, _ = graph.shortest_path(start, goal)
        waypoints = path[hop_spacing::hop_spacing]
        if not waypoints or waypoints[-1] != goal:
            waypoints.append(goal)
        gt = [(subtask_text(graph.viewpoints[w].caption), w) for w in waypoints]
        episodes.append(Episode(
            id=f"ep{len(episodes):04d}",
            start=start,
            goal=goal,
            coarse_instruction=coarse_text(graph.viewpoints[goal].caption),
            gt_subtasks=gt,
            success_radius=success_radius,
        ))
    return episodes


def save_episodes(episodes: list[Episode], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"record": "header", "format": EPISODE_FORMAT},
                            sort_keys=True, separators=(",", ":")) + "\n")
        for ep in episodes:
            fh.write(json.dumps(
                {
                    "record": "episode",
                    "id": ep.id,
                    "start": ep.start,
                    "goal": ep.goal,
                    "coarse_instruction": ep.coarse_instruction,
                    "gt_subtasks": [[t, v] for t, v in ep.gt_subtasks],
                    "success_radius": ep.success_radius,
                },
                ensure_ascii=False, sort_keys=True, separators=(",", ":"),
            ) + "\n")


def load_episodes(path: str | Path) -> list[Episode]:
    episodes: list[Episode] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("empty episode file", 1)
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad JSON ({exc.msg})", lineno) from exc
        if lineno == 1:
            if rec.get("record") != "header" or rec.get("format") != EPISODE_FORMAT:
                raise FormatError(f"expected header with format {EPISODE_FORMAT!r}", lineno)
            continue
        if rec.get("record") != "episode":
            raise FormatError(f"unknown record kind {rec.get('record')!r}", lineno)
        try:
            episodes.append(Episode(
                id=rec["id"],
                start=rec["start"],
                goal=rec["goal"],
                coarse_instruction=rec["coarse_instruction"],
                gt_subtasks=[(t, v) for t, v in rec["gt_subtasks"]],
                success_radius=float(rec.get("success_radius", 3.0)),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad episode record: {exc}", lineno) from exc
    return episodes
