"""Metric viewpoint graph and the agent's mutable episode state.

Viewpoints sit at 3D positions; edges are undirected and weighted by the
Euclidean distance between their endpoints. Shortest paths are exact
(Dijkstra) with a deterministic tie-break: among equal-length paths the
lexicographically smallest viewpoint-id sequence wins. Distance maps are
cached per source, so per-step next-hop queries stay cheap.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import (
    AlreadyStopped,
    FormatError,
    IllegalMove,
    NoPath,
    UnknownViewpoint,
)
from ..policies import Action, MoveTo, Stop

WORLD_FORMAT = "vln-world/1"


@dataclass(frozen=True)
class Viewpoint:
    id: str
    x: float
    y: float
    z: float
    caption: str

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


class NavGraph:
    """Undirected metric navigation graph, immutable once populated."""

    def __init__(self) -> None:
        self.viewpoints: dict[str, Viewpoint] = {}
        self._adj: dict[str, dict[str, float]] = {}
        self._dist_cache: dict[str, dict[str, float]] = {}

    def add_viewpoint(self, vid: str, x: float, y: float, z: float, caption: str) -> None:
        if vid in self.viewpoints:
            raise ValueError(f"duplicate viewpoint id {vid!r}")
        self.viewpoints[vid] = Viewpoint(vid, float(x), float(y), float(z), caption)
        self._adj[vid] = {}
        self._dist_cache.clear()

    def add_edge(self, a: str, b: str) -> None:
        """Connect two viewpoints bidirectionally; length is their distance."""
        for vid in (a, b):
            if vid not in self.viewpoints:
                raise UnknownViewpoint(f"no viewpoint {vid!r}")
        if a == b:
            raise ValueError("self-edges are not allowed")
        pa, pb = self.viewpoints[a].position, self.viewpoints[b].position
        length = math.dist(pa, pb)
        self._adj[a][b] = length
        self._adj[b][a] = length
        self._dist_cache.clear()

    def neighbors(self, vid: str) -> tuple[str, ...]:
        if vid not in self.viewpoints:
            raise UnknownViewpoint(f"no viewpoint {vid!r}")
        return tuple(sorted(self._adj[vid]))

    def edge_length(self, a: str, b: str) -> float:
        try:
            return self._adj[a][b]
        except KeyError as exc:
            raise IllegalMove(f"{a!r} and {b!r} are not adjacent") from exc

    def edges(self) -> list[tuple[str, str]]:
        """Each undirected edge once, as a sorted pair, sorted."""
        return sorted({tuple(sorted((a, b))) for a, nbrs in self._adj.items() for b in nbrs})

    # --- shortest paths --------------------------------------------------

    def distances_from(self, source: str) -> dict[str, float]:
        """Geodesic distance from ``source`` to every reachable viewpoint."""
        if source not in self.viewpoints:
            raise UnknownViewpoint(f"no viewpoint {source!r}")
        cached = self._dist_cache.get(source)
        if cached is not None:
            return cached
        dist: dict[str, float] = {source: 0.0}
        heap: list[tuple[float, str]] = [(0.0, source)]
        done: set[str] = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self._adj[u].items():
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        self._dist_cache[source] = dist
        return dist

    def geodesic(self, a: str, b: str) -> float:
        """Length of the shortest path between two viewpoints."""
        if a not in self.viewpoints:
            raise UnknownViewpoint(f"no viewpoint {a!r}")
        d = self.distances_from(b).get(a)
        if d is None:
            raise NoPath(f"{a!r} cannot reach {b!r}")
        return d

    def next_hop(self, current: str, target: str) -> str:
        """First move of the tie-broken shortest path from current to target."""
        if current == target:
            return current
        dist = self.distances_from(target)
        if current not in dist:
            raise NoPath(f"{current!r} cannot reach {target!r}")
        best: tuple[float, str] | None = None
        for v in sorted(self._adj[current]):
            dv = dist.get(v)
            if dv is None:
                continue
            total = self._adj[current][v] + dv
            if best is None or total < best[0]:
                best = (total, v)
        if best is None:  # pragma: no cover - current in dist implies a neighbor is too
            raise NoPath(f"{current!r} cannot reach {target!r}")
        return best[1]

    def shortest_path(self, a: str, b: str) -> tuple[list[str], float]:
        """Minimal-length path from a to b and its length.

        Deterministic: at every step the smallest viewpoint id among the
        optimal next hops is chosen, so the returned node sequence is the
        lexicographically least among equal-length shortest paths.
        """
        if a == b:
            if a not in self.viewpoints:
                raise UnknownViewpoint(f"no viewpoint {a!r}")
            return [a], 0.0
        self.geodesic(a, b)  # raises NoPath / UnknownViewpoint early
        path = [a]
        length = 0.0
        current = a
        for _ in range(len(self.viewpoints)):
            nxt = self.next_hop(current, b)
            length += self._adj[current][nxt]
            path.append(nxt)
            current = nxt
            if current == b:
                return path, length
        raise RuntimeError("shortest-path reconstruction did not terminate")  # pragma: no cover

    def hop_count(self, a: str, b: str) -> int:
        """Number of actions the shortest path takes."""
        return len(self.shortest_path(a, b)[0]) - 1

    # --- persistence ------------------------------------------------------

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_dumps({"record": "header", "format": WORLD_FORMAT}) + "\n")
            for vid in sorted(self.viewpoints):
                vp = self.viewpoints[vid]
                fh.write(_dumps({
                    "record": "viewpoint", "id": vp.id,
                    "x": vp.x, "y": vp.y, "z": vp.z, "caption": vp.caption,
                }) + "\n")
            for a, b in self.edges():
                fh.write(_dumps({"record": "edge", "a": a, "b": b}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NavGraph":
        g = cls()
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise FormatError("empty world file", 1)
        for lineno, raw in enumerate(lines, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad JSON ({exc.msg})", lineno) from exc
            kind = rec.get("record")
            if lineno == 1:
                if kind != "header" or rec.get("format") != WORLD_FORMAT:
                    raise FormatError(f"expected header with format {WORLD_FORMAT!r}", lineno)
                continue
            try:
                if kind == "viewpoint":
                    g.add_viewpoint(rec["id"], rec["x"], rec["y"], rec["z"], rec["caption"])
                elif kind == "edge":
                    g.add_edge(rec["a"], rec["b"])
                else:
                    raise FormatError(f"unknown record kind {kind!r}", lineno)
            except (KeyError, ValueError, UnknownViewpoint) as exc:
                raise FormatError(str(exc), lineno) from exc
        return g


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


# --- episode state -----------------------------------------------------------

@dataclass
class SimState:
    """The agent's mutable position, odometer, and trajectory."""

    position: str
    traveled: float = 0.0
    trajectory: list[str] = field(default_factory=list)
    stopped: bool = False

    def __post_init__(self):
        if not self.trajectory:
            self.trajectory.append(self.position)


def apply_action(graph: NavGraph, state: SimState, action: Action) -> SimState:
    """Apply one action to the state.

    Moves must target a neighbor of the current viewpoint; a stop freezes the
    state and any further action raises :class:`AlreadyStopped`.
    """
    if state.stopped:
        raise AlreadyStopped("episode state is frozen")
    if isinstance(action, MoveTo):
        length = graph.edge_length(state.position, action.target)
        state.position = action.target
        state.traveled += length
        state.trajectory.append(action.target)
    elif isinstance(action, Stop):
        state.stopped = True
    else:  # pragma: no cover - exhaustive over Action
        raise TypeError(f"unknown action {action!r}")
    return state
