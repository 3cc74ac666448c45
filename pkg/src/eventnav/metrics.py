"""Standard navigation metric suite.

All distances are geodesic over the viewpoint graph: agents live on the
graph, so "within 3 meters" means 3 meters of travel, not of straight line.
Path-length weighting uses l / max(p, l) with l the shortest start-to-goal
length and p the length actually traveled (rollback returns included).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LengthMismatch
from .sim.navgraph import NavGraph
from .runner import EpisodeResult
from .sim.world import Episode


@dataclass(frozen=True)
class MetricsReport:
    """Suite means. SR/SPL/OSR/GC/PLWSR/PLWGC are fractions, NE/TL meters."""

    episodes: int
    sr: float
    ne: float
    tl: float
    spl: float
    osr: float
    gc: float
    plwsr: float
    plwgc: float

    def as_row(self) -> dict[str, float]:
        return {
            "SR": self.sr, "NE": self.ne, "TL": self.tl, "SPL": self.spl,
            "OSR": self.osr, "GC": self.gc, "PLWSR": self.plwsr, "PLWGC": self.plwgc,
        }


def episode_scores(result: EpisodeResult, episode: Episode,
                   graph: NavGraph) -> dict[str, float]:
    """Per-episode metric contributions; the report is their mean."""
    to_goal = graph.distances_from(episode.goal)
    shortest = graph.shortest_path(episode.start, episode.goal)[1]
    taken = result.traveled
    ratio = shortest / max(taken, shortest) if max(taken, shortest) > 0 else 1.0
    sr = 1.0 if result.success else 0.0
    ne = to_goal[result.final_position]
    osr = 1.0 if any(
        to_goal.get(v, float("inf")) <= episode.success_radius for v in result.trajectory
    ) else 0.0
    targets = [vp for _, vp in episode.gt_subtasks]
    pointer = 0
    for v in result.trajectory:
        if pointer < len(targets) and v == targets[pointer]:
            pointer += 1
    gc = pointer / len(targets) if targets else 1.0
    return {
        "SR": sr,
        "NE": ne,
        "TL": taken,
        "SPL": sr * ratio,
        "OSR": osr,
        "GC": gc,
        "PLWSR": sr * ratio,
        "PLWGC": gc * ratio,
    }


def compute_metrics(results: list[EpisodeResult], episodes: list[Episode],
                    graph: NavGraph) -> MetricsReport:
    """Aggregate a suite. Results must align with episodes one-to-one."""
    if len(results) != len(episodes):
        raise LengthMismatch(f"{len(results)} results for {len(episodes)} episodes")
    for result, episode in zip(results, episodes):
        if result.episode_id != episode.id:
            raise LengthMismatch(
                f"result {result.episode_id!r} does not match episode {episode.id!r}"
            )
    if not results:
        return MetricsReport(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    totals = {"SR": 0.0, "NE": 0.0, "TL": 0.0, "SPL": 0.0,
              "OSR": 0.0, "GC": 0.0, "PLWSR": 0.0, "PLWGC": 0.0}
    for result, episode in zip(results, episodes):
        for key, value in episode_scores(result, episode, graph).items():
            totals[key] += value
    n = len(results)
    return MetricsReport(
        episodes=n,
        sr=totals["SR"] / n,
        ne=totals["NE"] / n,
        tl=totals["TL"] / n,
        spl=totals["SPL"] / n,
        osr=totals["OSR"] / n,
        gc=totals["GC"] / n,
        plwsr=totals["PLWSR"] / n,
        plwgc=totals["PLWGC"] / n,
    )
