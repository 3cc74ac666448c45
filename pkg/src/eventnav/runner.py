"""The full two-loop episode: plan a subtask, execute it, recover, repeat.

The outer loop retrieves knowledge anchored on the last completed subtask
(the coarse instruction before anything is completed), asks the proposal
backend for the next subtask, and hands it to the inner loop. The inner loop
reports back completed / backtracked / failed; backtracked subtasks trigger a
re-plan at the same position. The episode ends on a stop proposal, a budget,
or an irrecoverable failure, and every component error is folded into a
failed result with a diagnostic rather than crashing the suite.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .backtrack import BacktrackConfig, SubtaskOutcome, run_subtask
from .errors import EventNavError
from .kg import EventGraph, TaskSequence
from .planner import (
    OUTCOME_BACKTRACKED,
    OUTCOME_COMPLETED,
    PlanningContext,
    propose_next,
)
from .policies import InstructionPair, StepRecord, Stop
from .retrieval import RetrievalIndex, query
from .sim.navgraph import NavGraph, SimState, apply_action
from .sim.world import Episode


@dataclass
class EpisodeResult:
    """Everything the metric suite and reports need about one episode."""

    episode_id: str
    success: bool
    stopped: bool
    trajectory: list[str]
    traveled: float
    final_position: str
    subtask_outcomes: list[tuple[str, str]] = field(default_factory=list)
    steps: int = 0
    replans: int = 0
    ended: str = ""
    diagnostic: str | None = None
    step_records: list[StepRecord] = field(default_factory=list)


def knowledge_sequence(episode: Episode, dataset: str = "custom") -> TaskSequence:
    """An episode's ground truth as one event chain.

    The coarse instruction heads the chain: receiving the instruction is the
    event that precedes the first subtask, which is exactly what the planner
    retrieves on at episode start.
    """
    return TaskSequence(
        coarse_text=episode.coarse_instruction,
        subtasks=[episode.coarse_instruction] + [t for t, _ in episode.gt_subtasks],
        dataset=dataset,
        record_id=episode.id,
    )


def knowledge_graph(episodes: list[Episode], dataset: str = "custom") -> EventGraph:
    """Event graph over a suite's ground-truth chains."""
    g = EventGraph()
    for ep in episodes:
        g.insert_sequence(knowledge_sequence(ep, dataset))
    return g


def derive_seed(*parts) -> int:
    """Stable per-item seed from a master seed and identifiers."""
    digest = hashlib.blake2b("|".join(repr(p) for p in parts).encode("utf-8"),
                             digest_size=8).digest()
    return int.from_bytes(digest, "big")


def suite_average_subtask_hops(world: NavGraph, episodes: list[Episode]) -> float:
    """Mean shortest-path hop count per ground-truth subtask across a suite."""
    hops = 0
    count = 0
    for ep in episodes:
        position = ep.start
        for _, target in ep.gt_subtasks:
            hops += world.hop_count(position, target)
            count += 1
            position = target
    if count == 0:
        return 1.0
    return hops / count


def run_episode(episode: Episode, world: NavGraph, policy, backend,
                cfg: BacktrackConfig, kg: EventGraph | None = None,
                index: RetrievalIndex | None = None, topk: int = 5,
                use_knowledge: bool = True, planner_enabled: bool = True,
                max_subtasks: int | None = None,
                max_episode_steps: int = 1000) -> EpisodeResult:
    """Run one episode end to end and score nothing: just record what happened.

    ``use_knowledge=False`` keeps the prompt skeleton but forces the
    knowledge section empty; ``planner_enabled=False`` skips the outer loop
    entirely and runs the coarse instruction as a single subtask.
    """
    state = SimState(position=episode.start)
    history: list[tuple[str, str]] = []
    outcomes: list[tuple[str, str]] = []
    step_records: list[StepRecord] = []
    total_replans = 0
    ended = ""
    diagnostic = None
    anchor = episode.coarse_instruction
    max_slots = max_subtasks if max_subtasks is not None else 2 * len(episode.gt_subtasks) + 2

    def scene() -> str:
        return world.viewpoints[state.position].caption

    try:
        if not planner_enabled:
            ended, total_replans = _run_direct(episode, world, policy, cfg, state,
                                               outcomes, step_records)
        else:
            slot = 0
            while True:
                if slot >= max_slots:
                    ended = "subtask-budget"
                    break
                if len(step_records) >= max_episode_steps:
                    ended = "step-budget"
                    break
                hits = []
                if use_knowledge and index is not None and len(index) > 0 and kg is not None:
                    hits = query(index, kg, anchor, topk)
                ctx = PlanningContext(episode.coarse_instruction, scene(), history, hits)
                proposal = propose_next(backend, ctx, "fresh")
                if proposal.is_stop:
                    ended = "done"
                    break
                slot += 1
                replans = 0
                while True:
                    instruction = InstructionPair(episode.coarse_instruction, proposal.text)
                    outcome, trace = run_subtask(
                        policy, world, state, instruction, cfg,
                        replans_used=replans, step_log=step_records,
                        log_offset=len(step_records),
                    )
                    if outcome is SubtaskOutcome.COMPLETED:
                        history.append((proposal.text, OUTCOME_COMPLETED))
                        outcomes.append((proposal.text, "completed"))
                        anchor = proposal.text
                        break
                    if outcome is SubtaskOutcome.EPISODE_FAILED:
                        outcomes.append((proposal.text, "failed"))
                        ended = "failed"
                        diagnostic = "inner loop exhausted its budget"
                        break
                    replans = trace.replans_used
                    total_replans += 1
                    history.append((proposal.text, OUTCOME_BACKTRACKED))
                    outcomes.append((proposal.text, "backtracked"))
                    ctx.failed.append(proposal.text)
                    ctx.replan_attempts = replans
                    proposal = propose_next(backend, ctx, "replan", failed=proposal.text)
                    if proposal.is_stop:
                        ended = "done"
                        break
                if ended:
                    break
    except EventNavError as exc:
        ended = "error"
        diagnostic = f"{type(exc).__name__}: {exc}"

    if ended == "done" and not state.stopped:
        apply_action(world, state, Stop())
    distance = world.geodesic(state.position, episode.goal)
    success = state.stopped and distance <= episode.success_radius
    return EpisodeResult(
        episode_id=episode.id,
        success=success,
        stopped=state.stopped,
        trajectory=list(state.trajectory),
        traveled=state.traveled,
        final_position=state.position,
        subtask_outcomes=outcomes,
        steps=len(step_records),
        replans=total_replans,
        ended=ended,
        diagnostic=diagnostic,
        step_records=step_records,
    )


def _run_direct(episode: Episode, world: NavGraph, policy, cfg: BacktrackConfig,
                state: SimState, outcomes: list[tuple[str, str]],
                step_records: list[StepRecord]) -> tuple[str, int]:
    """Planner-free baseline: the coarse instruction is the only subtask."""
    instruction = InstructionPair(episode.coarse_instruction, episode.coarse_instruction)
    replans = 0
    while True:
        outcome, trace = run_subtask(
            policy, world, state, instruction, cfg,
            replans_used=replans, step_log=step_records, log_offset=len(step_records),
        )
        if outcome is SubtaskOutcome.COMPLETED:
            outcomes.append((instruction.subtask, "completed"))
            return "done", replans
        if outcome is SubtaskOutcome.EPISODE_FAILED:
            outcomes.append((instruction.subtask, "failed"))
            return "failed", replans
        replans = trace.replans_used
        outcomes.append((instruction.subtask, "backtracked"))
