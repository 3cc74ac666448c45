"""Dynamic history backtracking: decide, roll back, re-run.

Per step the controller looks at the policy's signals. A raised completion
flag advances to the next subtask no matter what R says. Otherwise a low R
(below the ``x`` threshold) or a run of ``window`` consecutive strict
decreases sends the agent back to where the current subtask started, charging
the return path to the odometer, and asks the planner for a replacement.
A bounded replan budget per position guarantees termination.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import InvalidMultiplier, UnknownViewpoint
from .policies import InstructionPair, MoveTo, Observation, StepRecord
from .sim.navgraph import NavGraph, SimState, apply_action

#: mean actions per subtask observed in the three source corpora
DATASET_D_AVG = {"R2R": 2.35, "REVERIE": 3.57, "ALFRED": 8.26}
#: per-corpus default window multipliers (R2R subtasks are short, so 2x)
DATASET_W_MULTIPLIER = {"R2R": 2.0, "REVERIE": 1.0, "ALFRED": 1.0}

DEFAULT_X = 0.25
DEFAULT_MAX_REPLANS = 3


def window_for(dataset_or_davg: str | float, w_multiplier: float | None = None) -> int:
    """Trigger window W = ceil(multiplier * average subtask length).

    Accepts a known dataset tag (using its default multiplier when none is
    given) or a numeric average directly. ceil keeps a fractional product
    from triggering earlier than intended.
    """
    if isinstance(dataset_or_davg, str):
        try:
            d_avg = DATASET_D_AVG[dataset_or_davg]
        except KeyError as exc:
            raise KeyError(f"no default subtask length for dataset {dataset_or_davg!r}") from exc
        if w_multiplier is None:
            w_multiplier = DATASET_W_MULTIPLIER[dataset_or_davg]
    else:
        d_avg = float(dataset_or_davg)
        if w_multiplier is None:
            w_multiplier = 1.0
    if w_multiplier <= 0:
        raise InvalidMultiplier(f"w_multiplier must be > 0, got {w_multiplier}")
    if d_avg <= 0:
        raise InvalidMultiplier(f"average subtask length must be > 0, got {d_avg}")
    return max(1, math.ceil(w_multiplier * d_avg))


@dataclass
class BacktrackConfig:
    """Inner-loop control knobs.

    ``max_steps`` defaults to four windows per subtask attempt; ``enabled``
    False turns the whole recovery mechanism off (the ablation baseline).
    """

    window: int
    x: float = DEFAULT_X
    max_replans: int = DEFAULT_MAX_REPLANS
    max_steps: int | None = None
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 < self.x < 1.0:
            raise ValueError(f"x must be in (0, 1), got {self.x}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.max_replans < 0:
            raise ValueError(f"max_replans must be >= 0, got {self.max_replans}")

    @property
    def steps_per_subtask(self) -> int:
        return self.max_steps if self.max_steps is not None else 4 * self.window

    @classmethod
    def for_dataset(cls, dataset: str, w_multiplier: float | None = None, **kwargs) -> "BacktrackConfig":
        return cls(window=window_for(dataset, w_multiplier), **kwargs)


@dataclass
class SubtaskTrace:
    """Progress record of the current subtask attempt."""

    start_viewpoint: str
    subtask: str
    r_history: list[float] = field(default_factory=list)
    action_count: int = 0
    replans_used: int = 0


class Verdict(enum.Enum):
    ADVANCE = "advance"
    BACKTRACK = "backtrack"
    CONTINUE = "continue"
    FAIL_EPISODE = "fail_episode"


class SubtaskOutcome(enum.Enum):
    COMPLETED = "completed"
    BACKTRACKED = "backtracked"
    EPISODE_FAILED = "episode_failed"


def _decreasing_run(values: list[float]) -> int:
    """Length of the strictly-decreasing run ending at the last value."""
    run = 0
    for a, b in zip(reversed(values[:-1]), reversed(values[1:])):
        if b < a:
            run += 1
        else:
            break
    return run


def decide(s: int, trace: SubtaskTrace, cfg: BacktrackConfig) -> Verdict:
    """Classify the step. Total; priority order is fixed.

    S=1 advances unconditionally. Otherwise the last R below ``x`` or
    ``window`` consecutive strict decreases (ties and rises reset the run)
    trigger a backtrack, escalating to episode failure once the replan budget
    at this position is spent.
    """
    if s == 1:
        return Verdict.ADVANCE
    r = trace.r_history
    triggered = bool(r) and (r[-1] < cfg.x or _decreasing_run(r) >= cfg.window)
    if not triggered:
        return Verdict.CONTINUE
    if trace.replans_used >= cfg.max_replans:
        return Verdict.FAIL_EPISODE
    return Verdict.BACKTRACK


def rollback(graph: NavGraph, state: SimState, trace: SubtaskTrace) -> SimState:
    """Walk the agent back to the subtask's start viewpoint.

    The return takes the shortest path and is charged to the odometer and
    trajectory like any other movement. R history clears, the position's
    replan counter ticks up, completed history is untouched.
    """
    if trace.start_viewpoint not in graph.viewpoints:
        raise UnknownViewpoint(f"no viewpoint {trace.start_viewpoint!r}")
    if state.position != trace.start_viewpoint:
        path, length = graph.shortest_path(state.position, trace.start_viewpoint)
        state.trajectory.extend(path[1:])
        state.traveled += length
        state.position = trace.start_viewpoint
    trace.r_history.clear()
    trace.action_count = 0
    trace.replans_used += 1
    return state


def run_subtask(policy, graph: NavGraph, state: SimState,
                instruction: InstructionPair, cfg: BacktrackConfig,
                replans_used: int = 0,
                step_log: list[StepRecord] | None = None,
                log_offset: int = 0) -> tuple[SubtaskOutcome, SubtaskTrace]:
    """Drive the policy until the subtask completes, backtracks, or fails.

    Exceeding the per-subtask step budget counts as a backtrack trigger; with
    backtracking disabled it fails the episode instead (no recovery path).
    """
    trace = SubtaskTrace(state.position, instruction.subtask, replans_used=replans_used)
    actions = []
    step = 0
    while True:
        step += 1
        obs = Observation(state.position, graph.neighbors(state.position),
                          graph.viewpoints[state.position].caption)
        out = policy.step(instruction, obs, actions, step)
        if isinstance(out.action, MoveTo):
            apply_action(graph, state, out.action)
        actions.append(out.action)
        trace.r_history.append(out.r)
        trace.action_count += 1
        if step_log is not None:
            step_log.append(StepRecord(log_offset + len(actions), state.position,
                                       str(out.action), out.s, out.r, instruction.subtask))
        if cfg.enabled:
            verdict = decide(out.s, trace, cfg)
        else:
            verdict = Verdict.ADVANCE if out.s == 1 else Verdict.CONTINUE
        if verdict is Verdict.ADVANCE:
            return SubtaskOutcome.COMPLETED, trace
        if verdict is Verdict.FAIL_EPISODE:
            return SubtaskOutcome.EPISODE_FAILED, trace
        if verdict is Verdict.BACKTRACK:
            rollback(graph, state, trace)
            return SubtaskOutcome.BACKTRACKED, trace
        if step >= cfg.steps_per_subtask:
            if not cfg.enabled or trace.replans_used >= cfg.max_replans:
                return SubtaskOutcome.EPISODE_FAILED, trace
            rollback(graph, state, trace)
            return SubtaskOutcome.BACKTRACKED, trace
