"""Inner action loop: agent policies and their completion signals.

A policy maps (instruction pair, observation, action history, step index
within the current subtask) to a :class:`StepOutput` carrying the action, a
binary "subtask complete" flag S, and a completion likelihood R in [0, 1].
Trained models would sit behind the same interface; this package ships a
shortest-path oracle and a seeded noisy wrapper around it, which are what the
test harnesses drive.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import InvalidW
from .textnorm import normalize_text

R_START = 0.5


def supervision_schedule(w: int, polarity: str = "positive",
                         r_start: float = R_START) -> list[float]:
    """Per-step R targets for a subtask that takes ``w`` actions.

    Positive trajectories ramp from ``r_start`` up by 1/(2w) per action and
    end at exactly 1.0; negative ones mirror downward. Values are clamped to
    [0, 1].
    """
    if w < 1:
        raise InvalidW(f"schedule length must be >= 1, got {w}")
    if polarity == "positive":
        values = [r_start + i / (2 * w) for i in range(1, w + 1)]
    elif polarity == "negative":
        values = [r_start - i / (2 * w) for i in range(1, w + 1)]
    else:
        raise ValueError(f"polarity must be 'positive' or 'negative', got {polarity!r}")
    return [min(1.0, max(0.0, v)) for v in values]


# --- step-level types -------------------------------------------------------

@dataclass(frozen=True)
class InstructionPair:
    """The textual input of the inner loop: coarse task + active subtask."""

    coarse: str
    subtask: str


@dataclass(frozen=True)
class Observation:
    viewpoint_id: str
    neighbors: tuple[str, ...]
    caption: str


@dataclass(frozen=True)
class MoveTo:
    target: str

    def __str__(self) -> str:
        return f"move:{self.target}"


@dataclass(frozen=True)
class Stop:
    def __str__(self) -> str:
        return "stop"


Action = MoveTo | Stop


@dataclass(frozen=True)
class StepOutput:
    action: Action
    s: int
    r: float

    def __post_init__(self):
        object.__setattr__(self, "r", min(1.0, max(0.0, self.r)))


@dataclass(frozen=True)
class StepRecord:
    """One trajectory-log line: where the agent ended up and what it signaled."""

    index: int
    viewpoint: str
    action: str
    s: int
    r: float
    subtask: str


@dataclass
class Trajectory:
    """Paired action/observation history; lengths stay equal by construction."""

    outputs: list[StepOutput] = field(default_factory=list)
    observations: list[Observation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.outputs)

    @property
    def actions(self) -> list[Action]:
        return [out.action for out in self.outputs]


def record_step(trajectory: Trajectory, output: StepOutput,
                observation: Observation) -> Trajectory:
    """Append one step; history is append-only."""
    trajectory.outputs.append(output)
    trajectory.observations.append(observation)
    return trajectory


# --- target grounding -------------------------------------------------------

class TargetResolver:
    """Ground a subtask text to a viewpoint.

    Exact match against the episode's own subtasks first, then caption
    containment (longest caption wins), so re-worded proposals that mention a
    viewpoint's caption still resolve. Unknown texts resolve to ``None``.
    """

    def __init__(self, world, episode):
        self._exact: dict[str, str] = {}
        for text, target in episode.gt_subtasks:
            self._exact[normalize_text(text)] = target
        self._exact.setdefault(normalize_text(episode.coarse_instruction), episode.goal)
        self._captions = sorted(
            ((normalize_text(vp.caption), vid) for vid, vp in world.viewpoints.items()),
            key=lambda item: (-len(item[0]), item[1]),
        )

    def resolve(self, subtask_text: str) -> str | None:
        norm = normalize_text(subtask_text)
        hit = self._exact.get(norm)
        if hit is not None:
            return hit
        for caption, vid in self._captions:
            if caption and caption in norm:
                return vid
        return None


# --- scripted policies ------------------------------------------------------

class OraclePolicy:
    """Walks the shortest path to the active subtask's target.

    Emits S=1 exactly on arrival and R along the positive supervision
    schedule with w = remaining hops at subtask start. A subtask it cannot
    ground gets R=0 so the controller backtracks instead of wandering.
    """

    def __init__(self, world, episode):
        self.world = world
        self.resolver = TargetResolver(world, episode)
        self._target: str | None = None
        self._w = 1
        self._i = 0

    def _begin(self, subtask: str, position: str) -> None:
        self._target = self.resolver.resolve(subtask)
        self._i = 0
        if self._target is not None:
            self._w = self.world.hop_count(position, self._target)

    def step(self, instruction: InstructionPair, obs: Observation,
             actions: list[Action], subtask_step: int) -> StepOutput:
        if subtask_step == 1:
            self._begin(instruction.subtask, obs.viewpoint_id)
        if self._target is None:
            return StepOutput(Stop(), 0, 0.0)
        if obs.viewpoint_id == self._target:
            return StepOutput(Stop(), 1, 1.0)
        nxt = self.world.next_hop(obs.viewpoint_id, self._target)
        self._i += 1
        w = max(self._w, self._i)
        r = R_START + self._i / (2 * w)
        return StepOutput(MoveTo(nxt), 1 if nxt == self._target else 0, r)


class NoisyPolicy:
    """Oracle with seeded per-step corruption.

    With probability ``epsilon`` a step is replaced by a uniformly random
    neighbor move. R tracks progress: +1/(2w) when the step reduced geodesic
    distance to the target, -1/(2w) otherwise, via a saturating counter so
    increments stay exact and an uncorrupted run is bit-identical to the
    oracle.
    """

    def __init__(self, oracle: OraclePolicy, epsilon: float, seed: int):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
        self.oracle = oracle
        self.world = oracle.world
        self.epsilon = epsilon
        self.rng = random.Random(seed)
        self._target: str | None = None
        self._w = 1
        self._net = 0

    def _begin(self, subtask: str, position: str) -> None:
        self._target = self.oracle.resolver.resolve(subtask)
        self._net = 0
        if self._target is not None:
            self._w = max(1, self.world.hop_count(position, self._target))

    def step(self, instruction: InstructionPair, obs: Observation,
             actions: list[Action], subtask_step: int) -> StepOutput:
        if subtask_step == 1:
            self._begin(instruction.subtask, obs.viewpoint_id)
        target = self._target
        if target is None:
            return StepOutput(Stop(), 0, 0.0)
        corrupted = self.epsilon > 0.0 and self.rng.random() < self.epsilon
        if not corrupted:
            if obs.viewpoint_id == target:
                return StepOutput(Stop(), 1, 1.0)
            action = MoveTo(self.world.next_hop(obs.viewpoint_id, target))
        else:
            action = MoveTo(self.rng.choice(list(obs.neighbors)))
        before = self.world.geodesic(obs.viewpoint_id, target)
        after = self.world.geodesic(action.target, target)
        self._net = min(self._w, max(-self._w, self._net + (1 if after < before else -1)))
        r = R_START + self._net / (2 * self._w)
        return StepOutput(action, 1 if action.target == target else 0, r)


def noisy_policy(oracle: OraclePolicy, epsilon: float, seed: int) -> NoisyPolicy:
    """Wrap an oracle in seeded corruption; epsilon=0 reproduces it exactly."""
    return NoisyPolicy(oracle, epsilon, seed)
