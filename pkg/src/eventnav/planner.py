"""Subtask planning loop: context assembly, prompting, proposal parsing.

The prompt is a fixed sequence of labeled sections (TASK, SCENE, HISTORY,
KNOWLEDGE, and FAILED when re-planning) closed by a one-line output contract.
Builders are pure functions of their inputs so every run is replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DuplicateProposal, UnparseableProposal
from .retrieval import RetrievalHit, format_knowledge
from .textnorm import normalize_text

OUTCOME_COMPLETED = "completed"
OUTCOME_BACKTRACKED = "backtracked"

PREAMBLE = "You plan indoor navigation one subtask at a time."
SECTION_TASK = "TASK:"
SECTION_SCENE = "SCENE:"
SECTION_HISTORY = "HISTORY:"
SECTION_KNOWLEDGE = "KNOWLEDGE:"
SECTION_FAILED = "FAILED:"
REPLAN_NOTE = "These subtasks could not be completed here. Propose a different subtask."
CONTRACT = 'Reply with exactly one line: "NEXT: <subtask>" or "DONE".'
EMPTY_HISTORY = "none"


@dataclass
class PlanningContext:
    """Everything the planner sees at one position.

    ``history`` holds (subtask, outcome) pairs and is append-only;
    ``failed`` lists proposals already rejected at the current position.
    """

    coarse_task: str
    scene_caption: str
    history: list[tuple[str, str]] = field(default_factory=list)
    knowledge: list[RetrievalHit] = field(default_factory=list)
    failed: list[str] = field(default_factory=list)
    replan_attempts: int = 0


@dataclass(frozen=True)
class SubtaskProposal:
    text: str
    is_stop: bool = False


def _history_block(history: list[tuple[str, str]]) -> str:
    if not history:
        return EMPTY_HISTORY
    return "\n".join(f"- {text} [{outcome}]" for text, outcome in history)


def build_subtask_prompt(ctx: PlanningContext) -> str:
    """Prompt asking for the next subtask given task, scene, history, knowledge."""
    return "\n".join(
        [
            PREAMBLE,
            f"{SECTION_TASK} {ctx.coarse_task}",
            f"{SECTION_SCENE} {ctx.scene_caption}",
            SECTION_HISTORY,
            _history_block(ctx.history),
            SECTION_KNOWLEDGE,
            format_knowledge(ctx.knowledge),
            CONTRACT,
        ]
    )


def build_replan_prompt(ctx: PlanningContext, failed_subtask: str) -> str:
    """Subtask prompt extended with every proposal rejected at this position."""
    failed = list(ctx.failed)
    if normalize_text(failed_subtask) not in {normalize_text(f) for f in failed}:
        failed.append(failed_subtask)
    return "\n".join(
        [
            PREAMBLE,
            f"{SECTION_TASK} {ctx.coarse_task}",
            f"{SECTION_SCENE} {ctx.scene_caption}",
            SECTION_HISTORY,
            _history_block(ctx.history),
            SECTION_KNOWLEDGE,
            format_knowledge(ctx.knowledge),
            SECTION_FAILED,
            "\n".join(f"- {text}" for text in failed),
            REPLAN_NOTE,
            CONTRACT,
        ]
    )


def parse_proposal(text: str) -> SubtaskProposal:
    """Parse a backend reply: "DONE" or "NEXT: <subtask>" (case-insensitive)."""
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.lower() == "done":
            return SubtaskProposal("", is_stop=True)
        lowered = line.lower()
        if lowered.startswith("next:"):
            subtask = line[len("next:"):].strip()
            if normalize_text(subtask):
                return SubtaskProposal(subtask)
            raise UnparseableProposal(f"empty subtask in {line!r}")
        raise UnparseableProposal(f"unrecognized reply line {line!r}")
    raise UnparseableProposal("empty response")


def propose_next(backend, ctx: PlanningContext, mode: str = "fresh",
                 failed: str | None = None) -> SubtaskProposal:
    """Build the prompt for ``mode``, call the backend, parse the reply.

    One retry with the parse error appended on an unparseable reply; in
    replan mode a proposal repeating a failed subtask is retried once and
    then surfaced as :class:`DuplicateProposal`.
    """
    if mode == "replan":
        if not failed:
            raise ValueError("replan mode requires the failed subtask")
        prompt = build_replan_prompt(ctx, failed)
        excluded = {normalize_text(f) for f in ctx.failed} | {normalize_text(failed)}
    elif mode == "fresh":
        prompt = build_subtask_prompt(ctx)
        excluded = set()
    else:
        raise ValueError(f"unknown mode {mode!r}")

    attempt_prompt = prompt
    last_error: Exception | None = None
    for attempt in range(2):
        response = backend.complete(attempt_prompt)
        try:
            proposal = parse_proposal(response)
        except UnparseableProposal as exc:
            last_error = exc
            attempt_prompt = (
                prompt + f"\nYour previous reply could not be parsed ({exc}). "
                "Reply with exactly one line."
            )
            continue
        if not proposal.is_stop and normalize_text(proposal.text) in excluded:
            last_error = DuplicateProposal(
                f"proposal {proposal.text!r} repeats a failed subtask"
            )
            attempt_prompt = (
                prompt + "\nYour previous proposal repeated a failed subtask. "
                "Propose a different one."
            )
            continue
        return proposal
    raise last_error if last_error is not None else UnparseableProposal("no attempts made")
