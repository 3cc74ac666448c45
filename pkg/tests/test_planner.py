"""Planner prompts, proposal parsing, and the propose/retry protocol."""

import pytest

from eventnav.embedding import HashingEmbedder
from eventnav.errors import DuplicateProposal, UnparseableProposal
from eventnav.kg import TaskSequence, build_graph
from eventnav.planner import (
    PlanningContext,
    build_replan_prompt,
    build_subtask_prompt,
    parse_proposal,
    propose_next,
)
from eventnav.retrieval import build_index, query


def ctx_with_knowledge():
    g = build_graph([
        TaskSequence("c", ["hub x", "spoke one"]),
        TaskSequence("c", ["hub x", "spoke two"]),
        TaskSequence("c", ["hub x", "spoke two"]),
    ])
    index = build_index(g, HashingEmbedder(64))
    hits = query(index, g, "hub x", 2)
    return PlanningContext("find the lamp", "a dim hallway", knowledge=hits)


class TestPrompts:
    def test_sections_in_fixed_order_and_deterministic(self):
        ctx = ctx_with_knowledge()
        prompt = build_subtask_prompt(ctx)
        assert prompt == build_subtask_prompt(ctx)
        positions = [prompt.index(h) for h in ("TASK:", "SCENE:", "HISTORY:", "KNOWLEDGE:")]
        assert positions == sorted(positions)
        assert prompt.splitlines()[-1].startswith("Reply with exactly one line")

    def test_empty_history_reads_none(self):
        ctx = PlanningContext("t", "s")
        assert "HISTORY:\nnone" in build_subtask_prompt(ctx)

    def test_empty_knowledge_reads_placeholder(self):
        ctx = PlanningContext("t", "s")
        assert "KNOWLEDGE:\nno relevant knowledge found" in build_subtask_prompt(ctx)

    def test_history_lines_carry_outcomes(self):
        ctx = PlanningContext("t", "s", history=[("step one", "completed"), ("step two", "backtracked")])
        prompt = build_subtask_prompt(ctx)
        assert "- step one [completed]" in prompt
        assert "- step two [backtracked]" in prompt

    def test_replan_lists_all_failures(self):
        ctx = PlanningContext("t", "s", failed=["try one"])
        prompt = build_replan_prompt(ctx, "try two")
        failed_section = prompt[prompt.index("FAILED:"):]
        assert "- try one" in failed_section and "- try two" in failed_section
        assert prompt == build_replan_prompt(ctx, "try two")

    def test_replan_does_not_duplicate_failed_entry(self):
        ctx = PlanningContext("t", "s", failed=["try one"])
        prompt = build_replan_prompt(ctx, "try one")
        assert prompt.count("- try one") == 1


class TestParseProposal:
    def test_next_line(self):
        p = parse_proposal("NEXT: enter the kitchen")
        assert (p.text, p.is_stop) == ("enter the kitchen", False)

    def test_done_tolerant(self):
        assert parse_proposal("  done ").is_stop
        assert parse_proposal("DONE").is_stop

    def test_case_insensitive_next(self):
        assert parse_proposal("next:  go left ").text == "go left"

    def test_prose_rejected(self):
        with pytest.raises(UnparseableProposal):
            parse_proposal("I think the agent should enter the kitchen")

    def test_empty_subtask_rejected(self):
        with pytest.raises(UnparseableProposal):
            parse_proposal("NEXT:   ")

    def test_empty_response_rejected(self):
        with pytest.raises(UnparseableProposal):
            parse_proposal("\n\n")


class _Canned:
    identity = "canned/1"

    def __init__(self, responses):
        self.responses = list(responses)
        self.prompts = []

    def complete(self, prompt):
        self.prompts.append(prompt)
        return self.responses.pop(0)


class TestProposeNext:
    def test_happy_path(self):
        backend = _Canned(["NEXT: x marks the spot"])
        p = propose_next(backend, PlanningContext("t", "s"))
        assert p.text == "x marks the spot"

    def test_retry_once_on_unparseable(self):
        backend = _Canned(["garbage", "NEXT: fine"])
        p = propose_next(backend, PlanningContext("t", "s"))
        assert p.text == "fine"
        assert len(backend.prompts) == 2
        assert "could not be parsed" in backend.prompts[1]

    def test_unparseable_after_retry_raises(self):
        backend = _Canned(["garbage", "still garbage"])
        with pytest.raises(UnparseableProposal):
            propose_next(backend, PlanningContext("t", "s"))

    def test_replan_rejects_duplicate_twice(self):
        ctx = PlanningContext("t", "s", failed=["go north"])
        backend = _Canned(["NEXT: go north", "NEXT: Go  North!"])
        with pytest.raises(DuplicateProposal):
            propose_next(backend, ctx, mode="replan", failed="go north")

    def test_replan_accepts_fresh_proposal_after_duplicate(self):
        ctx = PlanningContext("t", "s")
        backend = _Canned(["NEXT: go north", "NEXT: go south"])
        p = propose_next(backend, ctx, mode="replan", failed="go north")
        assert p.text == "go south"

    def test_replan_requires_failed(self):
        with pytest.raises(ValueError):
            propose_next(_Canned(["DONE"]), PlanningContext("t", "s"), mode="replan")

    def test_replan_accepted_never_matches_failed(self):
        # property over a small seeded space
        for seed in range(20):
            failed = f"blocked step {seed}"
            ctx = PlanningContext("t", "s", failed=[failed])
            backend = _Canned([f"NEXT: {failed}", f"NEXT: fresh step {seed}"])
            p = propose_next(backend, ctx, mode="replan", failed=failed)
            assert p.text != failed
