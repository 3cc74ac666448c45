"""Supervision schedules, scripted policies, and signal semantics."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventnav.errors import InvalidW, NoPath
from eventnav.policies import (
    InstructionPair,
    MoveTo,
    Observation,
    OraclePolicy,
    Stop,
    StepOutput,
    TargetResolver,
    Trajectory,
    noisy_policy,
    record_step,
    supervision_schedule,
)
from eventnav.sim import Episode, NavGraph, generate_episodes, generate_world


def line_world(n=5, spacing=1.0):
    g = NavGraph()
    for i in range(n):
        g.add_viewpoint(f"v{i}", i * spacing, 0.0, 0.0, f"marker {i:04d}")
    for i in range(n - 1):
        g.add_edge(f"v{i}", f"v{i+1}")
    return g


def line_episode(start="v0", goal="v4", world=None):
    world = world or line_world()
    gt = [(f"walk to {world.viewpoints[goal].caption}", goal)]
    return Episode("ep0", start, goal, f"go to {world.viewpoints[goal].caption}", gt)


def drive(policy, world, episode, subtask, start):
    """Run one subtask to completion; returns (positions, outputs)."""
    instruction = InstructionPair(episode.coarse_instruction, subtask)
    pos = start
    outputs = []
    for step in range(1, 100):
        obs = Observation(pos, world.neighbors(pos), world.viewpoints[pos].caption)
        out = policy.step(instruction, obs, [o.action for o in outputs], step)
        outputs.append(out)
        if isinstance(out.action, MoveTo):
            pos = out.action.target
        if out.s == 1:
            return pos, outputs
    raise AssertionError("subtask did not complete")


class TestSchedule:
    def test_w2_positive(self):
        assert supervision_schedule(2, "positive") == [0.75, 1.0]

    def test_w2_negative(self):
        assert supervision_schedule(2, "negative") == [0.25, 0.0]

    def test_w1_positive_is_exactly_one(self):
        assert supervision_schedule(1, "positive") == [1.0]

    def test_closed_form_all_w(self):
        for w in range(1, 65):
            pos = supervision_schedule(w, "positive")
            neg = supervision_schedule(w, "negative")
            assert pos == [min(1.0, 0.5 + i / (2 * w)) for i in range(1, w + 1)]
            assert neg == [max(0.0, 0.5 - i / (2 * w)) for i in range(1, w + 1)]
            assert pos[-1] == 1.0
            assert len(pos) == len(neg) == w

    @settings(max_examples=100, deadline=None)
    @given(w=st.integers(1, 200), r0=st.floats(0.0, 1.0))
    def test_bounds_and_monotonicity(self, w, r0):
        pos = supervision_schedule(w, "positive", r_start=r0)
        neg = supervision_schedule(w, "negative", r_start=r0)
        assert all(0.0 <= v <= 1.0 for v in pos + neg)
        assert all(b >= a for a, b in zip(pos, pos[1:]))
        assert all(b <= a for a, b in zip(neg, neg[1:]))

    def test_invalid_w(self):
        with pytest.raises(InvalidW):
            supervision_schedule(0)


class TestRecordStep:
    def test_lengths_stay_equal_and_prefix_preserved(self):
        traj = Trajectory()
        obs = Observation("v0", ("v1",), "c")
        record_step(traj, StepOutput(MoveTo("v1"), 0, 0.6), obs)
        assert len(traj.outputs) == len(traj.observations) == 1
        first = traj.outputs[0]
        record_step(traj, StepOutput(Stop(), 1, 1.0), obs)
        assert traj.outputs[0] is first
        assert len(traj) == 2

    def test_r_clamped_on_construction(self):
        assert StepOutput(Stop(), 0, 1.7).r == 1.0
        assert StepOutput(Stop(), 0, -0.2).r == 0.0


class TestResolver:
    def test_exact_and_caption_and_unknown(self):
        world = line_world()
        episode = line_episode()
        resolver = TargetResolver(world, episode)
        assert resolver.resolve("walk to marker 0004") == "v4"
        assert resolver.resolve("please approach marker 0002 now") == "v2"
        assert resolver.resolve(episode.coarse_instruction) == "v4"
        assert resolver.resolve("completely unrelated text") is None


class TestOraclePolicy:
    def test_at_target_is_immediate_stop(self):
        world = line_world()
        episode = line_episode(start="v4")
        policy = OraclePolicy(world, episode)
        pos, outputs = drive(policy, world, episode, episode.gt_subtasks[0][0], "v4")
        assert outputs == [StepOutput(Stop(), 1, 1.0)]

    def test_three_hop_r_trace(self):
        world = line_world()
        episode = Episode("e", "v0", "v3", "go to marker 0003",
                          [("walk to marker 0003", "v3")])
        policy = OraclePolicy(world, episode)
        pos, outputs = drive(policy, world, episode, "walk to marker 0003", "v0")
        assert pos == "v3"
        assert [o.r for o in outputs] == [0.5 + 1 / 6, 0.5 + 2 / 6, 1.0]
        assert [o.s for o in outputs] == [0, 0, 1]

    def test_completes_in_exact_shortest_steps(self):
        world = generate_world(60, 4.5, seed=3)
        for episode in generate_episodes(world, 5, seed=4):
            policy = OraclePolicy(world, episode)
            for subtask, target in episode.gt_subtasks:
                start = episode.start if target == episode.gt_subtasks[0][1] else prev
                expect = world.hop_count(start, target)
                pos, outputs = drive(policy, world, episode, subtask, start)
                moves = sum(isinstance(o.action, MoveTo) for o in outputs)
                assert pos == target and moves == expect
                prev = target

    def test_unreachable_target_raises(self):
        world = line_world()
        world.add_viewpoint("island", 50.0, 50.0, 0.0, "far island 9999")
        episode = Episode("e", "v0", "v4", "go to marker 0004",
                          [("walk to far island 9999", "island")])
        policy = OraclePolicy(world, episode)
        instruction = InstructionPair(episode.coarse_instruction, "walk to far island 9999")
        obs = Observation("v0", world.neighbors("v0"), "c")
        with pytest.raises(NoPath):
            policy.step(instruction, obs, [], 1)

    def test_unresolvable_subtask_signals_zero(self):
        world = line_world()
        episode = line_episode()
        policy = OraclePolicy(world, episode)
        obs = Observation("v0", world.neighbors("v0"), "c")
        out = policy.step(InstructionPair("c", "gibberish target"), obs, [], 1)
        assert out == StepOutput(Stop(), 0, 0.0)


class TestNoisyPolicy:
    def test_epsilon_zero_is_bit_identical_to_oracle(self):
        world = generate_world(80, 4.2, seed=9)
        for episode in generate_episodes(world, 4, seed=10):
            a = OraclePolicy(world, episode)
            b = noisy_policy(OraclePolicy(world, episode), 0.0, seed=123)
            pos = episode.start
            for subtask, target in episode.gt_subtasks:
                pa, outs_a = drive(a, world, episode, subtask, pos)
                pb, outs_b = drive(b, world, episode, subtask, pos)
                assert outs_a == outs_b
                assert pa == pb == target
                pos = target

    def test_fixed_seed_reproduces_trajectory(self):
        world = line_world()
        episode = Episode("e", "v2", "v0", "go to marker 0000",
                          [("walk to marker 0000", "v0")])
        runs = []
        for _ in range(2):
            policy = noisy_policy(OraclePolicy(world, episode), 1.0, seed=5)
            runs.append(drive(policy, world, episode, "walk to marker 0000", "v2"))
        assert runs[0] == runs[1]

    def test_frozen_trace_matches_independent_mirror(self):
        # derived by replaying the documented R rule against the same rng draws
        world = line_world()
        episode = Episode("e", "v2", "v0", "go to marker 0000",
                          [("walk to marker 0000", "v0")])
        policy = noisy_policy(OraclePolicy(world, episode), 1.0, seed=5)
        pos, outputs = drive(policy, world, episode, "walk to marker 0000", "v2")
        assert pos == "v0"
        assert [(o.action, o.r, o.s) for o in outputs] == [
            (MoveTo("v3"), 0.25, 0),
            (MoveTo("v2"), 0.5, 0),
            (MoveTo("v1"), 0.75, 0),
            (MoveTo("v0"), 1.0, 1),
        ]

    def test_r_tracks_distance_progress(self):
        world = generate_world(50, 4.5, seed=21)
        episode = generate_episodes(world, 1, seed=22)[0]
        policy = noisy_policy(OraclePolicy(world, episode), 0.7, seed=77)
        subtask, target = episode.gt_subtasks[0]
        instruction = InstructionPair(episode.coarse_instruction, subtask)
        pos = episode.start
        prev_r = 0.5
        for step in range(1, 60):
            obs = Observation(pos, world.neighbors(pos), world.viewpoints[pos].caption)
            out = policy.step(instruction, obs, [], step)
            if isinstance(out.action, MoveTo):
                before = world.geodesic(pos, target)
                after = world.geodesic(out.action.target, target)
                if after < before:
                    assert out.r >= prev_r
                else:
                    assert out.r <= prev_r
                pos = out.action.target
            prev_r = out.r
            if out.s == 1:
                break

    def test_epsilon_validated(self):
        world = line_world()
        with pytest.raises(ValueError):
            noisy_policy(OraclePolicy(world, line_episode()), 1.5, seed=0)
