"""Viewpoint graph: shortest paths with tie-breaks, state transitions, files."""

import math

import networkx as nx
import pytest

from eventnav.errors import (
    AlreadyStopped,
    FormatError,
    IllegalMove,
    NoPath,
    UnknownViewpoint,
)
from eventnav.policies import MoveTo, Stop
from eventnav.sim import NavGraph, SimState, apply_action, generate_world


def unit_square():
    g = NavGraph()
    g.add_viewpoint("a", 0.0, 0.0, 0.0, "corner a")
    g.add_viewpoint("b", 0.0, 1.0, 0.0, "corner b")
    g.add_viewpoint("c", 1.0, 0.0, 0.0, "corner c")
    g.add_viewpoint("d", 1.0, 1.0, 0.0, "corner d")
    for e in (("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")):
        g.add_edge(*e)
    return g


class TestShortestPath:
    def test_self_path(self):
        g = unit_square()
        assert g.shortest_path("a", "a") == (["a"], 0.0)

    def test_unit_square_two_edges_with_lexicographic_tie(self):
        g = unit_square()
        path, length = g.shortest_path("a", "d")
        assert length == 2.0
        assert path == ["a", "b", "d"]  # [a, c, d] has equal length; b < c

    def test_no_path(self):
        g = unit_square()
        g.add_viewpoint("island", 9.0, 9.0, 0.0, "island")
        with pytest.raises(NoPath):
            g.shortest_path("a", "island")
        with pytest.raises(NoPath):
            g.geodesic("island", "a")

    def test_unknown_viewpoint(self):
        with pytest.raises(UnknownViewpoint):
            unit_square().shortest_path("a", "zz")

    def test_path_length_accumulates_edge_lengths_in_order(self):
        g = generate_world(60, 4.5, seed=5)
        ids = sorted(g.viewpoints)
        path, length = g.shortest_path(ids[0], ids[-1])
        acc = 0.0
        for u, v in zip(path, path[1:]):
            acc += g.edge_length(u, v)
        assert acc == length

    def test_geodesics_match_networkx(self):
        g = generate_world(80, 4.2, seed=6)
        nxg = nx.Graph()
        for a, b in g.edges():
            nxg.add_edge(a, b, weight=g.edge_length(a, b))
        ids = sorted(g.viewpoints)
        src = ids[0]
        want = nx.single_source_dijkstra_path_length(nxg, src, weight="weight")
        got = g.distances_from(src)
        assert set(want) == set(got)
        for node, dist in want.items():
            assert got[node] == pytest.approx(dist, abs=1e-9)

    def test_next_hop_consistent_with_shortest_path(self):
        g = generate_world(60, 4.5, seed=7)
        ids = sorted(g.viewpoints)
        a, b = ids[0], ids[-1]
        path, _ = g.shortest_path(a, b)
        assert g.next_hop(a, b) == path[1]


class TestApply:
    def test_legal_hop_updates_odometer(self):
        g = unit_square()
        state = SimState("a")
        apply_action(g, state, MoveTo("b"))
        assert state.position == "b"
        assert state.traveled == pytest.approx(1.0)
        assert state.trajectory == ["a", "b"]

    def test_illegal_move(self):
        g = unit_square()
        with pytest.raises(IllegalMove):
            apply_action(g, SimState("a"), MoveTo("d"))

    def test_stop_freezes(self):
        g = unit_square()
        state = SimState("a")
        apply_action(g, state, Stop())
        assert state.stopped
        with pytest.raises(AlreadyStopped):
            apply_action(g, state, MoveTo("b"))
        with pytest.raises(AlreadyStopped):
            apply_action(g, state, Stop())


class TestWorldFile:
    def test_round_trip(self, tmp_path):
        g = generate_world(40, 4.5, seed=8)
        path = tmp_path / "world.jsonl"
        g.save(path)
        loaded = NavGraph.load(path)
        assert sorted(loaded.viewpoints) == sorted(g.viewpoints)
        for vid, vp in g.viewpoints.items():
            assert loaded.viewpoints[vid] == vp
        assert loaded.edges() == g.edges()

    def test_save_is_byte_deterministic(self, tmp_path):
        g = generate_world(30, 4.5, seed=9)
        p1, p2 = tmp_path / "w1.jsonl", tmp_path / "w2.jsonl"
        g.save(p1)
        g.save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_edge_reports_line(self, tmp_path):
        path = tmp_path / "world.jsonl"
        path.write_text(
            '{"format":"vln-world/1","record":"header"}\n'
            '{"caption":"x","id":"a","record":"viewpoint","x":0,"y":0,"z":0}\n'
            '{"a":"a","b":"ghost","record":"edge"}\n'
        )
        with pytest.raises(FormatError) as err:
            NavGraph.load(path)
        assert err.value.line == 3
