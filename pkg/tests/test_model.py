from __future__ import annotations

import random

import pytest

from linstab.messages import TempDelegate
from linstab.model import (Edge, Mode, NodeState, ReachIndex, SystemState, closest_neighbor_graph,
                           explicit_graph, is_weakly_connected, line_edges, network_graph,
                           potential_phi, reach_left, reach_right, reach_right_staying,
                           reach_right_staying_plus)
from oracle import _reach
from statefuzz import random_raw_state


def line_state(ids):
    s = SystemState.empty(ids)
    ids = sorted(ids)
    for a, b in zip(ids, ids[1:]):
        s.nodes[a].right.add(b)
        s.nodes[b].left.add(a)
    return s


def figure1_state():
    s = SystemState.empty([1, 2, 3])
    s.nodes[1].right.add(2)
    s.channels[2].append(TempDelegate(3))
    return s


class TestGraphs:
    def test_single_stored_reference(self):
        s = SystemState.empty([1, 2])
        s.nodes[1].right.add(2)
        assert network_graph(s) == [Edge(1, 2, True)]

    def test_single_channel_reference(self):
        s = SystemState.empty([1, 3])
        s.channels[1].append(TempDelegate(3))
        assert network_graph(s) == [Edge(1, 3, False)]

    def test_three_node_instance(self):
        s = figure1_state()
        assert sorted(network_graph(s)) == [Edge(1, 2, True), Edge(2, 3, False)]
        assert explicit_graph(s) == {(1, 2)}

    def test_messages_only_give_empty_eng(self):
        s = SystemState.empty([1, 2, 3])
        for i in (1, 2, 3):
            s.channels[i].append(TempDelegate(1 + i % 3))
        assert explicit_graph(s) == set()

    def test_line_has_bidirected_edges(self):
        assert explicit_graph(line_state([1, 2, 3])) == {(1, 2), (2, 1), (2, 3), (3, 2)}
        assert line_edges([1, 2, 3]) == {(1, 2), (2, 1), (2, 3), (3, 2)}

    def test_closest_neighbor_graph(self):
        s = SystemState.empty([5, 7, 9])
        s.nodes[5].right |= {7, 9}
        assert closest_neighbor_graph(s) == {(5, 7)}
        assert closest_neighbor_graph(SystemState.empty([1, 2])) == set()

    def test_closest_neighbor_graph_of_line_supergraph(self):
        s = line_state([1, 2, 3, 4])
        s.nodes[1].right |= {3, 4}
        s.nodes[4].left.add(2)
        assert closest_neighbor_graph(s) == line_edges([1, 2, 3, 4])

    def test_weak_connectivity_counts_implicit_edges(self):
        s = figure1_state()
        assert is_weakly_connected(s)
        s.channels[2].clear()
        assert not is_weakly_connected(s)


class TestPhi:
    def test_line_is_minimal(self):
        assert potential_phi(line_state([1, 2, 3])) == 4

    def test_empty_sets(self):
        assert potential_phi(SystemState.empty([1, 2, 3])) == 12

    def test_pair(self):
        assert potential_phi(line_state([4, 8])) == 2

    def test_tiny_populations(self):
        assert potential_phi(SystemState.empty([1])) == 0
        assert potential_phi(SystemState.empty([])) == 0

    def test_bounds_on_random_states(self):
        rng = random.Random(3)
        for _ in range(200):
            s = random_raw_state(rng, star=False)
            n = len(s.nodes)
            if n < 2:
                continue
            assert 2 * (n - 1) <= potential_phi(s) <= 2 * n * (n - 1)


class TestReach:
    def test_line(self):
        s = line_state([1, 2, 3])
        assert reach_right(s, 1) == {2, 3}
        assert reach_right(s, 3) == set()
        assert reach_left(s, 3) == {1, 2}

    def test_staying_through_leaving_end(self):
        s = SystemState.empty([5, 7])
        s.nodes[5].mode = Mode.LEAVING
        s.nodes[5].right.add(7)
        assert reach_right_staying(s, 5) == {7}
        assert reach_right_staying_plus(s, 5) == {7}
        assert reach_right_staying_plus(s, 7) == {7}

    def test_leaving_intermediate_readings(self):
        s = line_state([1, 2, 3])
        s.nodes[2].mode = Mode.LEAVING
        both = ReachIndex(s, through_leaving=True)
        cut = ReachIndex(s, through_leaving=False)
        assert both.rs(1) == {3}
        assert cut.rs(1) == set()

    def test_temp_sets_excluded_from_staying_reach(self):
        s = SystemState.empty([1, 2])
        s.nodes[1].temp_right.add(2)
        assert reach_right(s, 1) == {2}
        assert reach_right_staying(s, 1) == set()

    def test_matches_graph_search(self):
        rng = random.Random(11)
        for _ in range(300):
            s = random_raw_state(rng, star=rng.random() < 0.5)
            idx = ReachIndex(s)
            for v in s.nodes:
                assert idx.r(v) == _reach(s, v, True, main_only=False)
                assert idx.l(v) == _reach(s, v, False, main_only=False)
                staying = {i for i, n in s.nodes.items() if n.staying and not n.exited}
                assert idx.rs(v) == _reach(s, v, True, main_only=True) & staying


def test_node_sanity_and_copy_independent():
    n = NodeState(5, left={3}, right={7})
    assert n.is_sane()
    c = n.copy()
    c.left.add(9)
    assert n.left == {3} and not c.is_sane()


@pytest.mark.parametrize("bad", [(1, 99)])
def test_dangling_references_reported(bad):
    s = SystemState.empty([1])
    s.nodes[1].right.add(bad[1])
    assert s.dangling_references() == [bad]
