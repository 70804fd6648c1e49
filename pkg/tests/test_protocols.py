"""Hand-executed action examples for the base, search and departure protocols."""

from __future__ import annotations

from collections import Counter

from linstab import buildlist, departure, search
from linstab.messages import (ForwardProbe, Introduce, Linearize, ProbeFail, ProbeSuccess,
                              RevAndLin, RevAndLinAck, RevAndLinReq, Search, Side, TempDelegate)
from linstab.model import Mode, NodeState, SystemState


def node(i, left=(), right=(), **kw):
    return NodeState(i, left=set(left), right=set(right), **kw)


def outbox(out):
    return Counter(out.outbox)


class TestTimeout:
    def test_introduces_pairs_and_self(self):
        out = buildlist.handle_timeout(node(5, [3], [7, 9]))
        assert outbox(out) == Counter({(7, Introduce(9, 5)): 1, (3, Introduce(5, None)): 1,
                                       (7, Introduce(5, None)): 1})

    def test_empty(self):
        assert buildlist.handle_timeout(node(5)).outbox == []

    def test_two_left(self):
        out = buildlist.handle_timeout(node(5, [1, 2]))
        assert outbox(out) == Counter({(2, Introduce(1, 5)): 1, (2, Introduce(5, None)): 1})

    def test_farthest_reading(self):
        out = buildlist.handle_timeout(node(5, [1, 2], [7, 9]), farthest_self_intro=True)
        assert (1, Introduce(5, None)) in out.outbox and (9, Introduce(5, None)) in out.outbox

    def test_reprobes_pending_batches(self):
        n = node(5, seq=2, seq_table={9: 2}, waiting_for={9: (Search(5, 9),)})
        out = buildlist.handle_timeout(n)
        assert out.outbox == [(5, ForwardProbe(5, 9, frozenset({5}), 2))]


class TestIntroduce:
    def test_with_partner(self):
        out = buildlist.handle(node(5), Introduce(3, 9))
        assert out.new_state.left == {3}
        assert outbox(out) == Counter({(9, Linearize(3)): 1, (5, TempDelegate(9)): 1})

    def test_bottom(self):
        out = buildlist.handle(node(5), Introduce(3, None))
        assert out.new_state.left == set()
        assert out.outbox == [(5, TempDelegate(3))]

    def test_self_dropped(self):
        assert buildlist.handle(node(5), Introduce(5, None)).outbox == []

    def test_equal_pair_degrades(self):
        assert buildlist.handle(node(5), Introduce(3, 3)).outbox == [(5, TempDelegate(3))]


class TestLinearize:
    def test_far_reference_delegated(self):
        out = buildlist.handle(node(9, [3, 5, 7]), Linearize(3))
        assert out.new_state.left == {5, 7}
        assert outbox(out) == Counter({(5, TempDelegate(3)): 1, (9, TempDelegate(3)): 1})

    def test_closest_kept(self):
        out = buildlist.handle(node(9, [7]), Linearize(7))
        assert out.new_state.left == {7}
        assert out.outbox == [(9, TempDelegate(7))]

    def test_empty_side(self):
        assert buildlist.handle(node(9), Linearize(3)).outbox == [(9, TempDelegate(3))]


class TestTempDelegate:
    def test_closer_stored(self):
        assert buildlist.handle(node(9, [3]), TempDelegate(5)).new_state.left == {3, 5}

    def test_farther_forwarded(self):
        out = buildlist.handle(node(9, [5]), TempDelegate(3))
        assert out.outbox == [(5, TempDelegate(3))] and out.new_state.left == {5}

    def test_empty_side(self):
        assert buildlist.handle(node(9), TempDelegate(3)).new_state.left == {3}

    def test_existing_is_noop(self):
        out = buildlist.handle(node(9, [5]), TempDelegate(5))
        assert out.new_state.left == {5} and out.outbox == []


class TestSearch:
    def test_init_bumps_once_per_batch(self):
        n = node(1)
        a = search.init_search(n, 42)
        assert a.new_state.seq == 1 and a.new_state.seq_table[42] == 1
        b = search.init_search(a.new_state, 42)
        assert b.new_state.seq == 1 and len(b.new_state.waiting_for[42]) == 2
        assert a.outbox == [] and b.outbox == []

    def test_init_own_id_resolves_by_self_probe(self):
        n = search.init_search(node(4), 4).new_state
        probe = buildlist.handle_timeout(n).outbox[0]
        assert probe == (4, ForwardProbe(4, 4, frozenset({4}), 1))
        out = buildlist.handle(n, probe[1])
        assert (4, ProbeSuccess(4, 1, 4)) in out.outbox

    def test_forward(self):
        out = buildlist.handle(node(5, right=[7, 9]), ForwardProbe(1, 9, frozenset({5}), 3))
        assert out.outbox == [(7, ForwardProbe(1, 9, frozenset({7, 9}), 3))]

    def test_success_at_destination(self):
        out = buildlist.handle(node(9), ForwardProbe(1, 9, frozenset({9}), 3))
        assert outbox(out) == Counter({(1, ProbeSuccess(9, 3, 9)): 1, (9, TempDelegate(1)): 1})

    def test_dead_end_fails(self):
        out = buildlist.handle(node(5), ForwardProbe(1, 9, frozenset({5}), 3))
        assert outbox(out) == Counter({(1, ProbeFail(9, 3)): 1, (5, TempDelegate(1)): 1})

    def test_probe_success_releases_batch(self):
        s1, s2 = Search(1, 9, 0), Search(1, 9, 1)
        n = node(1, seq=3, seq_table={9: 3}, waiting_for={9: (s1, s2)})
        out = buildlist.handle(n, ProbeSuccess(9, 3, 9))
        assert outbox(out) == Counter({(9, s1): 1, (9, s2): 1, (1, TempDelegate(9)): 1})
        assert 9 not in out.new_state.waiting_for

    def test_stale_success_ignored(self):
        n = node(1, seq=3, seq_table={9: 3}, waiting_for={9: (Search(1, 9),)})
        out = buildlist.handle(n, ProbeSuccess(9, 2, 9))
        assert out.outbox == [(1, TempDelegate(9))] and out.new_state.waiting_for[9]

    def test_empty_batch_success(self):
        assert buildlist.handle(node(1), ProbeSuccess(9, 0, 9)).outbox == [(1, TempDelegate(9))]

    def test_fail_drops_batch(self):
        s1, s2 = Search(1, 9, 0), Search(1, 9, 1)
        n = node(1, seq=3, seq_table={9: 3}, waiting_for={9: (s1, s2)})
        out = buildlist.handle(n, ProbeFail(9, 3))
        assert out.dropped == (s1, s2) and 9 not in out.new_state.waiting_for and out.outbox == []

    def test_stale_fail_ignored(self):
        n = node(1, seq=3, seq_table={9: 3}, waiting_for={9: (Search(1, 9),)})
        out = buildlist.handle(n, ProbeFail(9, 2))
        assert out.dropped == () and out.new_state.waiting_for[9]

    def test_empty_batch_fail(self):
        out = buildlist.handle(node(1, seq_table={9: 3}), ProbeFail(9, 3))
        assert out.dropped == () and out.outbox == []

    def test_search_delivery(self):
        m = Search(1, 9, 5)
        out = buildlist.handle(node(9), m)
        assert out.delivered == (m,) and out.outbox == [(9, TempDelegate(1))]
        assert buildlist.handle(node(9), m).delivered == (m,)

    def test_search_at_wrong_node(self):
        out = buildlist.handle(node(7), Search(1, 9))
        assert out.dropped == (Search(1, 9),) and out.outbox == [(7, TempDelegate(1))]


class TestDeparture:
    def test_nidec(self):
        s = SystemState.empty([1, 2])
        assert departure.nidec(s, 1)
        s.nodes[2].left.add(1)
        assert not departure.nidec(s, 1)
        s.nodes[2].left.clear()
        s.channels[2].append(TempDelegate(1))
        assert not departure.nidec(s, 1)

    def test_leaving_timeout_requests_reversal(self):
        n = node(5, [3], [7], mode=Mode.LEAVING)
        out = departure.timeout_star(n, oracle=False)
        assert outbox(out) == Counter({(3, RevAndLinReq(Side.RIGHT)): 1, (7, RevAndLinReq(Side.LEFT)): 1})

    def test_leaving_timeout_exits_under_oracle(self):
        n = node(5, [3], [7], mode=Mode.LEAVING)
        out = departure.timeout_star(n, oracle=True)
        assert outbox(out) == Counter({(3, Introduce(7, None)): 1, (7, Introduce(3, None)): 1})
        assert out.exited and out.new_state.neighbors() == set()

    def test_isolated_exit(self):
        out = departure.timeout_star(node(5, mode=Mode.LEAVING), oracle=True)
        assert out.exited and out.outbox == []

    def test_staying_timeout_is_base(self):
        n = node(5, [3], [7, 9])
        assert departure.timeout_star(n, oracle=True).outbox == buildlist.handle_timeout(n).outbox

    def test_req_right(self):
        out = departure.handle_star(node(5, right=[7]), RevAndLinReq(Side.RIGHT))
        tok = out.new_state.unique_values[7]
        assert out.outbox == [(7, RevAndLinAck(5, tok))]
        again = departure.handle_star(out.new_state, RevAndLinReq(Side.RIGHT))
        assert again.outbox == [(7, RevAndLinAck(5, tok))]

    def test_leaving_ignores_left_request(self):
        n = node(5, [3], mode=Mode.LEAVING)
        out = departure.handle_star(n, RevAndLinReq(Side.LEFT))
        assert out.outbox == [] and out.new_state.unique_values == {}

    def test_ack_at_leaving(self):
        out = departure.handle_star(node(7, right=[9], mode=Mode.LEAVING), RevAndLinAck(5, (5, 0)))
        assert out.new_state.temp_left == {5}
        assert out.outbox == [(5, RevAndLin(frozenset({9}), (5, 0)))]

    def test_ack_at_leaving_empty_side(self):
        out = departure.handle_star(node(7, mode=Mode.LEAVING), RevAndLinAck(5, (5, 0)))
        assert out.outbox == [(5, RevAndLin(frozenset(), (5, 0)))]

    def test_ack_at_staying(self):
        out = departure.handle_star(node(7), RevAndLinAck(5, (5, 0)))
        assert out.outbox == [(7, TempDelegate(5))]

    def test_rev_and_lin_staying_reverses(self):
        n = node(3, right=[5], unique_values={5: (3, 0)})
        out = departure.handle_star(n, RevAndLin(frozenset({7}), (3, 0)))
        assert out.new_state.right == {7}
        assert out.outbox == [(5, Introduce(3, None))]

    def test_rev_and_lin_leaving_lower_ignored(self):
        n = node(9, [5], mode=Mode.LEAVING, unique_values={5: (9, 0)})
        out = departure.handle_star(n, RevAndLin(frozenset({7}), (9, 0)))
        assert out.new_state.temp_left == {7} and out.new_state.left == {5}
        assert out.outbox == []

    def test_rev_and_lin_unknown_token(self):
        out = departure.handle_star(node(3, right=[5]), RevAndLin(frozenset({7}), (1, 1)))
        assert out.outbox == [(3, TempDelegate(7))] and out.new_state.right == {5}

    def test_leaving_destination_fails_probe(self):
        out = departure.handle_star(node(9, mode=Mode.LEAVING), ForwardProbe(1, 9, frozenset({9}), 3))
        assert (1, ProbeFail(9, 3)) in out.outbox

    def test_leaving_stores_temporarily(self):
        out = departure.handle_star(node(5, mode=Mode.LEAVING), TempDelegate(3))
        assert out.new_state.temp_left == {3} and out.new_state.left == set()

    def test_leaving_never_initiates(self):
        out = departure.init_search_star(node(5, mode=Mode.LEAVING), 9)
        assert out.new_state.waiting_for == {}
