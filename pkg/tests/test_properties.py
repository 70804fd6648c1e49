"""Property-based checks over random states and single actions."""

from __future__ import annotations

import random

from hypothesis import given, settings
from hypothesis import strategies as st

from linstab import buildlist, departure
from linstab.actions import sanitize
from linstab.io import state_from_json, state_to_json
from linstab.model import SystemState, is_weakly_connected, potential_phi
from linstab.sim import (Action, EventKind, InitialStateSpec, Simulator, generate_initial_state,
                         replay, state_digest)
from statefuzz import random_message, random_raw_state, random_staying_node

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def one_action(s: SystemState, rng: random.Random) -> Action:
    busy = [i for i, ch in s.channels.items() if ch]
    if busy and rng.random() < 0.7:
        i = rng.choice(busy)
        return Action(EventKind.DELIVER, i, index=rng.randrange(len(s.channels[i])))
    return Action(EventKind.TIMEOUT, rng.choice(sorted(s.nodes)))


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_phi_never_increases_in_one_step(seed):
    rng = random.Random(seed)
    s = random_raw_state(rng, star=False)
    before = potential_phi(s)
    sim = Simulator(s, "plus")
    sim.step(one_action(sim.state, rng))
    assert potential_phi(sim.state) <= before


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_one_step_keeps_weak_connectivity(seed):
    rng = random.Random(seed)
    s = random_raw_state(rng, star=False)
    if not is_weakly_connected(s, present_only=False):
        return
    sim = Simulator(s, "plus")
    sim.step(one_action(sim.state, rng))
    assert is_weakly_connected(sim.state, present_only=False)


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_staying_node_runs_the_base_protocol(seed):
    rng = random.Random(seed)
    ids = sorted(rng.sample(range(1, 30), rng.randint(1, 7)))
    node = random_staying_node(rng, ids)
    msg = random_message(rng, ids, star=False)
    assert departure.handle_star(node.copy(), msg) == buildlist.handle(node.copy(), msg)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_sanitize_is_idempotent(seed):
    rng = random.Random(seed)
    s = random_raw_state(rng, star=rng.random() < 0.5)
    for node in s.nodes.values():
        once = sanitize(node)
        assert sanitize(once) == once


@settings(max_examples=200, deadline=None)
@given(seeds, st.booleans())
def test_state_json_round_trip(seed, star):
    s = random_raw_state(random.Random(seed), star)
    assert state_digest(state_from_json(state_to_json(s))) == state_digest(s)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(["plus", "star"]))
def test_replay_reproduces_every_digest(seed, protocol):
    rng = random.Random(seed)
    n = rng.randint(2, 8)
    leaving = tuple(rng.sample(range(1, n + 1), rng.randint(0, n // 2))) if protocol == "star" else ()
    s = generate_initial_state(InitialStateSpec(n=n, seed=seed, corrupted=2, protocol=protocol,
                                                id_assignment="consecutive", leaving=leaving))
    sim = Simulator(s, protocol, seed=seed)
    sim.run(300)
    again = replay(sim.initial, sim.events, protocol)
    assert [e.digest for e in again.events] == [e.digest for e in sim.events]
