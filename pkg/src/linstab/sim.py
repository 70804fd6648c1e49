"""Deterministic executor of the asynchronous non-FIFO computation model.

One :class:`Simulator` owns a mutable :class:`SystemState`.  Each call to
:meth:`Simulator.step` picks one enabled action through a scheduler, applies it
atomically, appends an :class:`Event` to the trace and notifies observers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import buildlist, departure, search
from .actions import ActionOutcome, sanitize
from .messages import (BASE_KINDS, ForwardProbe, Introduce, Linearize, Message, ProbeFail,
                       ProbeSuccess, RevAndLin, RevAndLinAck, RevAndLinReq, Search, Side,
                       TempDelegate, from_json, refs, to_json)
from .model import Mode, NodeState, PairIndex, SystemState, is_weakly_connected, network_graph

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------- protocols

@dataclass(frozen=True)
class Protocol:
    name: str
    departure: bool
    timeout: Callable[[NodeState, bool], ActionOutcome]
    handle: Callable[[NodeState, Message], ActionOutcome]
    init_search: Callable[[NodeState, int, Optional[int]], ActionOutcome]


def _plus_init_search(n: NodeState, dest: int, tag: Optional[int]) -> ActionOutcome:
    return search.init_search(sanitize(n), dest, tag)


def _star_init_search(n: NodeState, dest: int, tag: Optional[int]) -> ActionOutcome:
    return departure.init_search_star(sanitize(n), dest, tag)


def make_protocol(name: str = "plus", farthest_self_intro: bool = False) -> Protocol:
    """``plus`` (Build-List+/Search+) or ``star`` (Build-List*/Search*).

    A name of the form ``mutant:<name>`` resolves to a deliberately broken
    variant from :mod:`linstab.mutants`.
    """
    f = farthest_self_intro
    if name == "plus":
        return Protocol("plus", False,
                        lambda n, oracle: buildlist.handle_timeout(n, f),
                        buildlist.handle, _plus_init_search)
    if name == "star":
        return Protocol("star", True,
                        lambda n, oracle: departure.timeout_star(n, oracle, f),
                        departure.handle_star, _star_init_search)
    if name.startswith("mutant:"):
        from .mutants import get_mutant

        return get_mutant(name.split(":", 1)[1])
    raise ValueError(f"unknown protocol {name!r}")


# --------------------------------------------------------------------------- events

class EventKind(str, Enum):
    TIMEOUT = "timeout"
    DELIVER = "deliver"
    INIT_SEARCH = "init_search"
    INJECT = "inject"
    LEAVE = "leave"


@dataclass
class Action:
    kind: EventKind
    actor: int
    index: Optional[int] = None          # channel position for DELIVER
    dest: Optional[int] = None           # destination id for INIT_SEARCH
    message: Optional[Message] = None    # payload for INJECT


@dataclass
class Event:
    step: int
    kind: EventKind
    actor: int
    index: Optional[int] = None
    dest: Optional[int] = None
    message: Optional[Message] = None
    tag: Optional[int] = None
    oracle: Optional[bool] = None
    exited: bool = False
    outbox_digest: str = ""
    digest: str = ""

    def to_json(self) -> dict:
        doc: Dict[str, Any] = {"step": self.step, "kind": self.kind.value, "actor": self.actor}
        if self.index is not None:
            doc["index"] = self.index
        if self.dest is not None:
            doc["dest"] = self.dest
        if self.message is not None:
            doc["message"] = to_json(self.message)
        if self.tag is not None:
            doc["tag"] = self.tag
        if self.oracle is not None:
            doc["oracle"] = self.oracle
        if self.exited:
            doc["exited"] = True
        doc["outbox_digest"] = self.outbox_digest
        doc["digest"] = self.digest
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Event":
        msg = doc.get("message")
        return cls(
            step=int(doc["step"]), kind=EventKind(doc["kind"]), actor=int(doc["actor"]),
            index=doc.get("index"), dest=doc.get("dest"),
            message=None if msg is None else from_json(msg),
            tag=doc.get("tag"), oracle=doc.get("oracle"), exited=bool(doc.get("exited", False)),
            outbox_digest=doc.get("outbox_digest", ""), digest=doc.get("digest", ""),
        )

    def action(self) -> Action:
        return Action(self.kind, self.actor, self.index, self.dest, self.message)


def _h(*parts: str) -> str:
    return hashlib.blake2b("|".join(parts).encode(), digest_size=16).hexdigest()


def _msg_key(m: Message) -> str:
    # frozenset reprs follow insertion history, so sort those fields
    if isinstance(m, (ForwardProbe, RevAndLin)):
        return json.dumps(to_json(m), sort_keys=True)
    return repr(m)


def constrained(m: Message) -> bool:
    """Messages some invariant or the legitimacy test talks about."""
    if isinstance(m, (TempDelegate, RevAndLinReq)):
        return False
    if isinstance(m, Introduce):
        return m.w is not None
    return True


def state_digest(s: SystemState) -> str:
    """Canonical digest of a full state (channels compared as multisets)."""
    parts = []
    for i in sorted(s.nodes):
        n = s.nodes[i]
        parts.append(repr((
            i, n.mode.value, n.exited, sorted(n.left), sorted(n.right),
            sorted(n.temp_left), sorted(n.temp_right), n.seq, sorted(n.seq_table.items()),
            sorted((d, tuple(repr(m) for m in b)) for d, b in n.waiting_for.items()),
            sorted(n.unique_values.items()), n.token_counter,
        )))
        parts.append(repr(sorted(_msg_key(m) for m in s.channels.get(i, ()))))
    return _h(*parts)


# --------------------------------------------------------------------------- schedulers

class Scheduler:
    """Chooses the next action.  ``None`` means the schedule is exhausted."""

    def choose(self, sim: "Simulator") -> Optional[Action]:
        raise NotImplementedError


class _FairBase(Scheduler):
    """Shared fairness enforcement.

    A node whose last timeout is ``fairness_bound - n`` steps old gets its
    timeout next, and a message that has sat through half the bound of
    deliveries from its own channel is delivered next.  Both guarantees hold
    independently of the random choices of the concrete scheduler.
    """

    def __init__(self, rng: random.Random):
        self.rng = rng
        self._oldest_seen = -1

    def _take_forced(self, sim: "Simulator") -> Optional[Action]:
        # timeouts first: message waits count visits to their own channel,
        # so a forced timeout never lengthens one, while a run of overdue
        # deliveries could otherwise starve every timer
        forced = self._forced_timeout(sim)
        if forced is not None:
            return forced
        due = sim.overdue_message()
        if due is not None:
            return Action(EventKind.DELIVER, due[0], index=due[1])
        return None

    def _forced_timeout(self, sim: "Simulator") -> Optional[Action]:
        present = sim.present_ids
        if not present:
            return None
        limit = max(1, sim.fairness_bound - len(present) - 1)
        # timestamps only grow, so a stale minimum is a safe lower bound
        if sim.step_index - self._oldest_seen < limit:
            return None
        last = sim.last_timeout
        oldest = min(present, key=lambda i: (last[i], i))
        self._oldest_seen = last[oldest]
        if sim.step_index - last[oldest] >= limit:
            return Action(EventKind.TIMEOUT, oldest)
        return None


class RandomFair(_FairBase):
    """Random choice over all enabled actions, with overdue forcing.

    Each node's timeout carries ``timeout_weight`` relative to one in-flight
    message.  Weights below one keep the backlog small without affecting
    fairness, which the overdue forcing guarantees on its own.
    """

    def __init__(self, rng: random.Random, timeout_weight: float = 1.0):
        super().__init__(rng)
        self.timeout_weight = timeout_weight

    def choose(self, sim: "Simulator") -> Optional[Action]:
        forced = self._take_forced(sim)
        if forced is not None:
            return forced
        present = sim.present_ids
        if not present:
            return None
        tw = self.timeout_weight * len(present)
        x = self.rng.random() * (tw + sim.in_flight)
        if x < tw or not sim.in_flight:
            return Action(EventKind.TIMEOUT, present[self.rng.randrange(len(present))])
        k = min(int(x - tw), sim.in_flight - 1)
        for i in present:
            c = len(sim.state.channels[i])
            if k < c:
                return Action(EventKind.DELIVER, i, index=k)
            k -= c
        raise AssertionError("message count out of sync")


class FairRoundRobin(_FairBase):
    """Visit nodes cyclically, alternating a timeout and a random delivery."""

    def __init__(self, rng: random.Random):
        super().__init__(rng)
        self._turn = 0

    def choose(self, sim: "Simulator") -> Optional[Action]:
        forced = self._take_forced(sim)
        if forced is not None:
            return forced
        present = sim.present_ids
        if not present:
            return None
        slot = self._turn % (2 * len(present))
        self._turn += 1
        i = present[slot // 2]
        ch = sim.state.channels[i]
        if slot % 2 == 1 and ch:
            return Action(EventKind.DELIVER, i, index=self.rng.randrange(len(ch)))
        return Action(EventKind.TIMEOUT, i)


class Adversary(Scheduler):
    """Replays a script of explicit operations, then optionally hands over.

    Script entries are dicts: ``{"op": "timeout", "node": u}``,
    ``{"op": "deliver", "node": u, "match": <message json>}`` (or ``"index"``),
    ``{"op": "init_search", "node": u, "dest": d}``,
    ``{"op": "inject", "node": u, "message": <message json>}`` and
    ``{"op": "leave", "node": u}``.
    """

    def __init__(self, script: Sequence[dict], then: Optional[Scheduler] = None):
        self.script = list(script)
        self.pos = 0
        self.then = then

    @property
    def script_done(self) -> bool:
        return self.pos >= len(self.script)

    def choose(self, sim: "Simulator") -> Optional[Action]:
        if self.pos >= len(self.script):
            return self.then.choose(sim) if self.then is not None else None
        op = self.script[self.pos]
        self.pos += 1
        kind = op["op"]
        node = int(op["node"])
        if kind == "timeout":
            return Action(EventKind.TIMEOUT, node)
        if kind == "deliver":
            ch = sim.state.channels[node]
            if "match" in op:
                want = from_json(op["match"])
                for k, m in enumerate(ch):
                    if m == want or (isinstance(m, Search) and isinstance(want, Search)
                                     and (m.v, m.dest_id) == (want.v, want.dest_id)):
                        return Action(EventKind.DELIVER, node, index=k)
                raise ValueError(f"script step {self.pos - 1}: no {want!r} in channel of {node}")
            return Action(EventKind.DELIVER, node, index=int(op.get("index", 0)))
        if kind == "init_search":
            return Action(EventKind.INIT_SEARCH, node, dest=int(op["dest"]))
        if kind == "inject":
            return Action(EventKind.INJECT, node, message=from_json(op["message"]))
        if kind == "leave":
            return Action(EventKind.LEAVE, node)
        raise ValueError(f"unknown script op {kind!r}")


class Replayer(Scheduler):
    def __init__(self, events: Sequence[Event]):
        self.events = list(events)
        self.pos = 0

    def choose(self, sim: "Simulator") -> Optional[Action]:
        if self.pos >= len(self.events):
            return None
        ev = self.events[self.pos]
        self.pos += 1
        return ev.action()


def make_scheduler(kind: str, rng: random.Random, script: Sequence[dict] = (),
                   then: Optional[str] = None, timeout_weight: float = 1.0) -> Scheduler:
    if kind == "random_fair":
        return RandomFair(rng, timeout_weight)
    if kind == "round_robin":
        return FairRoundRobin(rng)
    if kind == "adversary":
        return Adversary(script, make_scheduler(then, rng) if then else None)
    raise ValueError(f"unknown scheduler {kind!r}")


# --------------------------------------------------------------------------- observers

class Observer:
    """Read-only hook run between steps."""

    def on_start(self, sim: "Simulator") -> None:
        pass

    def on_step(self, sim: "Simulator", ev: Event, out: Optional[ActionOutcome]) -> None:
        pass


# --------------------------------------------------------------------------- simulator

def default_fairness_bound(s: SystemState) -> int:
    # forced timeouts alone cost about 4n deliveries per fb steps on a line,
    # so a factor of 4 saturates every channel; 8 leaves room for the
    # heavier traffic before convergence
    return 8 * (len(s.nodes) + s.message_count())


def convergence_budget(s: SystemState, fairness_bound: int, leavers: int = 0) -> int:
    """Step bound for convergence; departures exit one after another, so each
    leaving node adds another full round of the base bound."""
    return 10 * fairness_bound * len(s.nodes) * (1 + leavers)


class Simulator:
    def __init__(self, state: SystemState, protocol: Protocol | str = "plus",
                 scheduler: Optional[Scheduler] = None, seed: int = 0,
                 fairness_bound: Optional[int] = None,
                 observers: Sequence[Observer] = (),
                 leave_schedule: Optional[Dict[int, List[int]]] = None):
        self.protocol = make_protocol(protocol) if isinstance(protocol, str) else protocol
        self.initial = state.copy()
        self.state = state.copy()
        self.seed = seed
        self.fairness_bound = fairness_bound or default_fairness_bound(state)
        self.scheduler = scheduler or RandomFair(random.Random(f"{seed}:sched"))
        self.observers = list(observers)
        # step -> nodes that switch to leaving right before that step
        self.leave_schedule = {int(k): list(v) for k, v in (leave_schedule or {}).items()}
        self.step_index = 0
        self.events: List[Event] = []
        self.digest = _h("init", state_digest(self.state))
        # per message: deliveries its channel had seen when it arrived
        self.births: Dict[int, List[int]] = {i: [0] * len(ch) for i, ch in self.state.channels.items()}
        for i in self.state.nodes:
            self.state.channels.setdefault(i, [])
            self.births.setdefault(i, [])
        self.visits: Dict[int, int] = {i: 0 for i in self.state.nodes}
        # incremental indexes read by observers
        self.pairs = PairIndex(self.state)
        self.tracked: Dict[Tuple[int, Message], int] = {}
        self.tracked_added: List[Tuple[int, Message]] = []
        for i, ch in self.state.channels.items():
            for m in ch:
                self._track(i, m, 1)
        self.tracked_added.clear()
        self.last_pre_node: Optional[NodeState] = None
        self._overdue: List[int] = []
        # fairness audit
        self.max_timeout_gap = 0
        self.max_channel_wait = 0
        self.last_timeout: Dict[int, int] = {i: 0 for i in self.state.nodes}
        self.in_flight = self.state.message_count()
        self.present_ids = self.state.present()
        self.next_tag = 0
        # bumped whenever any stored neighbor set / seq table changes
        self.eng_version = 0
        self.seq_version = 0
        for ob in self.observers:
            ob.on_start(self)

    # -- helpers
    def _track(self, i: int, m: Message, delta: int) -> None:
        if not constrained(m):
            return
        k = (i, m)
        c = self.tracked.get(k, 0) + delta
        if c:
            self.tracked[k] = c
            if delta > 0 and c == 1:
                self.tracked_added.append(k)
        else:
            del self.tracked[k]

    def pending_leaves(self) -> bool:
        return any(k >= self.step_index for k in self.leave_schedule)

    def _push(self, to: int, msg: Message) -> None:
        node = self.state.nodes.get(to)
        if node is None:
            raise ValueError(f"message to unknown node {to}: {msg!r}")
        if node.exited:
            return  # delivered into the void
        self.state.channels[to].append(msg)
        self.births[to].append(self.visits[to])
        self.in_flight += 1
        if self._late(to):
            self._overdue.append(to)
        for x in refs(msg):
            self.pairs.add(to, x)
        self._track(to, msg, 1)

    def _pop(self, i: int, k: int) -> Message:
        ch = self.state.channels[i]
        births = self.births[i]
        if not 0 <= k < len(ch):
            raise IndexError(f"no message {k} in channel of {i}")
        msg = ch[k]
        self.max_channel_wait = max(self.max_channel_wait, self.visits[i] - births[k])
        ch[k] = ch[-1]
        ch.pop()
        births[k] = births[-1]
        births.pop()
        self.in_flight -= 1
        self.visits[i] += 1
        for x in refs(msg):
            self.pairs.remove(i, x)
        self._track(i, msg, -1)
        if self._late(i):
            self._overdue.append(i)
        return msg

    def _late(self, i: int) -> bool:
        # oldest wait plus queue length bounds the wait of every queued
        # message under oldest-first service, so trigger on that sum
        births = self.births[i]
        return bool(births) and (self.visits[i] - min(births) + len(births) - 1
                                 >= self.fairness_bound // 2)

    def overdue_message(self) -> Optional[Tuple[int, int]]:
        """(node, index) of a message that must be delivered now, if any."""
        while self._overdue:
            i = self._overdue[-1]
            births = self.births[i]
            if not self.state.nodes[i].exited and self._late(i):
                return i, min(range(len(births)), key=births.__getitem__)
            self._overdue.pop()
        return None

    # -- stepping
    def step(self, action: Optional[Action] = None) -> Optional[Event]:
        for u in self.leave_schedule.pop(self.step_index, []):
            # mode switches are scheduler events of their own
            self._apply(Action(EventKind.LEAVE, u))
        if action is None:
            action = self.scheduler.choose(self)
        if action is None:
            return None
        return self._apply(action)

    def _apply(self, a: Action) -> Event:
        s = self.state
        node = s.nodes.get(a.actor)
        if node is None:
            raise ValueError(f"unknown node {a.actor}")
        if node.exited and a.kind is not EventKind.INJECT:
            raise ValueError(f"node {a.actor} is gone")
        ev = Event(self.step_index, a.kind, a.actor, index=a.index, dest=a.dest)
        self.last_pre_node = node
        self.tracked_added = []
        out: Optional[ActionOutcome] = None
        if a.kind is EventKind.TIMEOUT:
            oracle = False
            if self.protocol.departure and node.leaving:
                oracle = departure.nidec(s, a.actor)
                ev.oracle = oracle
            out = self.protocol.timeout(node, oracle)
            self.max_timeout_gap = max(self.max_timeout_gap, self.step_index - self.last_timeout[a.actor])
            self.last_timeout[a.actor] = self.step_index
        elif a.kind is EventKind.DELIVER:
            msg = self._pop(a.actor, a.index)
            ev.message = msg
            out = self.protocol.handle(node, msg)
        elif a.kind is EventKind.INIT_SEARCH:
            tag = self.next_tag
            self.next_tag += 1
            ev.tag = tag
            out = self.protocol.init_search(node, a.dest, tag)
        elif a.kind is EventKind.INJECT:
            ev.message = a.message
            if not node.exited:
                self._push(a.actor, a.message)
        elif a.kind is EventKind.LEAVE:
            if node.staying:
                node.mode = Mode.LEAVING
                self.eng_version += 1
        else:
            raise ValueError(a.kind)

        outbox_repr = ""
        if out is not None:
            new = out.new_state
            if (new.left != node.left or new.right != node.right
                    or new.temp_left != node.temp_left or new.temp_right != node.temp_right):
                self.eng_version += 1
                before, after = node.neighbors(), new.neighbors()
                for x in after - before:
                    self.pairs.add(a.actor, x)
                for x in before - after:
                    self.pairs.remove(a.actor, x)
            if new.seq_table != node.seq_table:
                self.seq_version += 1
            s.nodes[a.actor] = new
            for to, msg in out.outbox:
                self._push(to, msg)
            if out.exited:
                ev.exited = True
                for msg in s.channels[a.actor]:
                    for x in refs(msg):
                        self.pairs.remove(a.actor, x)
                    self._track(a.actor, msg, -1)
                s.channels[a.actor].clear()
                self.in_flight -= len(self.births[a.actor])
                self.births[a.actor].clear()
                self.present_ids = s.present()
                self.eng_version += 1
            outbox_repr = repr([(to, _msg_key(m)) for to, m in out.outbox])
        ev.outbox_digest = _h(outbox_repr)
        self.digest = _h(self.digest, repr(ev.kind.value), str(ev.actor), str(ev.index),
                         str(ev.dest), _msg_key(ev.message) if ev.message else "",
                         str(ev.oracle), ev.outbox_digest)
        ev.digest = self.digest
        self.events.append(ev)
        self.step_index += 1
        for ob in self.observers:
            ob.on_step(self, ev, out)
        return ev

    def run(self, max_steps: int, stop: Optional[Callable[["Simulator"], bool]] = None) -> int:
        """Step until ``stop`` returns true, the schedule runs dry or the budget ends."""
        n = 0
        while n < max_steps:
            if stop is not None and stop(self):
                break
            if self.step() is None:
                break
            n += 1
        return n

    def final_digest(self) -> str:
        return _h(self.digest, state_digest(self.state))


# --------------------------------------------------------------------------- replay

class ReplayError(Exception):
    def __init__(self, step: int, expected: str, got: str):
        super().__init__(f"digest divergence at step {step}: expected {expected}, got {got}")
        self.step = step


def replay(initial: SystemState, events: Sequence[Event], protocol: Protocol | str = "plus",
           observers: Sequence[Observer] = ()) -> Simulator:
    """Re-execute ``events`` from ``initial`` and check every digest."""
    sim = Simulator(initial, protocol, Replayer(events), observers=observers)
    for ev in events:
        try:
            got = sim.step(ev.action())
        except (IndexError, ValueError) as exc:
            raise ReplayError(ev.step, ev.digest, f"<{exc}>") from exc
        if got.digest != ev.digest:
            raise ReplayError(ev.step, ev.digest, got.digest)
    return sim


# --------------------------------------------------------------------------- initial states

@dataclass
class InitialStateSpec:
    n: int
    seed: int = 0
    id_assignment: str = "random"        # "consecutive" or "random"
    edge_model: str = "mixed"            # "explicit" or "mixed"
    density: float = 0.3                 # extra-edge probability per ordered pair
    implicit_fraction: float = 0.4       # share of edges carried in messages (mixed model)
    corrupted: int = 0                   # number of injected corrupted messages
    protocol: str = "plus"
    leaving: Tuple[int, ...] = ()        # node ids leaving from the start
    initial_messages: Tuple[Tuple[int, Message], ...] = ()
    pending_searches: int = 0            # corrupt pending search batches


def _corrupt_message(rng: random.Random, ids: List[int], star: bool) -> Message:
    pick = lambda: rng.choice(ids)  # noqa: E731
    kinds = ["introduce", "linearize", "probe", "success", "fail", "search"]
    if star:
        kinds += ["req", "ack", "revlin"]
    k = rng.choice(kinds)
    if k == "introduce":
        return Introduce(pick(), pick())
    if k == "linearize":
        return Linearize(pick())
    if k == "probe":
        return ForwardProbe(pick(), pick(), frozenset(rng.sample(ids, rng.randint(1, min(3, len(ids))))),
                            rng.randint(0, 5))
    if k == "success":
        d = pick()
        return ProbeSuccess(d, rng.randint(0, 5), d if rng.random() < 0.7 else pick())
    if k == "fail":
        return ProbeFail(pick(), rng.randint(0, 5))
    if k == "search":
        return Search(pick(), pick())
    if k == "req":
        return RevAndLinReq(rng.choice([Side.LEFT, Side.RIGHT]))
    if k == "ack":
        return RevAndLinAck(pick(), (pick(), rng.randint(0, 3)))
    return RevAndLin(frozenset(rng.sample(ids, rng.randint(0, min(3, len(ids))))),
                     (pick(), rng.randint(0, 3)))


def generate_initial_state(spec: InitialStateSpec) -> SystemState:
    """Random weakly connected start state, deterministic in ``spec.seed``."""
    if spec.n < 1:
        raise ValueError("n must be at least 1")
    rng = random.Random(f"{spec.seed}:gen")
    if spec.id_assignment == "consecutive":
        ids = list(range(1, spec.n + 1))
    elif spec.id_assignment == "random":
        ids = sorted(rng.sample(range(1, 10 * spec.n + 1), spec.n))
    else:
        raise ValueError(f"unknown id assignment {spec.id_assignment!r}")
    s = SystemState.empty(ids)
    implicit_p = spec.implicit_fraction if spec.edge_model == "mixed" else 0.0
    if spec.edge_model not in ("mixed", "explicit"):
        raise ValueError(f"unknown edge model {spec.edge_model!r}")

    def add_edge(a: int, b: int) -> None:
        if rng.random() < implicit_p:
            msg = TempDelegate(b) if rng.random() < 0.6 else Introduce(b, None)
            s.channels[a].append(msg)
        else:
            (s.nodes[a].left if b < a else s.nodes[a].right).add(b)

    order = ids[:]
    rng.shuffle(order)
    for k in range(1, len(order)):
        a, b = order[k], order[rng.randrange(k)]
        if rng.random() < 0.5:
            a, b = b, a
        add_edge(a, b)
    for a in ids:
        for b in ids:
            if a != b and rng.random() < spec.density / max(1, spec.n - 1) * 2:
                add_edge(a, b)
    star = spec.protocol == "star"
    for _ in range(spec.corrupted):
        s.channels[rng.choice(ids)].append(_corrupt_message(rng, ids, star))
    for _ in range(spec.pending_searches):
        u = rng.choice(ids)
        d = rng.choice(ids)
        node = s.nodes[u]
        node.waiting_for[d] = node.waiting_for.get(d, ()) + (Search(u, d),)
        node.seq = max(node.seq, rng.randint(0, 3))
        node.seq_table[d] = rng.randint(0, node.seq)
    for to, msg in spec.initial_messages:
        s.channels[to].append(msg)
    for u in spec.leaving:
        s.nodes[u].mode = Mode.LEAVING
    bad = s.dangling_references()
    if bad:
        raise ValueError(f"references to nonexistent nodes: {bad[:5]}")
    assert is_weakly_connected(s, present_only=False)
    return s
