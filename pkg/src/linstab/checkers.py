"""Property checkers.

Everything here is an observer: it reads simulator state between steps and
never mutates it.  Per-state predicates are plain functions; the ``*Observer``
classes accumulate verdicts over a run, and the ``check_*`` functions replay a
recorded trace with one observer attached.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

from .actions import ActionOutcome
from .departure import nidec
from .messages import (ForwardProbe, Introduce, Linearize, Message, ProbeFail, ProbeSuccess,
                       RevAndLin, RevAndLinAck, Search, refs)
from .model import (ReachIndex, SystemState, explicit_graph, is_weakly_connected, line_edges,
                    ng_components, network_graph, potential_phi, weak_components)
from .sim import Event, EventKind, Observer, Simulator, replay


class Status(str, Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    ESTABLISHED = "established"
    NEVER_ESTABLISHED = "never_established"


@dataclass
class Verdict:
    property: str
    status: Status
    step: Optional[int] = None
    witness: Any = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (Status.HOLDS, Status.ESTABLISHED)

    def to_row(self) -> dict:
        return {"property": self.property, "status": self.status.value,
                "step": "" if self.step is None else self.step,
                "witness": "" if self.witness is None else repr(self.witness),
                "note": self.note}


# --------------------------------------------------------------------------- invariants

PLUS_INVARIANTS = ("1", "2", "3a", "3b", "3c", "4", "5", "6")
STAR_INVARIANTS = ("1", "2", "3", "4", "5a", "5b", "5c", "6", "7", "8")


@dataclass
class AdmissibilityReport:
    holds: Dict[str, bool]
    witnesses: Dict[str, Tuple[int, Message]] = field(default_factory=dict)

    @property
    def admissible(self) -> bool:
        return all(self.holds.values())

    def first_two(self) -> bool:
        return self.holds["1"] and self.holds["2"]


class SeqHistory:
    """Smallest ``src.seq[d]`` over recorded admissible states in which the
    node with id ``d`` was reachable from ``src`` on its side.

    This is all the past-state quantifier of the probe-fail style invariants
    needs: some admissible state had ``src.seq[d] < seq`` with ``d`` reachable
    iff the recorded minimum is below ``seq``.
    """

    def __init__(self, staying: bool):
        self.staying = staying
        self.min_seq: Dict[Tuple[int, int], int] = {}
        self.version = 0

    def record(self, s: SystemState, idx: ReachIndex) -> None:
        R, L = (idx.Rs, idx.Ls) if self.staying else (idx.R, idx.L)
        changed = False
        for src in s.present():
            node = s.nodes[src]
            k = idx.pos[src]
            rmask, lmask = R[k], L[k]
            if not rmask and not lmask:
                continue
            for d, kd in idx.pos.items():
                b = 1 << kd
                if (d > src and rmask & b) or (d < src and lmask & b):
                    val = node.seq_table.get(d, 0)
                    old = self.min_seq.get((src, d))
                    if old is None or val < old:
                        self.min_seq[(src, d)] = val
                        changed = True
        if changed:
            self.version += 1

    def below(self, src: int, d: int, seq: int) -> bool:
        m = self.min_seq.get((src, d))
        return m is not None and m < seq


class InvariantEvaluator:
    """Evaluates the message invariants of one protocol family on a state."""

    def __init__(self, star: bool):
        self.star = star
        self.names = STAR_INVARIANTS if star else PLUS_INVARIANTS

    # -- reachability helpers over one ReachIndex
    def _tables(self, idx: ReachIndex):
        return (idx.Rs, idx.Ls) if self.star else (idx.R, idx.L)

    def _plus_self(self, s: SystemState, idx: ReachIndex, table, v: int) -> int:
        """R_s^+ / L_s^+ for the star family, R/L with the node itself otherwise."""
        m = idx.mask_of(table, v)
        node = s.nodes.get(v)
        if node is not None and not node.exited and (node.staying or not self.star):
            m |= idx.bit(v)
        return m

    def _set(self, idx: ReachIndex, table, nodes) -> int:
        return idx.set_mask(table, nodes, staying_only=self.star)

    def _exists(self, s: SystemState, d: int) -> bool:
        node = s.nodes.get(d)
        if node is None or node.exited:
            return False
        return node.staying or not self.star

    def _past_reach_violated(self, s: SystemState, idx: ReachIndex, hist: Optional[SeqHistory],
                             src: int, d: int, seq: int) -> bool:
        """Some admissible state had src.seq[d] < seq while d was reachable from src.

        A number ahead of the source's own entry is never produced by the
        protocol, so it counts as a violation outright.
        """
        node = s.nodes.get(src)
        if node is not None and node.seq_table.get(d, 0) < seq:
            return True
        if hist is not None and hist.below(src, d, seq):
            return True
        if node is None:
            return False
        R, L = self._tables(idx)
        # the current state counts as well, whatever its own verdict
        table = R if d > src else L
        return node.seq_table.get(d, 0) < seq and bool(idx.mask_of(table, src) & idx.bit(d))

    # -- per message
    def violated(self, s: SystemState, idx: ReachIndex, hist: Optional[SeqHistory],
                 u: int, m: Message) -> Optional[str]:
        """Name of the first invariant ``m`` in ``u``'s channel violates, if any."""
        R, L = self._tables(idx)
        bit = idx.bit
        star = self.star
        if isinstance(m, Introduce):
            if m.w is None:
                return None
            w = m.w
            if m.v == w or u == w:
                return "1"
            # the introduced node lies at or beyond u, seen from w
            if (u < w and m.v > u) or (u > w and m.v < u):
                return "1"
            if star:
                need = self._plus_self(s, idx, R if u > w else L, u)
                have = idx.mask_of(R if u > w else L, w)
                return None if need & ~have == 0 else "1"
            return None if idx.mask_of(R if u > w else L, w) & bit(u) else "1"
        if isinstance(m, Linearize):
            v, w = m.v, u
            if v == w:
                return "2"
            node = s.nodes[w]
            side, table = (node.right, R) if w < v else (node.left, L)
            if star:
                need = self._plus_self(s, idx, table, v)
                ok = any(x != v and need & ~idx.mask_of(table, x) == 0 for x in side)
            else:
                bv = bit(v)
                ok = any(x != v and idx.mask_of(table, x) & bv for x in side)
            return None if ok else "2"
        if isinstance(m, ForwardProbe):
            return self._probe(s, idx, hist, u, m)
        if isinstance(m, ProbeSuccess):
            name = "6" if star else "4"
            d = m.dest_id
            if m.dest != d:
                return name
            dest = s.nodes.get(m.dest)
            if star and dest is not None and dest.leaving and not dest.exited:
                return None
            if d == u:
                return None
            table = R if d > u else L
            return None if idx.mask_of(table, u) & bit(m.dest) else name
        if isinstance(m, ProbeFail):
            name = "7" if star else "5"
            d = m.dest_id
            if d == u or not self._exists(s, d):
                return None
            return name if self._past_reach_violated(s, idx, hist, u, d, m.seq) else None
        if isinstance(m, Search):
            name = "8" if star else "6"
            owner = s.nodes[u]
            if star and not owner.staying:
                return None
            if u != m.dest_id:
                return name
            if m.v == m.dest_id:
                return None
            table = R if m.v < m.dest_id else L
            return None if idx.mask_of(table, m.v) & bit(u) else name
        if star and isinstance(m, RevAndLinAck):
            v = m.v
            holder = s.nodes.get(v)
            if v == u or holder is None:
                return "3"
            if holder.unique_values.get(u) != m.token:
                return "3"
            owners = [x for x, t in holder.unique_values.items() if t == m.token]
            return None if owners == [u] else "3"
        if star and isinstance(m, RevAndLin):
            owner = s.nodes[u]
            hits = [x for x, t in owner.unique_values.items() if t == m.token]
            if len(hits) != 1:
                return "4"
            v = hits[0]
            vn = s.nodes.get(v)
            if vn is None or vn.exited:
                return None
            if not vn.leaving:
                return "4"
            table = R if u < v else L
            lhs = idx.mask_of(table, v)
            rhs = self._set(idx, table, m.node_list)
            return None if lhs == rhs else "4"
        return None

    def _probe(self, s, idx, hist, u, m: ForwardProbe) -> Optional[str]:
        star = self.star
        a, b, c = ("5a", "5b", "5c") if star else ("3a", "3b", "3c")
        src, d, nxt = m.source, m.dest_id, m.next
        if d == src:
            return None if u == src and nxt == frozenset((u,)) else a
        if not nxt:
            return a
        rightward = src < d
        if (min(nxt) if rightward else max(nxt)) != u:
            return a
        # candidates are only ever collected up to the destination
        if (max(nxt) > d) if rightward else (min(nxt) < d):
            return a
        R, L = self._tables(idx)
        table = R if rightward else L
        reach_next = self._set(idx, table, nxt)
        allowed = self._plus_self(s, idx, table, src)
        if reach_next & ~allowed:
            return b
        if self._exists(s, d):
            bd = idx.bit(d)
            bounded = reach_next & (idx.id_at_most(d) if rightward else idx.id_at_least(d))
            if not bounded & bd and self._past_reach_violated(s, idx, hist, src, d, m.seq):
                return c
        return None

    def report(self, s: SystemState, idx: Optional[ReachIndex] = None,
               hist: Optional[SeqHistory] = None) -> AdmissibilityReport:
        idx = idx or ReachIndex(s)
        rep = AdmissibilityReport({k: True for k in self.names})
        for u in sorted(s.channels):
            if s.nodes[u].exited:
                continue
            for m in s.channels[u]:
                bad = self.violated(s, idx, hist, u, m)
                if bad is not None and rep.holds[bad]:
                    rep.holds[bad] = False
                    rep.witnesses[bad] = (u, m)
        return rep


def check_invariants_plus(s: SystemState, hist: Optional[SeqHistory] = None) -> AdmissibilityReport:
    return InvariantEvaluator(star=False).report(s, hist=hist)


def check_invariants_star(s: SystemState, hist: Optional[SeqHistory] = None) -> AdmissibilityReport:
    return InvariantEvaluator(star=True).report(s, hist=hist)


# --------------------------------------------------------------------------- convergence predicate

def line_preserving(s: SystemState, u: int, m: Message) -> bool:
    """Whether processing ``m`` at ``u`` leaves a sorted-line ENG untouched."""
    node = s.nodes[u]
    if isinstance(m, Introduce):
        return m.w is None or m.v == m.w or m.v == u or m.v in node.left or m.v in node.right
    if isinstance(m, RevAndLin):
        return not any(node.unique_values.get(v) == m.token for v in node.neighbors())
    return True


def eng_is_line(s: SystemState) -> bool:
    staying = s.staying_present()
    if len(staying) != len(s.present()):
        return False
    for i in staying:
        n = s.nodes[i]
        if n.temp_left or n.temp_right:
            return False
    return explicit_graph(s) == line_edges(staying)


def is_legitimate(s: SystemState) -> bool:
    """Sorted line over the present staying nodes with only line-preserving traffic."""
    if not eng_is_line(s):
        return False
    return all(line_preserving(s, u, m) for u in s.present() for m in s.channels[u])


# --------------------------------------------------------------------------- observers

class ConnectivityObserver(Observer):
    """NG (PNG once nodes are gone) stays weakly connected.

    A step can only disconnect the graph by removing the last edge between
    some pair; only those pairs are re-examined.  Exit steps get a full check.
    """

    name = "connectivity"

    def __init__(self):
        self.violation: Optional[Tuple[int, Any]] = None
        self.checked = 0
        self.connected_at_start = True

    def on_start(self, sim):
        sim.pairs.take_lost()
        self.connected_at_start = len(sim.pairs.components(sim.present_ids)) <= 1

    def on_step(self, sim, ev, out):
        lost = sim.pairs.take_lost()
        if self.violation is not None or not self.connected_at_start:
            return
        self.checked += 1
        if ev.exited:
            comps = sim.pairs.components(sim.present_ids)
            if len(comps) > 1:
                self.violation = (sim.step_index, [sorted(c) for c in comps])
            return
        for a, b in lost:
            if not sim.pairs.connected(a, b):
                comps = sim.pairs.components(sim.present_ids)
                self.violation = (sim.step_index, [sorted(c) for c in comps])
                return

    def verdict(self) -> Verdict:
        if not self.connected_at_start:
            return Verdict(self.name, Status.NEVER_ESTABLISHED, note="initial state not connected")
        if self.violation:
            return Verdict(self.name, Status.VIOLATED, self.violation[0], self.violation[1])
        return Verdict(self.name, Status.HOLDS, note=f"{self.checked} steps")


class PhiObserver(Observer):
    """Potential never increases; records its value at convergence."""

    name = "phi_monotone"

    def __init__(self):
        self.values: List[Tuple[int, int]] = []
        self.violation: Optional[Tuple[int, Tuple[int, int]]] = None
        self._version = None
        self._last = None

    def on_start(self, sim):
        self._sample(sim, 0)

    def on_step(self, sim, ev, out):
        self._sample(sim, sim.step_index)

    def _sample(self, sim, k):
        if sim.eng_version == self._version:
            return
        self._version = sim.eng_version
        phi = potential_phi(sim.state)
        if self._last is not None and phi > self._last and self.violation is None:
            self.violation = (k, (self._last, phi))
        self._last = phi
        self.values.append((k, phi))

    @property
    def current(self) -> int:
        return self._last

    def verdict(self) -> Verdict:
        if self.violation:
            return Verdict(self.name, Status.VIOLATED, self.violation[0], self.violation[1])
        return Verdict(self.name, Status.HOLDS, note=f"final phi {self._last}")


def _reversal_substitution(name: str, witness, ev: Optional[Event]) -> str:
    """Names the one known way a departure run leaves the invariants: an edge
    reversal at ``w`` swaps the leaving witness of a pending ``Linearize(v)``
    for ``v`` itself, so no witness other than ``v`` remains."""
    if name != "2" or ev is None or ev.kind is not EventKind.DELIVER:
        return ""
    w, m = witness
    if isinstance(ev.message, RevAndLin) and ev.actor == w and m.v in ev.message.node_list:
        return f"edge reversal at {w} replaced the witness of Linearize({m.v}) by {m.v} itself"
    return ""


class AdmissibilityObserver(Observer):
    """Evaluates the message invariants after every step.

    Tracks the first admissible state, any relapse afterwards, and the
    reach-set monotonicity that follows once the first two invariants hold.
    Only distinct constrained messages are evaluated, and only again when the
    graph, the sequence tables or the history changed.
    """

    name = "admissibility"

    def __init__(self, star: bool, through_leaving: bool = True):
        self.star = star
        self.through_leaving = through_leaving
        self.evaluator = InvariantEvaluator(star)
        self.hist = SeqHistory(staying=star)
        self.first_admissible: Optional[int] = None
        self.violation: Optional[Tuple[int, Any]] = None
        self.current_admissible = False
        self.first_two_since: Optional[int] = None
        self.reach_violation: Optional[Tuple[int, Any]] = None
        self.bad: Dict[Tuple[int, Message], str] = {}
        self._idx: Optional[ReachIndex] = None
        self._idx_version = None
        self._key = None
        self._recorded = None
        self._prev_idx: Optional[ReachIndex] = None
        self.resets: List[int] = []
        self.violation_note = ""

    def on_start(self, sim):
        self._evaluate(sim, 0, full=True)

    def on_step(self, sim, ev, out):
        self._evaluate(sim, sim.step_index, injected=ev.kind is EventKind.INJECT, event=ev)

    def index(self, sim) -> ReachIndex:
        if self._idx_version != sim.eng_version:
            self._idx = ReachIndex(sim.state, self.through_leaving)
            self._idx_version = sim.eng_version
        return self._idx

    def report(self) -> AdmissibilityReport:
        rep = AdmissibilityReport({n: True for n in self.evaluator.names})
        for k, name in sorted(self.bad.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))):
            if rep.holds[name]:
                rep.holds[name] = False
                rep.witnesses[name] = k
        return rep

    def _evaluate(self, sim, k, full=False, injected=False, event=None):
        s = sim.state
        idx = self.index(sim)
        ev = self.evaluator
        hist = self.hist
        key = (sim.eng_version, sim.seq_version, hist.version)
        if full or key != self._key:
            self.bad = {}
            for (u, m) in sim.tracked:
                name = ev.violated(s, idx, hist, u, m)
                if name is not None:
                    self.bad[(u, m)] = name
        else:
            bad = self.bad
            for ck in [ck for ck in bad if ck not in sim.tracked]:
                del bad[ck]
            for ck in sim.tracked_added:
                if ck in sim.tracked:
                    name = ev.violated(s, idx, hist, ck[0], ck[1])
                    if name is not None:
                        bad[ck] = name
        adm = not self.bad
        self.current_admissible = adm
        if adm:
            if self.first_admissible is None:
                self.first_admissible = k
            rkey = (sim.eng_version, sim.seq_version)
            if rkey != self._recorded:
                hist.record(s, idx)
                self._recorded = rkey
        elif injected and self.violation is None:
            # an injected message counts as part of the initial state, so
            # the closure property is observed afresh from here on
            self.first_admissible = None
            self.resets.append(k)
        elif self.first_admissible is not None and self.violation is None:
            rep = self.report()
            name = next(n for n, ok in rep.holds.items() if not ok)
            self.violation = (k, (name, rep.witnesses[name]))
            self.violation_note = _reversal_substitution(name, rep.witnesses[name], event)
        self._key = (sim.eng_version, sim.seq_version, hist.version)
        first_two = not any(n in ("1", "2") for n in self.bad.values())
        self._check_reach(k, idx, first_two, s)

    def _check_reach(self, k, idx, first_two, s):
        if not first_two:
            self.first_two_since = None
            self._prev_idx = None
            return
        if self.first_two_since is None:
            self.first_two_since = k
        prev = self._prev_idx
        if prev is not None and prev is not idx and self.reach_violation is None:
            R, L = (idx.Rs, idx.Ls) if self.star else (idx.R, idx.L)
            pR, pL = (prev.Rs, prev.Ls) if self.star else (prev.R, prev.L)
            # departure runs lose members only by their mode switch
            keep = idx.staying_mask if self.star else -1
            for pos in range(len(R)):
                if s.nodes[idx.ids[pos]].exited:
                    continue
                if (pR[pos] & keep) & ~R[pos] or (pL[pos] & keep) & ~L[pos]:
                    self.reach_violation = (k, idx.ids[pos])
                    break
        self._prev_idx = idx

    def verdict(self) -> Verdict:
        if self.violation:
            return Verdict(self.name, Status.VIOLATED, self.violation[0], self.violation[1],
                           note=self.violation_note)
        if self.first_admissible is None:
            return Verdict(self.name, Status.NEVER_ESTABLISHED)
        note = f"restarted by injections at {self.resets}" if self.resets else ""
        return Verdict(self.name, Status.ESTABLISHED, self.first_admissible, note=note)

    def reach_verdict(self) -> Verdict:
        name = "reach_monotone"
        if self.reach_violation:
            return Verdict(name, Status.VIOLATED, *self.reach_violation)
        return Verdict(name, Status.HOLDS)


class ConvergenceObserver(Observer):
    """Detects the legitimate fixed point and audits closure afterwards."""

    name = "convergence"

    def __init__(self, closure_steps: int = 1000):
        self.closure_steps = closure_steps
        self.established: Optional[int] = None
        self.eng_at: Optional[frozenset] = None
        self.closure_violation: Optional[Tuple[int, Any]] = None
        self.closure_checked = 0
        self._line_version = None
        self._line = False
        self._blocking: Set[Tuple[int, Message]] = set()

    def on_start(self, sim):
        self._check(sim, 0)

    def on_step(self, sim, ev, out):
        self._check(sim, sim.step_index)

    def _check(self, sim, k):
        s = sim.state
        if self.established is not None:
            self.closure_checked = k - self.established
            if sim.eng_version != self._line_version and self.closure_violation is None:
                now = frozenset(explicit_graph(s))
                if now != self.eng_at or not eng_is_line(s):
                    self.closure_violation = (k, sorted(now ^ self.eng_at))
                self._line_version = sim.eng_version
            return
        if sim.pending_leaves():
            return
        if sim.eng_version != self._line_version:
            self._line_version = sim.eng_version
            self._line = eng_is_line(s)
            if self._line:
                self._blocking = {ck for ck in sim.tracked if not line_preserving(s, *ck)}
        elif self._line:
            self._blocking = {ck for ck in self._blocking if ck in sim.tracked}
            for ck in sim.tracked_added:
                if ck in sim.tracked and not line_preserving(s, *ck):
                    self._blocking.add(ck)
        if self._line and not self._blocking:
            self.established = k
            self.eng_at = frozenset(explicit_graph(s))

    @property
    def closure_done(self) -> bool:
        return self.established is not None and self.closure_checked >= self.closure_steps

    def verdict(self) -> Verdict:
        if self.closure_violation:
            return Verdict(self.name, Status.VIOLATED, self.closure_violation[0],
                           self.closure_violation[1], note="ENG changed after convergence")
        if self.established is None:
            return Verdict(self.name, Status.NEVER_ESTABLISHED)
        return Verdict(self.name, Status.ESTABLISHED, self.established,
                       note=f"closure audited for {self.closure_checked} steps")


class FdpObserver(Observer):
    """Finite departure: safety, liveness, component preservation, exit gating."""

    name = "fdp"

    def __init__(self):
        self.safety_violation: Optional[Tuple[int, Any]] = None
        self.gating_violation: Optional[Tuple[int, Any]] = None
        self.self_ref_violation: Optional[Tuple[int, Any]] = None
        self.initial_components: List[Set[int]] = []
        self.exits: List[Tuple[int, int]] = []
        self._conn = ConnectivityObserver()
        self._sim = None

    def on_start(self, sim):
        self._sim = sim
        self.initial_components = ng_components(sim.state, present_only=True)
        self._conn.on_start(sim)

    def on_step(self, sim, ev: Event, out: Optional[ActionOutcome]):
        s = sim.state
        k = sim.step_index
        if out is not None and self.self_ref_violation is None:
            actor = s.nodes[ev.actor]
            if actor.leaving:
                for to, m in out.outbox:
                    if ev.actor in refs(m) and not _allowed_self_reference(ev, m):
                        self.self_ref_violation = (k, (ev.actor, to, m))
                        break
        if ev.exited:
            self.exits.append((k, ev.actor))
            dangling = [e for e in network_graph(s) if e.dst == ev.actor]
            if ev.oracle is not True or dangling:
                self.gating_violation = self.gating_violation or (k, (ev.actor, dangling[:3]))
        self._conn.on_step(sim, ev, out)
        if self.safety_violation is None and self._conn.violation is not None:
            self.safety_violation = self._conn.violation

    def verdict(self) -> Verdict:
        s = self._sim.state
        if self.safety_violation:
            return Verdict(self.name, Status.VIOLATED, *self.safety_violation, note="PNG disconnected")
        if self.gating_violation:
            return Verdict(self.name, Status.VIOLATED, *self.gating_violation, note="exit without NIDEC")
        if self.self_ref_violation:
            return Verdict(self.name, Status.VIOLATED, *self.self_ref_violation,
                           note="leaving node sent its own reference")
        leaving = s.leaving_present()
        if leaving:
            return Verdict(self.name, Status.NEVER_ESTABLISHED, witness=leaving,
                           note="leaving nodes still present")
        final = ng_components(s, present_only=True)
        where = {x: k for k, c in enumerate(final) for x in c}
        for comp in self.initial_components:
            staying = [x for x in comp if not s.nodes[x].exited]
            if len({where[x] for x in staying}) > 1:
                return Verdict(self.name, Status.VIOLATED, self._sim.step_index, sorted(staying),
                               note="initial component split")
        last = self.exits[-1][0] if self.exits else 0
        return Verdict(self.name, Status.ESTABLISHED, last, note=f"{len(self.exits)} exits")


def _allowed_self_reference(ev: Event, m: Message) -> bool:
    # the handshake itself requires two self-references from leaving nodes
    from .messages import RevAndLin as _RL, RevAndLinReq, Side

    if isinstance(m, RevAndLinAck) and isinstance(ev.message, RevAndLinReq):
        return m.v == ev.actor and ev.message.dir is Side.RIGHT
    if isinstance(m, Introduce) and isinstance(ev.message, _RL):
        return m.v == ev.actor and m.w is None
    if isinstance(m, ForwardProbe) and isinstance(ev.message, ForwardProbe):
        # relaying a probe it started before switching to leaving
        return m.source == ev.message.source == ev.actor and ev.actor not in m.next
    return False


class Outcome(str, Enum):
    PENDING = "pending"
    DELIVERED = "delivered"
    FAILED = "failed"


@dataclass
class SearchRecord:
    tag: int
    origin: int
    dest_id: int
    initiated_at: int
    admissible_at_init: bool
    outcome: Outcome = Outcome.PENDING
    resolved_at: Optional[int] = None


class SearchObserver(Observer):
    """Keeps one record per initiated search (needs the admissibility observer)."""

    name = "searchability"

    def __init__(self, admissibility: Optional[AdmissibilityObserver] = None):
        self.adm = admissibility
        self.records: Dict[int, SearchRecord] = {}
        self.leave_step: Dict[int, int] = {}
        self._sim = None

    def on_start(self, sim):
        self._sim = sim
        for i in sim.state.leaving_present():
            self.leave_step[i] = 0

    def on_step(self, sim, ev: Event, out: Optional[ActionOutcome]):
        k = ev.step
        if ev.kind is EventKind.LEAVE:
            self.leave_step.setdefault(ev.actor, k)
        if ev.kind is EventKind.INIT_SEARCH and ev.tag is not None:
            # init_search adds no message, so the pre-state verdict is the post-state one
            adm = self.adm.current_admissible if self.adm is not None else True
            self.records[ev.tag] = SearchRecord(ev.tag, ev.actor, ev.dest, k, adm)
        if out is None:
            return
        for m in out.delivered:
            r = self.records.get(m.tag) if m.tag is not None else None
            if r is not None and r.outcome is Outcome.PENDING:
                r.outcome, r.resolved_at = Outcome.DELIVERED, k
        for m in out.dropped:
            r = self.records.get(m.tag) if m.tag is not None else None
            if r is not None and r.outcome is Outcome.PENDING:
                r.outcome, r.resolved_at = Outcome.FAILED, k

    def exempt(self, r: SearchRecord, end: int) -> bool:
        until = r.resolved_at if r.resolved_at is not None else end
        for x in (r.origin, r.dest_id):
            t = self.leave_step.get(x)
            if t is not None and t <= until:
                return True
        return False

    def verdict(self, grace: Optional[int] = None) -> Verdict:
        end = self._sim.step_index if self._sim else 0
        if grace is None:
            grace = 2 * self._sim.fairness_bound * max(1, len(self._sim.state.nodes)) if self._sim else 0
        by_pair: Dict[Tuple[int, int], List[SearchRecord]] = {}
        skipped = 0
        for r in self.records.values():
            if not r.admissible_at_init or self.exempt(r, end):
                skipped += 1
                continue
            by_pair.setdefault((r.origin, r.dest_id), []).append(r)
        for pair, recs in sorted(by_pair.items()):
            recs.sort(key=lambda r: (r.initiated_at, r.tag))
            delivered: Optional[SearchRecord] = None
            for r in recs:
                if delivered is not None and r.initiated_at > delivered.initiated_at:
                    stuck = r.outcome is Outcome.PENDING and end - r.initiated_at > grace
                    if r.outcome is Outcome.FAILED or stuck:
                        return Verdict(self.name, Status.VIOLATED, r.resolved_at or end,
                                       (pair, delivered.tag, r.tag))
                if r.outcome is Outcome.DELIVERED and delivered is None:
                    delivered = r
        note = f"{len(self.records)} searches"
        if skipped:
            note += f"; {skipped} exempt (non-admissible initiation or leaving endpoint)"
        return Verdict(self.name, Status.HOLDS, note=note)


# --------------------------------------------------------------------------- non-triviality

def probe_all_pairs(sim: Simulator, max_steps: Optional[int] = None, seed: int = 0) -> Verdict:
    """From the simulator's current state, search from every staying node to
    every present staying id and require all of them to be delivered.

    Sources probe one after another: every pending batch re-probes on each
    timeout, so n^2 simultaneous batches would outrun the delivery rate.
    ``max_steps`` bounds each source's wave.  Runs on a private copy; ``sim``
    itself is untouched.
    """
    from .sim import RandomFair

    s = sim.state.copy()
    probe = Simulator(s, sim.protocol, RandomFair(random.Random(f"{seed}:probe")), seed=seed,
                      fairness_bound=sim.fairness_bound)
    obs = SearchObserver()
    probe.observers.append(obs)
    obs.on_start(probe)
    targets = s.staying_present()
    budget = max_steps or 8 * sim.fairness_bound * max(2, len(targets))
    settled = lambda _: all(r.outcome is not Outcome.PENDING for r in obs.records.values())  # noqa: E731
    for u in targets:
        for d in targets:
            probe.step(probe_action(u, d))
        probe.run(budget, stop=settled)
        if not settled(probe):
            break
    bad = [(r.origin, r.dest_id, r.outcome.value) for r in obs.records.values()
           if r.outcome is not Outcome.DELIVERED]
    if bad:
        return Verdict("nontrivial_search", Status.VIOLATED, probe.step_index, bad[:5])
    return Verdict("nontrivial_search", Status.HOLDS, note=f"{len(obs.records)} probes delivered")


def probe_action(u: int, d: int):
    from .sim import Action

    return Action(EventKind.INIT_SEARCH, u, dest=d)


# --------------------------------------------------------------------------- trace-level checks

@dataclass
class Trace:
    initial: SystemState
    events: List[Event]
    protocol: str = "plus"
    seed: int = 0
    fairness_bound: Optional[int] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def of(cls, sim: Simulator, **meta) -> "Trace":
        return cls(sim.initial.copy(), list(sim.events), sim.protocol.name, sim.seed,
                   sim.fairness_bound, dict(meta))


def _replay_with(trace: Trace, *observers: Observer) -> Simulator:
    return replay(trace.initial, trace.events, trace.protocol, observers)


def check_connectivity(trace: Trace) -> Verdict:
    ob = ConnectivityObserver()
    _replay_with(trace, ob)
    return ob.verdict()


def check_phi_monotone(trace: Trace) -> Verdict:
    ob = PhiObserver()
    _replay_with(trace, ob)
    return ob.verdict()


def check_monotone_admissibility(trace: Trace) -> Verdict:
    ob = AdmissibilityObserver(star=trace.protocol == "star")
    _replay_with(trace, ob)
    return ob.verdict()


def check_convergence(trace: Trace, closure_steps: int = 1000) -> Verdict:
    ob = ConvergenceObserver(closure_steps)
    _replay_with(trace, ob)
    return ob.verdict()


def check_searchability(trace: Trace, grace: Optional[int] = None) -> Verdict:
    adm = AdmissibilityObserver(star=trace.protocol == "star")
    ob = SearchObserver(adm)
    _replay_with(trace, adm, ob)
    return ob.verdict(grace)


def check_fdp(trace: Trace) -> Verdict:
    ob = FdpObserver()
    _replay_with(trace, ob)
    return ob.verdict()


CHECKS = {
    "connectivity": check_connectivity,
    "phi_monotone": check_phi_monotone,
    "admissibility": check_monotone_admissibility,
    "convergence": check_convergence,
    "searchability": check_searchability,
    "fdp": check_fdp,
}
