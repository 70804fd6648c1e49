"""Search+ actions: batched search requests resolved by forward probes."""

from __future__ import annotations

from typing import FrozenSet, List, Tuple

from .actions import ActionOutcome, self_delegate, store
from .messages import ForwardProbe, Message, ProbeFail, ProbeSuccess, Search
from .model import NodeState


def probe_emissions(n: NodeState) -> List[Tuple[int, Message]]:
    """One self-addressed probe per destination with a pending batch."""
    out = []
    for d in sorted(n.waiting_for):
        if n.waiting_for[d]:
            seq = n.seq_table.get(d, 0)
            out.append((n.id, ForwardProbe(n.id, d, frozenset((n.id,)), seq)))
    return out


def init_search(n: NodeState, dest_id: int, tag: int | None = None) -> ActionOutcome:
    out = ActionOutcome(n.copy())
    st = out.new_state
    batch = st.waiting_for.get(dest_id, ())
    if not batch:
        st.seq += 1
        st.seq_table[dest_id] = st.seq
    st.waiting_for[dest_id] = batch + (Search(n.id, dest_id, tag),)
    return out


def forward_probe(n: NodeState, source: int, dest_id: int, nxt: FrozenSet[int], seq: int,
                  temp: bool) -> ActionOutcome:
    """Probe forwarding; ``temp`` routes the closer-neighbor store to the temporary set."""
    out = ActionOutcome(n.copy())
    me = n.id
    if dest_id > me:
        cand = (set(nxt) - {me}) | {w for w in n.right if w <= dest_id}
    else:
        cand = (set(nxt) - {me}) | {w for w in n.left if w >= dest_id}
    if not cand:
        out.send(source, ProbeFail(dest_id, seq))
        self_delegate(out, me, source)
        return out
    st = out.new_state
    if dest_id > me:
        u = min(cand)
        if u < me:
            self_delegate(out, me, u)
        elif u > me and (not n.right or u < min(n.right)):
            store(st, u, temp)
    else:
        u = max(cand)
        if u > me:
            self_delegate(out, me, u)
        elif u < me and (not n.left or u > max(n.left)):
            store(st, u, temp)
    out.send(u, ForwardProbe(source, dest_id, frozenset(cand), seq))
    return out


def on_forward_probe(n: NodeState, source: int, dest_id: int, nxt: FrozenSet[int],
                     seq: int) -> ActionOutcome:
    if dest_id == n.id:
        out = ActionOutcome(n.copy())
        self_delegate(out, n.id, *sorted(nxt))
        out.send(source, ProbeSuccess(dest_id, seq, n.id))
        self_delegate(out, n.id, source)
        return out
    return forward_probe(n, source, dest_id, nxt, seq, temp=False)


def on_probe_success(n: NodeState, dest_id: int, seq: int, dest: int) -> ActionOutcome:
    out = ActionOutcome(n.copy())
    st = out.new_state
    if seq >= st.seq_table.get(dest_id, 0):
        for m in st.waiting_for.pop(dest_id, ()):
            out.send(dest, m)
    self_delegate(out, n.id, dest)
    return out


def on_probe_fail(n: NodeState, dest_id: int, seq: int) -> ActionOutcome:
    out = ActionOutcome(n.copy())
    st = out.new_state
    if seq >= st.seq_table.get(dest_id, 0):
        out.dropped = st.waiting_for.pop(dest_id, ())
    return out


def on_search(n: NodeState, msg: Search) -> ActionOutcome:
    """Terminal handling of a search request.

    At the destination the request is delivered; anywhere else it can only
    stem from a corrupted start and is dropped.  Either way the origin
    reference is kept in circulation.
    """
    out = ActionOutcome(n.copy())
    if msg.dest_id == n.id:
        out.delivered = (msg,)
    else:
        out.dropped = (msg,)
    self_delegate(out, n.id, msg.v)
    return out
