"""Build-List+ actions.

Each function takes a node state (already sanitized by the caller) and returns
an :class:`ActionOutcome` holding a fresh state and the messages to send.  The
input state is never mutated.
"""

from __future__ import annotations

from typing import Optional

from . import search
from .actions import ActionOutcome, sanitize, self_delegate, store
from .messages import (ForwardProbe, Introduce, Linearize, Message, ProbeFail, ProbeSuccess,
                       RevAndLin, RevAndLinAck, RevAndLinReq, Search, TempDelegate)
from .model import NodeState


def timeout(n: NodeState, farthest_self_intro: bool = False) -> ActionOutcome:
    """Periodic action: re-probe pending batches and introduce neighbors.

    Neighbors on one side are introduced pairwise to the next closer one; the
    node introduces itself to its closest neighbor on each side (or, with
    ``farthest_self_intro``, to the farthest one).
    """
    out = ActionOutcome(n.copy())
    out.outbox.extend(search.probe_emissions(n))
    left = sorted(n.left)
    right = sorted(n.right)
    for a, b in zip(left, left[1:]):
        out.send(b, Introduce(a, n.id))
    for a, b in zip(right, right[1:]):
        out.send(a, Introduce(b, n.id))
    if left:
        out.send(left[0] if farthest_self_intro else left[-1], Introduce(n.id, None))
    if right:
        out.send(right[-1] if farthest_self_intro else right[0], Introduce(n.id, None))
    return out


def on_introduce(n: NodeState, v: int, w: Optional[int]) -> ActionOutcome:
    out = ActionOutcome(n.copy())
    me = n.id
    if v == me:
        # the self-reference is dropped; w is kept in circulation
        self_delegate(out, me, w)
        return out
    if w == v:
        w = None
    if w is None:
        out.send(me, TempDelegate(v))
        return out
    store(out.new_state, v, temp=False)
    out.send(w, Linearize(v))
    out.send(me, TempDelegate(w))
    return out


def on_linearize(n: NodeState, v: int) -> ActionOutcome:
    out = ActionOutcome(n.copy())
    me = n.id
    if v == me:
        return out
    out.send(me, TempDelegate(v))
    st = out.new_state
    # a v closer than every stored neighbor has nothing to delegate towards
    if v < me and st.left and v < max(st.left):
        w = min(x for x in st.left if x > v)
        st.left.discard(v)
        out.send(w, TempDelegate(v))
    elif v > me and st.right and v > min(st.right):
        w = max(x for x in st.right if x < v)
        st.right.discard(v)
        out.send(w, TempDelegate(v))
    return out


def temp_delegate(n: NodeState, u: int, temp: bool) -> ActionOutcome:
    """TempDelegate handling; ``temp`` routes stores to the temporary sets."""
    out = ActionOutcome(n.copy())
    me = n.id
    st = out.new_state
    if u < me:
        if not n.left or max(n.left) < u:
            store(st, u, temp)
        elif max(n.left) > u:
            out.send(max(n.left), TempDelegate(u))
    elif u > me:
        if not n.right or min(n.right) > u:
            store(st, u, temp)
        elif min(n.right) < u:
            out.send(min(n.right), TempDelegate(u))
    return out


def on_temp_delegate(n: NodeState, u: int) -> ActionOutcome:
    return temp_delegate(n, u, temp=False)


def handle(n: NodeState, msg: Message) -> ActionOutcome:
    """Dispatch one delivered message under Build-List+/Search+."""
    n = sanitize(n)
    if isinstance(msg, TempDelegate):
        return on_temp_delegate(n, msg.u)
    if isinstance(msg, Introduce):
        return on_introduce(n, msg.v, msg.w)
    if isinstance(msg, Linearize):
        return on_linearize(n, msg.v)
    if isinstance(msg, ForwardProbe):
        return search.on_forward_probe(n, msg.source, msg.dest_id, msg.next, msg.seq)
    if isinstance(msg, ProbeSuccess):
        return search.on_probe_success(n, msg.dest_id, msg.seq, msg.dest)
    if isinstance(msg, ProbeFail):
        return search.on_probe_fail(n, msg.dest_id, msg.seq)
    if isinstance(msg, Search):
        return search.on_search(n, msg)
    # departure-only kinds have no Build-List+ action; keep their references alive
    out = ActionOutcome(n.copy())
    if isinstance(msg, RevAndLinAck):
        self_delegate(out, n.id, msg.v)
    elif isinstance(msg, RevAndLin):
        self_delegate(out, n.id, *sorted(msg.node_list))
    elif not isinstance(msg, RevAndLinReq):
        raise TypeError(f"not a message: {msg!r}")
    return out


def handle_timeout(n: NodeState, farthest_self_intro: bool = False) -> ActionOutcome:
    return timeout(sanitize(n), farthest_self_intro)
