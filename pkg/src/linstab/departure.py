"""Build-List*/Search* actions: leaving-mode behavior, reversal handshake, exit.

Staying nodes run exactly the Build-List+/Search+ actions; only leaving nodes
and the three handshake messages get new behavior here.
"""

from __future__ import annotations

from typing import Dict, Iterable, Optional, Set

from . import buildlist, search
from .actions import ActionOutcome, sanitize, self_delegate, store
from .messages import (ForwardProbe, Introduce, Linearize, Message, ProbeFail, ProbeSuccess,
                       RevAndLin, RevAndLinAck, RevAndLinReq, Search, Side, TempDelegate, Token)
from .model import NodeState, SystemState, network_graph


def nidec(s: SystemState, u: int) -> bool:
    """True iff no other present node references ``u`` and ``u``'s channel is empty."""
    if s.channels.get(u):
        return False
    for e in network_graph(s):
        if e.dst == u and e.src != u:
            return False
    return True


def mint_token(n: NodeState, v: int) -> Token:
    """Existing token for ``v`` or a fresh one; mutates ``n``."""
    tok = n.unique_values.get(v)
    if tok is not None:
        return tok
    used = [c for (owner, c) in n.unique_values.values() if owner == n.id]
    counter = max([n.token_counter, *(c + 1 for c in used)])
    tok = (n.id, counter)
    n.token_counter = counter + 1
    n.unique_values[v] = tok
    return tok


def timeout_star(n: NodeState, oracle: bool, farthest_self_intro: bool = False) -> ActionOutcome:
    n = sanitize(n)
    if n.staying:
        return buildlist.timeout(n, farthest_self_intro)
    out = ActionOutcome(n.copy())
    if oracle:
        nbrs = sorted(n.neighbors())
        for v in nbrs:
            for w in nbrs:
                if v != w:
                    out.send(v, Introduce(w, None))
        st = out.new_state
        st.left, st.right, st.temp_left, st.temp_right = set(), set(), set(), set()
        st.exited = True
        out.exited = True
        return out
    for v in sorted(n.left | n.temp_left):
        out.send(v, RevAndLinReq(Side.RIGHT))
    for w in sorted(n.right | n.temp_right):
        out.send(w, RevAndLinReq(Side.LEFT))
    return out


def on_rev_and_lin_req(n: NodeState, dir: Side) -> ActionOutcome:
    out = ActionOutcome(n.copy())
    st = out.new_state
    if dir is Side.RIGHT:
        targets: Iterable[int] = sorted(n.right | n.temp_right)
    elif n.staying:
        targets = sorted(n.left | n.temp_left)
    else:
        return out
    for v in targets:
        out.send(v, RevAndLinAck(n.id, mint_token(st, v)))
    return out


def on_rev_and_lin_ack(n: NodeState, v: int, token: Token) -> ActionOutcome:
    out = ActionOutcome(n.copy())
    me = n.id
    if v == me:
        return out
    if n.staying:
        out.send(me, TempDelegate(v))
        return out
    store(out.new_state, v, temp=True)
    opposite = n.right if v < me else n.left
    out.send(v, RevAndLin(frozenset(opposite), token))
    return out


def _matching_neighbor(n: NodeState, token: Token) -> Optional[int]:
    hits = [v for v in n.neighbors() if n.unique_values.get(v) == token]
    return min(hits) if hits else None


def on_rev_and_lin(n: NodeState, node_list: frozenset, token: Token) -> ActionOutcome:
    out = ActionOutcome(n.copy())
    me = n.id
    v = _matching_neighbor(n, token)
    # the listed nodes must lie beyond v, on v's side of self
    if v is None or any(x == me or ((x > me) != (v > me)) for x in node_list):
        self_delegate(out, me, *sorted(node_list))
        return out
    st = out.new_state
    if n.staying:
        side = st.left if v < me else st.right
        side |= node_list
        side.discard(v)
        out.send(v, Introduce(me, None))
    elif v < me:
        st.temp_left |= node_list
    else:
        side = st.right if v in st.right else st.temp_right
        side |= node_list
        side.discard(v)
        out.send(v, Introduce(me, None))
    return out


def _leaving(n: NodeState, msg: Message) -> ActionOutcome:
    me = n.id
    if isinstance(msg, Introduce):
        out = ActionOutcome(n.copy())
        st = out.new_state
        for x in (msg.v, msg.w):
            if x is not None and x not in n.left and x not in n.right:
                store(st, x, temp=True)
        return out
    if isinstance(msg, Linearize):
        out = ActionOutcome(n.copy())
        store(out.new_state, msg.v, temp=True)
        return out
    if isinstance(msg, TempDelegate):
        return buildlist.temp_delegate(n, msg.u, temp=True)
    if isinstance(msg, ForwardProbe):
        if msg.dest_id == me:
            out = ActionOutcome(n.copy())
            out.send(msg.source, ProbeFail(msg.dest_id, msg.seq))
            self_delegate(out, me, *sorted(msg.next))
            self_delegate(out, me, msg.source)
            return out
        return search.forward_probe(n, msg.source, msg.dest_id, msg.next, msg.seq, temp=True)
    if isinstance(msg, ProbeSuccess):
        out = ActionOutcome(n.copy())
        self_delegate(out, me, msg.dest)
        return out
    if isinstance(msg, ProbeFail):
        return ActionOutcome(n.copy())
    if isinstance(msg, Search):
        return search.on_search(n, msg)
    raise TypeError(f"not a base message: {msg!r}")


def handle_star(n: NodeState, msg: Message) -> ActionOutcome:
    """Dispatch one delivered message under Build-List*/Search*."""
    n = sanitize(n)
    if isinstance(msg, RevAndLinReq):
        return on_rev_and_lin_req(n, msg.dir)
    if isinstance(msg, RevAndLinAck):
        return on_rev_and_lin_ack(n, msg.v, msg.token)
    if isinstance(msg, RevAndLin):
        return on_rev_and_lin(n, msg.node_list, msg.token)
    if n.staying:
        return buildlist.handle(n, msg)
    return _leaving(n, msg)


def init_search_star(n: NodeState, dest_id: int, tag: Optional[int] = None) -> ActionOutcome:
    if n.leaving:
        return ActionOutcome(n.copy())
    return search.init_search(n, dest_id, tag)
