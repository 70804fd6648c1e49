"""Shared pieces of the per-node action functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

from .messages import Message, Search
from .model import Mode, NodeState


@dataclass
class ActionOutcome:
    new_state: NodeState
    outbox: List[Tuple[int, Message]] = field(default_factory=list)
    exited: bool = False
    # observer annotations: search requests that reached their destination or
    # were dropped by this action
    delivered: Tuple[Search, ...] = ()
    dropped: Tuple[Search, ...] = ()

    def send(self, to: int, msg: Message) -> None:
        self.outbox.append((to, msg))


def sanitize(n: NodeState) -> NodeState:
    """Side-correct copy of ``n``.

    References on the wrong side move to the matching set of the other side,
    self-references are dropped, and a staying node's temporary sets fold into
    its regular sets.  Returns ``n`` itself when nothing needs repair.
    """
    i = n.id
    staying = n.mode is Mode.STAYING
    ok = (n.is_sane() and i not in n.left and i not in n.right
          and not (staying and (n.temp_left or n.temp_right)))
    if ok:
        return n
    m = n.copy()
    left, right, tl, tr = set(), set(), set(), set()
    for x in n.left | n.right:
        if x < i:
            left.add(x)
        elif x > i:
            right.add(x)
    for x in n.temp_left | n.temp_right:
        if x < i:
            (left if staying else tl).add(x)
        elif x > i:
            (right if staying else tr).add(x)
    m.left, m.right, m.temp_left, m.temp_right = left, right, tl, tr
    return m


def store(n: NodeState, x: int, temp: bool) -> None:
    """Insert ``x`` on its side; ``temp`` selects the temporary set."""
    if x < n.id:
        (n.temp_left if temp else n.left).add(x)
    elif x > n.id:
        (n.temp_right if temp else n.right).add(x)


def self_delegate(out: ActionOutcome, me: int, *targets: int) -> None:
    """Queue ``TempDelegate(x)`` to self for each x other than self."""
    from .messages import TempDelegate

    for x in targets:
        if x is not None and x != me:
            out.send(me, TempDelegate(x))
