"""Deliberately broken protocol variants.

They exist so the checkers can be shown to catch real defects: each mutant
changes one rule of Build-List+ and a checker is expected to flag it.
"""

from __future__ import annotations

from typing import Callable, Dict

from . import buildlist, search
from .actions import ActionOutcome, sanitize
from .messages import Introduce, Message, TempDelegate
from .model import NodeState
from .sim import Protocol


def _silent_timeout(n: NodeState, oracle: bool) -> ActionOutcome:
    # never introduces itself, so no edge ever gains its reverse direction
    n = sanitize(n)
    out = ActionOutcome(n.copy())
    out.outbox.extend(search.probe_emissions(n))
    left, right = sorted(n.left), sorted(n.right)
    for a, b in zip(left, left[1:]):
        out.send(b, Introduce(a, n.id))
    for a, b in zip(right, right[1:]):
        out.send(a, Introduce(b, n.id))
    return out


def _lossy_handle(n: NodeState, msg: Message) -> ActionOutcome:
    # a delegated reference that is not closer than the current neighbor is
    # dropped instead of being handed on
    if isinstance(msg, TempDelegate) and msg.u != n.id:
        n = sanitize(n)
        side = n.left if msg.u < n.id else n.right
        closest = (max(side) if msg.u < n.id else min(side)) if side else None
        if closest is not None and closest != msg.u and abs(closest - n.id) < abs(msg.u - n.id):
            return ActionOutcome(n.copy())
    return buildlist.handle(n, msg)


def _plus_init_search(n: NodeState, dest: int, tag) -> ActionOutcome:
    return search.init_search(sanitize(n), dest, tag)


MUTANTS: Dict[str, Callable[[], Protocol]] = {
    "no-self-intro": lambda: Protocol("mutant:no-self-intro", False, _silent_timeout,
                                      buildlist.handle, _plus_init_search),
    "drop-delegate": lambda: Protocol("mutant:drop-delegate", False,
                                        lambda n, oracle: buildlist.handle_timeout(n),
                                        _lossy_handle, _plus_init_search),
}


def get_mutant(name: str) -> Protocol:
    try:
        return MUTANTS[name]()
    except KeyError:
        raise ValueError(f"unknown mutant {name!r}; choose from {sorted(MUTANTS)}") from None
