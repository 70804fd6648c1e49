"""Protocol messages carried in node channels.

Every message is an immutable value. A node reference is a plain ``int``;
``None`` plays the role of the bottom value in ``Introduce``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


Token = Tuple[int, int]


@dataclass(frozen=True, slots=True)
class Introduce:
    v: int
    w: Optional[int]


@dataclass(frozen=True, slots=True)
class Linearize:
    v: int


@dataclass(frozen=True, slots=True)
class TempDelegate:
    u: int


@dataclass(frozen=True, slots=True)
class ForwardProbe:
    source: int
    dest_id: int
    next: frozenset
    seq: int


@dataclass(frozen=True, slots=True)
class ProbeSuccess:
    dest_id: int
    seq: int
    dest: int


@dataclass(frozen=True, slots=True)
class ProbeFail:
    dest_id: int
    seq: int


@dataclass(frozen=True, slots=True)
class Search:
    v: int
    dest_id: int
    # observer-side identity of the request; never read by the protocol
    tag: Optional[int] = None


@dataclass(frozen=True, slots=True)
class RevAndLinReq:
    dir: Side


@dataclass(frozen=True, slots=True)
class RevAndLinAck:
    v: int
    token: Token


@dataclass(frozen=True, slots=True)
class RevAndLin:
    node_list: frozenset
    token: Token


Message = Union[
    Introduce,
    Linearize,
    TempDelegate,
    ForwardProbe,
    ProbeSuccess,
    ProbeFail,
    Search,
    RevAndLinReq,
    RevAndLinAck,
    RevAndLin,
]

MESSAGE_KINDS = {
    cls.__name__: cls
    for cls in (
        Introduce,
        Linearize,
        TempDelegate,
        ForwardProbe,
        ProbeSuccess,
        ProbeFail,
        Search,
        RevAndLinReq,
        RevAndLinAck,
        RevAndLin,
    )
}

BASE_KINDS = (Introduce, Linearize, TempDelegate, ForwardProbe, ProbeSuccess, ProbeFail, Search)
DEPARTURE_KINDS = (RevAndLinReq, RevAndLinAck, RevAndLin)


def refs(msg: Message) -> Tuple[int, ...]:
    """Node references carried by ``msg`` (each one is an implicit edge)."""
    if isinstance(msg, TempDelegate):
        return (msg.u,)
    if isinstance(msg, Introduce):
        return (msg.v,) if msg.w is None else (msg.v, msg.w)
    if isinstance(msg, Linearize):
        return (msg.v,)
    if isinstance(msg, ForwardProbe):
        return (msg.source, *sorted(msg.next))
    if isinstance(msg, ProbeSuccess):
        return (msg.dest,)
    if isinstance(msg, Search):
        return (msg.v,)
    if isinstance(msg, RevAndLinAck):
        return (msg.v,)
    if isinstance(msg, RevAndLin):
        return tuple(sorted(msg.node_list))
    return ()


def to_json(msg: Message) -> dict:
    kind = type(msg).__name__
    if isinstance(msg, Introduce):
        return {"kind": kind, "v": msg.v, "w": msg.w}
    if isinstance(msg, Linearize):
        return {"kind": kind, "v": msg.v}
    if isinstance(msg, TempDelegate):
        return {"kind": kind, "u": msg.u}
    if isinstance(msg, ForwardProbe):
        return {"kind": kind, "source": msg.source, "dest_id": msg.dest_id,
                "next": sorted(msg.next), "seq": msg.seq}
    if isinstance(msg, ProbeSuccess):
        return {"kind": kind, "dest_id": msg.dest_id, "seq": msg.seq, "dest": msg.dest}
    if isinstance(msg, ProbeFail):
        return {"kind": kind, "dest_id": msg.dest_id, "seq": msg.seq}
    if isinstance(msg, Search):
        return {"kind": kind, "v": msg.v, "dest_id": msg.dest_id, "tag": msg.tag}
    if isinstance(msg, RevAndLinReq):
        return {"kind": kind, "dir": msg.dir.value}
    if isinstance(msg, RevAndLinAck):
        return {"kind": kind, "v": msg.v, "token": list(msg.token)}
    if isinstance(msg, RevAndLin):
        return {"kind": kind, "node_list": sorted(msg.node_list), "token": list(msg.token)}
    raise TypeError(f"not a message: {msg!r}")


def from_json(doc: dict) -> Message:
    kind = doc.get("kind")
    if kind not in MESSAGE_KINDS:
        raise ValueError(f"unknown message kind {kind!r}")
    if kind == "Introduce":
        return Introduce(int(doc["v"]), None if doc.get("w") is None else int(doc["w"]))
    if kind == "Linearize":
        return Linearize(int(doc["v"]))
    if kind == "TempDelegate":
        return TempDelegate(int(doc["u"]))
    if kind == "ForwardProbe":
        return ForwardProbe(int(doc["source"]), int(doc["dest_id"]),
                            frozenset(int(x) for x in doc["next"]), int(doc["seq"]))
    if kind == "ProbeSuccess":
        return ProbeSuccess(int(doc["dest_id"]), int(doc["seq"]), int(doc["dest"]))
    if kind == "ProbeFail":
        return ProbeFail(int(doc["dest_id"]), int(doc["seq"]))
    if kind == "Search":
        tag = doc.get("tag")
        return Search(int(doc["v"]), int(doc["dest_id"]), None if tag is None else int(tag))
    if kind == "RevAndLinReq":
        return RevAndLinReq(Side(doc["dir"]))
    if kind == "RevAndLinAck":
        return RevAndLinAck(int(doc["v"]), tuple(int(x) for x in doc["token"]))
    return RevAndLin(frozenset(int(x) for x in doc["node_list"]),
                     tuple(int(x) for x in doc["token"]))
