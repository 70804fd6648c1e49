"""File formats: JSON states and scenarios, NDJSON traces, DOT snapshots.

A trace file holds one JSON document per line.  The first line is a header
with the initial state; every following line is one event, and verdict lines
(if any) come last.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .messages import Search, from_json, to_json
from .model import Mode, NodeState, SystemState, network_graph
from .sim import Event, InitialStateSpec

SCHEMA_VERSION = 1

PROPERTIES = ("connectivity", "phi_monotone", "admissibility", "convergence",
              "searchability", "fdp", "determinism")
STOP_MODES = ("closure", "convergence", "script", "steps")


class FormatError(ValueError):
    """A file that does not match the expected schema."""


# --------------------------------------------------------------------------- states

def node_to_json(n: NodeState) -> dict:
    doc: Dict[str, Any] = {"id": n.id, "mode": n.mode.value}
    if n.exited:
        doc["exited"] = True
    for name in ("left", "right", "temp_left", "temp_right"):
        vals = getattr(n, name)
        if vals:
            doc[name] = sorted(vals)
    if n.seq:
        doc["seq"] = n.seq
    if n.seq_table:
        doc["seq_table"] = {str(k): v for k, v in sorted(n.seq_table.items())}
    if n.waiting_for:
        doc["waiting_for"] = {str(k): [to_json(m) for m in batch]
                              for k, batch in sorted(n.waiting_for.items())}
    if n.unique_values:
        doc["unique_values"] = {str(k): list(t) for k, t in sorted(n.unique_values.items())}
    if n.token_counter:
        doc["token_counter"] = n.token_counter
    return doc


def node_from_json(doc: dict) -> NodeState:
    try:
        n = NodeState(int(doc["id"]), Mode(doc.get("mode", "staying")))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad node entry {doc!r}: {exc}") from exc
    n.exited = bool(doc.get("exited", False))
    for name in ("left", "right", "temp_left", "temp_right"):
        setattr(n, name, {int(x) for x in doc.get(name, ())})
    n.seq = int(doc.get("seq", 0))
    n.seq_table = {int(k): int(v) for k, v in doc.get("seq_table", {}).items()}
    waiting: Dict[int, Tuple[Search, ...]] = {}
    for k, batch in doc.get("waiting_for", {}).items():
        msgs = tuple(from_json(m) for m in batch)
        if not all(isinstance(m, Search) for m in msgs):
            raise FormatError(f"waiting_for of node {n.id} holds a non-search message")
        waiting[int(k)] = msgs  # type: ignore[assignment]
    n.waiting_for = waiting
    n.unique_values = {int(k): (int(t[0]), int(t[1])) for k, t in doc.get("unique_values", {}).items()}
    n.token_counter = int(doc.get("token_counter", 0))
    return n


def state_to_json(s: SystemState) -> dict:
    return {
        "nodes": [node_to_json(s.nodes[i]) for i in sorted(s.nodes)],
        "channels": {str(i): [to_json(m) for m in s.channels[i]]
                     for i in sorted(s.channels) if s.channels[i]},
    }


def state_from_json(doc: dict) -> SystemState:
    try:
        nodes = {n.id: n for n in (node_from_json(d) for d in doc["nodes"])}
    except (KeyError, TypeError) as exc:
        raise FormatError(f"state needs a 'nodes' list: {exc}") from exc
    channels: Dict[int, list] = {i: [] for i in nodes}
    for k, msgs in doc.get("channels", {}).items():
        i = int(k)
        if i not in nodes:
            raise FormatError(f"channel for unknown node {i}")
        try:
            channels[i] = [from_json(m) for m in msgs]
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad message in channel {i}: {exc}") from exc
    s = SystemState(nodes, channels)
    dangling = s.dangling_references()
    if dangling:
        raise FormatError(f"references to unknown nodes: {dangling[:5]}")
    return s


# --------------------------------------------------------------------------- scenarios

@dataclass
class Scenario:
    """A runnable experiment: an initial state plus scheduling and checks.

    ``initial`` is either ``{"generate": {...InitialStateSpec fields...}}`` or
    ``{"state": <state json>}`` for a handcrafted start.
    """

    initial: Dict[str, Any]
    protocol: str = "plus"
    seed: int = 0
    scheduler: Dict[str, Any] = field(default_factory=lambda: {"kind": "random_fair"})
    stop: Dict[str, Any] = field(default_factory=lambda: {"mode": "closure"})
    properties: List[str] = field(default_factory=lambda: ["connectivity", "admissibility",
                                                           "convergence"])
    leave_schedule: Dict[int, List[int]] = field(default_factory=dict)
    fairness_bound: Optional[int] = None
    outputs: Dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    name: str = ""

    def initial_state(self, seed: Optional[int] = None) -> SystemState:
        if "state" in self.initial:
            return state_from_json(self.initial["state"])
        gen = dict(self.initial.get("generate", {}))
        gen.setdefault("seed", self.seed if seed is None else seed)
        if seed is not None:
            gen["seed"] = seed
        gen.setdefault("protocol", "star" if self.protocol == "star" else "plus")
        known = {f.name for f in fields(InitialStateSpec)}
        unknown = set(gen) - known
        if unknown:
            raise FormatError(f"unknown generator fields {sorted(unknown)}")
        gen["leaving"] = tuple(gen.get("leaving", ()))
        from .sim import generate_initial_state

        return generate_initial_state(InitialStateSpec(**gen))


def scenario_from_json(doc: dict, base: Optional[Path] = None) -> Scenario:
    if not isinstance(doc, dict):
        raise FormatError("scenario must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise FormatError(f"schema_version {version!r} not supported (expected {SCHEMA_VERSION})")
    if "initial_state" not in doc:
        raise FormatError("scenario needs 'initial_state'")
    init = doc["initial_state"]
    if not isinstance(init, dict) or not ({"generate", "state"} & set(init)):
        raise FormatError("initial_state needs 'generate' or 'state'")
    props = list(doc.get("properties", ["connectivity", "admissibility", "convergence"]))
    bad = [p for p in props if p not in PROPERTIES]
    if bad:
        raise FormatError(f"unknown properties {bad}; known: {list(PROPERTIES)}")
    stop = dict(doc.get("stop", {"mode": "closure"}))
    if stop.get("mode", "closure") not in STOP_MODES:
        raise FormatError(f"unknown stop mode {stop.get('mode')!r}")
    sched = dict(doc.get("scheduler", {"kind": "random_fair"}))
    if sched.get("kind") not in ("random_fair", "round_robin", "adversary"):
        raise FormatError(f"unknown scheduler {sched.get('kind')!r}")
    protocol = doc.get("protocol", "plus")
    if protocol not in ("plus", "star"):
        raise FormatError(f"unknown protocol {protocol!r}")
    leave = {int(k): [int(x) for x in v] for k, v in doc.get("leave_schedule", {}).items()}
    return Scenario(initial=init, protocol=protocol, seed=int(doc.get("seed", 0)),
                    scheduler=sched, stop=stop, properties=props, leave_schedule=leave,
                    fairness_bound=doc.get("fairness_bound"), outputs=dict(doc.get("outputs", {})),
                    name=doc.get("name", base.stem if base else ""))


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: not valid JSON ({exc})") from exc
    return scenario_from_json(doc, p)


# --------------------------------------------------------------------------- traces

def write_trace(path: str | Path, initial: SystemState, events: Iterable[Event], *,
                protocol: str, seed: int, fairness_bound: Optional[int],
                verdicts: Sequence[Any] = (), meta: Optional[dict] = None) -> None:
    with open(path, "w") as fh:
        head = {"type": "header", "schema_version": SCHEMA_VERSION, "protocol": protocol,
                "seed": seed, "fairness_bound": fairness_bound, "initial": state_to_json(initial),
                "meta": meta or {}}
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for ev in events:
            fh.write(json.dumps({"type": "event", **ev.to_json()}, sort_keys=True) + "\n")
        for v in verdicts:
            fh.write(json.dumps({"type": "verdict", **v.to_row()}, sort_keys=True) + "\n")


@dataclass
class TraceFile:
    initial: SystemState
    events: List[Event]
    protocol: str
    seed: int
    fairness_bound: Optional[int]
    verdicts: List[dict]
    meta: dict


def read_trace(path: str | Path) -> TraceFile:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty trace")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad header ({exc})") from exc
    if head.get("type") != "header" or head.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"{path}: missing header or unsupported schema_version")
    events: List[Event] = []
    verdicts: List[dict] = []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        doc = json.loads(line)
        kind = doc.pop("type", None)
        if kind == "event":
            events.append(Event.from_json(doc))
        elif kind == "verdict":
            verdicts.append(doc)
        else:
            raise FormatError(f"{path}:{no}: unknown record type {kind!r}")
    return TraceFile(state_from_json(head["initial"]), events, head.get("protocol", "plus"),
                     int(head.get("seed", 0)), head.get("fairness_bound"), verdicts,
                     head.get("meta", {}))


# --------------------------------------------------------------------------- snapshots

def to_dot(s: SystemState, title: str = "NG") -> str:
    """Graphviz rendering of the network graph.

    Explicit edges are solid, implicit ones dashed; leaving nodes are shaded
    and exited nodes left out.
    """
    lines = [f'digraph "{title}" {{', "  rankdir=LR;", "  node [shape=circle];"]
    for i in sorted(s.present()):
        if s.nodes[i].leaving:
            lines.append(f'  {i} [style=filled, fillcolor="gray80"];')
        else:
            lines.append(f"  {i};")
    seen = set()
    for e in network_graph(s, present_only=True):
        key = (e.src, e.dst, e.explicit)
        if key in seen:
            continue
        seen.add(key)
        style = "solid" if e.explicit else "dashed"
        lines.append(f"  {e.src} -> {e.dst} [style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- summaries

def witness_digest(witness: Any) -> str:
    if witness is None:
        return ""
    return hashlib.blake2b(repr(witness).encode(), digest_size=8).hexdigest()


def write_summary(path: str | Path, verdicts: Sequence[Any]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["property", "status", "step", "witness_digest", "note"])
        for v in verdicts:
            w.writerow([v.property, v.status.value, "" if v.step is None else v.step,
                        witness_digest(v.witness), v.note])


def scenario_to_json(scn: Scenario) -> dict:
    doc = asdict(scn)
    doc["initial_state"] = doc.pop("initial")
    doc["leave_schedule"] = {str(k): v for k, v in scn.leave_schedule.items()}
    return doc
