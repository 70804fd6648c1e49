"""Core state types and the graph views derived from a system state."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Set, Tuple

from .messages import Message, Search, Token, refs


class Mode(str, Enum):
    STAYING = "staying"
    LEAVING = "leaving"


@dataclass(slots=True)
class NodeState:
    id: int
    mode: Mode = Mode.STAYING
    exited: bool = False
    left: Set[int] = field(default_factory=set)
    right: Set[int] = field(default_factory=set)
    temp_left: Set[int] = field(default_factory=set)
    temp_right: Set[int] = field(default_factory=set)
    seq: int = 0
    seq_table: Dict[int, int] = field(default_factory=dict)
    waiting_for: Dict[int, Tuple[Search, ...]] = field(default_factory=dict)
    unique_values: Dict[int, Token] = field(default_factory=dict)
    # counter half of freshly minted tokens
    token_counter: int = 0

    @property
    def staying(self) -> bool:
        return self.mode is Mode.STAYING

    @property
    def leaving(self) -> bool:
        return self.mode is Mode.LEAVING

    def copy(self) -> "NodeState":
        return NodeState(
            self.id, self.mode, self.exited,
            set(self.left), set(self.right), set(self.temp_left), set(self.temp_right),
            self.seq, dict(self.seq_table), dict(self.waiting_for),
            dict(self.unique_values), self.token_counter,
        )

    def neighbors(self) -> Set[int]:
        return self.left | self.right | self.temp_left | self.temp_right

    def sets_key(self) -> tuple:
        """Hashable snapshot of the four neighbor sets."""
        return (frozenset(self.left), frozenset(self.right),
                frozenset(self.temp_left), frozenset(self.temp_right))

    def is_sane(self) -> bool:
        i = self.id
        return (all(x < i for x in self.left) and all(x < i for x in self.temp_left)
                and all(y > i for y in self.right) and all(y > i for y in self.temp_right))


@dataclass
class SystemState:
    nodes: Dict[int, NodeState]
    channels: Dict[int, List[Message]]

    @classmethod
    def empty(cls, ids: Iterable[int]) -> "SystemState":
        ids = list(ids)
        return cls({i: NodeState(i) for i in ids}, {i: [] for i in ids})

    def copy(self) -> "SystemState":
        return SystemState({i: n.copy() for i, n in self.nodes.items()},
                           {i: list(ch) for i, ch in self.channels.items()})

    def present(self) -> List[int]:
        return sorted(i for i, n in self.nodes.items() if not n.exited)

    def staying_present(self) -> List[int]:
        return sorted(i for i, n in self.nodes.items() if not n.exited and n.staying)

    def leaving_present(self) -> List[int]:
        return sorted(i for i, n in self.nodes.items() if not n.exited and n.leaving)

    def message_count(self) -> int:
        return sum(len(ch) for ch in self.channels.values())

    def dangling_references(self) -> List[Tuple[int, int]]:
        """(holder, ref) pairs whose ref does not name a node of this state."""
        bad = []
        for i, n in self.nodes.items():
            for x in n.neighbors():
                if x not in self.nodes:
                    bad.append((i, x))
            for m in self.channels.get(i, ()):
                for x in refs(m):
                    if x not in self.nodes:
                        bad.append((i, x))
        return bad


class Edge(NamedTuple):
    src: int
    dst: int
    explicit: bool


def network_graph(s: SystemState, present_only: bool = False) -> List[Edge]:
    """NG as an edge list; one entry per stored or in-flight reference."""
    edges: List[Edge] = []
    for i, n in s.nodes.items():
        if n.exited:
            continue
        for coll in (n.left, n.right, n.temp_left, n.temp_right):
            for x in coll:
                edges.append(Edge(i, x, True))
        for m in s.channels.get(i, ()):
            for x in refs(m):
                edges.append(Edge(i, x, False))
    if present_only:
        edges = [e for e in edges if e.dst in s.nodes and not s.nodes[e.dst].exited]
    return edges


def explicit_graph(s: SystemState) -> Set[Tuple[int, int]]:
    out: Set[Tuple[int, int]] = set()
    for i, n in s.nodes.items():
        if not n.exited:
            for coll in (n.left, n.right, n.temp_left, n.temp_right):
                out.update((i, x) for x in coll)
    return out


def line_edges(ids: Iterable[int]) -> Set[Tuple[int, int]]:
    ids = sorted(ids)
    out = set()
    for a, b in zip(ids, ids[1:]):
        out.add((a, b))
        out.add((b, a))
    return out


def next_right(n: NodeState) -> Optional[int]:
    cands = [x for x in n.left | n.right if x > n.id]
    return min(cands) if cands else None


def next_left(n: NodeState) -> Optional[int]:
    cands = [x for x in n.left | n.right if x < n.id]
    return max(cands) if cands else None


def closest_neighbor_graph(s: SystemState) -> Set[Tuple[int, int]]:
    out = set()
    for i, n in s.nodes.items():
        if n.exited:
            continue
        for y in (next_left(n), next_right(n)):
            if y is not None:
                out.add((i, y))
    return out


def potential_phi(s: SystemState) -> int:
    """Sum over nodes of line distance to the nearest stored neighbor on each side.

    A missing neighbor costs ``n``; the leftmost node has no left term and the
    rightmost no right term.  Defined as 0 below two nodes.
    """
    ids = s.present()
    n = len(ids)
    if n < 2:
        return 0
    rank = {x: k for k, x in enumerate(ids)}
    total = 0
    for k, x in enumerate(ids):
        node = s.nodes[x]
        if k < n - 1:
            y = next_right(node)
            total += n if y is None or y not in rank else rank[y] - k
        if k > 0:
            y = next_left(node)
            total += n if y is None or y not in rank else k - rank[y]
    return total


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def weak_components(nodes: Iterable[int], edges: Iterable[Tuple[int, int]]) -> List[Set[int]]:
    uf = _UnionFind(nodes)
    for a, b in edges:
        if a in uf.parent and b in uf.parent:
            uf.union(a, b)
    groups: Dict[int, Set[int]] = {}
    for x in uf.parent:
        groups.setdefault(uf.find(x), set()).add(x)
    return sorted(groups.values(), key=min)


def ng_components(s: SystemState, present_only: bool = True) -> List[Set[int]]:
    nodes = s.present() if present_only else list(s.nodes)
    return weak_components(nodes, ((e.src, e.dst) for e in network_graph(s, present_only)))


def is_weakly_connected(s: SystemState, present_only: bool = True) -> bool:
    return len(ng_components(s, present_only)) <= 1


class ReachIndex:
    """Rightward/leftward explicit-path reachability for every node at once.

    ``R``/``L`` follow any stored reference in the required direction.  The
    staying variants follow only ``Right``/``Left`` entries, may pass through
    leaving nodes (unless ``through_leaving`` is off, in which case a leaving
    node ends a path), and keep only present staying nodes as members.
    """

    def __init__(self, s: SystemState, through_leaving: bool = True):
        ids = sorted(s.nodes)
        self.ids = ids
        self.pos = pos = {x: k for k, x in enumerate(ids)}
        n = len(ids)
        r_all = [0] * n
        l_all = [0] * n
        r_main = [0] * n
        l_main = [0] * n
        staying = 0
        for y in ids:
            node = s.nodes[y]
            k = pos[y]
            if not node.exited and node.staying:
                staying |= 1 << k
            for coll in (node.left, node.right, node.temp_left, node.temp_right):
                for z in coll:
                    j = pos.get(z)
                    if j is None:
                        continue
                    if z > y:
                        r_all[k] |= 1 << j
                    elif z < y:
                        l_all[k] |= 1 << j
            for z in node.right:
                j = pos.get(z)
                if j is not None and z > y:
                    r_main[k] |= 1 << j
            for z in node.left:
                j = pos.get(z)
                if j is not None and z < y:
                    l_main[k] |= 1 << j
        self.staying_mask = staying
        self.R = self._close(r_all, range(n - 1, -1, -1))
        self.L = self._close(l_all, range(n))
        relay = -1 if through_leaving else staying
        rs = self._close(r_main, range(n - 1, -1, -1), relay)
        ls = self._close(l_main, range(n), relay)
        self.Rs = [m & staying for m in rs]
        self.Ls = [m & staying for m in ls]

    @staticmethod
    def _close(direct: List[int], order, relay: int = -1) -> List[int]:
        # edges only point away from the processing order, so one pass suffices;
        # paths continue only through nodes whose bit is set in ``relay``
        out = [0] * len(direct)
        for k in order:
            acc = 0
            m = direct[k]
            while m:
                low = m & -m
                j = low.bit_length() - 1
                acc |= low
                if relay & low:
                    acc |= out[j]
                m ^= low
            out[k] = acc
        return out

    def bit(self, v: int) -> int:
        k = self.pos.get(v)
        return 0 if k is None else 1 << k

    def to_set(self, mask: int) -> Set[int]:
        out = set()
        while mask:
            low = mask & -mask
            out.add(self.ids[low.bit_length() - 1])
            mask ^= low
        return out

    def mask_of(self, table: List[int], v: int) -> int:
        k = self.pos.get(v)
        return 0 if k is None else table[k]

    def r(self, v: int) -> Set[int]:
        return self.to_set(self.mask_of(self.R, v))

    def l(self, v: int) -> Set[int]:
        return self.to_set(self.mask_of(self.L, v))

    def rs(self, v: int) -> Set[int]:
        return self.to_set(self.mask_of(self.Rs, v))

    def ls(self, v: int) -> Set[int]:
        return self.to_set(self.mask_of(self.Ls, v))

    def set_mask(self, table: List[int], nodes: Iterable[int], staying_only: bool = False) -> int:
        """Mask of ``U ∪ ⋃ reach(u)``; with ``staying_only`` U's own members are filtered too."""
        acc = 0
        for u in nodes:
            acc |= self.bit(u) | self.mask_of(table, u)
        if staying_only:
            acc &= self.staying_mask
        return acc

    def id_at_most(self, bound: int) -> int:
        m = 0
        for k, x in enumerate(self.ids):
            if x <= bound:
                m |= 1 << k
        return m

    def id_at_least(self, bound: int) -> int:
        m = 0
        for k, x in enumerate(self.ids):
            if x >= bound:
                m |= 1 << k
        return m


def reach_right(s: SystemState, v: int) -> Set[int]:
    return ReachIndex(s).r(v)


def reach_left(s: SystemState, v: int) -> Set[int]:
    return ReachIndex(s).l(v)


def reach_right_staying(s: SystemState, v: int) -> Set[int]:
    return ReachIndex(s).rs(v)


def reach_left_staying(s: SystemState, v: int) -> Set[int]:
    return ReachIndex(s).ls(v)


def reach_right_staying_plus(s: SystemState, v: int) -> Set[int]:
    out = reach_right_staying(s, v)
    node = s.nodes[v]
    if node.staying and not node.exited:
        out.add(v)
    return out


def reach_left_staying_plus(s: SystemState, v: int) -> Set[int]:
    out = reach_left_staying(s, v)
    node = s.nodes[v]
    if node.staying and not node.exited:
        out.add(v)
    return out


def reach_right_of_set(s: SystemState, nodes: Iterable[int], bound: Optional[int] = None) -> Set[int]:
    """R(U) or, with ``bound``, R(U, ID)."""
    idx = ReachIndex(s)
    out = idx.to_set(idx.set_mask(idx.R, nodes))
    return out if bound is None else {x for x in out if x <= bound}


def reach_left_of_set(s: SystemState, nodes: Iterable[int], bound: Optional[int] = None) -> Set[int]:
    """L(U) or, with ``bound``, L(U, ID)."""
    idx = ReachIndex(s)
    out = idx.to_set(idx.set_mask(idx.L, nodes))
    return out if bound is None else {x for x in out if x >= bound}


class PairIndex:
    """Undirected multiplicity view of NG, maintained incrementally.

    Counts every stored reference and every in-flight reference as one unit
    on the unordered pair of endpoints; ``lost`` collects pairs whose count
    dropped to zero since the last :meth:`take_lost`.
    """

    def __init__(self, s: SystemState):
        self.count: Dict[Tuple[int, int], int] = {}
        self.adj: Dict[int, Set[int]] = {i: set() for i in s.nodes}
        self.lost: List[Tuple[int, int]] = []
        for e in network_graph(s):
            self.add(e.src, e.dst)

    @staticmethod
    def _key(a: int, b: int) -> Tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def add(self, a: int, b: int) -> None:
        if a == b:
            return
        k = self._key(a, b)
        c = self.count.get(k, 0)
        self.count[k] = c + 1
        if c == 0:
            self.adj.setdefault(a, set()).add(b)
            self.adj.setdefault(b, set()).add(a)

    def remove(self, a: int, b: int) -> None:
        if a == b:
            return
        k = self._key(a, b)
        c = self.count[k] - 1
        if c:
            self.count[k] = c
        else:
            del self.count[k]
            self.adj[a].discard(b)
            self.adj[b].discard(a)
            self.lost.append(k)

    def take_lost(self) -> List[Tuple[int, int]]:
        out, self.lost = self.lost, []
        return out

    def connected(self, a: int, b: int, alive: Optional[Set[int]] = None) -> bool:
        """Whether ``a`` and ``b`` are joined by a path (through ``alive`` nodes only)."""
        if a == b:
            return True
        adj = self.adj
        seen = {a}
        frontier = [a]
        while frontier:
            nxt = []
            for x in frontier:
                for y in adj.get(x, ()):
                    if y in seen or (alive is not None and y not in alive):
                        continue
                    if y == b:
                        return True
                    seen.add(y)
                    nxt.append(y)
            frontier = nxt
        return False

    def components(self, nodes: Iterable[int]) -> List[Set[int]]:
        return weak_components(nodes, self.count.keys())
