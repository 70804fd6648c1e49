"""Brute-force message-invariant evaluator used to cross-check the checker.

Deliberately naive: reachability is recomputed by graph search for every
query and nothing is shared with the production index.
"""

from __future__ import annotations

from typing import Dict, Optional, Set

from linstab.messages import (ForwardProbe, Introduce, Linearize, ProbeFail, ProbeSuccess,
                              RevAndLin, RevAndLinAck, Search)
from linstab.model import SystemState


def _reach(s: SystemState, v: int, rightward: bool, main_only: bool) -> Set[int]:
    seen: Set[int] = set()
    stack = [v]
    while stack:
        y = stack.pop()
        node = s.nodes.get(y)
        if node is None:
            continue
        colls = (node.right,) if rightward else (node.left,)
        if not main_only:
            colls = (node.left, node.right, node.temp_left, node.temp_right)
        for coll in colls:
            for z in coll:
                if z in s.nodes and (z > y if rightward else z < y) and z not in seen:
                    seen.add(z)
                    stack.append(z)
    return seen


class Oracle:
    def __init__(self, s: SystemState, star: bool):
        self.s = s
        self.star = star
        self.staying = {i for i, n in s.nodes.items() if not n.exited and n.staying}

    def reach(self, v: int, rightward: bool) -> Set[int]:
        if v not in self.s.nodes:
            return set()
        r = _reach(self.s, v, rightward, main_only=self.star)
        return r & self.staying if self.star else r

    def reach_plus(self, v: int, rightward: bool) -> Set[int]:
        r = self.reach(v, rightward)
        node = self.s.nodes.get(v)
        if node is not None and not node.exited and (node.staying or not self.star):
            r = r | {v}
        return r

    def reach_set(self, nodes, rightward: bool) -> Set[int]:
        out: Set[int] = set()
        for u in nodes:
            if u in self.s.nodes:
                out |= {u} | self.reach(u, rightward)
        return out & self.staying if self.star else out

    def exists(self, d: int) -> bool:
        n = self.s.nodes.get(d)
        return n is not None and not n.exited and (n.staying or not self.star)

    def seq_bad(self, src: int, d: int, seq: int) -> bool:
        node = self.s.nodes.get(src)
        if node is None:
            return False
        return node.seq_table.get(d, 0) < seq

    def violated(self, u: int, m) -> Optional[str]:
        s, star = self.s, self.star
        if isinstance(m, Introduce):
            if m.w is None:
                return None
            w = m.w
            if m.v == w or u == w or (u < w and m.v > u) or (u > w and m.v < u):
                return "1"
            rightward = u > w
            if star:
                return None if self.reach_plus(u, rightward) <= self.reach(w, rightward) else "1"
            return None if u in self.reach(w, rightward) else "1"
        if isinstance(m, Linearize):
            v, w = m.v, u
            if v == w:
                return "2"
            rightward = v > w
            side = s.nodes[w].right if rightward else s.nodes[w].left
            if star:
                need = self.reach_plus(v, rightward)
                ok = any(x != v and need <= self.reach(x, rightward) for x in side)
            else:
                ok = any(x != v and v in self.reach(x, rightward) for x in side)
            return None if ok else "2"
        if isinstance(m, ForwardProbe):
            a, b, c = ("5a", "5b", "5c") if star else ("3a", "3b", "3c")
            src, d, nxt = m.source, m.dest_id, set(m.next)
            if d == src:
                return None if u == src and nxt == {u} else a
            if not nxt:
                return a
            rightward = src < d
            if (min(nxt) if rightward else max(nxt)) != u:
                return a
            if (max(nxt) > d) if rightward else (min(nxt) < d):
                return a
            reach_next = self.reach_set(nxt, rightward)
            if not reach_next <= self.reach_plus(src, rightward):
                return b
            if self.exists(d):
                hit = any(d == x for x in reach_next if (x <= d if rightward else x >= d))
                if not hit and self.seq_bad(src, d, m.seq):
                    return c
            return None
        if isinstance(m, ProbeSuccess):
            name = "6" if star else "4"
            if m.dest != m.dest_id:
                return name
            dest = s.nodes.get(m.dest)
            if star and dest is not None and dest.leaving and not dest.exited:
                return None
            if m.dest_id == u:
                return None
            return None if m.dest in self.reach(u, m.dest_id > u) else name
        if isinstance(m, ProbeFail):
            name = "7" if star else "5"
            d = m.dest_id
            if d == u or not self.exists(d):
                return None
            return name if self.seq_bad(u, d, m.seq) else None
        if isinstance(m, Search):
            name = "8" if star else "6"
            if star and not s.nodes[u].staying:
                return None
            if u != m.dest_id:
                return name
            if m.v == m.dest_id:
                return None
            return None if u in self.reach(m.v, m.v < m.dest_id) else name
        if star and isinstance(m, RevAndLinAck):
            holder = s.nodes.get(m.v)
            if m.v == u or holder is None or holder.unique_values.get(u) != m.token:
                return "3"
            owners = [x for x, t in holder.unique_values.items() if t == m.token]
            return None if owners == [u] else "3"
        if star and isinstance(m, RevAndLin):
            hits = [x for x, t in s.nodes[u].unique_values.items() if t == m.token]
            if len(hits) != 1:
                return "4"
            vn = s.nodes.get(hits[0])
            if vn is None or vn.exited:
                return None
            if not vn.leaving:
                return "4"
            rightward = u < hits[0]
            return None if self.reach(hits[0], rightward) == self.reach_set(m.node_list, rightward) else "4"
        return None

    def holds(self) -> Dict[str, bool]:
        names = (("1", "2", "3", "4", "5a", "5b", "5c", "6", "7", "8") if self.star
                 else ("1", "2", "3a", "3b", "3c", "4", "5", "6"))
        out = {k: True for k in names}
        for u, ch in self.s.channels.items():
            if self.s.nodes[u].exited:
                continue
            for m in ch:
                bad = self.violated(u, m)
                if bad is not None:
                    out[bad] = False
        return out
