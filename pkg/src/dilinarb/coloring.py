"""List assignments, partial arc colorings and the validity predicates on them.

Colors are opaque nonnegative integers.  Everything here is written for
clarity rather than speed: these functions are the reference checks the
randomized code is tested against.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .digraph import Arc, Digraph

IN, OUT = "in", "out"


def _arc_key(a: Arc) -> str:
    return f"{a[0]},{a[1]}"


def _parse_arc_key(key: str) -> Arc:
    try:
        u, v = key.split(",")
        return int(u), int(v)
    except ValueError:
        raise ValueError(f"bad arc key {key!r}, expected 'u,v'") from None


class ListAssignment(Mapping):
    """Map arc -> frozenset of colors.  Arcs without an entry read as the empty list."""

    def __init__(self, lists: Mapping[Arc, Iterable[int]] | None = None):
        self.lists: dict[Arc, frozenset[int]] = {}
        for a, cols in (lists or {}).items():
            self.lists[(int(a[0]), int(a[1]))] = frozenset(int(c) for c in cols)

    @classmethod
    def uniform(cls, D: Digraph, colors: Iterable[int]) -> "ListAssignment":
        cols = frozenset(colors)
        return cls({a: cols for a in D.arcs})

    def __getitem__(self, arc) -> frozenset[int]:
        return self.lists.get(tuple(arc), frozenset())

    def __iter__(self) -> Iterator[Arc]:
        return iter(self.lists)

    def __len__(self) -> int:
        return len(self.lists)

    def __eq__(self, other) -> bool:
        if isinstance(other, ListAssignment):
            keys = set(self.lists) | set(other.lists)
            return all(self[a] == other[a] for a in keys)
        return NotImplemented

    def __repr__(self) -> str:
        return f"ListAssignment({len(self.lists)} arcs)"

    def covers(self, D: Digraph) -> bool:
        return all(a in self.lists for a in D.arcs)

    def sizes(self) -> dict[Arc, int]:
        return {a: len(c) for a, c in self.lists.items()}

    def palette(self) -> set[int]:
        out: set[int] = set()
        for cols in self.lists.values():
            out |= cols
        return out

    def to_json(self) -> dict:
        return {"lists": {_arc_key(a): sorted(self.lists[a]) for a in sorted(self.lists)}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ListAssignment":
        if "lists" not in obj:
            raise ValueError('list assignment JSON needs a "lists" object')
        return cls({_parse_arc_key(k): v for k, v in obj["lists"].items()})


class PartialColoring:
    """Arc coloring where absent arcs are uncolored.

    ``occupancy[(v, c, "in")]`` counts arcs of color ``c`` entering ``v``
    (``"out"``: leaving).  It is updated on every assign/unassign.
    """

    def __init__(self, color_of: Mapping[Arc, int | None] | None = None):
        self.color_of: dict[Arc, int] = {}
        self.occupancy: Counter = Counter()
        for a, c in (color_of or {}).items():
            if c is not None:
                self.assign(a, c)

    def __getitem__(self, arc) -> int | None:
        return self.color_of.get(tuple(arc))

    def get(self, arc, default=None):
        return self.color_of.get(tuple(arc), default)

    def __contains__(self, arc) -> bool:
        return tuple(arc) in self.color_of

    def __len__(self) -> int:
        return len(self.color_of)

    def __eq__(self, other) -> bool:
        if isinstance(other, PartialColoring):
            return self.color_of == other.color_of
        return NotImplemented

    def __repr__(self) -> str:
        return f"PartialColoring({len(self.color_of)} colored)"

    def copy(self) -> "PartialColoring":
        new = PartialColoring()
        new.color_of = dict(self.color_of)
        new.occupancy = Counter(self.occupancy)
        return new

    def assign(self, arc: Arc, color: int) -> None:
        arc = (int(arc[0]), int(arc[1]))
        if arc in self.color_of:
            self.unassign(arc)
        color = int(color)
        self.color_of[arc] = color
        self.occupancy[(arc[0], color, OUT)] += 1
        self.occupancy[(arc[1], color, IN)] += 1

    def unassign(self, arc: Arc) -> None:
        arc = (int(arc[0]), int(arc[1]))
        color = self.color_of.pop(arc, None)
        if color is None:
            return
        for key in ((arc[0], color, OUT), (arc[1], color, IN)):
            self.occupancy[key] -= 1
            if self.occupancy[key] == 0:
                del self.occupancy[key]

    def recount(self) -> Counter:
        occ: Counter = Counter()
        for (u, v), c in self.color_of.items():
            occ[(u, c, OUT)] += 1
            occ[(v, c, IN)] += 1
        return occ

    def classes(self) -> dict[int, list[Arc]]:
        out: dict[int, list[Arc]] = defaultdict(list)
        for a in sorted(self.color_of):
            out[self.color_of[a]].append(a)
        return dict(out)

    def uncolored(self, D: Digraph) -> list[Arc]:
        return [a for a in D.arcs if a not in self.color_of]

    def is_total(self, D: Digraph) -> bool:
        return all(a in self.color_of for a in D.arcs)

    def to_json(self, D: Digraph | None = None) -> dict:
        arcs = D.arcs if D is not None else sorted(self.color_of)
        return {"colors": {_arc_key(a): self.color_of.get(a) for a in arcs}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "PartialColoring":
        if "colors" not in obj:
            raise ValueError('coloring JSON needs a "colors" object')
        return cls({_parse_arc_key(k): v for k, v in obj["colors"].items()})


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: tuple

    def to_json(self) -> dict:
        return {"kind": self.kind, "witness": _jsonable(self.witness)}


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(y) for y in x]
    return x


@dataclass
class ColoringReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid

    def kinds(self) -> Counter:
        return Counter(v.kind for v in self.violations)

    def add(self, kind: str, *witness) -> None:
        self.violations.append(Violation(kind, tuple(witness)))

    def to_json(self) -> dict:
        return {"valid": self.valid, "violations": [v.to_json() for v in self.violations]}


# ---------------------------------------------------------------- predicates


def _find_cycles(arcs: list[Arc]) -> list[list[int]]:
    """One directed cycle (as a vertex list) per cyclic strongly connected piece.

    For arc sets of max in/out-degree 1 this is every cycle.
    """
    succ: dict[int, list[int]] = defaultdict(list)
    for u, v in arcs:
        succ[u].append(v)
    state: dict[int, int] = {}
    cycles: list[list[int]] = []
    for root in sorted(succ):
        if root in state:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        on_path = {root: 0}
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                del on_path[node]
                state[node] = 2
                continue
            if nxt in on_path:
                cycles.append(path[on_path[nxt]:])
                continue
            if state.get(nxt, 0) == 0:
                state[nxt] = 1
                on_path[nxt] = len(path)
                path.append(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
    return cycles


def is_directed_linear_forest(D: Digraph, S: Iterable[Arc]) -> bool:
    """True iff ``S`` is a vertex-disjoint union of directed paths."""
    arcs = [tuple(a) for a in S]
    for a in arcs:
        if a not in D:
            raise ValueError(f"arc {a} is not in the digraph")
    outd: Counter = Counter(u for u, _ in arcs)
    ind: Counter = Counter(v for _, v in arcs)
    if any(x > 1 for x in outd.values()) or any(x > 1 for x in ind.values()):
        return False
    return not _find_cycles(arcs)


def validate_coloring(D: Digraph, gamma: PartialColoring, s: int = 1, t: int = 1,
                      acyclic: bool = True, L: ListAssignment | None = None) -> ColoringReport:
    """Collect every (s,t)-degree, monochromatic-dicycle and off-list violation.

    Witnesses: ``degree-in``/``degree-out`` -> (vertex, color, count);
    ``monochromatic-dicycle`` -> (color, cycle vertices);
    ``off-list`` -> (arc, color).
    """
    report = ColoringReport()
    for a in gamma.color_of:
        if a not in D:
            report.add("foreign-arc", a)
    occ = gamma.recount()
    for (v, c, d), count in sorted(occ.items()):
        if d == IN and count > s:
            report.add("degree-in", v, c, count)
        elif d == OUT and count > t:
            report.add("degree-out", v, c, count)
    if acyclic:
        for c, arcs in sorted(gamma.classes().items()):
            for cyc in _find_cycles(arcs):
                report.add("monochromatic-dicycle", c, tuple(cyc))
    if L is not None:
        for a in sorted(gamma.color_of):
            c = gamma.color_of[a]
            if c not in L[a]:
                report.add("off-list", a, c)
    return report


def has_monochromatic_dipath(D: Digraph, gamma: PartialColoring, source: int, target: int,
                             c: int) -> bool:
    """True iff a directed path from ``source`` to ``target`` uses only arcs colored ``c``.

    ``source == target`` counts as the empty path.
    """
    if source == target:
        return True
    seen = {source}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for a in D.out_adj[x]:
            if gamma.get(a) == c and a[1] not in seen:
                if a[1] == target:
                    return True
                seen.add(a[1])
                queue.append(a[1])
    return False


def color_neighbors(D: Digraph, L: ListAssignment, gamma: PartialColoring, v: int, c: int,
                    dir: str) -> set[Arc]:
    """N^-(v,c) for ``dir="in"``, N^+(v,c) for ``dir="out"``: uncolored arcs at v listing c."""
    adj = D.in_adj[v] if dir == IN else D.out_adj[v]
    return {a for a in adj if a not in gamma and c in L[a]}


def reserve_neighbors(D: Digraph, gamma: PartialColoring, reserve: Mapping[int, Iterable[int]],
                      v: int, c: int, dir: str) -> set[Arc]:
    """R^+(v,c): uncolored arcs v->u with c reserved at u; R^-(v,c): uncolored u->v likewise."""
    if dir == OUT:
        return {a for a in D.out_adj[v] if a not in gamma and c in reserve.get(a[1], ())}
    return {a for a in D.in_adj[v] if a not in gamma and c in reserve.get(a[0], ())}


def _forward_reach(D: Digraph, gamma: PartialColoring, source: int, c: int) -> set[int]:
    seen = {source}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for a in D.out_adj[x]:
            if gamma.get(a) == c and a[1] not in seen:
                seen.add(a[1])
                queue.append(a[1])
    return seen


def is_compatible(D: Digraph, L: ListAssignment, gamma: PartialColoring) -> ColoringReport:
    """Check that the lists are gamma-compatible.

    ``incident-color`` (colored arc, color, other arc): an arc colored c
    while another arc out of its tail or into its head still lists c.
    ``return-path`` (uncolored arc uv, color, path v..u): c is listed on uv
    although a c-colored path leads from v back to u.
    """
    report = ColoringReport()
    for a in sorted(gamma.color_of):
        c = gamma.color_of[a]
        u, v = a
        for f in D.out_adj[u] + D.in_adj[v]:
            if f != a and c in L[f]:
                report.add("incident-color", a, c, f)
    reach: dict[tuple[int, int], set[int]] = {}
    for a in D.arcs:
        if a in gamma:
            continue
        u, v = a
        for c in sorted(L[a]):
            key = (c, v)
            if key not in reach:
                reach[key] = _forward_reach(D, gamma, v, c)
            if u in reach[key]:
                report.add("return-path", a, c, tuple(_mono_path(D, gamma, v, u, c)))
    return report


def _mono_path(D: Digraph, gamma: PartialColoring, source: int, target: int, c: int) -> list[int]:
    prev = {source: None}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        if x == target:
            break
        for a in D.out_adj[x]:
            if gamma.get(a) == c and a[1] not in prev:
                prev[a[1]] = x
                queue.append(a[1])
    path = [target]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def dump_json(obj) -> str:
    """Canonical JSON text (sorted keys, fixed separators) for byte-stable artifacts."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
