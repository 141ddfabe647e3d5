"""Exact linear arboricity and list-colorability for small digraphs.

Backtracking over arcs.  Each color class is kept as a set of vertex-disjoint
directed paths: ``first[x]`` is the start of the path ending at x and
``last[x]`` the end of the path starting at x, so adding u->v is one
lookup (u must be a path end, v a path start, and v's path must not end
at u).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .coloring import ListAssignment, PartialColoring, _arc_key, validate_coloring
from .digraph import Arc, Digraph, components, symmetric_complete


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class SearchBudget:
    node_limit: int = 10**7
    time_limit: float = 600.0

    def __post_init__(self):
        if self.node_limit <= 0 or self.time_limit <= 0:
            raise ValueError("budget limits must be positive")


@dataclass
class LaResult:
    """``value`` is the exact la(D), or None when the budget ran out and only
    ``lower <= la(D) <= upper`` is known."""
    value: int | None
    lower: int
    upper: int
    witness: dict[Arc, int] | None = None
    nodes: int = 0

    @property
    def exact(self) -> bool:
        return self.value is not None

    def to_json(self) -> dict:
        wit = None
        if self.witness is not None:
            wit = {_arc_key(a): c for a, c in sorted(self.witness.items())}
        return {"value": self.value, "lower": self.lower, "upper": self.upper,
                "exact": self.exact, "nodes": self.nodes, "witness": wit}


@dataclass
class ListColoringResult:
    """status is "found", "absent" (proved) or "unknown" (budget ran out)."""
    status: str
    coloring: dict[Arc, int] | None = None
    nodes: int = 0

    def to_json(self) -> dict:
        col = None
        if self.coloring is not None:
            col = {_arc_key(a): c for a, c in sorted(self.coloring.items())}
        return {"status": self.status, "coloring": col, "nodes": self.nodes}


def la_lower_bound(D: Digraph) -> int:
    """Max degree, raised to ceil(dn/(n-1)) for a d-regular digraph: a forest has at most n-1 arcs."""
    if not D.arcs:
        return 0
    lb = D.max_degree()
    d = D.out_degree(0)
    if d >= 1 and D.is_regular(d):
        lb = max(lb, math.ceil(d * D.n / (D.n - 1)))
    return lb


def verify_decomposition(D: Digraph, coloring) -> bool:
    """True iff the total coloring splits the arcs into directed linear forests."""
    gamma = coloring if isinstance(coloring, PartialColoring) else PartialColoring(coloring)
    missing = [a for a in D.arcs if a not in gamma]
    if missing:
        raise ValueError(f"{len(missing)} arcs are uncolored, first {missing[0]}")
    return validate_coloring(D, gamma, 1, 1, acyclic=True).valid


def is_k3star(D: Digraph) -> bool:
    return D.n == 3 and D == symmetric_complete(3)


def has_k3star_component(D: Digraph) -> bool:
    """Some weak component is a copy of K3*."""
    for comp in components(D):
        if len(comp) == 3:
            s = set(comp)
            arcs = [a for a in D.arcs if a[0] in s]
            if len(arcs) == 6:
                return True
    return False


def _arc_order(D: Digraph) -> list[Arc]:
    """Arcs grouped around vertices in BFS order, so constraints bite early."""
    pos: dict[int, int] = {}
    for start in sorted(range(D.n), key=lambda v: -(D.out_degree(v) + D.in_degree(v))):
        if start in pos:
            continue
        queue = [start]
        pos[start] = len(pos)
        while queue:
            x = queue.pop(0)
            for y in sorted({a[1] for a in D.out_adj[x]} | {a[0] for a in D.in_adj[x]}):
                if y not in pos:
                    pos[y] = len(pos)
                    queue.append(y)
    return sorted(D.arcs, key=lambda a: (min(pos[a[0]], pos[a[1]]), max(pos[a[0]], pos[a[1]])))


class _Classes:
    """Path-forest bookkeeping for a fixed set of classes keyed by hashable labels."""

    def __init__(self, n: int):
        self.n = n
        self.out_used: dict = {}
        self.in_used: dict = {}
        self.first: dict = {}
        self.last: dict = {}
        self.size: dict = {}

    def ensure(self, j) -> None:
        if j not in self.size:
            self.out_used[j] = [False] * self.n
            self.in_used[j] = [False] * self.n
            self.first[j] = list(range(self.n))
            self.last[j] = list(range(self.n))
            self.size[j] = 0

    def can_add(self, j, u: int, v: int) -> bool:
        if j not in self.size:
            return True
        return (not self.out_used[j][u] and not self.in_used[j][v]
                and self.last[j][v] != u)

    def add(self, j, u: int, v: int):
        self.ensure(j)
        s, t = self.first[j][u], self.last[j][v]
        undo = (j, u, v, s, t, self.last[j][s], self.first[j][t])
        self.out_used[j][u] = True
        self.in_used[j][v] = True
        self.last[j][s] = t
        self.first[j][t] = s
        self.size[j] += 1
        return undo

    def remove(self, undo) -> None:
        j, u, v, s, t, old_last, old_first = undo
        self.out_used[j][u] = False
        self.in_used[j][v] = False
        self.last[j][s] = old_last
        self.first[j][t] = old_first
        self.size[j] -= 1


class _Search:
    def __init__(self, budget: SearchBudget):
        self.budget = budget
        self.nodes = 0
        self.deadline = time.monotonic() + budget.time_limit

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget.node_limit or (
                self.nodes % 4096 == 0 and time.monotonic() > self.deadline):
            raise BudgetExhausted


def _partition_into(D: Digraph, k: int, search: _Search) -> dict[Arc, int] | None:
    """A partition of the arcs into k directed linear forests, or None."""
    arcs = _arc_order(D)
    m, n = len(arcs), D.n
    if m == 0:
        return {}
    if k == 0:
        return None
    cls = _Classes(n)
    for j in range(k):
        cls.ensure(j)
    assign = [-1] * m
    cap = n - 1

    def options(i: int, opened: int) -> list[int]:
        u, v = arcs[i]
        return [j for j in range(min(opened + 1, k)) if cls.can_add(j, u, v)]

    def go(i: int, opened: int) -> bool:
        if i == m:
            return True
        search.tick()
        if m - i > sum(cap - cls.size[j] for j in range(k)):
            return False
        # forward check: every later arc still has some class
        for r in range(i + 1, m):
            if not options(r, k):
                return False
        u, v = arcs[i]
        for j in options(i, opened):
            undo = cls.add(j, u, v)
            assign[i] = j
            if go(i + 1, max(opened, j + 1)):
                return True
            cls.remove(undo)
        assign[i] = -1
        return False

    if go(0, 0):
        return {arcs[i]: assign[i] for i in range(m)}
    return None


def greedy_decomposition(D: Digraph) -> dict[Arc, int]:
    """First-fit class assignment; an upper bound for la(D)."""
    cls = _Classes(D.n)
    out: dict[Arc, int] = {}
    for u, v in _arc_order(D):
        j = 0
        while not cls.can_add(j, u, v):
            j += 1
        cls.add(j, u, v)
        out[(u, v)] = j
    return out


def exact_la(D: Digraph, budget: SearchBudget | None = None) -> LaResult:
    """Iterative deepening on k from the lower bound."""
    budget = budget or SearchBudget()
    lower = la_lower_bound(D)
    greedy = greedy_decomposition(D)
    upper = len(set(greedy.values()))
    search = _Search(budget)
    k = lower
    try:
        while k < upper:
            wit = _partition_into(D, k, search)
            if wit is not None:
                return LaResult(k, k, k, wit, search.nodes)
            k += 1
            lower = k
    except BudgetExhausted:
        return LaResult(None, lower, upper, greedy, search.nodes)
    return LaResult(upper, upper, upper, greedy, search.nodes)


def exists_linear_list_coloring(D: Digraph, L: ListAssignment,
                                budget: SearchBudget | None = None,
                                fixed: PartialColoring | None = None) -> ListColoringResult:
    """A coloring from the lists whose color classes are directed linear forests.

    With ``fixed``, the colors of those arcs are kept and only the rest is
    searched; the returned coloring covers every arc.
    """
    search = _Search(budget or SearchBudget())
    fixed = fixed or PartialColoring()
    cls = _Classes(D.n)
    col: dict[Arc, int] = {}
    for a, c in sorted(fixed.color_of.items()):
        if not cls.can_add(c, *a):
            return ListColoringResult("absent", None, 0)
        cls.add(c, *a)
        col[a] = c
    order = _arc_order(D)
    rank = {a: i for i, a in enumerate(order)}
    arcs = sorted((a for a in D.arcs if a not in fixed), key=lambda a: (len(L[a]), rank[a]))
    if any(not L[a] for a in arcs):
        return ListColoringResult("absent", None, 0)
    m = len(arcs)

    def go(i: int) -> bool:
        if i == m:
            return True
        search.tick()
        for r in range(i + 1, m):
            u, v = arcs[r]
            if not any(cls.can_add(c, u, v) for c in L[arcs[r]]):
                return False
        u, v = arcs[i]
        for c in sorted(L[arcs[i]]):
            if cls.can_add(c, u, v):
                undo = cls.add(c, u, v)
                col[arcs[i]] = c
                if go(i + 1):
                    return True
                cls.remove(undo)
                del col[arcs[i]]
        return False

    try:
        found = go(0)
    except BudgetExhausted:
        return ListColoringResult("unknown", None, search.nodes)
    if not found:
        return ListColoringResult("absent", None, search.nodes)
    gamma = PartialColoring(col)
    if not validate_coloring(D, gamma, 1, 1, True).valid:
        raise AssertionError("list-coloring search produced an invalid coloring")
    return ListColoringResult("found", dict(col), search.nodes)
