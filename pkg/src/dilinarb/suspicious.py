"""Suspicious directed paths and the per-arc danger sets built from them.

A path is suspicious for color ``c`` when each of its colored arcs has
color ``c`` and each uncolored arc lists ``c``; its uncolored length is
the number of uncolored arcs.  All searches walk backward from the end
vertex along in-arcs, so colored ``c`` arcs are free and uncolored arcs
spend budget.  Paths are simple.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterator

from .coloring import IN, OUT, ListAssignment, PartialColoring, color_neighbors
from .digraph import Arc, Digraph

DEFAULT_CAP = 10**6


class PathOverflowError(RuntimeError):
    """More suspicious paths than the cap allows; the result would be incomplete."""


@dataclass(frozen=True)
class SuspiciousPath:
    vertices: tuple[int, ...]
    color: int
    uncolored_positions: frozenset[int]

    @property
    def arcs(self) -> list[Arc]:
        vs = self.vertices
        return [(vs[i], vs[i + 1]) for i in range(len(vs) - 1)]

    @property
    def uncolored_length(self) -> int:
        return len(self.uncolored_positions)

    def is_valid(self, D: Digraph, L: ListAssignment, gamma: PartialColoring) -> bool:
        if len(set(self.vertices)) != len(self.vertices):
            return False
        for pos, a in enumerate(self.arcs):
            if a not in D:
                return False
            col = gamma.get(a)
            if col is None:
                if pos not in self.uncolored_positions or self.color not in L[a]:
                    return False
            elif col != self.color or pos in self.uncolored_positions:
                return False
        return True


def _backward(D: Digraph, L: ListAssignment, gamma: PartialColoring, end: int, c: int,
              max_uncolored: int) -> Iterator[tuple[list[int], list[bool]]]:
    """Yield every simple suspicious path ending at ``end`` with at most ``max_uncolored``
    uncolored arcs, as (vertices reversed, uncolored flags reversed).

    The zero-arc path is not yielded.
    """
    rev_vertices = [end]
    rev_flags: list[bool] = []
    on_path = {end}
    count = 0
    stack = [iter(D.in_adj[end])]
    while stack:
        a = next(stack[-1], None)
        if a is None:
            stack.pop()
            if rev_flags:
                on_path.discard(rev_vertices.pop())
                if rev_flags.pop():
                    count -= 1
            continue
        x = a[0]
        if x in on_path:
            continue
        col = gamma.get(a)
        if col is None:
            if c not in L[a] or count >= max_uncolored:
                continue
            uncolored = True
        elif col == c:
            uncolored = False
        else:
            continue
        rev_vertices.append(x)
        rev_flags.append(uncolored)
        on_path.add(x)
        count += uncolored
        yield rev_vertices, rev_flags
        stack.append(iter(D.in_adj[x]))


def _make(rev_vertices: list[int], rev_flags: list[bool], c: int) -> SuspiciousPath:
    vs = tuple(reversed(rev_vertices))
    flags = list(reversed(rev_flags))
    return SuspiciousPath(vs, c, frozenset(i for i, f in enumerate(flags) if f))


def enumerate_from_to(D: Digraph, L: ListAssignment, gamma: PartialColoring, v: int, u: int,
                      c: int, k: int, cap: int = DEFAULT_CAP) -> set[SuspiciousPath]:
    """Suspicious v->u paths for ``c`` with uncolored length exactly ``k``."""
    found: set[SuspiciousPath] = set()
    if v == u:
        return found
    for rv, rf in _backward(D, L, gamma, u, c, k):
        if rv[-1] == v:
            if sum(rf) == k:
                found.add(_make(rv, rf, c))
                if len(found) > cap:
                    raise PathOverflowError(f"more than {cap} paths {v}->{u} for color {c}")
    return found


def enumerate_tail(D: Digraph, L: ListAssignment, gamma: PartialColoring, u: int, c: int,
                   length: int, cap: int = DEFAULT_CAP) -> set[SuspiciousPath]:
    """Suspicious paths ending at ``u`` whose first arc is uncolored, uncolored length ``length``."""
    found: set[SuspiciousPath] = set()
    for rv, rf in _backward(D, L, gamma, u, c, length):
        if rf[-1] and sum(rf) == length:
            found.add(_make(rv, rf, c))
            if len(found) > cap:
                raise PathOverflowError(f"more than {cap} tail paths at {u} for color {c}")
    return found


def danger_set(D: Digraph, L: ListAssignment, gamma: PartialColoring, arc: Arc, c: int,
               ell: int, cap: int = DEFAULT_CAP) -> set[SuspiciousPath]:
    """Union over k in 1..ell-1 of the v->u paths, plus the length-``ell`` tails at u,
    for the uncolored arc ``arc = (u, v)``."""
    u, v = arc
    if arc in gamma:
        raise ValueError(f"arc {arc} is colored")
    if c not in L[arc]:
        raise ValueError(f"color {c} is not in the list of {arc}")
    out: set[SuspiciousPath] = set()
    for k in range(1, ell):
        out |= enumerate_from_to(D, L, gamma, v, u, c, k, cap)
    out |= enumerate_tail(D, L, gamma, u, c, ell, cap)
    if len(out) > cap:
        raise PathOverflowError(f"danger set of {arc} for color {c} exceeds {cap}")
    return out


@dataclass
class CountBoundReport:
    N: int
    k_max: int
    precondition_ok: bool
    precondition_violations: list[tuple] = field(default_factory=list)
    max_from_to: dict[int, int] = field(default_factory=dict)
    max_tail: dict[int, int] = field(default_factory=dict)
    bound_violations: list[tuple] = field(default_factory=list)

    @property
    def bounds_ok(self) -> bool:
        return not self.bound_violations

    @property
    def passed(self) -> bool:
        return self.precondition_ok and self.bounds_ok

    def to_json(self) -> dict:
        return {
            "N": self.N, "k_max": self.k_max, "precondition_ok": self.precondition_ok,
            "precondition_violations": [list(x) for x in self.precondition_violations],
            "max_from_to": {str(k): v for k, v in sorted(self.max_from_to.items())},
            "max_tail": {str(k): v for k, v in sorted(self.max_tail.items())},
            "bound_violations": [list(x) for x in self.bound_violations],
            "passed": self.passed,
        }


def count_bound_check(D: Digraph, L: ListAssignment, gamma: PartialColoring, N: int,
                      k_max: int = 3, colors=None) -> CountBoundReport:
    """Check |P(v,u,c;k)| <= N^(k-1) and |P(u,c;k)| <= N^k for all k <= k_max.

    The bounds only hold on states where every |N^-(w,c)| <= N and a
    c-colored arc at a vertex has cleared c from the other lists on that
    side (the list-update discipline); both are checked first and reported
    as precondition violations rather than raised.
    """
    if colors is None:
        colors = L.palette() | set(gamma.color_of.values())
    colors = sorted(colors)
    report = CountBoundReport(N=N, k_max=k_max, precondition_ok=True)
    for w in range(D.n):
        for c in colors:
            n_in = color_neighbors(D, L, gamma, w, c, IN)
            if len(n_in) > N:
                report.precondition_violations.append(("color-degree", w, c, len(n_in)))
            if n_in and gamma.occupancy.get((w, c, IN), 0):
                report.precondition_violations.append(("discipline-in", w, c))
            if gamma.occupancy.get((w, c, OUT), 0) and color_neighbors(D, L, gamma, w, c, OUT):
                report.precondition_violations.append(("discipline-out", w, c))
    report.precondition_ok = not report.precondition_violations

    for k in range(1, k_max + 1):
        report.max_from_to.setdefault(k, 0)
        report.max_tail.setdefault(k, 0)
    for u in range(D.n):
        for c in colors:
            tails: Counter = Counter()
            from_to: dict[tuple[int, int], int] = defaultdict(int)
            for rv, rf in _backward(D, L, gamma, u, c, k_max):
                k = sum(rf)
                if k == 0:
                    continue
                if rf[-1]:
                    tails[k] += 1
                from_to[(rv[-1], k)] += 1
            for k, cnt in tails.items():
                report.max_tail[k] = max(report.max_tail[k], cnt)
                if cnt > N**k:
                    report.bound_violations.append(("tail", u, c, k, cnt))
            for (v, k), cnt in from_to.items():
                report.max_from_to[k] = max(report.max_from_to[k], cnt)
                if cnt > N ** (k - 1):
                    report.bound_violations.append(("from-to", v, u, c, k, cnt))
    return report
