"""Finishing step: a proper list edge-coloring of the leftover multigraph.

The arcs the nibble left uncolored are colored from their reserve lists
so that no two edges sharing an endpoint get the same color.  Moser-Tardos
resampling does the work: start from a uniform assignment and, while some
incident pair shares a color, redraw both of its edges.
"""

from __future__ import annotations

import heapq
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .coloring import ListAssignment, PartialColoring
from .digraph import Arc, Digraph, Multigraph
from .rng import as_generator


class FinishError(RuntimeError):
    pass


class EmptyReserveError(FinishError):
    """An uncolored arc has nothing left to be colored with."""


class ResampleBudgetError(FinishError):
    """Too many resamplings; the lists are probably too short for the overlap."""


@dataclass
class FinishInstance:
    n: int
    edges: list[tuple[int, int]]
    lists: list[tuple[int, ...]]
    L: int
    N: int
    arcs: list[Arc] | None = None

    @property
    def G(self) -> Multigraph:
        return Multigraph(self.n, self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges],
                "lists": [list(x) for x in self.lists], "L": self.L, "N": self.N}


def _neighbors(n: int, edges: list[tuple[int, int]]) -> list[list[int]]:
    at: list[list[int]] = [[] for _ in range(n)]
    for i, (u, v) in enumerate(edges):
        at[u].append(i)
        if v != u:
            at[v].append(i)
    nbrs = []
    for i, (u, v) in enumerate(edges):
        nbrs.append(sorted((set(at[u]) | set(at[v])) - {i}))
    return nbrs


def incidence_bound(n: int, edges: list[tuple[int, int]], lists) -> int:
    """max over edges e and colors c of the number of edges meeting e whose list has c."""
    best = 0
    for i, nb in enumerate(_neighbors(n, edges)):
        cnt: dict[int, int] = defaultdict(int)
        for f in nb:
            for c in lists[f]:
                cnt[c] += 1
        if cnt:
            best = max(best, max(cnt.values()))
    return best


def make_instance(n: int, edges, lists, L: int | None = None, arcs=None) -> FinishInstance:
    """Truncate every list to its ``L`` smallest colors (default: the shortest list)."""
    edges = [(int(u), int(v)) for u, v in edges]
    lists = [sorted(set(int(c) for c in x)) for x in lists]
    if any(not x for x in lists):
        raise EmptyReserveError("an edge has an empty list")
    if L is None:
        L = min((len(x) for x in lists), default=0)
    if any(len(x) < L for x in lists):
        raise ValueError(f"some list is shorter than L={L}")
    lists = [tuple(x[:L]) for x in lists]
    return FinishInstance(n, edges, lists, L, incidence_bound(n, edges, lists), arcs)


def build_instance(D: Digraph, gamma: PartialColoring, Res: ListAssignment) -> FinishInstance:
    """The underlying multigraph of the uncolored arcs, with their reserve lists."""
    arcs = [a for a in D.arcs if a not in gamma]
    empty = [a for a in arcs if not Res[a]]
    if empty:
        raise EmptyReserveError(f"{len(empty)} uncolored arcs have empty reserve lists, "
                                f"first {empty[0]}")
    return make_instance(D.n, arcs, [Res[a] for a in arcs], arcs=arcs)


def verify_finish(inst: FinishInstance, coloring) -> bool:
    """Every edge colored from its list and no two edges at a vertex share a color."""
    if len(coloring) != len(inst.edges):
        return False
    seen = set()
    for i, (u, v) in enumerate(inst.edges):
        c = coloring[i]
        if c is None or c not in inst.lists[i]:
            return False
        for x in {u, v}:
            if (x, c) in seen:
                return False
            seen.add((x, c))
    return True


@dataclass
class FinishResult:
    coloring: list[int]
    resamples: int
    lll_condition: bool

    def to_json(self) -> dict:
        return {"resamples": self.resamples, "lll_condition": self.lll_condition}


def lll_condition(inst: FinishInstance) -> bool:
    """L >= 8N, the sufficient condition for the resampling to succeed quickly."""
    return inst.L >= 8 * inst.N


def finish(inst: FinishInstance, seed=None, max_resamples: int | None = None) -> FinishResult:
    """Moser-Tardos resampling.  The violated pair with the lowest (edge, color) goes first."""
    m = len(inst.edges)
    if max_resamples is None:
        max_resamples = max(1, 100 * m * max(inst.L, 1))
    if max_resamples < 1:
        raise ValueError("max_resamples must be at least 1")
    ok = lll_condition(inst)
    if not ok and m:
        warnings.warn(f"L={inst.L} < 8N={8 * inst.N}; resampling may not converge",
                      RuntimeWarning, stacklevel=2)
    if m == 0:
        return FinishResult([], 0, ok)
    rng = as_generator(seed, "finish")
    lists = [np.array(x) for x in inst.lists]
    col = [int(x[rng.integers(len(x))]) for x in lists]
    holders: dict[tuple[int, int], set[int]] = defaultdict(set)
    ends = [sorted({u, v}) for u, v in inst.edges]
    for i in range(m):
        for x in ends[i]:
            holders[(x, col[i])].add(i)
    heap: list[tuple[int, int]] = []

    def push_if_bad(i: int) -> None:
        if any(len(holders[(x, col[i])]) > 1 for x in ends[i]):
            heapq.heappush(heap, (i, col[i]))

    for i in range(m):
        push_if_bad(i)
    resamples = 0
    while heap:
        i, c = heapq.heappop(heap)
        if col[i] != c:
            continue
        partners = [j for x in ends[i] for j in holders[(x, c)] if j != i]
        if not partners:
            continue
        if resamples >= max_resamples:
            raise ResampleBudgetError(f"gave up after {resamples} resamplings (L={inst.L}, "
                                      f"N={inst.N})")
        resamples += 1
        for k in (i, min(partners)):
            for x in ends[k]:
                holders[(x, col[k])].discard(k)
            col[k] = int(lists[k][rng.integers(len(lists[k]))])
            for x in ends[k]:
                holders[(x, col[k])].add(k)
        touched = {i, min(partners)}
        for k in list(touched):
            for x in ends[k]:
                touched |= holders[(x, col[k])]
        for k in sorted(touched):
            push_if_bad(k)
    if not verify_finish(inst, col):
        raise AssertionError("resampling finished with an improper coloring")
    return FinishResult(col, resamples, ok)


def backtrack_finish(inst: FinishInstance) -> list[int] | None:
    """Exhaustive search for a proper list edge-coloring; None if there is none."""
    m = len(inst.edges)
    nbrs = _neighbors(inst.n, inst.edges)
    order = sorted(range(m), key=lambda i: (len(inst.lists[i]), i))
    col: list[int | None] = [None] * m

    def go(k: int) -> bool:
        if k == m:
            return True
        i = order[k]
        used = {col[j] for j in nbrs[i]}
        for c in inst.lists[i]:
            if c not in used:
                col[i] = c
                if go(k + 1):
                    return True
        col[i] = None
        return False

    return list(col) if go(0) else None


def generate_instance(n_edges: int, N_target: int, seed=None, n: int | None = None,
                      palette_factor: int = 3) -> FinishInstance:
    """Random multigraph of maximum degree 1 + N_target // 2 with lists of size 8 N_target.

    The degree bound keeps the incidence bound N at most N_target, so L >= 8N.
    """
    if N_target < 1:
        raise ValueError("N_target must be positive")
    rng = as_generator(seed, "finish-instance")
    max_deg = 1 + N_target // 2
    if n is None:
        n = max(2, math.ceil(2 * n_edges / max_deg) + 2)
    deg = [0] * n
    edges = []
    tries = 0
    while len(edges) < n_edges and tries < 50 * n_edges + 100:
        tries += 1
        u, v = (int(x) for x in rng.choice(n, 2, replace=False))
        if deg[u] < max_deg and deg[v] < max_deg:
            edges.append((min(u, v), max(u, v)))
            deg[u] += 1
            deg[v] += 1
    L = 8 * N_target
    pal = palette_factor * L
    lists = [rng.choice(pal, L, replace=False).tolist() for _ in edges]
    return make_instance(n, edges, lists, L)
