"""Random small (D, L, gamma) states and a brute-force path oracle, shared by tests."""

import networkx as nx
import numpy as np

from dilinarb.coloring import ListAssignment, PartialColoring, validate_coloring
from dilinarb.digraph import random_digraph


def random_state(seed, n_max=10, colors=3, max_deg=3):
    """A random digraph with a valid partial (1,1)-coloring and random lists."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    D = random_digraph(n, max_deg, float(rng.uniform(0.3, 0.9)), seed=int(rng.integers(2**31)))
    gamma = PartialColoring()
    for a in D.arcs:
        if rng.random() < 0.5:
            gamma.assign(a, int(rng.integers(colors)))
            if not validate_coloring(D, gamma).valid:
                gamma.unassign(a)
    lists = {}
    for a in D.arcs:
        if a in gamma:
            lists[a] = [gamma[a]]
        else:
            lists[a] = [c for c in range(colors) if rng.random() < 0.6]
    return D, ListAssignment(lists), gamma


def all_simple_paths(D):
    """Every simple path with at least one arc, via networkx."""
    G = nx.DiGraph(D.arcs)
    G.add_nodes_from(range(D.n))
    out = []
    for s in range(D.n):
        for t in range(D.n):
            if s != t:
                out.extend(tuple(p) for p in nx.all_simple_paths(G, s, t))
    return out


def suspicious_index(D, L, gamma, c, paths=None):
    """(start, end, k) -> set of (vertices, uncolored positions) for suspicious paths for c."""
    index = {}
    for path in paths if paths is not None else all_simple_paths(D):
        unc = []
        for i in range(len(path) - 1):
            a = (path[i], path[i + 1])
            col = gamma.get(a)
            if col is None:
                if c not in L[a]:
                    break
                unc.append(i)
            elif col != c:
                break
        else:
            key = (path[0], path[-1], len(unc))
            index.setdefault(key, set()).add((path, frozenset(unc)))
    return index


def naive_from_to(index, v, u, k):
    return index.get((v, u, k), set())


def naive_tail(index, n, u, length):
    return {p for w in range(n) for p in index.get((w, u, length), ()) if 0 in p[1]}


def as_pairs(paths):
    return {(p.vertices, p.uncolored_positions) for p in paths}
