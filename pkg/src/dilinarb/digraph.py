"""Digraphs, multigraphs, test-family generators and text/JSON formats.

Vertices are the integers ``0..n-1``; an arc is the ordered pair ``(u, v)``.
Loops and parallel arcs are rejected, opposite arcs (2-cycles) are allowed.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from typing import Iterable

import numpy as np

from .rng import as_generator

Arc = tuple[int, int]


class DigraphError(ValueError):
    """Invalid digraph data (loop, parallel arc, vertex out of range)."""


class DigraphFormatError(DigraphError):
    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}: " if offset is None else f"line {line}, col {offset}: "
        super().__init__(where + message)
        self.line = line
        self.offset = offset


class GenerationError(RuntimeError):
    """A randomized generator ran out of attempts."""


class Digraph:
    """Immutable loopless digraph without parallel arcs.

    ``arcs`` is kept sorted, which fixes the arc order everything else
    (arc indices, RNG draws) is keyed on.
    """

    __slots__ = ("n", "arcs", "out_adj", "in_adj", "_index")

    def __init__(self, n: int, arcs: Iterable[Arc] = ()):
        n = int(n)
        if n < 0:
            raise DigraphError(f"vertex count must be nonnegative, got {n}")
        seen: set[Arc] = set()
        for a in arcs:
            u, v = int(a[0]), int(a[1])
            if not (0 <= u < n and 0 <= v < n):
                raise DigraphError(f"arc {(u, v)} has an endpoint outside 0..{n - 1}")
            if u == v:
                raise DigraphError(f"loop at vertex {u}")
            if (u, v) in seen:
                raise DigraphError(f"parallel arc {(u, v)}")
            seen.add((u, v))
        ordered = tuple(sorted(seen))
        out_adj: list[list[Arc]] = [[] for _ in range(n)]
        in_adj: list[list[Arc]] = [[] for _ in range(n)]
        for a in ordered:
            out_adj[a[0]].append(a)
            in_adj[a[1]].append(a)
        self.n = n
        self.arcs = ordered
        self.out_adj = tuple(tuple(x) for x in out_adj)
        self.in_adj = tuple(tuple(x) for x in in_adj)
        self._index = {a: i for i, a in enumerate(ordered)}

    def __len__(self) -> int:
        return len(self.arcs)

    def __contains__(self, arc) -> bool:
        return tuple(arc) in self._index

    def __eq__(self, other) -> bool:
        if not isinstance(other, Digraph):
            return NotImplemented
        return self.n == other.n and self.arcs == other.arcs

    def __hash__(self) -> int:
        return hash((self.n, self.arcs))

    def __repr__(self) -> str:
        return f"Digraph(n={self.n}, m={len(self.arcs)})"

    def index(self, arc: Arc) -> int:
        return self._index[arc]

    def out_degree(self, v: int) -> int:
        return len(self.out_adj[v])

    def in_degree(self, v: int) -> int:
        return len(self.in_adj[v])

    def max_degree(self) -> int:
        return max_degree(self)

    def is_regular(self, d: int | None = None) -> bool:
        """True iff every vertex has in- and out-degree ``d`` (any common d if None)."""
        if self.n == 0:
            return True
        if d is None:
            d = self.out_degree(0)
        return all(len(o) == d and len(i) == d for o, i in zip(self.out_adj, self.in_adj))

    def underlying_multigraph(self, arcs: Iterable[Arc] | None = None) -> "Multigraph":
        chosen = self.arcs if arcs is None else arcs
        return Multigraph(self.n, [(min(a), max(a)) for a in chosen])

    def tail_head_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.arcs:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        a = np.asarray(self.arcs, dtype=np.int64)
        return a[:, 0].copy(), a[:, 1].copy()


class Multigraph:
    """Loopless undirected multigraph; ``edges`` is a sorted tuple of pairs ``(a, b)``, a < b."""

    __slots__ = ("n", "edges")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        self.n = int(n)
        norm = []
        for e in edges:
            a, b = int(e[0]), int(e[1])
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise DigraphError(f"edge {(a, b)} has an endpoint outside 0..{self.n - 1}")
            if a == b:
                raise DigraphError(f"loop at vertex {a}")
            norm.append((min(a, b), max(a, b)))
        self.edges = tuple(sorted(norm))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Multigraph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Multigraph(n={self.n}, m={len(self.edges)})"

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def multiplicities(self) -> Counter:
        return Counter(self.edges)


def max_degree(D: Digraph) -> int:
    """Largest in- or out-degree over all vertices (0 for an arcless digraph)."""
    best = 0
    for o, i in zip(D.out_adj, D.in_adj):
        best = max(best, len(o), len(i))
    return best


# ---------------------------------------------------------------- generators


def symmetric_complete(n: int) -> Digraph:
    """K_n*: every ordered pair of distinct vertices is an arc."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return Digraph(n, [(u, v) for u in range(n) for v in range(n) if u != v])


def directed_path(n: int) -> Digraph:
    return Digraph(n, [(i, i + 1) for i in range(n - 1)])


def directed_cycle(n: int) -> Digraph:
    if n < 2:
        raise ValueError("a directed cycle needs at least 2 vertices")
    return Digraph(n, [(i, (i + 1) % n) for i in range(n)])


def _random_layer(n: int, used: set[Arc], rng: np.random.Generator, swaps: int) -> list[int] | None:
    """Random permutation sigma with sigma(v) != v and (v, sigma(v)) not in ``used``.

    Starts from a uniform permutation and repairs clashes by random
    transpositions; returns None when the repair budget runs out.
    """
    perm = rng.permutation(n).tolist()

    def ok(v: int, w: int) -> bool:
        return v != w and (v, w) not in used

    bad = [v for v in range(n) if not ok(v, perm[v])]
    budget = swaps
    while bad:
        if budget <= 0:
            return None
        budget -= 1
        v = bad[-1]
        w = int(rng.integers(n))
        if ok(v, perm[w]) and ok(w, perm[v]):
            perm[v], perm[w] = perm[w], perm[v]
            bad.pop()
            if w in bad:
                bad.remove(w)
    return perm


def random_regular_digraph(n: int, d: int, seed=None, max_attempts: int = 1000) -> Digraph:
    """Random d-regular digraph (d^+ = d^- = d everywhere), no loops or parallel arcs.

    Built from ``d`` successive random out-slot/in-slot matchings, each one
    avoiding loops and arcs placed by earlier matchings.  A matching that
    cannot be repaired discards the whole attempt.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not 0 <= d < n:
        raise ValueError(f"need 0 <= d < n, got d={d}, n={n}")
    rng = as_generator(seed, "random_regular_digraph")
    for _ in range(max_attempts):
        used: set[Arc] = set()
        for _layer in range(d):
            perm = _random_layer(n, used, rng, swaps=50 * n + 100)
            if perm is None:
                break
            used.update((v, perm[v]) for v in range(n))
        else:
            D = Digraph(n, used)
            assert D.is_regular(d)
            return D
    raise GenerationError(f"no {d}-regular digraph on {n} vertices after {max_attempts} attempts")


def random_digraph(n: int, max_deg: int, density: float, seed=None) -> Digraph:
    """Random digraph with every in/out-degree at most ``max_deg``.

    Each ordered pair is offered once in random order and kept with
    probability ``density`` if the degree caps allow.
    """
    rng = as_generator(seed, "random_digraph")
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    order = rng.permutation(len(pairs))
    keep = rng.random(len(pairs))
    outd = [0] * n
    ind = [0] * n
    arcs = []
    for j in order.tolist():
        u, v = pairs[j]
        if keep[j] < density and outd[u] < max_deg and ind[v] < max_deg:
            arcs.append((u, v))
            outd[u] += 1
            ind[v] += 1
    return Digraph(n, arcs)


def random_regular_multigraph(n: int, degree: int, seed=None, max_multiplicity: int = 2,
                              max_attempts: int = 1000) -> Multigraph:
    """Configuration-model regular multigraph with bounded edge multiplicity.

    Stubs are paired uniformly; loops and pairs above ``max_multiplicity``
    are then removed by random double-edge swaps.
    """
    if (n * degree) % 2:
        raise ValueError("n * degree must be even")
    if degree >= n * max_multiplicity:
        raise ValueError("degree too large for the multiplicity cap")
    rng = as_generator(seed, "random_regular_multigraph")
    for _ in range(max_attempts):
        stubs = rng.permutation(np.repeat(np.arange(n), degree)).tolist()
        pairs = [[stubs[2 * i], stubs[2 * i + 1]] for i in range(len(stubs) // 2)]
        mult: Counter = Counter((min(p), max(p)) for p in pairs)

        def bad(p) -> bool:
            return p[0] == p[1] or mult[(min(p), max(p))] > max_multiplicity

        budget = 200 * len(pairs) + 100
        bad_idx = [i for i, p in enumerate(pairs) if bad(p)]
        while bad_idx and budget > 0:
            budget -= 1
            i = bad_idx[-1]
            j = int(rng.integers(len(pairs)))
            if i == j:
                continue
            a, b = pairs[i]
            c, d = pairs[j]
            if rng.random() < 0.5:
                c, d = d, c
            # proposed: (a, c), (b, d)
            if a == c or b == d:
                continue
            old1, old2 = (min(a, b), max(a, b)), (min(c, d), max(c, d))
            new1, new2 = (min(a, c), max(a, c)), (min(b, d), max(b, d))
            mult[old1] -= 1
            mult[old2] -= 1
            mult[new1] += 1
            mult[new2] += 1
            if mult[new1] > max_multiplicity or mult[new2] > max_multiplicity:
                mult[new1] -= 1
                mult[new2] -= 1
                mult[old1] += 1
                mult[old2] += 1
                continue
            pairs[i] = [a, c]
            pairs[j] = [b, d]
            bad_idx = [k for k, p in enumerate(pairs) if bad(p)]
        if not any(bad(p) for p in pairs):
            return Multigraph(n, [tuple(p) for p in pairs])
    raise GenerationError(f"no {degree}-regular multigraph on {n} vertices after {max_attempts} attempts")


def eulerian_orientation(G: Multigraph) -> Digraph:
    """Orient an even-degree multigraph so that d^+(v) = d^-(v) = deg(v)/2.

    Each pair of parallel edges becomes a 2-cycle; what remains is simple
    with even degrees and is oriented along closed trails peeled off one
    at a time.  Three or more parallel edges between one pair cannot be
    oriented without a parallel arc.
    """
    for v, dv in enumerate(G.degrees()):
        if dv % 2:
            raise DigraphError(f"vertex {v} has odd degree {dv}")
    arcs: list[Arc] = []
    single: list[tuple[int, int]] = []
    for (a, b), m in sorted(G.multiplicities().items()):
        if m > 2:
            raise DigraphError(f"{m} parallel edges between {a} and {b} force a parallel arc")
        if m == 2:
            arcs.extend([(a, b), (b, a)])
        else:
            single.append((a, b))

    adj: list[list[tuple[int, int]]] = [[] for _ in range(G.n)]
    for eid, (a, b) in enumerate(single):
        adj[a].append((b, eid))
        adj[b].append((a, eid))
    used = [False] * len(single)
    ptr = [0] * G.n
    for start in range(G.n):
        while True:
            # walk a closed trail from ``start``; even degrees guarantee we get stuck only there
            x = start
            moved = False
            while True:
                while ptr[x] < len(adj[x]) and used[adj[x][ptr[x]][1]]:
                    ptr[x] += 1
                if ptr[x] == len(adj[x]):
                    break
                y, eid = adj[x][ptr[x]]
                used[eid] = True
                arcs.append((x, y))
                x = y
                moved = True
            if not moved:
                break
            assert x == start
    return Digraph(G.n, arcs)


# ------------------------------------------------------------------- formats


def serialize_digraph(D: Digraph, format: str = "edge-list") -> bytes:
    if format == "edge-list":
        lines = [str(D.n)] + [f"{u} {v}" for u, v in D.arcs]
        return ("\n".join(lines) + "\n").encode()
    if format == "json":
        return json.dumps({"n": D.n, "arcs": [list(a) for a in D.arcs]}).encode()
    raise ValueError(f"unknown digraph format {format!r}")


def _parse_int(tok: str, line: int, col: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise DigraphFormatError(f"expected an integer, got {tok!r}", line, col) from None


def parse_digraph(data: bytes | str, format: str = "edge-list") -> Digraph:
    """Parse the edge-list or JSON digraph format.

    Edge-list: first non-comment line is ``n``, then one ``u v`` per line;
    ``#`` starts a comment.  JSON: ``{"n": int, "arcs": [[u, v], ...]}``.
    """
    text = data.decode() if isinstance(data, (bytes, bytearray)) else data
    if format == "json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DigraphFormatError(exc.msg, exc.lineno, exc.colno) from None
        if not isinstance(obj, dict) or "n" not in obj or "arcs" not in obj:
            raise DigraphFormatError('expected an object with keys "n" and "arcs"')
        arcs = obj["arcs"]
        if not isinstance(arcs, list) or not all(isinstance(a, list) and len(a) == 2 for a in arcs):
            raise DigraphFormatError('"arcs" must be a list of [u, v] pairs')
        return _build_checked(obj["n"], [(a[0], a[1]) for a in arcs], None)
    if format != "edge-list":
        raise ValueError(f"unknown digraph format {format!r}")

    n = None
    arcs: list[Arc] = []
    lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = body.split()
        if not toks:
            continue
        if n is None:
            if len(toks) != 1:
                raise DigraphFormatError("first line must hold the vertex count only", lineno, 1)
            n = _parse_int(toks[0], lineno, body.index(toks[0]) + 1)
            continue
        if len(toks) != 2:
            raise DigraphFormatError(f"expected 'u v', got {body.strip()!r}", lineno, 1)
        u = _parse_int(toks[0], lineno, body.index(toks[0]) + 1)
        v = _parse_int(toks[1], lineno, body.rindex(toks[1]) + 1)
        arcs.append((u, v))
        lines.append(lineno)
    if n is None:
        raise DigraphFormatError("missing vertex count")
    return _build_checked(n, arcs, lines)


def _build_checked(n, arcs: list[Arc], lines: list[int] | None) -> Digraph:
    if not isinstance(n, int) or n < 0:
        raise DigraphFormatError(f"vertex count must be a nonnegative integer, got {n!r}")
    seen: set[Arc] = set()
    for k, (u, v) in enumerate(arcs):
        line = lines[k] if lines else None
        if not isinstance(u, int) or not isinstance(v, int):
            raise DigraphFormatError(f"arc endpoints must be integers: {(u, v)!r}", line)
        if not (0 <= u < n and 0 <= v < n):
            raise DigraphFormatError(f"arc {(u, v)} out of range 0..{n - 1}", line)
        if u == v:
            raise DigraphFormatError(f"loop at vertex {u}", line)
        if (u, v) in seen:
            raise DigraphFormatError(f"duplicate arc {(u, v)}", line)
        seen.add((u, v))
    return Digraph(n, arcs)


def read_digraph(path, format: str | None = None) -> Digraph:
    with open(path, "rb") as fh:
        data = fh.read()
    if format is None:
        format = "json" if str(path).endswith(".json") else "edge-list"
    return parse_digraph(data, format)


def degree_profile(D: Digraph) -> dict[str, list[int]]:
    return {"out": [len(a) for a in D.out_adj], "in": [len(a) for a in D.in_adj]}


def components(D: Digraph) -> list[list[int]]:
    """Weakly connected components, each sorted, ordered by smallest vertex."""
    parent = list(range(D.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in D.arcs:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    groups: dict[int, list[int]] = defaultdict(list)
    for v in range(D.n):
        groups[find(v)].append(v)
    return [groups[k] for k in sorted(groups)]
