"""Per-vertex reserve colors and the split of each list into working and reserve parts.

Every vertex v puts each color of its incident lists into Reserve(v)
independently with probability ``p_res``.  An arc uv then keeps
``L0(uv) = list - (Reserve(u) | Reserve(v))`` for the nibble and
``Res(uv) = list & Reserve(u) & Reserve(v)`` for the finishing step.

Three threshold profiles are offered.  ``paper`` uses the asymptotic
thresholds, which are vacuous or unsatisfiable unless the degree is
astronomically large.  ``fraction`` scales them with the list size and
degree.  ``desk`` (the default) puts each threshold a fixed number of
binomial standard deviations from its mean, so a valid plan is a likely
draw at any size.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

from .coloring import ListAssignment
from .digraph import Digraph
from .params import log_delta
from .rng import as_generator

PROFILES = ("desk", "fraction", "paper")


class ReserveExhaustedError(RuntimeError):
    """No valid reserve plan within the retry budget."""


@dataclass(frozen=True)
class ReserveBounds:
    """Thresholds for the four reserve conditions.

    (a) |list(e) & (Res(u) | Res(v))| <= A(e)
    (b) |list(e) & Res(u) & Res(v)|   >= B(e)
    (c) out-neighbors w of u with c in Res(w) & list(uw), at most C
    (d) the in-neighbor analogue, at most C
    """
    profile: str = "desk"
    p_res: float = 0.25
    delta: int = 1
    z: float = 5.0
    a_frac: float = 0.5
    b_frac: float = 0.1
    c_frac: float = 0.5
    log_base: str = "natural"
    strict: bool = True

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}, got {self.profile!r}")

    def A(self, size: int) -> float:
        if self.profile == "paper":
            lg = log_delta(self.delta, self.log_base)
            return 3 * math.sqrt(self.delta) * lg**4
        if self.profile == "fraction":
            return self.a_frac * size
        q = 1 - (1 - self.p_res) ** 2
        return size * q + self.z * math.sqrt(size * q * (1 - q))

    def B(self, size: int) -> float:
        if self.profile == "paper":
            return log_delta(self.delta, self.log_base) ** 8 / 2
        if self.profile == "fraction":
            return self.b_frac * size
        q = self.p_res**2
        return max(1.0, size * q - self.z * math.sqrt(size * q * (1 - q)))

    def C(self) -> float:
        if self.profile == "paper":
            lg = log_delta(self.delta, self.log_base)
            return 2 * math.sqrt(self.delta) * lg**4
        if self.profile == "fraction":
            return self.c_frac * self.delta
        q = self.p_res
        return self.delta * q + self.z * math.sqrt(self.delta * q * (1 - q))

    def to_json(self) -> dict:
        return {"profile": self.profile, "p_res": self.p_res, "delta": self.delta, "z": self.z,
                "a_frac": self.a_frac, "b_frac": self.b_frac, "c_frac": self.c_frac,
                "log_base": self.log_base, "strict": self.strict}


def paper_p_res(delta: int, log_base: str = "natural") -> float:
    """log^4 D / sqrt(D); at least 1 unless D is beyond ~1e12 with natural log."""
    return log_delta(delta, log_base) ** 4 / math.sqrt(delta)


@dataclass
class ReservePlan:
    reserve_of: dict[int, frozenset[int]]
    bounds: ReserveBounds
    seed: int | None = None
    attempt: int = 0

    def __getitem__(self, v: int) -> frozenset[int]:
        return self.reserve_of.get(v, frozenset())

    def get(self, v: int, default=()):
        return self.reserve_of.get(v, default)

    def to_json(self) -> dict:
        return {"reserve": {str(v): sorted(cs) for v, cs in sorted(self.reserve_of.items())},
                "bounds": self.bounds.to_json(), "seed": self.seed, "attempt": self.attempt}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ReservePlan":
        bounds = ReserveBounds(**obj.get("bounds", {}))
        res = {int(v): frozenset(int(c) for c in cs) for v, cs in obj["reserve"].items()}
        return cls(res, bounds, obj.get("seed"), obj.get("attempt", 0))


def vertex_palettes(D: Digraph, Lbig: ListAssignment) -> list[set[int]]:
    """The union of the lists on the arcs at each vertex."""
    pal: list[set[int]] = [set() for _ in range(D.n)]
    for a in D.arcs:
        pal[a[0]] |= Lbig[a]
        pal[a[1]] |= Lbig[a]
    return pal


def draw_reserve(D: Digraph, Lbig: ListAssignment, p_res: float, seed=None,
                 bounds: ReserveBounds | None = None, attempt: int = 0) -> ReservePlan:
    if not 0 <= p_res < 1:
        raise ValueError(f"p_res must lie in [0, 1), got {p_res}")
    rng = as_generator(seed, "reserve", attempt)
    reserve_of = {}
    for v, pal in enumerate(vertex_palettes(D, Lbig)):
        cols = sorted(pal)
        keep = rng.random(len(cols)) < p_res
        reserve_of[v] = frozenset(c for c, k in zip(cols, keep) if k)
    if bounds is None:
        bounds = ReserveBounds(p_res=p_res, delta=max(D.max_degree(), 1))
    return ReservePlan(reserve_of, bounds, seed if isinstance(seed, int) else None, attempt)


@dataclass
class ReserveReport:
    violations: list[tuple] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def kinds(self) -> Counter:
        return Counter(v[0] for v in self.violations)

    def to_json(self) -> dict:
        return {"valid": self.valid, "violations": [list(v) for v in self.violations]}


def verify_reserve(D: Digraph, Lbig: ListAssignment, plan: ReservePlan) -> ReserveReport:
    b = plan.bounds
    report = ReserveReport()
    for a in D.arcs:
        u, v = a
        lst = Lbig[a]
        ru, rv = plan[u], plan[v]
        either = len(lst & (ru | rv))
        both = len(lst & ru & rv)
        if either > b.A(len(lst)):
            report.violations.append(("a", a, either))
        if both < b.B(len(lst)):
            report.violations.append(("b", a, both))
    cap = b.C()
    for u in range(D.n):
        for kind, arcs, far in (("c", D.out_adj[u], 1), ("d", D.in_adj[u], 0)):
            cnt: Counter = Counter()
            for f in arcs:
                cnt.update(Lbig[f] & plan[f[far]])
            for c, k in sorted(cnt.items()):
                if k > cap and (not b.strict or c in plan[u]):
                    report.violations.append((kind, u, c, k))
    return report


def retry_until_valid(D: Digraph, Lbig: ListAssignment, p_res: float, bounds: ReserveBounds,
                      seed=None, max_tries: int = 100) -> ReservePlan:
    if max_tries < 1:
        raise ValueError("max_tries must be at least 1")
    last = None
    for attempt in range(max_tries):
        plan = draw_reserve(D, Lbig, p_res, seed, bounds, attempt)
        last = verify_reserve(D, Lbig, plan)
        if last.valid:
            return plan
    kinds = dict(sorted(last.kinds().items())) if last else {}
    raise ReserveExhaustedError(
        f"no valid reserve plan in {max_tries} tries (last violations by kind: {kinds})")


def split_lists(Lbig: ListAssignment, plan: ReservePlan) -> tuple[ListAssignment, ListAssignment]:
    """Working lists L0 and reserve lists Res, disjoint on every arc."""
    L0, Res = {}, {}
    for a, lst in Lbig.lists.items():
        ru, rv = plan[a[0]], plan[a[1]]
        L0[a] = lst - (ru | rv)
        Res[a] = lst & ru & rv
    return ListAssignment(L0), ListAssignment(Res)
