"""One round of the random list-coloring procedure and the driver that repeats it.

A round, with activation probability p:

  I    activate each uncolored arc with probability p;
  II   give each activated arc a uniform color from its list;
  III  uncolor an arc uv assigned c if another arc out of u or into v was
       also assigned c; otherwise uncolor it with probability Eq(uv, c);
  IV   for each vertex, color and side: if an arc there kept c, drop c
       from the other lists on that side, else drop c from all of them
       with probability Vq;
  V    for each uncolored arc uv and listed c, if a dangerous suspicious
       path for (uv, c) went fully c after II, drop c from L(uv) and
       uncolor uv if it was given c.

Lists are held as a boolean matrix (arc x palette column).  Steps I-IV are
vectorized; step V runs a backward path search per color in the graph of
old c-arcs plus newly assigned c-arcs.

Two profiles.  ``paper`` takes L_i, N_i, R_i, Retain_i, Keep_i from a
precomputed trajectory, truncates lists to ceil(L_{i+1}) after each round
and refuses probabilities outside [0, 1].  ``desk`` reads the parameters
off the current state (median list size, largest color degree), uses the
actual list sizes in the retention product and clamps the coins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .coloring import IN, OUT, ListAssignment, PartialColoring, _arc_key
from .digraph import Arc, Digraph
from .params import P_ACTIVATE, ParameterTrajectory, ell_int, log_delta, retain_keep
from .rng import as_generator, substream
from .suspicious import DEFAULT_CAP, PathOverflowError

PROFILES = ("desk", "paper")


class NibbleError(RuntimeError):
    """Base class for procedure failures."""


class ProbabilityRangeError(NibbleError, ArithmeticError):
    """A coin probability left [0, 1] under the paper profile."""


class RetryExhaustedError(NibbleError):
    """A round kept failing its size checks."""


class TrajectoryExhaustedError(NibbleError):
    """The paper profile ran past the last trajectory row."""


class InvariantError(NibbleError, AssertionError):
    """A structural invariant broke; this is a bug, never a bad draw."""


@dataclass(frozen=True)
class IterParams:
    L: float
    N: float
    R: float
    retain: float
    keep: float

    def to_json(self) -> dict:
        return {"L": self.L, "N": self.N, "R": self.R, "Retain": self.retain, "Keep": self.keep}


class NibbleState:
    """Lists, partial coloring and bookkeeping for one point of a run.

    ``M[e, j]`` is True when palette color ``palette[j]`` is in the list of
    arc ``D.arcs[e]``; ``color[e]`` is a palette column or -1.
    """

    def __init__(self, D: Digraph, palette: np.ndarray, M: np.ndarray, color: np.ndarray,
                 reserve: dict[int, frozenset[int]] | None = None, iter: int = 0,
                 profile: str = "desk", p: float = P_ACTIVATE,
                 traj: ParameterTrajectory | None = None, log_base: str = "natural",
                 rng: np.random.Generator | None = None, cap: int = DEFAULT_CAP):
        if profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}, got {profile!r}")
        if profile == "paper" and traj is None:
            raise ValueError("the paper profile needs a trajectory")
        self.D = D
        self.palette = np.asarray(palette, dtype=np.int64)
        self.M = M
        self.color = color
        self.reserve = reserve or {}
        self.iter = iter
        self.profile = profile
        self.p = p
        self.traj = traj
        self.log_base = traj.log_base if traj is not None else log_base
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.cap = cap
        self.tail, self.head = D.tail_head_arrays()
        self.delta = traj.delta if traj is not None else max(D.max_degree(), 2)
        self.ell = ell_int(self.delta, self.log_base)
        self._col = {int(c): j for j, c in enumerate(self.palette)}
        m, n = len(D.arcs), D.n
        idx = np.arange(m)
        self.Tout = sparse.csr_matrix((np.ones(m), (self.tail, idx)), shape=(n, m))
        self.Tin = sparse.csr_matrix((np.ones(m), (self.head, idx)), shape=(n, m))
        self._res_palette, self._res_mat = self._reserve_matrix()
        self._cache: dict = {}

    @classmethod
    def initial(cls, D: Digraph, L0: ListAssignment, reserve=None, **kw) -> "NibbleState":
        palette = np.array(sorted(L0.palette()), dtype=np.int64)
        col = {int(c): j for j, c in enumerate(palette)}
        M = np.zeros((len(D.arcs), len(palette)), dtype=bool)
        for e, a in enumerate(D.arcs):
            for c in L0[a]:
                M[e, col[c]] = True
        color = np.full(len(D.arcs), -1, dtype=np.int64)
        if reserve is not None and not isinstance(reserve, dict):
            reserve = dict(reserve.reserve_of)
        return cls(D, palette, M, color, reserve, **kw)

    def _reserve_matrix(self):
        cols = sorted(set().union(*self.reserve.values())) if self.reserve else []
        rpal = np.array(cols, dtype=np.int64)
        index = {c: j for j, c in enumerate(cols)}
        R = np.zeros((self.D.n, len(cols)), dtype=bool)
        for v, cs in self.reserve.items():
            for c in cs:
                R[v, index[c]] = True
        return rpal, R

    def replace(self, M: np.ndarray, color: np.ndarray, iter: int) -> "NibbleState":
        new = object.__new__(NibbleState)
        new.__dict__.update(self.__dict__)
        new.M, new.color, new.iter = M, color, iter
        new._cache = {}
        return new

    # views

    @property
    def uncolored(self) -> np.ndarray:
        return self.color < 0

    @property
    def lists(self) -> ListAssignment:
        return ListAssignment({a: self.palette[self.M[e]].tolist()
                               for e, a in enumerate(self.D.arcs)})

    @property
    def gamma(self) -> PartialColoring:
        return PartialColoring({self.D.arcs[e]: int(self.palette[self.color[e]])
                                for e in np.flatnonzero(self.color >= 0)})

    def list_of(self, arc: Arc) -> frozenset[int]:
        return frozenset(self.palette[self.M[self.D.index(arc)]].tolist())

    def column(self, c: int) -> int:
        return self._col[int(c)]

    def list_sizes(self) -> np.ndarray:
        if "sizes" not in self._cache:
            self._cache["sizes"] = self.M.sum(axis=1)
        return self._cache["sizes"]

    def color_degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """(|N^+(v,c)|, |N^-(v,c)|) as n x K integer arrays.  Treat M as frozen once built."""
        if "N" not in self._cache:
            A = (self.M & self.uncolored[:, None]).astype(np.float64)
            self._cache["N"] = ((self.Tout @ A).astype(np.int64), (self.Tin @ A).astype(np.int64))
        return self._cache["N"]

    def reserve_degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """(|R^+(v,c)|, |R^-(v,c)|) over the reserve palette."""
        if "R" in self._cache:
            return self._cache["R"]
        if not self._res_palette.size:
            z = np.zeros((self.D.n, 0), dtype=np.int64)
            self._cache["R"] = (z, z)
            return z, z
        U = self.uncolored[:, None]
        out = (self.Tout @ (self._res_mat[self.head] & U).astype(np.float64)).astype(np.int64)
        inn = (self.Tin @ (self._res_mat[self.tail] & U).astype(np.float64)).astype(np.int64)
        self._cache["R"] = (out, inn)
        return out, inn

    def live(self) -> np.ndarray:
        """Uncolored arcs that still have a color to try."""
        return self.uncolored & self.M.any(axis=1)

    def params(self) -> IterParams:
        """L_i, N_i, R_i, Retain_i, Keep_i for the coming round."""
        if self.profile == "paper":
            if self.iter >= len(self.traj.rows):
                raise TrajectoryExhaustedError(
                    f"iteration {self.iter} is past i0={self.traj.i0}")
            r = self.traj.row(self.iter)
            return IterParams(float(r.L), float(r.N), float(r.R), float(r.retain), float(r.keep))
        live = self.live()
        if not live.any():
            return IterParams(0.0, 0.0, 0.0, 1.0, 1.0)
        L = float(np.median(self.list_sizes()[live]))
        Np, Nm = self.color_degrees()
        N = float(max(Np.max(), Nm.max()))
        Rp, Rm = self.reserve_degrees()
        R = float(max(Rp.max(), Rm.max())) if Rp.size else 0.0
        retain, keep = retain_keep(L, N, self.p)
        return IterParams(L, N, R, float(retain), float(keep))


@dataclass
class IterationStats:
    iter: int
    params: IterParams | None = None
    activations: int = 0
    assignments: int = 0
    conflict_uncolorings: int = 0
    eq_uncolorings: int = 0
    retained_after_iii: int = 0
    step_v_uncolorings: int = 0
    newly_colored: int = 0
    removals_iv: int = 0
    removals_v: int = 0
    eq_clamps: int = 0
    vq_clamps: int = 0
    X: dict[str, int] = field(default_factory=dict)
    Y: dict[str, int] = field(default_factory=dict)
    Z: dict[str, int] = field(default_factory=dict)
    min_list: int = 0
    max_N: int = 0
    max_R: int = 0
    uncolored: int = 0
    empty_lists: int = 0
    attempt: int = 0

    def consistent(self) -> bool:
        return (self.activations >= self.assignments
                == self.conflict_uncolorings + self.eq_uncolorings + self.retained_after_iii
                and self.retained_after_iii == self.newly_colored + self.step_v_uncolorings)

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "params"}
        d["params"] = self.params.to_json() if self.params else None
        return d


ROUNDING = 1e-12


def _clamp(x: np.ndarray, profile: str, what: str) -> tuple[np.ndarray, int]:
    bad = (x < 0) | (x > 1)
    if not bad.any():
        return x, 0
    # rounding noise around 0 and 1 is not a range violation
    if ((x > -ROUNDING) & (x < 1 + ROUNDING)).all():
        return np.clip(x, 0.0, 1.0), 0
    if profile == "paper":
        raise ProbabilityRangeError(
            f"{what} left [0,1] (range {float(x.min()):.4g}..{float(x.max()):.4g}); "
            f"the degree is outside the regime the recursion describes")
    return np.clip(x, 0.0, 1.0), int(bad.sum())


def _log_keep_factors(state: NibbleState, prm: IterParams) -> np.ndarray:
    """log(1 - p/|L(f)|) per arc (desk) or log(1 - p/L_i) (paper); 0 off the uncolored set."""
    m = len(state.D.arcs)
    if state.profile == "paper":
        q = np.full(m, math.log1p(-state.p / prm.L))
    else:
        sizes = state.list_sizes().astype(float)
        q = np.zeros(m)
        ok = sizes > 0
        q[ok] = np.log1p(-state.p / sizes[ok])
    q[~state.uncolored] = 0.0
    return q


def _log_P_matrix(state: NibbleState, prm: IterParams) -> np.ndarray:
    """log P(e, c) for every arc and column, given e receives c."""
    q = _log_keep_factors(state, prm)
    A = (state.M & state.uncolored[:, None]) * q[:, None]
    S_out = np.asarray(state.Tout @ A)
    S_in = np.asarray(state.Tin @ A)
    return S_out[state.tail] + S_in[state.head] - 2 * q[:, None]


def retention_probability(state: NibbleState, e: Arc, c: int) -> float:
    """P(e,c): chance that no other arc out of u or into v is given c."""
    i = state.D.index(e)
    j = state._col.get(int(c))
    if j is None or state.color[i] >= 0 or not state.M[i, j]:
        raise ValueError(f"{e} must be uncolored with {c} in its list")
    u, v = e
    if state.profile == "paper":
        Np, Nm = state.color_degrees()
        return (1 - state.p / state.params().L) ** (int(Np[u, j]) - 1 + int(Nm[v, j]) - 1)
    sizes = state.list_sizes()
    out = 1.0
    for f in state.D.out_adj[u] + state.D.in_adj[v]:
        k = state.D.index(f)
        if f != e and state.color[k] < 0 and state.M[k, j]:
            out *= 1 - state.p / sizes[k]
    return out


def _raw_eq(state: NibbleState, e: Arc, c: int) -> float:
    retain = state.params().retain
    return 1 - retain**2 / retention_probability(state, e, c)


def eq_coin(state: NibbleState, e: Arc, c: int) -> float:
    """Eq(e,c) = 1 - Retain^2 / P(e,c)."""
    x, _ = _clamp(np.array([_raw_eq(state, e, c)]), state.profile, "Eq")
    return float(x[0])


def vq_formula(keep: float, p: float, L: float, size: int, retain: float) -> float:
    return 1 - keep / (1 - (p / L) * size * retain**2)


def vq_coin(state: NibbleState, v: int, c: int, dir: str) -> float:
    """Vq(v,c) on side ``dir`` = 1 - Keep / (1 - (p/L) |N(v,c)| Retain^2)."""
    prm = state.params()
    Np, Nm = state.color_degrees()
    size = int((Np if dir == OUT else Nm)[v, state.column(c)])
    x, _ = _clamp(np.array([vq_formula(prm.keep, state.p, prm.L, size, prm.retain)]),
                  state.profile, "Vq")
    return float(x[0])


def _draw_assignment(state: NibbleState, rng: np.random.Generator):
    """Steps I and II: activation mask and assigned column (-1 where none)."""
    m = len(state.D.arcs)
    act_u = rng.random(m)
    pick_u = rng.random(m)
    sizes = state.list_sizes()
    active = state.uncolored & (act_u < state.p)
    assigned = np.full(m, -1, dtype=np.int64)
    take = np.flatnonzero(active & (sizes > 0))
    if take.size:
        r = np.floor(pick_u[take] * sizes[take]).astype(np.int64)
        cs = np.cumsum(state.M[take], axis=1)
        assigned[take] = (cs > r[:, None]).argmax(axis=1)
    return active, assigned


def _step_iii(state: NibbleState, prm: IterParams, assigned: np.ndarray,
              rng: np.random.Generator):
    """Conflict and equalizing-coin uncoloring.  Returns (kept mask, conflict mask, eq mask, clamps)."""
    n, K = state.D.n, len(state.palette)
    m = len(state.D.arcs)
    eq_u = rng.random(m)
    has = assigned >= 0
    idx = np.flatnonzero(has)
    cnt_out = np.bincount(state.tail[idx] * K + assigned[idx], minlength=n * K)
    cnt_in = np.bincount(state.head[idx] * K + assigned[idx], minlength=n * K)
    conflict = np.zeros(m, dtype=bool)
    conflict[idx] = (cnt_out[state.tail[idx] * K + assigned[idx]] > 1) | \
                    (cnt_in[state.head[idx] * K + assigned[idx]] > 1)
    ok = idx[~conflict[idx]]
    eq_unc = np.zeros(m, dtype=bool)
    clamps = 0
    if ok.size:
        logP = _log_P_matrix(state, prm)[ok, assigned[ok]]
        eq = 1 - prm.retain**2 / np.exp(logP)
        eq, clamps = _clamp(eq, state.profile, "Eq")
        eq_unc[ok] = eq_u[ok] < eq
    kept = has & ~conflict & ~eq_unc
    return kept, conflict, eq_unc, clamps


def _step_iv(state: NibbleState, prm: IterParams, kept: np.ndarray, assigned: np.ndarray,
             rng: np.random.Generator):
    """Removal masks (n x K) for the out and in sides, plus clamp count."""
    n, K = state.D.n, len(state.palette)
    vq_out_u = rng.random((n, K))
    vq_in_u = rng.random((n, K))
    Np, Nm = state.color_degrees()
    k = np.flatnonzero(kept)
    ret_out = np.zeros((n, K), dtype=bool)
    ret_in = np.zeros((n, K), dtype=bool)
    ret_out[state.tail[k], assigned[k]] = True
    ret_in[state.head[k], assigned[k]] = True
    clamps = 0
    masks = []
    for Nsz, ret, coin in ((Np, ret_out, vq_out_u), (Nm, ret_in, vq_in_u)):
        present = Nsz > 0
        fire = np.zeros((n, K), dtype=bool)
        sel = present & ~ret
        if sel.any():
            vq = 1 - prm.keep / (1 - (state.p / prm.L) * Nsz[sel] * prm.retain**2)
            vq, c = _clamp(vq, state.profile, "Vq")
            clamps += c
            fire[sel] = coin[sel] < vq
        masks.append(present & (ret | fire))
    return masks[0], masks[1], clamps


def _step_v(state: NibbleState, assigned: np.ndarray):
    """Danger detection on the post-II snapshot.

    Returns (X as a list of (arc index, column)), Z counts keyed (v, column, dir)).
    """
    D, ell, cap = state.D, state.ell, state.cap
    color, M = state.color, state.M
    unc = state.uncolored
    X: list[tuple[int, int]] = []
    Z: dict[tuple[int, int, str], int] = {}
    new_idx = np.flatnonzero(assigned >= 0)
    if not new_idx.size:
        return X, Z
    res_cols = {int(c): j for j, c in enumerate(state._res_palette)}
    by_color: dict[int, list[int]] = {}
    for e in new_idx:
        by_color.setdefault(int(assigned[e]), []).append(int(e))
    for j, new_arcs in sorted(by_color.items()):
        c = int(state.palette[j])
        pred: dict[int, list[tuple[int, bool]]] = {}
        succ: dict[int, list[int]] = {}
        for e in np.flatnonzero(color == j).tolist() + new_arcs:
            x, y = D.arcs[e]
            is_new = bool(color[e] < 0)
            pred.setdefault(y, []).append((x, is_new))
            succ.setdefault(x, []).append(y)
        # every dangerous path ends at a vertex reachable from a new arc's head
        reach = set()
        stack = [D.arcs[e][1] for e in new_arcs]
        while stack:
            x = stack.pop()
            if x in reach:
                continue
            reach.add(x)
            stack.extend(succ.get(x, ()))
        rj = res_cols.get(c)
        for u in sorted(reach):
            starts, tail = _backward_starts(pred, u, ell, cap, c)
            if not starts and not tail:
                continue
            for a in D.out_adj[u]:
                e = D.index(a)
                if not unc[e]:
                    continue
                w = a[1]
                if not (tail or w in starts):
                    continue
                if M[e, j]:
                    X.append((e, j))
                if rj is not None:
                    if state._res_mat[w, rj]:
                        Z[(u, j, OUT)] = Z.get((u, j, OUT), 0) + 1
                    if state._res_mat[u, rj]:
                        Z[(w, j, IN)] = Z.get((w, j, IN), 0) + 1
    return X, Z


def _backward_starts(pred, u: int, ell: int, cap: int, c: int):
    """Start vertices of paths into u with 1..ell-1 new arcs, and whether a path
    with exactly ell new arcs and a new first arc ends at u."""
    starts: set[int] = set()
    tail = False
    visited = 0
    on_path = {u}
    # frames: (vertex, new-arc count, iterator over predecessors)
    stack = [(u, 0, iter(pred.get(u, ())))]
    while stack:
        y, k, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            on_path.discard(y)
            continue
        x, is_new = nxt
        if x in on_path:
            continue
        k2 = k + is_new
        if k2 > ell:
            continue
        visited += 1
        if visited > cap:
            raise PathOverflowError(f"more than {cap} paths into {u} for color {c}")
        if k2 == ell:
            if is_new:
                tail = True
            continue
        if k2 >= 1:
            starts.add(x)
        on_path.add(x)
        stack.append((x, k2, iter(pred.get(x, ()))))
    starts.discard(u)
    return starts, tail


def iterate(state: NibbleState, rng: np.random.Generator | None = None
            ) -> tuple[NibbleState, IterationStats]:
    """One round of steps I-V.  The input state is not modified."""
    rng = rng if rng is not None else state.rng
    stats = IterationStats(iter=state.iter)
    if not state.uncolored.any():
        return state.replace(state.M.copy(), state.color.copy(), state.iter + 1), stats
    prm = state.params()
    stats.params = prm
    active, assigned = _draw_assignment(state, rng)
    kept, conflict, eq_unc, c1 = _step_iii(state, prm, assigned, rng)
    rem_out, rem_in, c2 = _step_iv(state, prm, kept, assigned, rng)
    X, Z = _step_v(state, assigned)

    unc = state.uncolored
    M = state.M.copy()
    before = M.copy()
    M[unc] &= ~rem_out[state.tail[unc]] & ~rem_in[state.head[unc]]
    after_iv = M.copy()
    drop_v = np.zeros(len(state.D.arcs), dtype=bool)
    for e, j in X:
        M[e, j] = False
        if assigned[e] == j and kept[e]:
            drop_v[e] = True
    final = kept & ~drop_v
    color = state.color.copy()
    fin = np.flatnonzero(final)
    color[fin] = assigned[fin]
    M[fin] = False
    M[fin, assigned[fin]] = True

    live_removed = unc & ~final
    stats.activations = int(active.sum())
    stats.assignments = int((assigned >= 0).sum())
    stats.conflict_uncolorings = int(conflict.sum())
    stats.eq_uncolorings = int(eq_unc.sum())
    stats.retained_after_iii = int(kept.sum())
    stats.step_v_uncolorings = int(drop_v.sum())
    stats.newly_colored = int(final.sum())
    stats.removals_iv = int((before & ~after_iv)[live_removed].sum())
    stats.removals_v = int((after_iv & ~M)[live_removed].sum())
    stats.eq_clamps, stats.vq_clamps = c1, c2
    stats.X, stats.Y = _xy_json(state, X)
    stats.Z = {f"{v},{int(state.palette[j])},{d}": k for (v, j, d), k in sorted(Z.items())}

    new = state.replace(M, color, state.iter + 1)
    _record_sizes(new, stats)
    return new, stats


def _xy_json(state: NibbleState, X):
    xs: dict[str, int] = {}
    ys: dict[tuple[int, int, str], int] = {}
    for e, j in X:
        a = state.D.arcs[e]
        xs[_arc_key(a)] = xs.get(_arc_key(a), 0) + 1
        ys[(a[0], j, OUT)] = ys.get((a[0], j, OUT), 0) + 1
        ys[(a[1], j, IN)] = ys.get((a[1], j, IN), 0) + 1
    Y = {f"{v},{int(state.palette[j])},{d}": k for (v, j, d), k in sorted(ys.items())}
    return dict(sorted(xs.items())), Y


def _record_sizes(state: NibbleState, stats: IterationStats) -> None:
    unc = state.uncolored
    sizes = state.list_sizes()[unc]
    stats.uncolored = int(unc.sum())
    stats.min_list = int(sizes.min()) if sizes.size else 0
    stats.empty_lists = int((sizes == 0).sum())
    Np, Nm = state.color_degrees()
    stats.max_N = int(max(Np.max(initial=0), Nm.max(initial=0)))
    Rp, Rm = state.reserve_degrees()
    stats.max_R = int(max(Rp.max(initial=0), Rm.max(initial=0)))


def truncate_lists(state: NibbleState, size: int) -> NibbleState:
    """Cut every uncolored list down to ``size`` colors by dropping the largest tokens."""
    M = state.M.copy()
    for e in np.flatnonzero(state.uncolored):
        cols = np.flatnonzero(M[e])
        if cols.size > size:
            M[e, cols[size:]] = False
    return state.replace(M, state.color.copy(), state.iter)


# ---------------------------------------------------------------- driver


@dataclass(frozen=True)
class StopRule:
    """``i0``: stop at the trajectory's last index; ``uncolored``: stop once the
    uncolored fraction is at most ``value``; ``list-size``: stop once the median
    uncolored list size is at most ``value``."""
    kind: str = "uncolored"
    value: float = 0.0
    max_iter: int = 500
    stall: int = 25

    KINDS = ("i0", "uncolored", "list-size")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"stop kind must be one of {self.KINDS}, got {self.kind!r}")

    @classmethod
    def parse(cls, text: str, **kw) -> "StopRule":
        """``i0``, ``uncolored:0.05`` or ``list-size:8``."""
        kind, _, val = text.partition(":")
        return cls(kind, float(val) if val else 0.0, **kw)

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value, "max_iter": self.max_iter,
                "stall": self.stall}


@dataclass
class RunResult:
    state: NibbleState
    stats: list[IterationStats]
    stop_reason: str

    @property
    def gamma(self) -> PartialColoring:
        return self.state.gamma

    @property
    def lists(self) -> ListAssignment:
        return self.state.lists


def _stop(state: NibbleState, rule: StopRule) -> str | None:
    m = len(state.D.arcs)
    unc = state.uncolored
    if m == 0 or not unc.any():
        return "all colored"
    if rule.kind == "i0":
        i0 = state.traj.i0 if state.traj is not None else None
        if i0 is None:
            raise ValueError("stop rule i0 needs a trajectory")
        if state.iter >= i0:
            return "reached i0"
    elif rule.kind == "uncolored":
        if unc.sum() / m <= rule.value:
            return "uncolored fraction reached"
    elif rule.kind == "list-size":
        live = state.live()
        if not live.any() or np.median(state.list_sizes()[live]) <= rule.value:
            return "list size reached"
    if not state.live().any():
        return "no live arcs"
    if state.iter >= rule.max_iter:
        return "iteration cap"
    return None


def desk_size_failures(prev: NibbleState, new: NibbleState, prm: IterParams) -> list[str]:
    """Size checks for one round, with targets recomputed from the realized start values."""
    lg2 = log_delta(prev.delta, prev.log_base) ** 2
    shrink = 1 - prev.p * prm.retain**2
    out = []
    unc = new.uncolored
    old_sz = prev.list_sizes()[unc].astype(float)
    new_sz = new.list_sizes()[unc].astype(float)
    target = old_sz * prm.keep**2 - np.sqrt(old_sz) * lg2
    if (new_sz < target - 1e-9).any():
        out.append("list size")
    Np, Nm = new.color_degrees()
    n_target = prm.N * prm.keep * shrink + math.sqrt(prm.N) * lg2
    if max(Np.max(initial=0), Nm.max(initial=0)) > n_target + 1e-9:
        out.append("color degree")
    Rp, Rm = new.reserve_degrees()
    r_target = prm.R * shrink + math.sqrt(prm.R) * lg2
    if max(Rp.max(initial=0), Rm.max(initial=0)) > r_target + 1e-9:
        out.append("reserve degree")
    return out


def paper_size_failures(new: NibbleState) -> list[str]:
    """Conditions on the next trajectory row, before truncation."""
    if new.iter >= len(new.traj.rows):
        return []
    r = new.traj.row(new.iter)
    out = []
    unc = new.uncolored
    if unc.any() and new.list_sizes()[unc].min() < float(r.L):
        out.append("list size")
    Np, Nm = new.color_degrees()
    if max(Np.max(initial=0), Nm.max(initial=0)) > float(r.N):
        out.append("color degree")
    Rp, Rm = new.reserve_degrees()
    if max(Rp.max(initial=0), Rm.max(initial=0)) > float(r.R):
        out.append("reserve degree")
    return out


def run(D: Digraph, L0: ListAssignment, traj: ParameterTrajectory | None = None, seed=0,
        profile: str = "desk", stop: StopRule | None = None, reserve=None,
        max_retries: int = 20, check=None, p: float = P_ACTIVATE,
        log_base: str = "natural") -> RunResult:
    """Iterate rounds until the stop rule holds.

    Each round draws from its own stream (seed, round, attempt).  A round
    that fails its size checks is redrawn up to ``max_retries`` times.
    ``check``, if given, is called as ``check(prev_state, new_state)`` after
    every accepted round.
    """
    stop = stop or StopRule()
    state = NibbleState.initial(D, L0, reserve, profile=profile, traj=traj, p=p,
                                log_base=log_base)
    if profile == "paper":
        state = truncate_lists(state, math.ceil(float(traj.row(0).L)))
    seed = int(seed) if not isinstance(seed, np.random.Generator) else seed
    history: list[IterationStats] = []
    idle = 0
    while True:
        reason = _stop(state, stop)
        if reason:
            return RunResult(state, history, reason)
        if idle >= stop.stall:
            return RunResult(state, history, "stalled")
        prm = state.params()
        for attempt in range(max_retries):
            rng = as_generator(seed, "nibble", state.iter, attempt) if isinstance(seed, int) \
                else seed
            new, st = iterate(state, rng)
            st.attempt = attempt
            if profile == "paper":
                failures = paper_size_failures(new)
            else:
                failures = desk_size_failures(state, new, prm)
            if not failures:
                break
        else:
            raise RetryExhaustedError(
                f"round {state.iter} failed {failures} in {max_retries} attempts")
        if profile == "paper" and new.iter < len(traj.rows):
            new = truncate_lists(new, math.ceil(float(traj.row(new.iter).L)))
        if check is not None:
            check(state, new)
        progress = st.newly_colored > 0 or (new.M != state.M).any()
        idle = 0 if progress else idle + 1
        history.append(st)
        state = new


# ---------------------------------------------------------- Monte Carlo


@dataclass
class RetentionEstimate:
    arcs: list[Arc]
    trials: int
    assigned: list[int]
    no_conflict: list[int]
    retained: list[int]
    predicted_no_conflict: list[float]
    predicted_retained: list[float]
    mean_list_after: list[float]
    predicted_list_after: list[float]

    def frequency(self, i: int) -> float:
        return self.retained[i] / self.assigned[i] if self.assigned[i] else float("nan")

    def sigma(self, i: int) -> float:
        q = self.predicted_retained[i]
        return math.sqrt(q * (1 - q) / self.assigned[i]) if self.assigned[i] else float("inf")

    def to_json(self) -> dict:
        return {k: ([_arc_key(a) for a in v] if k == "arcs" else v)
                for k, v in self.__dict__.items()}


def retention_statistics(state: NibbleState, trials: int, arcs: list[Arc] | None = None,
                         seed: int = 0, batch: int = 2000) -> RetentionEstimate:
    """Rerun steps I-IV from ``state`` many times and tally, per sampled arc,
    how often an assigned color survives step III and the mean list size
    after step IV.  Predictions use the same formulas as the procedure.
    """
    unc = np.flatnonzero(state.live())
    if arcs is None:
        arcs = [state.D.arcs[e] for e in unc[:20]]
    ids = np.array([state.D.index(a) for a in arcs], dtype=np.int64)
    k = len(ids)
    est = RetentionEstimate(list(arcs), trials, [0] * k, [0] * k, [0] * k, [0.0] * k,
                            [0.0] * k, [0.0] * k, [0.0] * k)
    if trials <= 0 or k == 0:
        return est
    prm = state.params()
    logP = _log_P_matrix(state, prm)
    n, K = state.D.n, len(state.palette)
    sizes = state.list_sizes()
    Np, Nm = state.color_degrees()
    for i, e in enumerate(ids):
        cols = np.flatnonzero(state.M[e])
        P = np.exp(logP[e, cols])
        eq = np.clip(1 - prm.retain**2 / P, 0, 1)
        est.predicted_no_conflict[i] = float(P.mean())
        est.predicted_retained[i] = float((P * (1 - eq)).mean())
        est.predicted_list_after[i] = float(sizes[e]) * prm.keep**2
    vq_out = np.clip(vq_formula(prm.keep, state.p, prm.L, Np, prm.retain), 0, 1)
    vq_in = np.clip(vq_formula(prm.keep, state.p, prm.L, Nm, prm.retain), 0, 1)
    tail, head = state.tail, state.head
    rng = substream(seed, "retention")
    list_total = np.zeros(k)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        assigned = np.full((b, len(state.D.arcs)), -1, dtype=np.int64)
        active = state.uncolored[None, :] & (rng.random(assigned.shape) < state.p)
        pick = rng.random(assigned.shape)
        live = np.flatnonzero(sizes > 0)
        cs = np.cumsum(state.M[live], axis=1)
        for t in range(b):
            sel = live[active[t, live]]
            if sel.size:
                r = np.floor(pick[t, sel] * sizes[sel]).astype(np.int64)
                assigned[t, sel] = (cs[np.searchsorted(live, sel)] > r[:, None]).argmax(axis=1)
        has = assigned >= 0
        tt, ee = np.nonzero(has)
        cc = assigned[tt, ee]
        ko = (tt * n + tail[ee]) * K + cc
        ki = (tt * n + head[ee]) * K + cc
        cnt_out = np.bincount(ko, minlength=b * n * K)
        cnt_in = np.bincount(ki, minlength=b * n * K)
        clash = (cnt_out[ko] > 1) | (cnt_in[ki] > 1)
        eq = np.clip(1 - prm.retain**2 / np.exp(logP[ee, cc]), 0, 1)
        keep_now = ~clash & (rng.random(ee.size) >= eq)
        kept = np.zeros_like(has)
        kept[tt[keep_now], ee[keep_now]] = True
        ret_out = np.zeros((b, n, K), dtype=np.int64)
        ret_in = np.zeros((b, n, K), dtype=np.int64)
        np.add.at(ret_out, (tt[keep_now], tail[ee[keep_now]], cc[keep_now]), 1)
        np.add.at(ret_in, (tt[keep_now], head[ee[keep_now]], cc[keep_now]), 1)
        fire_out = rng.random((b, n, K)) < vq_out[None]
        fire_in = rng.random((b, n, K)) < vq_in[None]
        for i, e in enumerate(ids):
            a_e = assigned[:, e]
            est.assigned[i] += int((a_e >= 0).sum())
            mine = np.flatnonzero(ee == e)
            est.no_conflict[i] += int((~clash[mine]).sum())
            est.retained[i] += int(kept[:, e].sum())
            u, v = tail[e], head[e]
            own = np.zeros((b, K), dtype=np.int64)
            own[np.arange(b)[kept[:, e]], a_e[kept[:, e]]] = 1
            by_other_out = ret_out[:, u, :] - own > 0
            by_other_in = ret_in[:, v, :] - own > 0
            any_out = ret_out[:, u, :] > 0
            any_in = ret_in[:, v, :] > 0
            gone = (by_other_out | (~any_out & fire_out[:, u, :])
                    | by_other_in | (~any_in & fire_in[:, v, :]))
            list_total[i] += (state.M[e][None, :] & ~gone).sum()
        done += b
    est.mean_list_after = (list_total / trials).tolist()
    return est


def path_activation_frequency(state: NibbleState, vertices: list[int], c: int, trials: int,
                              seed: int = 0) -> tuple[int, int]:
    """How often every uncolored arc of the path is given ``c`` in step II.

    Returns (hits, trials).  For a suspicious path with k uncolored arcs whose
    lists all have size L the expected rate is (p/L)^k.
    """
    arcs = [state.D.index((vertices[i], vertices[i + 1])) for i in range(len(vertices) - 1)]
    arcs = [e for e in arcs if state.color[e] < 0]
    j = state.column(c)
    rng = substream(seed, "path-activation")
    hits = 0
    sizes = state.list_sizes()
    done = 0
    while done < trials:
        b = min(100000, trials - done)
        ok = np.ones(b, dtype=bool)
        for e in arcs:
            act = rng.random(b) < state.p
            r = np.floor(rng.random(b) * sizes[e]).astype(np.int64)
            cols = np.flatnonzero(state.M[e])
            ok &= act & (cols[np.minimum(r, cols.size - 1)] == j)
        hits += int(ok.sum())
        done += b
    return hits, trials
