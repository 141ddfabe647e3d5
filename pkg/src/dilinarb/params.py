"""Parameter recursions for the iterative coloring and their size bounds.

    L_0 = D + 3 sqrt(D) log^4 D      N_0 = D      R_0 = 2 sqrt(D) log^4 D
    Retain_i = (1 - p/L_i)^(N_i - 1)
    Keep_i   = 1 - p (N_i / L_i) Retain_i^2
    L_{i+1}  = L_i Keep_i^2 - sqrt(L_i) log^2 D
    N_{i+1}  = N_i Keep_i (1 - p Retain_i^2) + sqrt(N_i) log^2 D
    R_{i+1}  = R_i (1 - p Retain_i^2) + sqrt(R_i) log^2 D
    i0       = min{i : L_i < 3 log^7 D}

with D the maximum degree, p = 1/4.  Retain_i is evaluated as
exp((N-1) log1p(-p/L)), which stays accurate when N and L are ~1e9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

P_ACTIVATE = 0.25
LOG_BASES = ("natural", "base2")
PRECISIONS = ("double", "extended")
EXTENDED_DPS = 34  # roughly IEEE binary128


class TrajectoryError(ArithmeticError):
    """The recursion left its valid range or did not reach i0 within the cap."""


class _DoubleOps:
    def num(self, x):
        return float(x)

    log = staticmethod(math.log)
    sqrt = staticmethod(math.sqrt)
    exp = staticmethod(math.exp)
    log1p = staticmethod(math.log1p)


class _ExtendedOps:
    def num(self, x):
        return mpmath.mpf(x)

    log = staticmethod(mpmath.log)
    sqrt = staticmethod(mpmath.sqrt)
    exp = staticmethod(mpmath.exp)
    log1p = staticmethod(mpmath.log1p)


def log_delta(delta, log_base: str = "natural", ops=None):
    ops = ops or _DoubleOps()
    if log_base == "natural":
        return ops.log(ops.num(delta))
    if log_base == "base2":
        return ops.log(ops.num(delta)) / ops.log(ops.num(2))
    raise ValueError(f"log_base must be one of {LOG_BASES}, got {log_base!r}")


@dataclass(frozen=True)
class ParamRow:
    i: int
    L: object
    N: object
    R: object
    retain: object
    keep: object

    def to_json(self) -> dict:
        return {"i": self.i, "L": float(self.L), "N": float(self.N), "R": float(self.R),
                "Retain": float(self.retain), "Keep": float(self.keep)}


@dataclass
class ParameterTrajectory:
    delta: int
    p: float = P_ACTIVATE
    ell: float = 0.0
    log_base: str = "natural"
    precision: str = "double"
    rows: list[ParamRow] = field(default_factory=list)
    i0: int = 0

    @property
    def log_d(self):
        ops = _ExtendedOps() if self.precision == "extended" else _DoubleOps()
        with mpmath.workdps(EXTENDED_DPS):
            return log_delta(self.delta, self.log_base, ops)

    def row(self, i: int) -> ParamRow:
        return self.rows[i]

    def __len__(self) -> int:
        return len(self.rows)

    def to_json(self) -> dict:
        return {
            "delta": self.delta, "p": self.p, "ell": float(self.ell), "log_base": self.log_base,
            "precision": self.precision, "i0": self.i0,
            "rows": [r.to_json() for r in self.rows],
        }


def retain_keep(L, N, p, ops=None):
    """Retain and Keep for list size L and color-degree bound N."""
    ops = ops or _DoubleOps()
    retain = ops.exp((N - 1) * ops.log1p(-p / L))
    keep = 1 - p * (N / L) * retain * retain
    return retain, keep


def compute_trajectory(delta: int, log_base: str = "natural", precision: str = "extended",
                       max_iter: int = 10**6) -> ParameterTrajectory:
    if delta < 2:
        raise ValueError(f"delta must be at least 2, got {delta}")
    if precision not in PRECISIONS:
        raise ValueError(f"precision must be one of {PRECISIONS}, got {precision!r}")
    ops = _ExtendedOps() if precision == "extended" else _DoubleOps()
    with mpmath.workdps(EXTENDED_DPS):
        p = ops.num(1) / 4
        d = ops.num(delta)
        lg = log_delta(delta, log_base, ops)
        lg2 = lg * lg
        lg4 = lg2 * lg2
        sq = ops.sqrt(d)
        threshold = 3 * lg**7
        L, N, R = d + 3 * sq * lg4, d, 2 * sq * lg4
        rows: list[ParamRow] = []
        i = 0
        while True:
            if not (L > 0 and N > 0 and R > 0):
                raise TrajectoryError(
                    f"nonpositive parameter at i={i} (L={float(L):.6g}, N={float(N):.6g}, "
                    f"R={float(R):.6g}); delta={delta} is too small for the recursion")
            retain, keep = retain_keep(L, N, p, ops)
            rows.append(ParamRow(i, L, N, R, retain, keep))
            if L < threshold:
                break
            if i >= max_iter:
                raise TrajectoryError(f"i0 not reached after {max_iter} iterations (delta={delta})")
            shrink = 1 - p * retain * retain
            L, N, R = (L * keep * keep - ops.sqrt(L) * lg2,
                       N * keep * shrink + ops.sqrt(N) * lg2,
                       R * shrink + ops.sqrt(R) * lg2)
            i += 1
        return ParameterTrajectory(delta=delta, p=float(p), ell=2 * lg, log_base=log_base,
                                   precision=precision, rows=rows, i0=i)


@dataclass
class BoundCheck:
    name: str
    passed: bool
    worst_margin: float
    worst_index: int

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "worst_margin": self.worst_margin, "worst_index": self.worst_index}


@dataclass
class SizeBoundsReport:
    checks: list[BoundCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> BoundCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_json() for c in self.checks]}


def _worst(pairs):
    """pairs: (index, lhs, rhs) meaning lhs > rhs (or >= with rel margin), margin=(lhs-rhs)/|rhs|."""
    worst_m, worst_i = math.inf, -1
    for i, lhs, rhs in pairs:
        m = float((lhs - rhs) / abs(rhs)) if rhs != 0 else float(lhs - rhs)
        if m < worst_m:
            worst_m, worst_i = m, i
    return worst_m, worst_i


def check_size_bounds(traj: ParameterTrajectory) -> SizeBoundsReport:
    """Evaluate the five size inequalities on a computed trajectory.

    Margins are relative, ``(lhs - rhs) / |rhs|`` for ``lhs > rhs``; a
    strict inequality passes iff its worst margin is positive.
    """
    ops = _ExtendedOps() if traj.precision == "extended" else _DoubleOps()
    with mpmath.workdps(EXTENDED_DPS):
        lg = log_delta(traj.delta, traj.log_base, ops)
        lg7 = lg**7
        last = traj.rows[traj.i0]
        checks = []

        m, i = _worst([(traj.i0, last.L, lg7), (traj.i0, last.N, lg7), (traj.i0, last.R, lg7)])
        checks.append(BoundCheck("final sizes exceed log^7", m > 0, m, i))

        m, i = _worst([(traj.i0, 3 * lg ** ops.num(7.5), last.R)])
        checks.append(BoundCheck("final R at most 3 log^7.5", m >= 0, m, i))

        m, i = _worst([(r.i, lg, r.R / r.L) for r in traj.rows[: traj.i0 + 1]])
        checks.append(BoundCheck("R/L at most log", m >= 0, m, i))

        m, i = _worst([(r.i, r.L, r.N) for r in traj.rows[: traj.i0 + 1]])
        checks.append(BoundCheck("L exceeds N", m > 0, m, i))

        m, i = _worst([(r.i, r.N, r.L / 2) for r in traj.rows[: traj.i0 + 1]])
        checks.append(BoundCheck("N exceeds L/2", m > 0, m, i))
    return SizeBoundsReport(checks)


def ell_int(delta: int, log_base: str = "natural") -> int:
    """Integer path horizon ceil(2 log delta), at least 2."""
    if delta < 2:
        return 2
    return max(2, math.ceil(2 * log_delta(delta, log_base) - 1e-12))
