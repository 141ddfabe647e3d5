"""Reserve, nibble, finish: the full decomposition of a digraph into linear forests.

When the lists are too short for any valid reserve plan (a handful of
colors per arc), the reserve stage is skipped: the nibble runs on the full
lists and the leftover arcs are completed by exact search, first extending
the nibble's coloring and, failing that, from scratch.  Both steps are
budgeted and recorded in the stats.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

from .coloring import ListAssignment, PartialColoring, validate_coloring
from .digraph import Digraph
from .finisher import FinishError, build_instance, finish
from .nibble import NibbleError, StopRule, run
from .oracle import SearchBudget, exists_linear_list_coloring, verify_decomposition
from .params import TrajectoryError, compute_trajectory
from .reserve import ReserveBounds, ReserveExhaustedError, paper_p_res, retry_until_valid, split_lists
from .suspicious import PathOverflowError

log = logging.getLogger("dilinarb")


class PipelineError(RuntimeError):
    """A stage failed; ``module`` names it and ``seed`` replays it."""

    def __init__(self, module: str, seed: int, cause: BaseException):
        super().__init__(f"[{module}] seed={seed}: {type(cause).__name__}: {cause}")
        self.module = module
        self.seed = seed
        self.cause = cause


@dataclass
class PipelineConfig:
    list_size: int | None = None
    profile: str = "desk"
    reserve_profile: str = "desk"
    reserve_p: float = 0.25
    reserve_z: float = 5.0
    reserve_max_tries: int = 100
    stop: str = "uncolored:0.02"
    max_iter: int = 500
    stall: int = 25
    max_retries: int = 20
    log_base: str = "natural"
    max_resamples: int | None = None
    reserve_fallback: bool = True
    exact_nodes: int = 10**6

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class Decomposition:
    coloring: PartialColoring
    stats: dict = field(default_factory=dict)

    @property
    def n_colors(self) -> int:
        return len(set(self.coloring.color_of.values()))


def decompose(D: Digraph, lists: ListAssignment | None = None, seed: int = 0,
              config: PipelineConfig | None = None) -> Decomposition:
    cfg = config or PipelineConfig()
    if lists is None:
        if cfg.list_size is None:
            raise ValueError("give either explicit lists or a uniform list size")
        lists = ListAssignment.uniform(D, range(cfg.list_size))
    missing = [a for a in D.arcs if not lists[a]]
    if missing:
        raise ValueError(f"{len(missing)} arcs have empty lists, first {missing[0]}")
    stats: dict = {"seed": seed, "config": cfg.to_json(),
                   "digraph": {"n": D.n, "arcs": len(D.arcs), "max_degree": D.max_degree()}}
    if not D.arcs:
        stats["summary"] = {"colors": 0, "iterations": 0, "nibble_colored": 0,
                            "finisher_colored": 0, "eq_clamps": 0, "vq_clamps": 0,
                            "resamples": 0, "valid": True}
        return Decomposition(PartialColoring(), stats)
    delta = max(D.max_degree(), 2)

    traj = None
    if cfg.profile == "paper":
        try:
            traj = compute_trajectory(delta, cfg.log_base)
        except TrajectoryError as exc:
            raise PipelineError("params", seed, exc) from exc

    p_res = cfg.reserve_p if cfg.reserve_profile != "paper" else paper_p_res(delta, cfg.log_base)
    plan = None
    try:
        bounds = ReserveBounds(profile=cfg.reserve_profile, p_res=p_res, delta=delta,
                               z=cfg.reserve_z, log_base=cfg.log_base)
        plan = retry_until_valid(D, lists, p_res, bounds, seed, cfg.reserve_max_tries)
    except (ReserveExhaustedError, ValueError) as exc:
        if not (cfg.reserve_fallback and isinstance(exc, ReserveExhaustedError)):
            raise PipelineError("reserve", seed, exc) from exc
        log.warning("no valid reserve plan (%s); completing leftovers by exact search", exc)
        stats["reserve"] = {"fallback": True, "error": str(exc)}
        L0, Res = lists, None
    if plan is not None:
        L0, Res = split_lists(lists, plan)
        stats["reserve"] = {"fallback": False, "attempt": plan.attempt,
                            "bounds": bounds.to_json(),
                            "min_working_list": min(len(L0[a]) for a in D.arcs),
                            "min_reserve_list": min(len(Res[a]) for a in D.arcs)}

    rule = StopRule.parse(cfg.stop, max_iter=cfg.max_iter, stall=cfg.stall)
    try:
        result = run(D, L0, traj, seed, cfg.profile, rule, plan, cfg.max_retries,
                     log_base=cfg.log_base)
    except (NibbleError, PathOverflowError, ValueError) as exc:
        raise PipelineError("nibble", seed, exc) from exc
    gamma = result.gamma
    stats["nibble"] = {"stop_reason": result.stop_reason,
                       "iterations": [s.to_json() for s in result.stats]}

    if Res is None:
        merged, finish_stats = _complete_exactly(D, lists, gamma, seed, cfg)
        stats["finish"] = finish_stats
        resamples = 0
    else:
        try:
            inst = build_instance(D, gamma, Res)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                fin = finish(inst, seed, cfg.max_resamples)
        except FinishError as exc:
            raise PipelineError("finisher", seed, exc) from exc
        stats["finish"] = {"method": "resample", "edges": len(inst), "L": inst.L, "N": inst.N,
                           **fin.to_json()}
        resamples = fin.resamples
        merged = gamma.copy()
        for a, c in zip(inst.arcs, fin.coloring):
            merged.assign(a, c)

    report = validate_coloring(D, merged, 1, 1, True, lists)
    if not report.valid or not verify_decomposition(D, merged):
        raise PipelineError("pipeline", seed,
                            AssertionError(f"merged coloring invalid: {report.to_json()}"))
    it = result.stats
    stats["summary"] = {
        "colors": len(set(merged.color_of.values())),
        "iterations": len(it),
        "nibble_colored": len(gamma),
        "finisher_colored": len(D.arcs) - len(gamma),
        "eq_clamps": sum(s.eq_clamps for s in it),
        "vq_clamps": sum(s.vq_clamps for s in it),
        "resamples": resamples,
        "valid": True,
    }
    return Decomposition(merged, stats)


def _complete_exactly(D: Digraph, lists: ListAssignment, gamma: PartialColoring, seed: int,
                      cfg: PipelineConfig) -> tuple[PartialColoring, dict]:
    """Extend ``gamma`` to every arc by exact search; restart from nothing if it cannot be."""
    budget = SearchBudget(node_limit=cfg.exact_nodes)
    res = exists_linear_list_coloring(D, lists, budget, fixed=gamma)
    method = "exact-extension"
    if res.status != "found":
        res = exists_linear_list_coloring(D, lists, budget)
        method = "exact"
    if res.status != "found":
        cause = RuntimeError(f"exact completion {res.status} after {res.nodes} nodes")
        raise PipelineError("finisher", seed, cause)
    return PartialColoring(res.coloring), {"method": method, "edges": len(D.arcs) - len(gamma),
                                           "nodes": res.nodes}
