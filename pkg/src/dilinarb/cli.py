"""Command line: gen, decompose, oracle, params, verify.

Exit codes: 0 ok, 1 validation failure, 2 usage or input error, 3 budget or
retry exhaustion.  Every JSON artifact echoes the full configuration and is
written with sorted keys, so identical configurations give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .coloring import ListAssignment, PartialColoring, dump_json, is_compatible, validate_coloring
from .digraph import (DigraphError, GenerationError, directed_cycle, directed_path,
                      eulerian_orientation, random_digraph, random_regular_digraph,
                      random_regular_multigraph, read_digraph, serialize_digraph,
                      symmetric_complete)
from .oracle import SearchBudget, exact_la, exists_linear_list_coloring
from .params import TrajectoryError, check_size_bounds, compute_trajectory
from .pipeline import PipelineConfig, PipelineError, decompose
from .suspicious import count_bound_check

log = logging.getLogger("dilinarb")

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3
FAMILIES = ("symmetric-complete", "path", "cycle", "random-regular", "random", "eulerian")
BUILTINS = {"k3star": lambda: symmetric_complete(3), "k5star": lambda: symmetric_complete(5)}


class UsageError(Exception):
    pass


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _load_digraph(source: str, fmt: str | None = None):
    if source in BUILTINS:
        return BUILTINS[source]()
    try:
        return read_digraph(source, fmt)
    except FileNotFoundError:
        raise UsageError(f"no such file: {source}") from None


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None


def _emit(args, payload: dict, summary: str) -> None:
    if args.json:
        sys.stdout.write(dump_json(payload) + "\n")
    elif not args.quiet:
        print(summary)


def _write(path: str | None, obj) -> None:
    if path:
        Path(path).write_text(dump_json(obj) + "\n")


def cmd_gen(args) -> int:
    f, n, d = args.family, args.n, args.d
    if f == "symmetric-complete":
        D = symmetric_complete(n)
    elif f == "path":
        D = directed_path(n)
    elif f == "cycle":
        D = directed_cycle(n)
    elif f == "random-regular":
        D = random_regular_digraph(n, d, seed=args.seed)
    elif f == "random":
        D = random_digraph(n, d, args.density, seed=args.seed)
    else:
        D = eulerian_orientation(random_regular_multigraph(n, 2 * d, seed=args.seed))
    data = serialize_digraph(D, args.format)
    if args.out:
        Path(args.out).write_bytes(data)
    elif not args.json:
        sys.stdout.write(data.decode())
    _emit(args, {"config": _config(args), "n": D.n, "arcs": len(D.arcs),
                 "max_degree": D.max_degree()},
          f"generated {f}: n={D.n}, arcs={len(D.arcs)}, max degree {D.max_degree()}"
          if args.out else "")
    return EXIT_OK


def cmd_decompose(args) -> int:
    D = _load_digraph(args.input, args.format)
    lists = ListAssignment.from_json(_load_json(args.lists)) if args.lists else None
    if lists is None and args.list_size is None:
        raise UsageError("give --list-size or --lists")
    cfg = PipelineConfig(list_size=args.list_size, profile=args.profile,
                         reserve_profile=args.reserve_profile, reserve_p=args.reserve_p,
                         reserve_max_tries=args.reserve_max_tries, stop=args.stop,
                         max_iter=args.max_iter, log_base=args.log_base)
    try:
        result = decompose(D, lists, args.seed, cfg)
    except PipelineError as exc:
        log.error("%s", exc)
        _emit(args, {"config": _config(args), "error": str(exc), "module": exc.module},
              f"error: {exc}")
        return EXIT_BUDGET
    stats = dict(result.stats)
    stats["config"] = _config(args)
    _write(args.coloring_out, result.coloring.to_json(D))
    _write(args.stats_out, stats)
    s = stats["summary"]
    _emit(args, {"config": _config(args), "summary": s,
                 "coloring": result.coloring.to_json(D)["colors"]},
          f"{len(D.arcs)} arcs into {s['colors']} linear forests "
          f"({s['iterations']} rounds, {s['finisher_colored']} arcs finished, "
          f"{s['resamples']} resamples)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    D = _load_digraph(args.input, args.format)
    budget = SearchBudget(args.budget_nodes, args.time_limit)
    if args.lists:
        L = ListAssignment.from_json(_load_json(args.lists))
        res = exists_linear_list_coloring(D, L, budget)
        _emit(args, {"config": _config(args), "result": res.to_json()},
              f"list coloring: {res.status}")
        return {"found": EXIT_OK, "absent": EXIT_INVALID}.get(res.status, EXIT_BUDGET)
    res = exact_la(D, budget)
    if res.exact:
        text = str(res.value)
    else:
        text = f"budget exhausted: {res.lower} <= la <= {res.upper}"
    _emit(args, {"config": _config(args), "result": res.to_json()}, text)
    return EXIT_OK if res.exact else EXIT_BUDGET


def cmd_params(args) -> int:
    base = "base2" if args.log_base in ("2", "base2") else "natural"
    try:
        traj = compute_trajectory(args.delta, base, args.precision, args.max_iter)
    except TrajectoryError as exc:
        _emit(args, {"config": _config(args), "error": str(exc)}, f"error: {exc}")
        return EXIT_BUDGET
    report = check_size_bounds(traj)
    lines = [f"i0={traj.i0}"]
    for c in report.checks:
        lines.append(f"{'pass' if c.passed else 'FAIL'}  {c.name}  "
                     f"(worst margin {c.worst_margin:.4g} at i={c.worst_index})")
    _emit(args, {"config": _config(args), "trajectory": traj.to_json(),
                 "bounds": report.to_json()}, "\n".join(lines))
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_verify(args) -> int:
    D = _load_digraph(args.input, args.format)
    gamma = PartialColoring.from_json(_load_json(args.coloring))
    L = ListAssignment.from_json(_load_json(args.lists)) if args.lists else None
    out: dict = {"config": _config(args)}
    ok = True
    if args.check in ("coloring", "all"):
        rep = validate_coloring(D, gamma, 1, 1, True, L)
        uncolored = [a for a in D.arcs if a not in gamma]
        out["coloring"] = rep.to_json()
        out["uncolored"] = len(uncolored)
        ok &= rep.valid and (args.partial or not uncolored)
    if args.check in ("compatible", "all"):
        if L is None:
            raise UsageError("--check compatible needs --lists")
        rep = is_compatible(D, L, gamma)
        out["compatible"] = rep.to_json()
        ok &= rep.valid
    if args.check == "suspicious-bounds":
        if L is None or args.N is None:
            raise UsageError("--check suspicious-bounds needs --lists and --N")
        rep = count_bound_check(D, L, gamma, args.N, args.k_max)
        out["suspicious_bounds"] = rep.to_json()
        ok &= rep.passed
    out["valid"] = bool(ok)
    _emit(args, out, "valid" if ok else "INVALID: " + dump_json(out))
    return EXIT_OK if ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="dilinarb", parents=[common],
                                description="Directed linear forest decompositions.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a digraph")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=2, help="degree (out-degree for eulerian)")
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--format", choices=("edge-list", "json"), default="edge-list")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("decompose", parents=[common], help="run the randomized pipeline")
    d.add_argument("--input", required=True)
    d.add_argument("--format", choices=("edge-list", "json"))
    d.add_argument("--list-size", type=int)
    d.add_argument("--lists", help="ListAssignment JSON")
    d.add_argument("--profile", choices=("desk", "paper"), default="desk")
    d.add_argument("--stop", default="uncolored:0.02", help="i0 | uncolored:<frac> | list-size:<n>")
    d.add_argument("--max-iter", type=int, default=500)
    d.add_argument("--reserve-profile", choices=("desk", "fraction", "paper"), default="desk")
    d.add_argument("--reserve-p", type=float, default=0.25)
    d.add_argument("--reserve-max-tries", type=int, default=100)
    d.add_argument("--log-base", choices=("natural", "base2"), default="natural")
    d.add_argument("--coloring-out")
    d.add_argument("--stats-out")
    d.set_defaults(func=cmd_decompose)

    o = sub.add_parser("oracle", parents=[common], help="exact linear arboricity")
    o.add_argument("--input", required=True, help="file, or k3star / k5star")
    o.add_argument("--format", choices=("edge-list", "json"))
    o.add_argument("--lists")
    o.add_argument("--budget-nodes", type=int, default=10**7)
    o.add_argument("--time-limit", type=float, default=600.0)
    o.set_defaults(func=cmd_oracle)

    q = sub.add_parser("params", parents=[common], help="parameter trajectory and size bounds")
    q.add_argument("--delta", type=int, required=True)
    q.add_argument("--log-base", choices=("nat", "natural", "2", "base2"), default="natural")
    q.add_argument("--precision", choices=("double", "extended"), default="extended")
    q.add_argument("--max-iter", type=int, default=10**6)
    q.set_defaults(func=cmd_params)

    v = sub.add_parser("verify", parents=[common], help="check a coloring")
    v.add_argument("--input", required=True)
    v.add_argument("--format", choices=("edge-list", "json"))
    v.add_argument("--coloring", required=True)
    v.add_argument("--lists")
    v.add_argument("--check", choices=("coloring", "compatible", "suspicious-bounds", "all"),
                   default="coloring")
    v.add_argument("--partial", action="store_true", help="allow uncolored arcs")
    v.add_argument("--N", type=int)
    v.add_argument("--k-max", type=int, default=3)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, DigraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
