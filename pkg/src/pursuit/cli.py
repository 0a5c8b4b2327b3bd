"""Command-line entry point.

Exit codes: 0 ok/solved, 2 invalid input, 3 one pursuer is not enough
(``solve --single``), 4 team failed within --max-robots, 5 search budget
exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import planner
from .division import cut_at, recursive_division
from .geometry import InvalidEnvironment, detect_critical_points, load_environment
from .grid import GridTooCoarse
from .render import render_history, render_svg  # noqa: F401  (re-exported)
from .simulator import BUDGET, SOLVED, PlanTrace, RunConfig, grid_history, replay_verify, run
from .surveillance import Surveillance

OK, INVALID, SINGLE_INSUFFICIENT, TEAM_FAILED, BUDGET_EXHAUSTED = 0, 2, 3, 4, 5


class _Invalid(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


def _positive(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--start", type=int, default=0, help="starting critical point id")
    common.add_argument("--max-robots", type=_positive, default=8)
    common.add_argument("--samples", type=_positive, default=16, help="sweep samples per move")
    common.add_argument("--grid", type=_positive, default=200, help="grid cells across the bounding-box diagonal")
    common.add_argument("--svg", metavar="DIR", help="write one SVG per round")
    common.add_argument("--trace", metavar="FILE", help="write the event trace")
    common.add_argument("--keep-rule", choices=("strict", "weak"), default="strict")
    common.add_argument("--cost-order", choices=("recontam-first", "distance-first"), default="recontam-first")
    common.add_argument("--max-nodes", type=_positive, default=None, help="surveillance-graph node budget")

    p = argparse.ArgumentParser(prog="pursuit", description="Guaranteed intruder search with a growing robot team.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("critical", parents=[common], help="list critical points").add_argument("env")
    sub.add_parser("visgraph", parents=[common], help="dump the visibility graph").add_argument("env")
    s = sub.add_parser("surveillance", parents=[common], help="enumerate the surveillance graph")
    s.add_argument("env")
    s.add_argument("--dump", action="store_true", help="print every node and transition")
    s = sub.add_parser("solve", parents=[common], help="single-pursuer plan or team run")
    s.add_argument("env")
    s.add_argument("--single", action="store_true")
    s.add_argument("--messages", metavar="FILE", help="write the message log, one line per message")
    s = sub.add_parser("cuts", parents=[common], help="cut the visibility graph at a critical point")
    s.add_argument("env")
    s.add_argument("--at", type=int, required=True)
    s.add_argument("--depth", type=_positive, default=1, help="recursive division depth")
    s = sub.add_parser("replay", parents=[common], help="re-verify a trace on the grid")
    s.add_argument("trace_file")
    s = sub.add_parser("render", parents=[common], help="render a trace as SVG snapshots")
    s.add_argument("trace_file")
    s.add_argument("--out", metavar="DIR", help="output directory (defaults to --svg)")
    return p


def _load(path):
    try:
        return load_environment(path)
    except FileNotFoundError as exc:
        raise _Invalid(f"{path}: no such file") from exc
    except InvalidEnvironment as exc:
        raise _Invalid(f"{path}: {exc}") from exc


def _model(env, args) -> Surveillance:
    m = Surveillance(env, samples=args.samples)
    if m.n and not 0 <= args.start < m.n:
        raise _Invalid(f"--start {args.start} is not a critical point id (0..{m.n - 1})")
    return m


def _limits(args) -> planner.Limits:
    return planner.Limits(max_nodes=args.max_nodes)


def cmd_critical(args) -> int:
    env = _load(args.env)
    cps = detect_critical_points(env)
    _emit([{"id": c.id, "x": c.location.x, "y": c.location.y, "ring": c.owner[0], "vertex": c.owner[1]} for c in cps])
    return OK


def cmd_visgraph(args) -> int:
    env = _load(args.env)
    m = Surveillance(env, samples=args.samples)
    _emit(m.g_v.to_json(m.cps))
    return OK


def cmd_surveillance(args) -> int:
    env = _load(args.env)
    m = _model(env, args)
    try:
        g = planner.build_surveillance_graph(m, args.start, _limits(args))
    except planner.BudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BUDGET_EXHAUSTED
    if args.dump:
        _emit(g.to_json())
    else:
        _emit({"nodes": len(g.nodes), "transitions": g.n_transitions(), "final": len(g.final_nodes)})
    return OK


def _solve_single(env, args) -> int:
    m = _model(env, args)
    try:
        g = planner.build_surveillance_graph(m, args.start, _limits(args))
    except planner.BudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BUDGET_EXHAUSTED
    traj = planner.solve_single(g, weight=m.g_v.weight if m.n else None)
    if traj is None:
        _emit({"status": "needs-team", "graph_nodes": len(g.nodes)})
        return SINGLE_INSUFFICIENT
    ids = list(traj.steps)
    cum = list(traj.cumulative) if traj.cumulative else [0.0] * len(ids)
    _emit(
        {
            "status": SOLVED,
            "robots": 1,
            "trajectory": [{"cp": c, "distance": d} for c, d in zip(ids, cum)],
            "total_distance": traj.total_distance,
        }
    )
    return OK


def _parent(path) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    return path


def _config(args) -> RunConfig:
    return RunConfig(
        start=args.start,
        max_robots=args.max_robots,
        samples=args.samples,
        grid=args.grid,
        keep_rule=args.keep_rule,
        cost_order=args.cost_order,
        max_nodes=args.max_nodes,
    )


def _write_svgs(env, trace: PlanTrace, resolution: int, outdir) -> list[str]:
    grid, history = grid_history(env, trace, resolution, check=False)
    return render_history(env, grid, history, outdir)


def cmd_solve(args) -> int:
    env = _load(args.env)
    if args.single:
        return _solve_single(env, args)
    _model(env, args)  # validates --start
    trace = run(env, _config(args))
    if args.trace:
        trace.write(_parent(args.trace))
    if args.messages:
        with open(_parent(args.messages), "w", encoding="utf-8", newline="\n") as f:
            for m in trace.messages:
                recv = "*" if m["receiver"] is None else m["receiver"]
                f.write(f'{m["round"]} {m["sender"]} {recv} {m["kind"]} {m["digest"]}\n')
    if args.svg:
        _write_svgs(env, trace, args.grid, args.svg)
    v = dict(trace.verdict)
    v["explorers_at_once"] = trace.max_simultaneous("explorer")
    _emit(v)
    if v["status"] == SOLVED:
        return OK
    return BUDGET_EXHAUSTED if v["status"] == BUDGET else TEAM_FAILED


def cmd_cuts(args) -> int:
    env = _load(args.env)
    m = Surveillance(env, samples=args.samples)
    if args.at not in m.g_v.nodes:
        raise _Invalid(f"--at {args.at} is not a critical point id")
    if args.depth == 1:
        cut = cut_at(m.g_v, args.at)
        lines = [f"{cut.kind} cut (type {cut.assistance_type}) at {args.at} removed={sorted(cut.removed)}"]
        lines += [f"  part {sorted(p)}" for p in cut.parts]
        payload = cut.to_json()
    else:
        tree = recursive_division(m.g_v, args.at, args.depth)
        lines = tree.lines()
        payload = tree.to_json()
    print("\n".join(lines))
    _emit(payload)
    return OK


def _read_trace(path) -> PlanTrace:
    try:
        return PlanTrace.read(path)
    except FileNotFoundError as exc:
        raise _Invalid(f"{path}: no such file") from exc
    except (ValueError, KeyError) as exc:
        raise _Invalid(f"{path}: {exc}") from exc


def cmd_replay(args) -> int:
    trace = _read_trace(args.trace_file)
    env = trace.environment()
    ok = replay_verify(env, trace, args.grid)
    _emit({"verified": ok, "verdict": trace.verdict["status"] if trace.verdict else None})
    return OK if ok else TEAM_FAILED


def cmd_render(args) -> int:
    trace = _read_trace(args.trace_file)
    out = args.out or args.svg
    if not out:
        raise _Invalid("render needs --out DIR (or --svg DIR)")
    files = _write_svgs(trace.environment(), trace, args.grid, out)
    _emit({"files": len(files), "dir": out})
    return OK


COMMANDS = {
    "critical": cmd_critical,
    "visgraph": cmd_visgraph,
    "surveillance": cmd_surveillance,
    "solve": cmd_solve,
    "cuts": cmd_cuts,
    "replay": cmd_replay,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return INVALID if exc.code else OK
    try:
        return COMMANDS[args.command](args)
    except (_Invalid, GridTooCoarse, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
