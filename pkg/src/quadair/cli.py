"""Command-line entry point.

Subcommands: plan (build a graph and search it), simulate (execute a plan in
the simulator), trot (in-place gait experiment), compare (uniform vs roadmap
discretization report), validate-log (structural checks on a log file).
Exit code 0 only on full success.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .environment import load_demo_environment, load_environment
from .gait import GaitSchedule
from .mission import (
    MissionAbort,
    compare_discretizations,
    follow_plan,
    limit_cycle_metric,
    report_to_csv_lines,
    report_to_dict,
    trot_in_place,
)
from .missionlog import load_log, save_log, validate_log
from .planner import (
    Mode,
    astar,
    dijkstra,
    discretize_mmprm,
    discretize_uniform,
    nearest_node,
    save_graph,
    save_plan,
)


def _parse_point(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected x,y,z")
    return tuple(parts)


def _load_env(args):
    if args.env == "demo:wall":
        return load_demo_environment("wall")
    return load_environment(args.env)


def cmd_plan(args) -> int:
    env = _load_env(args)
    cfg = load_config(args.robot)
    if args.method == "grid":
        graph = discretize_uniform(env, args.spacing, cfg.cost,
                                   stand_height=cfg.robot.stand_height)
    else:
        graph = discretize_mmprm(env, args.samples, args.radius, args.seed, cfg.cost,
                                 stand_height=cfg.robot.stand_height)
    if args.graph_out:
        save_graph(graph, args.graph_out)
    mode = Mode(args.start_mode)
    s = nearest_node(graph, args.start, mode)
    g = nearest_node(graph, args.goal, mode)
    plan = astar(graph, s, g, cfg.cost) if args.search == "astar" else dijkstra(graph, s, g)
    if plan is None:
        print(f"no path from {args.start} to {args.goal}", file=sys.stderr)
        return 2
    plan.metadata.update({"method": args.method, "seed": args.seed,
                          "search": args.search})
    save_plan(plan, args.out)
    print(f"plan: {len(plan.node_ids)} waypoints, {plan.num_transitions} transitions, "
          f"cost {plan.total_cost:.1f} J -> {args.out}")
    return 0


def cmd_simulate(args) -> int:
    from .planner import load_plan

    env = _load_env(args)
    cfg = load_config(args.robot)
    if args.dt:
        cfg.mission.dt = args.dt
    plan = load_plan(args.plan)
    try:
        log = follow_plan(plan, env, cfg)
    except MissionAbort as abort:
        save_log(abort.log, args.out)
        print(f"mission aborted: {abort} (partial log -> {args.out})", file=sys.stderr)
        return 3
    save_log(log, args.out)
    print(f"mission complete: final error {log.metadata['final_error']:.3f} m, "
          f"max altitude {log.metadata['max_z']:.2f} m, {len(log)} steps -> {args.out}")
    return 0


def cmd_trot(args) -> int:
    cfg = load_config(args.robot)
    if args.dt:
        cfg.mission.dt = args.dt
    sched = GaitSchedule.trot(freq=args.freq) if args.duty == 0.5 else \
        GaitSchedule(freq=args.freq, duty=args.duty,
                     phase_offset=(0.0, 0.5, 0.25, 0.75))
    log = trot_in_place(args.duration, sched, cfg)
    save_log(log, args.out)
    fell = log.metadata.get("fall", False)
    msg = f"trot {args.duration}s at {args.freq} Hz duty {args.duty}: "
    msg += "FELL" if fell else "stable"
    if not fell and args.freq > 0:
        try:
            res = limit_cycle_metric(log, sched, cfg.mission.poincare_weights)
            msg += (f", limit cycle converged at K={res.k_converged}"
                    if res.converged else ", no limit-cycle convergence")
        except ValueError:
            pass
    print(msg + f" -> {args.out}")
    return 1 if fell else 0


def cmd_compare(args) -> int:
    env = _load_env(args)
    cfg = load_config(args.robot)
    report = compare_discretizations(
        env, cfg, args.start, args.goal,
        spacings=args.spacings, seeds=args.seeds,
        prm_samples=args.samples, prm_radius=args.radius)
    Path(args.out).write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    if args.csv:
        Path(args.csv).write_text("\n".join(report_to_csv_lines(report)) + "\n")
    for method, s in report.summary.items():
        cost = "no path" if s["cost_min"] is None else f"best cost {s['cost_min']:.1f} J"
        print(f"{method}: {s['solved']}/{s['runs']} solved, {cost}")
    print(f"report -> {args.out}")
    return 0


def cmd_validate_log(args) -> int:
    log = load_log(args.log)
    problems = validate_log(log, mu=args.mu)
    if problems:
        for p in problems:
            print(f"FAIL {p}")
        return 1
    print(f"OK {args.log}: {len(log)} rows, phases "
          f"{'->'.join(sorted(set(log.phases)))}")
    return 0


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quadair",
                                 description="Multi-modal quadruped navigation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="build a modal graph and search it")
    p.add_argument("--env", required=True, help="environment JSON, or demo:wall")
    p.add_argument("--robot", default=None, help="robot config JSON (defaults built in)")
    p.add_argument("--start", type=_parse_point, required=True)
    p.add_argument("--goal", type=_parse_point, required=True)
    p.add_argument("--method", choices=("grid", "prm"), default="grid")
    p.add_argument("--search", choices=("dijkstra", "astar"), default="astar")
    p.add_argument("--spacing", type=float, default=0.5, help="grid spacing, m")
    p.add_argument("--samples", type=int, default=400, help="roadmap samples")
    p.add_argument("--radius", type=float, default=1.2, help="roadmap connect radius, m")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start-mode", choices=tuple(m.value for m in Mode), default="legged")
    p.add_argument("--graph-out", default=None, help="also write the graph JSON")
    p.add_argument("--out", required=True, help="plan JSON output")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="execute a plan in the simulator")
    p.add_argument("--env", required=True)
    p.add_argument("--robot", default=None)
    p.add_argument("--plan", required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--out", required=True, help="mission log CSV output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trot", help="in-place trot experiment")
    p.add_argument("--robot", default=None)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--freq", type=float, default=2.0)
    p.add_argument("--duty", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trot)

    p = sub.add_parser("compare", help="uniform grid vs roadmap report")
    p.add_argument("--env", required=True)
    p.add_argument("--robot", default=None)
    p.add_argument("--start", type=_parse_point, required=True)
    p.add_argument("--goal", type=_parse_point, required=True)
    p.add_argument("--spacings", type=_csv_floats, default=[1.0, 0.5])
    p.add_argument("--seeds", type=_csv_ints, default=[0, 1, 2, 3, 4])
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--radius", type=float, default=1.2)
    p.add_argument("--csv", default=None, help="also write entries as CSV")
    p.add_argument("--out", required=True, help="report JSON output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate-log", help="structural checks on a log file")
    p.add_argument("--log", required=True)
    p.add_argument("--mu", type=float, default=None,
                   help="also check the physical friction pyramid at this mu")
    p.set_defaults(func=cmd_validate_log)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
