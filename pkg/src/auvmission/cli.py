"""Command-line entry point: plan-path, plan-mission, simulate, montecarlo, convergence."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import aco_router
from .campaign import convergence_study, monte_carlo
from .errors import AuvMissionError, ConnectivityError, InfeasibleMissionError, ScenarioValidationError
from .ffa_planner import plan_path, write_trace
from .scenario import BUNDLED, Scenario, build_world, bundled, run_scenario
from .seeding import child_rng
from .spline_path import CostModel, write_path_samples
from .synchron import INFEASIBLE, OUT_OF_TIME, edge_environment, table2_text

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_INFEASIBLE = 2
EXIT_OUT_OF_TIME = 3


def load_scenario(ref: str, seed: int | None = None) -> Scenario:
    """A scenario from a JSON file or one of the bundled names."""
    p = Path(ref)
    s = Scenario.load(p) if p.suffix == ".json" or p.exists() else bundled(ref)
    return s if seed is None else s.with_seed(seed)


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(data) -> str:
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def cmd_plan_path(args) -> int:
    s = load_scenario(args.scenario, args.seed)
    raster_map, net = build_world(s)
    a = net.start_id if args.edge is None else args.edge[0]
    b = net.adjacency[a][0] if args.edge is None else args.edge[1]
    if not net.has_edge(a, b):
        raise ConnectivityError(f"no edge between waypoints {a} and {b}")
    cfg = s.mission_config()
    env = edge_environment(net, a, b, cfg.env, raster_map, s.seed, (0,))
    model = CostModel(env, cfg.limits, cfg.speed, cfg.gamma_grad, cfg.gamma_sigma)
    res = plan_path(net.position(a), net.position(b), env, cfg.limits, s.ffa,
                    rng=child_rng(s.seed, "ffa", 0), speed=cfg.speed, model=model)
    best = res.best
    summary = {
        "scenario": s.hash, "seed": s.seed, "edge": [a, b], "T_phi": best.time, "length": best.length,
        "phi_Cost": best.cost, "violations": [float(x) for x in best.violations], "collisions": best.collisions,
        "iterations": res.iterations_run, "evaluations": res.evaluations,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_path_samples(out / "path.csv", best)
        write_trace(out / "trace.csv", res.trace)
        (out / "path.json").write_text(_dump(summary))
    if args.format == "machine":
        _emit(_dump(summary))
    else:
        _emit("E_G\tT_phi\tlength\tphi_Cost\tphiV\tcollisions\n"
              f"{a}-{b}\t{best.time:.1f}\t{best.length:.1f}\t{best.cost:.3f}\t"
              f"{best.violation_total:.4f}\t{best.collisions}")
    return EXIT_OK


def cmd_plan_mission(args) -> int:
    s = load_scenario(args.scenario, args.seed)
    _, net = build_world(s)
    plan = aco_router.plan_mission(net, s.t_total, s.aco, child_rng(s.seed, "aco", 0))
    data = {"scenario": s.hash, "seed": s.seed, "plan": plan.to_dict()}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "plan.json").write_text(_dump(data))
        with open(out / "trace.tsv", "w") as fh:
            fh.write(f"# scenario {s.hash} seed {s.seed}\niteration\tbest_cost\tinvalid\n")
            for i, (c, v) in enumerate(plan.trace, 1):
                fh.write(f"{i}\t{c!r}\t{v}\n")
    if args.format == "machine":
        _emit(_dump(data))
    else:
        _emit("M_SEQ  N_Tsk  W_M  Valid  MC  T_CPU  T_M  T_Total\n" + plan.table2_row())
    return EXIT_OK


def cmd_simulate(args) -> int:
    s = load_scenario(args.scenario, args.seed)
    if args.out:
        log, _ = run_scenario(s, args.out)
    else:
        log, _ = run_scenario(s)
    if args.format == "machine":
        _emit(log.dumps()[0])
    else:
        _emit(table2_text(log))
    if log.outcome == INFEASIBLE:
        return EXIT_INFEASIBLE
    if log.outcome == OUT_OF_TIME:
        return EXIT_OUT_OF_TIME
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    s = load_scenario(args.scenario, args.seed)
    report = monte_carlo(s, args.runs, args.workers)
    if args.out:
        report.save(args.out)
    _emit(_dump(report.to_dict()) if args.format == "machine" else report.table())
    return EXIT_OK


def cmd_convergence(args) -> int:
    s = load_scenario(args.scenario, args.seed)
    res = convergence_study(args.sizes, s.aco, s.seed, s.t_total)
    data = {
        "scenario": s.hash, "seed": s.seed, "sizes": res.sizes, "exponent": res.exponent,
        "edges": {str(n): res.edges[n] for n in res.sizes},
        "wall_times": {str(n): res.wall_times[n] for n in res.sizes},
        "traces": {str(n): res.traces[n] for n in res.sizes},
        "invalid": {str(n): res.invalid[n] for n in res.sizes},
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "convergence.tsv").write_text(f"# scenario {s.hash} seed {s.seed}\n" + res.table())
        (out / "convergence.json").write_text(_dump(data))
    _emit(_dump(data) if args.format == "machine" else res.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="experiment-standard",
                        help=f"scenario JSON file or bundled name ({', '.join(BUNDLED)})")
    common.add_argument("--seed", type=int, default=None, help="master seed overriding the scenario's")
    common.add_argument("--out", default=None, help="directory for exported files")
    common.add_argument("--format", choices=("table2", "machine"), default="table2", help="stdout format")

    parser = argparse.ArgumentParser(prog="auvmission", description="AUV mission routing and path planning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan-path", parents=[common], help="plan one edge with the firefly planner")
    p.add_argument("--edge", type=int, nargs=2, metavar=("A", "B"), default=None,
                   help="waypoint ids of the edge (default: first edge out of the start)")
    p.set_defaults(func=cmd_plan_path)

    p = sub.add_parser("plan-mission", parents=[common], help="route the mission with the ant colony router")
    p.set_defaults(func=cmd_plan_mission)

    p = sub.add_parser("simulate", parents=[common], help="fly the full mission with re-planning and re-routing")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", parents=[common], help="route many random networks and aggregate metrics")
    p.add_argument("--runs", type=int, default=200, help="number of runs")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("convergence", parents=[common], help="router cost traces and wall time over graph sizes")
    p.add_argument("--sizes", type=int, nargs="+", default=[20, 50, 80, 120, 150], help="node counts")
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse reports usage errors with 2, which is reserved for infeasible missions
        return EXIT_OK if exc.code in (0, None) else EXIT_OTHER
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_OTHER
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return args.func(args)
    except ScenarioValidationError as exc:
        print("invalid scenario:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  {problem}", file=sys.stderr)
        return EXIT_OTHER
    except (InfeasibleMissionError, ConnectivityError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (AuvMissionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
