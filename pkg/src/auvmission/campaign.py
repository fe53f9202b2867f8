"""Monte Carlo routing campaigns and the router scaling study."""

from __future__ import annotations

import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import aco_router
from .errors import ConnectivityError, InfeasibleMissionError, InvalidInputError
from .scenario import Scenario, build_map, build_network_for
from .seeding import child_rng, child_seed
from .terrain import Connectivity, RasterMap, build_network, generate_waypoints, random_tasks, with_tasks

METRICS = ("W_M", "N_Tsk", "distance", "T_M", "M_CPU", "M_Cost")


def _run_seed(seed: int, i: int) -> int:
    return int(child_seed(seed, "run", i).generate_state(1)[0])


def _one_run(args) -> dict:
    scenario, i = args
    run_seed = _run_seed(scenario.seed, i)
    s = scenario.with_seed(run_seed)
    lo, hi = s.network.node_range or (s.network.nodes, s.network.nodes)
    nodes = int(child_rng(scenario.seed, "nodes", i).integers(lo, hi + 1))
    row = {"run": i, "seed": run_seed, "nodes": nodes, "outcome": "success"}
    try:
        raster_map = build_map(s)
        net = build_network_for(s, raster_map, nodes)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            plan = aco_router.plan_mission(net, s.t_total, s.aco, child_rng(run_seed, "aco", 0))
    except (InfeasibleMissionError, ConnectivityError) as exc:
        row.update({m: float("nan") for m in METRICS})
        row.update(outcome="infeasible", message=str(exc))
        return row
    distance = float(sum(net.edge(a, b).d for a, b in plan.edges))
    row.update({
        "W_M": plan.weight,
        "N_Tsk": plan.n_tasks,
        "distance": distance,
        "T_M": plan.time,
        "M_CPU": plan.cpu_time,
        "M_Cost": plan.cost,
        "edges": len(net.edges),
    })
    return row


def summarize(values) -> dict:
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if len(v) == 0:
        return {k: float("nan") for k in ("min", "q1", "median", "q3", "max", "mean")}
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return {"min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4], "mean": float(v.mean())}


@dataclass
class MonteCarloReport:
    scenario_hash: str
    seed: int
    rows: list[dict]
    aggregate: dict

    def table(self) -> str:
        head = ["run", "seed", "nodes", "outcome", *METRICS]
        lines = [f"# scenario {self.scenario_hash} seed {self.seed}", "\t".join(head)]
        for r in self.rows:
            lines.append("\t".join(
                str(r[h]) if h in ("run", "seed", "nodes", "outcome") else f"{r[h]:.6g}" for h in head
            ))
        lines.append("# aggregate")
        lines.append("metric\tmin\tq1\tmedian\tq3\tmax\tmean")
        for m in METRICS:
            a = self.aggregate[m]
            lines.append("\t".join([m] + [f"{a[k]:.6g}" for k in ("min", "q1", "median", "q3", "max", "mean")]))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"scenario": self.scenario_hash, "seed": self.seed, "runs": self.rows, "aggregate": self.aggregate}

    def save(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "montecarlo.tsv").write_text(self.table())
        (out / "montecarlo.json").write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        return {"table": out / "montecarlo.tsv", "json": out / "montecarlo.json"}


def monte_carlo(scenario: Scenario, runs: int, workers: int = 1, node_range=None, seed: int | None = None) -> MonteCarloReport:
    """Route ``runs`` fresh random networks and aggregate the routing metrics.

    Each run draws its node count from ``node_range`` (or the scenario's)
    and owns a child seed, so results do not depend on ``workers``.
    """
    if runs < 1:
        raise InvalidInputError("need at least one run")
    if seed is not None:
        scenario = scenario.with_seed(seed)
    if node_range is not None:
        scenario = replace(scenario, network=replace(scenario.network, node_range=tuple(node_range)))
    jobs = [(scenario, i) for i in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_run, jobs))
    else:
        rows = [_one_run(j) for j in jobs]
    aggregate = {m: summarize([r[m] for r in rows]) for m in METRICS}
    aggregate["infeasible_runs"] = sum(r["outcome"] != "success" for r in rows)
    return MonteCarloReport(scenario.hash, scenario.seed, rows, aggregate)


@dataclass
class ConvergenceResult:
    sizes: list[int]
    traces: dict[int, list[float]]
    invalid: dict[int, list[int]]
    wall_times: dict[int, float]
    edges: dict[int, int]
    exponent: float

    def table(self) -> str:
        lines = ["nodes\tedges\twall_s\tfinal_cost"]
        for n in self.sizes:
            lines.append(f"{n}\t{self.edges[n]}\t{self.wall_times[n]:.4f}\t{self.traces[n][-1]:.6g}")
        lines.append(f"# log-log exponent {self.exponent:.3f}")
        return "\n".join(lines) + "\n"


def fit_exponent(sizes, times) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float)), 1)
    return float(slope)


def scaling_network(n: int, seed: int, k: int = 12, tasks: int = 10, size: float = 10000.0):
    raster_map = RasterMap.all_water(1, 1, size)
    wps = generate_waypoints(raster_map, n, child_rng(seed, "terrain", n), xy_range=(0.0, size))
    net = build_network(wps, None, connectivity=Connectivity(k=k, avoid_coast=False))
    return with_tasks(net, random_tasks(net, tasks, rng=child_rng(seed, "tasks", n)))


def convergence_study(sizes=(20, 50, 80, 120, 150), cfg: aco_router.AcoConfig | None = None, seed: int = 0,
                      t_total: float = 10800.0, k: int = 12) -> ConvergenceResult:
    """Router cost traces and wall time over a sweep of network sizes."""
    sizes = list(sizes)
    if len(sizes) < 2:
        raise InvalidInputError("need at least two graph sizes")
    cfg = cfg or aco_router.AcoConfig()
    traces, invalid, walls, edges = {}, {}, {}, {}
    for n in sizes:
        net = scaling_network(n, seed, k)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            plan = aco_router.plan_mission(net, t_total, cfg, child_rng(seed, "aco", n))
        walls[n] = time.perf_counter() - t0
        traces[n] = [c for c, _ in plan.trace]
        invalid[n] = [v for _, v in plan.trace]
        edges[n] = len(net.edges)
    return ConvergenceResult(sizes, traces, invalid, walls, edges, fit_exponent(sizes, [walls[n] for n in sizes]))
