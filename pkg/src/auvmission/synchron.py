"""Mission executor: routes, flies each edge through the path planner, and re-routes on overruns.

Budget accounting is pure time.  Every edge charges its executed path time
to the budget; an edge that takes longer than the router expected triggers a
new route over the not-yet-travelled part of the network.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np

from . import aco_router
from .aco_router import AcoConfig, MissionPlan
from .errors import ConnectivityError, InfeasibleMissionError, InvalidInputError
from .ffa_planner import FfaConfig, plan_path, replan
from .ocean import Environment, ObstacleConfig, OceanConfig, make_current_field, spawn_obstacles
from .seeding import child_rng
from .spline_path import CostModel, PathCandidate
from .terrain import DEFAULT_SPEED, RasterMap, WaypointNetwork, edge_key, remove_visited
from .vehicle import KinematicLimits, VehicleState

SUCCESS = "success"
OUT_OF_TIME = "out_of_time"
INFEASIBLE = "infeasible"
DONE = "done"


@dataclass(frozen=True)
class EnvConfig:
    ocean: OceanConfig = OceanConfig()
    obstacles: ObstacleConfig = ObstacleConfig()
    obstacles_per_edge: int = 3
    drifting_fraction: float = 0.5
    safety_margin: float = 10.0
    # the per-edge ocean window extends this far beyond the edge's bounding box
    window_margin: float = 500.0
    currents: bool = True


@dataclass(frozen=True)
class MissionConfig:
    speed: float = DEFAULT_SPEED
    limits: KinematicLimits = KinematicLimits()
    aco: AcoConfig = AcoConfig()
    ffa: FfaConfig = FfaConfig()
    env: EnvConfig = EnvConfig()
    # share of the remaining budget held back when routing, with a floor in seconds
    # (never more than half the remaining budget)
    reserve: float = 0.15
    reserve_min: float = 300.0
    gamma_grad: float = 100.0
    gamma_sigma: float = 1000.0


@dataclass
class EdgeRecord:
    pp: int
    edge: tuple[int, int]
    violation: float
    cost_norm: float
    cost: float
    cpu_time: float
    t_phi: float
    t_e: float
    budget_after: float
    flag: str
    planner_calls: int = 1
    accepted_replans: int = 0
    # executed samples: t, X, Y, Z, psi, theta, u, v, w (body-frame velocities)
    states: list[list[float]] = field(default_factory=list, repr=False)

    def machine(self) -> dict:
        return {
            "PP": self.pp,
            "E_G": list(self.edge),
            "phiV": self.violation,
            "phiC": self.cost_norm,
            "phi_Cost": self.cost,
            "T_phi": self.t_phi,
            "T_e": self.t_e,
            "T_Total": self.budget_after,
            "FM_re": self.flag,
            "planner_calls": self.planner_calls,
            "accepted_replans": self.accepted_replans,
            "states": self.states,
        }


@dataclass
class PlanBlock:
    plan: MissionPlan
    records: list[EdgeRecord] = field(default_factory=list)
    budget_before: float = 0.0
    # wall time of the re-plan decision and graph bookkeeping that opened this block
    t_compute: float = 0.0


@dataclass
class MissionLog:
    blocks: list[PlanBlock]
    outcome: str
    initial_budget: float
    final_budget: float
    rep: int
    goal_id: int
    cost_total: float = 0.0
    seed: int = 0
    scenario_hash: str = ""
    message: str = ""

    @property
    def records(self) -> list[EdgeRecord]:
        return [r for b in self.blocks for r in b.records]

    def machine(self) -> dict:
        """Deterministic content: everything except wall-clock measurements."""
        return {
            "format": "auvmission.mission/1",
            "scenario": self.scenario_hash,
            "seed": self.seed,
            "outcome": self.outcome,
            "message": self.message,
            "initial_budget": self.initial_budget,
            "final_budget": self.final_budget,
            "rep": self.rep,
            "goal_id": self.goal_id,
            "blocks": [
                {
                    "plan": b.plan.to_dict(),
                    "budget_before": b.budget_before,
                    "records": [r.machine() for r in b.records],
                }
                for b in self.blocks
            ],
        }

    def timing(self) -> dict:
        return {
            "format": "auvmission.timing/1",
            "scenario": self.scenario_hash,
            "seed": self.seed,
            "Cost_Total": self.cost_total,
            "blocks": [
                {
                    "M_CPU": b.plan.cpu_time,
                    "T_compute": b.t_compute,
                    "T_CPU": [r.cpu_time for r in b.records],
                }
                for b in self.blocks
            ],
        }

    def dumps(self) -> tuple[str, str]:
        return (
            json.dumps(self.machine(), indent=1, sort_keys=True) + "\n",
            json.dumps(self.timing(), indent=1, sort_keys=True) + "\n",
        )

    def save(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        mission, timing = self.dumps()
        (out / "mission.json").write_text(mission)
        (out / "timing.json").write_text(timing)
        return out / "mission.json", out / "timing.json"

    @classmethod
    def from_dicts(cls, mission: dict, timing: dict | None = None) -> "MissionLog":
        timing = timing or {"blocks": [{} for _ in mission["blocks"]], "Cost_Total": 0.0}
        blocks = []
        for bm, bt in zip(mission["blocks"], timing["blocks"]):
            p = bm["plan"]
            plan = MissionPlan(
                p["M_SEQ"], p["N_Tsk"], p["W_M"], p["T_M"], p["T_e"], p["M_Cost"], bool(p["Valid"]),
                bt.get("M_CPU", 0.0), p["T_Total"],
            )
            cpus = bt.get("T_CPU", [0.0] * len(bm["records"]))
            records = [
                EdgeRecord(
                    r["PP"], tuple(r["E_G"]), r["phiV"], r["phiC"], r["phi_Cost"], cpu, r["T_phi"],
                    r["T_e"], r["T_Total"], r["FM_re"], r["planner_calls"], r["accepted_replans"], r["states"],
                )
                for r, cpu in zip(bm["records"], cpus)
            ]
            blocks.append(PlanBlock(plan, records, bm["budget_before"], bt.get("T_compute", 0.0)))
        return cls(
            blocks, mission["outcome"], mission["initial_budget"], mission["final_budget"], mission["rep"],
            mission["goal_id"], timing.get("Cost_Total", 0.0), mission["seed"], mission["scenario"],
            mission.get("message", ""),
        )

    @classmethod
    def load(cls, out_dir) -> "MissionLog":
        out = Path(out_dir)
        mission = json.loads((out / "mission.json").read_text())
        timing_path = out / "timing.json"
        timing = json.loads(timing_path.read_text()) if timing_path.exists() else None
        return cls.from_dicts(mission, timing)


def expected_edge_time(plan: MissionPlan, edge) -> float:
    a, b = edge
    for (x, y), t in zip(plan.edges, plan.edge_times):
        if edge_key(x, y) == edge_key(a, b):
            return t
    raise InvalidInputError(f"edge {edge} is not part of the plan")


def decide_replan(t_phi: float, t_e: float) -> int:
    if t_phi < 0 or t_e < 0:
        raise InvalidInputError("times must be non-negative")
    return 1 if t_phi > t_e else 0


def update_budget(t_total: float, t_phi: float) -> float:
    if t_phi < 0:
        raise InvalidInputError("executed time must be non-negative")
    return t_total - t_phi


def total_cost(log: MissionLog) -> float:
    """First plan's M_Cost times the mean executed path cost, plus planner and re-plan charges."""
    records = log.records
    if not log.blocks:
        return 0.0
    first = log.blocks[0].plan.cost
    mean_cost = float(np.mean([r.cost for r in records])) if records else 0.0
    cpu = float(sum(r.cpu_time for r in records))
    replans = float(sum(b.t_compute * b.plan.cpu_time for b in log.blocks[1:]))
    return first * mean_cost + cpu + replans


def edge_environment(network: WaypointNetwork, a: int, b: int, cfg: EnvConfig, raster_map, seed: int,
                     key: tuple[int, ...]) -> Environment:
    """Fresh local currents and obstacles around one edge."""
    pa, pb = network.position(a), network.position(b)
    m = cfg.window_margin
    xmin, xmax = min(pa[0], pb[0]) - m, max(pa[0], pb[0]) + m
    ymin, ymax = min(pa[1], pb[1]) - m, max(pa[1], pb[1]) + m
    current = None
    if cfg.currents:
        current = make_current_field((xmin, xmax, ymin, ymax), cfg.ocean, child_rng(seed, "ocean", *key))
    obstacles = spawn_obstacles(
        (xmin, ymin, 0.0),
        (xmax, ymax, cfg.ocean.max_depth),
        cfg.obstacles_per_edge,
        child_rng(seed, "obstacles", *key),
        cfg.drifting_fraction,
        cfg.obstacles,
        exclude=(pa, pb),
        clearance=cfg.safety_margin + 50.0,
    )
    return Environment(raster_map, current, tuple(obstacles), cfg.safety_margin)


def _state_rows(cand: PathCandidate, t0: float, upto: int) -> tuple[list[list[float]], float]:
    """Executed rows for samples 0..upto of ``cand`` starting at clock ``t0``."""
    clock = t0 + np.concatenate([[0.0], np.cumsum(cand.seg_times[:upto])])
    rows = []
    for k in range(upto + 1):
        x, y, z, psi, theta = cand.samples[k, :5]
        u, v, w = cand.body[k]
        rows.append([float(clock[k]), float(x), float(y), float(z), float(psi), float(theta),
                     float(u), float(v), float(w)])
    return rows, float(clock[-1])


def fly_edge(network: WaypointNetwork, a: int, b: int, t_e: float, cfg: MissionConfig, raster_map,
             seed: int, key: tuple[int, ...]) -> dict:
    """Plan and execute one edge with ``update_rate`` environment ticks.

    The vehicle follows its current path for T_e / U seconds, the
    environment evolves, and the path is re-planned from where the vehicle
    stands (warm-started from the remainder).
    """
    env_cfg = cfg.env
    env = edge_environment(network, a, b, env_cfg, raster_map, seed, key)
    goal = network.position(b)
    ffa_rng = child_rng(seed, "ffa", *key)
    evo_rng = child_rng(seed, "evolve", *key)
    ticks = int(round(env.current.update_rate)) if env.current is not None else int(round(env_cfg.ocean.update_rate))
    ticks = max(ticks, 1)
    dt = t_e / ticks

    def model(e):
        return CostModel(e, cfg.limits, cfg.speed, cfg.gamma_grad, cfg.gamma_sigma)

    plan = plan_path(network.position(a), goal, env, cfg.limits, cfg.ffa, rng=ffa_rng, speed=cfg.speed,
                     model=model(env))
    path = plan.best
    cpu = path.cpu_time
    calls, accepted = 1, 0
    executed, viol, hits = 0.0, 0.0, 0
    rows: list[list[float]] = []
    clock = 0.0
    tick = 1
    while True:
        cum = np.cumsum(path.seg_times)
        last = tick >= ticks or len(cum) == 0 or cum[-1] <= dt
        upto = len(path.seg_times) if last else int(np.searchsorted(cum, dt)) + 1
        upto = min(upto, len(path.seg_times))
        portion = path.positions[: upto + 1]
        done = model(env).candidate_from_positions(portion, path.polygon) if len(portion) >= 2 else None
        if done is not None:
            executed += done.time
            viol += float(np.sum(done.violations))
            hits += done.collisions
            new_rows, clock = _state_rows(done, clock, upto)
            rows.extend(new_rows if not rows else new_rows[1:])
        if last or upto >= len(path.seg_times):
            break
        here = path.positions[upto]
        env = env.evolve(evo_rng, dt, env_cfg.obstacles)
        res = replan(path, VehicleState(*here), goal, env, cfg.limits, cfg.ffa, True, ffa_rng, cfg.speed)
        cpu += res.cpu_time
        calls += 1
        accepted += int(res.accepted_new)
        path = res.path
        tick += 1
    cost = executed + cfg.gamma_grad * viol + cfg.gamma_sigma * hits
    return {
        "t_phi": executed,
        "violation": viol + hits,
        "cost": cost,
        "cpu": cpu,
        "calls": calls,
        "accepted": accepted,
        "states": rows,
    }


def _route(network: WaypointNetwork, budget: float, cfg: MissionConfig, seed: int, block_no: int) -> MissionPlan:
    """Route on the remaining budget minus a held-back reserve."""
    reserve = max(cfg.reserve * budget, min(cfg.reserve_min, 0.5 * budget))
    return aco_router.plan_mission(network, budget - reserve, cfg.aco, child_rng(seed, "aco", block_no))


def run_mission(
    network: WaypointNetwork,
    t_total: float,
    cfg: MissionConfig | None = None,
    seed: int = 0,
    raster_map: RasterMap | None = None,
    scenario_hash: str = "",
) -> MissionLog:
    """Route, fly and re-route until the goal is reached or the budget is gone.

    An overrun edge (executed time above the router's estimate) removes the
    travelled edges from the network and routes again from the vehicle's
    waypoint.  If no new route fits, the vehicle keeps flying the old one.
    """
    if not t_total > 0:
        raise InvalidInputError("time budget must be positive")
    cfg = cfg or MissionConfig()
    budget = float(t_total)
    blocks: list[PlanBlock] = []
    rep = 0
    pp = 0
    outcome = SUCCESS
    notes: list[str] = []
    current = network
    try:
        plan = _route(current, budget, cfg, seed, 0)
    except InfeasibleMissionError as exc:
        plan = None
        outcome = INFEASIBLE
        notes.append(str(exc))
    queue = [] if plan is None else list(zip(plan.edges, plan.edge_times))
    if plan is not None:
        blocks.append(PlanBlock(plan, [], budget, 0.0))
    traversed: list[tuple[int, int]] = []
    while queue:
        (a, b), t_e = queue.pop(0)
        pp += 1
        flown = fly_edge(current, a, b, t_e, cfg, raster_map, seed, (pp,))
        budget = update_budget(budget, flown["t_phi"])
        traversed.append((a, b))
        t0 = time.perf_counter()
        flag = decide_replan(flown["t_phi"], t_e)
        blocks[-1].records.append(EdgeRecord(
            pp, (a, b), flown["violation"], flown["cost"] / t_e if t_e > 0 else 0.0, flown["cost"],
            flown["cpu"], flown["t_phi"], t_e, budget, DONE if not queue else str(flag),
            flown["calls"], flown["accepted"], flown["states"],
        ))
        if budget < 0:
            outcome = OUT_OF_TIME
            notes.append(f"budget exhausted after edge {a}-{b}")
            break
        if not queue or flag == 0:
            continue
        rep += 1
        try:
            current = remove_visited(current, traversed, b)
        except ConnectivityError as exc:
            outcome = INFEASIBLE
            notes.append(str(exc))
            break
        traversed = []
        t_compute = time.perf_counter() - t0
        try:
            plan = _route(current, budget, cfg, seed, rep)
        except InfeasibleMissionError:
            notes.append(f"no new route fits after edge {a}-{b}; keeping the previous one")
            continue
        blocks.append(PlanBlock(plan, [], budget, t_compute))
        queue = list(zip(plan.edges, plan.edge_times))
    log = MissionLog(blocks, outcome, float(t_total), budget, rep, network.goal_id, 0.0, seed, scenario_hash,
                     "; ".join(notes))
    log.cost_total = total_cost(log)
    return log


def replay_budget(log: MissionLog) -> float:
    """Final budget recomputed from the executed times alone."""
    return reduce(update_budget, (r.t_phi for r in log.records), log.initial_budget)


# -- exports ---------------------------------------------------------------

def table2_text(log: MissionLog) -> str:
    lines = [f"# scenario {log.scenario_hash or '-'} seed {log.seed}"]
    for n, b in enumerate(log.blocks, 1):
        p = b.plan
        lines.append(f"## plan {n}")
        lines.append("M_SEQ\tN_Tsk\tW_M\tValid\tMC\tT_CPU\tT_M\tT_Total")
        lines.append(
            f"{'-'.join(map(str, p.sequence))}\t{p.n_tasks}\t{p.weight:g}\t{int(p.valid)}\t"
            f"{p.mc:.4f}\t{p.cpu_time:.2f}\t{p.time:.0f}\t{b.budget_before:.0f}"
        )
        lines.append("PP\tE_G\tphiV\tphiC\tT_CPU\tT_phi\tT_e\tT_Total\tFM_re")
        for r in b.records:
            lines.append(
                f"{r.pp}\t{r.edge[0]}-{r.edge[1]}\t{r.violation:.4f}\t{r.cost_norm:.3f}\t{r.cpu_time:.2f}\t"
                f"{r.t_phi:.1f}\t{r.t_e:.1f}\t{r.budget_after:.1f}\t{r.flag}"
            )
    lines.append(f"# outcome {log.outcome} rep {log.rep} final {log.final_budget:.1f} Cost_Total {log.cost_total:.3f}")
    return "\n".join(lines) + "\n"


SUMMARY_COLUMNS = ("scenario", "seed", "outcome", "rep", "final_budget", "Cost_Total")


def summary_row(log: MissionLog) -> str:
    return "\t".join([
        log.scenario_hash or "-", str(log.seed), log.outcome, str(log.rep),
        repr(float(log.final_budget)), repr(float(log.cost_total)),
    ])


def write_states(path, log: MissionLog) -> None:
    with open(path, "w") as fh:
        fh.write(f"# scenario {log.scenario_hash or '-'} seed {log.seed}\n")
        fh.write("edge,t,X,Y,Z,psi,theta,u,v,w\n")
        offset = 0.0
        for r in log.records:
            for row in r.states:
                vals = [row[0] + offset] + row[1:]
                fh.write(f"{r.edge[0]}-{r.edge[1]}," + ",".join(repr(float(x)) for x in vals) + "\n")
            if r.states:
                offset += r.states[-1][0]
