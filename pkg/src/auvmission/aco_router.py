"""Ant-colony mission router over a task-weighted waypoint network.

Ants build edge-simple start-to-goal walks; a walk may only take an edge if
the goal stays reachable within the remaining budget (shortest-time
lookahead).  The colony minimises

    M_Cost = |sum of edge costs - T_Total| + sum of 1 / w

so it prefers walks that spend the budget on task-bearing edges.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import InfeasibleMissionError, InvalidInputError, InvalidSequenceError
from .seeding import as_rng
from .terrain import WaypointNetwork, edge_key

INVALID_PENALTY = 1e6


@dataclass(frozen=True)
class AcoConfig:
    population: int = 70
    iterations: int = 100
    tau0: float = 1.5
    alpha: float = 1.5
    beta: float = 0.9
    decay: float = 0.99
    evaporation: float = 1.8
    deposit: float = 1.0
    # deposit divisor; None uses the best M_Cost so far
    omega: float | None = None
    tau_min: float = 1e-4
    max_backtracks: int = 200
    seed: int | None = None

    def __post_init__(self):
        if self.population < 2:
            raise InvalidInputError("population must be at least 2")
        if not 0 < self.evaporation < 2:
            raise InvalidInputError("evaporation rate must lie in (0, 2)")
        if not self.tau0 > 0 or not self.tau_min > 0:
            raise InvalidInputError("pheromone levels must be positive")
        if self.iterations < 1:
            raise InvalidInputError("need at least one iteration")

    @property
    def effective_evaporation(self) -> float:
        return min(self.evaporation, 0.99)


@dataclass
class Ant:
    sequence: list[int]
    priority: np.ndarray | None = None
    tour_weight: float = 0.0
    tour_time: float = 0.0
    cost: float = np.inf
    valid: bool = False


@dataclass
class MissionPlan:
    sequence: list[int]
    n_tasks: int
    weight: float
    time: float
    edge_times: list[float]
    cost: float
    valid: bool
    cpu_time: float
    t_total: float
    # per iteration: (best-so-far M_Cost, number of budget-violating ants)
    trace: list[tuple[float, int]] = field(default_factory=list)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.sequence[:-1], self.sequence[1:]))

    @property
    def mc(self) -> float:
        return self.cost / self.t_total

    def to_dict(self) -> dict:
        return {
            "M_SEQ": list(self.sequence),
            "N_Tsk": self.n_tasks,
            "W_M": self.weight,
            "T_M": self.time,
            "T_e": list(self.edge_times),
            "M_Cost": self.cost,
            "Valid": int(self.valid),
            "T_Total": self.t_total,
        }

    def table2_row(self) -> str:
        seq = "-".join(str(s) for s in self.sequence)
        return (
            f"{seq}  {self.n_tasks}  {self.weight:g}  {int(self.valid)}  {self.mc:.4f}  "
            f"{self.cpu_time:.2f}  {self.time:.0f}  {self.t_total:.0f}"
        )


def mission_time(sequence: Sequence[int], network: WaypointNetwork) -> tuple[float, list[float]]:
    times = []
    for a, b in zip(sequence[:-1], sequence[1:]):
        if not network.has_edge(a, b):
            raise InvalidSequenceError(f"waypoints {a} and {b} are not adjacent")
        times.append(network.edge(a, b).t)
    return float(sum(times)), times


def mission_cost(edge_costs: Sequence[float], weights: Sequence[float], t_total: float,
                 penalty: float = INVALID_PENALTY) -> tuple[float, bool]:
    """(M_Cost, valid); a plan is valid only when its time is strictly under the budget."""
    total = float(np.sum(edge_costs))
    cost = abs(total - t_total) + float(np.sum(1.0 / np.asarray(weights, dtype=float)))
    valid = total < t_total
    return (cost if valid else cost + penalty), valid


def transition_probability(tau_row, phi_row, alpha: float, beta: float, feasible) -> np.ndarray:
    """Pheromone-times-heuristic weights normalised over the feasible set."""
    tau = np.asarray(tau_row, dtype=float)
    phi = np.asarray(phi_row, dtype=float)
    mask = np.zeros(len(tau), dtype=bool)
    mask[np.asarray(list(feasible), dtype=int)] = True
    if not mask.any():
        raise InfeasibleMissionError("dead end: no feasible neighbour")
    raw = np.zeros(len(tau))
    raw[mask] = tau[mask] ** alpha * phi[mask] ** beta
    return raw / raw.sum()


class _Graph:
    """Index-based view of a network for fast tour construction."""

    def __init__(self, network: WaypointNetwork):
        self.ids = list(network.waypoints)
        self.index = {wid: k for k, wid in enumerate(self.ids)}
        n = len(self.ids)
        self.n = n
        self.t = np.full((n, n), np.inf)
        self.w = np.ones((n, n))
        self.edge_id = -np.ones((n, n), dtype=int)
        for k, ((a, b), e) in enumerate(network.edges.items()):
            i, j = self.index[a], self.index[b]
            self.t[i, j] = self.t[j, i] = e.t
            self.w[i, j] = self.w[j, i] = e.w
            self.edge_id[i, j] = self.edge_id[j, i] = k
        self.n_edges = len(network.edges)
        self.nbrs = [np.array([self.index[m] for m in network.adjacency[wid]], dtype=int) for wid in self.ids]
        self.phi = np.where(np.isfinite(self.t), self.w / np.where(np.isfinite(self.t), self.t, 1.0), 0.0)
        self.start = self.index[network.start_id]
        self.goal = self.index[network.goal_id]
        rows, cols = np.nonzero(np.isfinite(self.t))
        graph = csr_matrix((self.t[rows, cols], (rows, cols)), shape=(n, n))
        self.h = dijkstra(graph, directed=False, indices=self.goal)
        self.dijkstra_pred = dijkstra(graph, directed=False, indices=self.goal, return_predecessors=True)[1]

    def shortest_path(self) -> list[int]:
        if not np.isfinite(self.h[self.start]):
            raise InfeasibleMissionError("goal is unreachable from start")
        path = [self.start]
        while path[-1] != self.goal:
            path.append(int(self.dijkstra_pred[path[-1]]))
        return path


def _score(graph: _Graph, seq: list[int], t_total: float) -> tuple[float, float, float, bool]:
    a = np.asarray(seq[:-1])
    b = np.asarray(seq[1:])
    times = graph.t[a, b]
    weights = graph.w[a, b]
    cost, valid = mission_cost(times, weights, t_total)
    return cost, float(np.sum(weights[weights > 1])), float(np.sum(times)), valid


def init_ant(network: WaypointNetwork | _Graph, rng=None, max_steps: int | None = None) -> Ant:
    """Random-priority depth-first walk from start to goal over unused edges.

    The walk always moves to the highest-priority neighbour reachable over an
    unused edge and backtracks out of dead ends.
    """
    graph = network if isinstance(network, _Graph) else _Graph(network)
    rng = as_rng(rng)
    priority = rng.random(graph.n)
    if not np.isfinite(graph.h[graph.start]):
        raise InfeasibleMissionError("goal is unreachable from start")
    order = [nb[np.argsort(-priority[nb], kind="stable")] for nb in graph.nbrs]
    seq = [graph.start]
    used = np.zeros(graph.n_edges, dtype=bool)
    cursor = [0]
    max_steps = max_steps or 50 * (graph.n_edges + graph.n)
    steps = 0
    while seq[-1] != graph.goal:
        steps += 1
        if steps > max_steps or not seq:
            raise InfeasibleMissionError("random walk failed to reach the goal")
        node = seq[-1]
        nbrs = order[node]
        k = cursor[-1]
        while k < len(nbrs) and used[graph.edge_id[node, nbrs[k]]]:
            k += 1
        if k < len(nbrs):
            cursor[-1] = k + 1
            nxt = int(nbrs[k])
            used[graph.edge_id[node, nxt]] = True
            seq.append(nxt)
            cursor.append(0)
        else:
            # dead end: release the incoming edge and resume at the previous node
            cursor.pop()
            seq.pop()
            if not seq:
                raise InfeasibleMissionError("no walk reaches the goal")
            used[graph.edge_id[seq[-1], node]] = False
    return Ant([graph.ids[k] for k in seq], priority)


def _pheromone_walk(graph: _Graph, tau: np.ndarray, alpha: float, beta: float, t_total: float,
                    rng, max_backtracks: int) -> list[int] | None:
    seq = [graph.start]
    elapsed = [0.0]
    used = np.zeros(graph.n_edges, dtype=bool)
    banned: list[set[int]] = [set()]
    backtracks = 0
    h = graph.h
    while seq[-1] != graph.goal:
        node = seq[-1]
        nb = graph.nbrs[node]
        e = elapsed[-1]
        ok = (~used[graph.edge_id[node, nb]]) & (e + graph.t[node, nb] + h[nb] < t_total)
        if banned[-1]:
            ok &= ~np.isin(nb, list(banned[-1]))
        cand = nb[ok]
        if len(cand) == 0:
            backtracks += 1
            if backtracks > max_backtracks or len(seq) == 1:
                return None
            seq.pop()
            elapsed.pop()
            banned.pop()
            prev = seq[-1]
            used[graph.edge_id[prev, node]] = False
            banned[-1].add(node)
            continue
        weights = tau[node, cand] ** alpha * graph.phi[node, cand] ** beta
        cum = np.cumsum(weights)
        pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        nxt = int(cand[min(pick, len(cand) - 1)])
        used[graph.edge_id[node, nxt]] = True
        seq.append(nxt)
        elapsed.append(e + graph.t[node, nxt])
        banned.append(set())
    return seq


def update_pheromone(tau: np.ndarray, ants: Sequence[Sequence[int]], best_ant: Sequence[int],
                     cfg: AcoConfig, omega: float, edge_mask: np.ndarray | None = None) -> np.ndarray:
    """Evaporate every edge, then deposit ``Q / omega`` along the best ant's tour.

    Sequences here are node indices.  ``edge_mask`` limits evaporation and the
    floor to real edges.
    """
    if list(best_ant) not in [list(a) for a in ants]:
        raise InvalidInputError("the best ant must belong to the population")
    lam = cfg.effective_evaporation
    out = (1.0 - lam) * tau
    a = np.asarray(best_ant[:-1])
    b = np.asarray(best_ant[1:])
    amount = cfg.deposit / max(omega, 1e-6)
    np.add.at(out, (a, b), amount)
    np.add.at(out, (b, a), amount)
    out = np.maximum(out, cfg.tau_min)
    if edge_mask is not None:
        out = np.where(edge_mask, out, tau)
    return out


def _plan_from(graph: _Graph, seq_idx: list[int], t_total: float, cpu: float, trace) -> MissionPlan:
    cost, weight, t_m, valid = _score(graph, seq_idx, t_total)
    a = np.asarray(seq_idx[:-1])
    b = np.asarray(seq_idx[1:])
    times = [float(x) for x in graph.t[a, b]]
    n_tasks = int(np.count_nonzero(graph.w[a, b] > 1))
    return MissionPlan([graph.ids[k] for k in seq_idx], n_tasks, weight, t_m, times, cost, valid, cpu, t_total, trace)


def plan_mission(network: WaypointNetwork, t_total: float, cfg: AcoConfig | None = None, rng=None) -> MissionPlan:
    """Run the colony and return the best valid plan found."""
    t0 = time.perf_counter()
    if not t_total > 0:
        raise InvalidInputError("time budget must be positive")
    cfg = cfg or AcoConfig()
    if cfg.evaporation > 0.99:
        warnings.warn(
            f"evaporation rate {cfg.evaporation} is applied as {cfg.effective_evaporation}",
            RuntimeWarning,
            stacklevel=2,
        )
    rng = as_rng(cfg.seed if rng is None else rng)
    graph = _Graph(network)
    if graph.start == graph.goal:
        return MissionPlan([network.start_id], 0, 0.0, 0.0, [], t_total, True,
                           time.perf_counter() - t0, t_total, [])
    shortest = graph.shortest_path()
    if not graph.h[graph.start] < t_total:
        raise InfeasibleMissionError(
            f"shortest start-goal time {graph.h[graph.start]:.1f} s does not fit the budget {t_total:.1f} s"
        )

    edge_mask = np.isfinite(graph.t)
    tau = np.where(edge_mask, cfg.tau0, 0.0)
    best_seq = None
    best_cost = np.inf
    trace = []
    alpha, beta = cfg.alpha, cfg.beta
    for it in range(cfg.iterations):
        tours = []
        invalid = 0
        for _ in range(cfg.population):
            if it == 0:
                try:
                    seq = [graph.index[i] for i in init_ant(graph, rng).sequence]
                except InfeasibleMissionError:
                    seq = None
            else:
                seq = _pheromone_walk(graph, tau, alpha, beta, t_total, rng, cfg.max_backtracks)
            if seq is None:
                invalid += 1
                continue
            cost, _, _, valid = _score(graph, seq, t_total)
            if not valid:
                invalid += 1
            tours.append(seq)
            if cost < best_cost:
                best_cost, best_seq = cost, seq
        trace.append((best_cost, invalid))
        if best_seq is not None:
            omega = best_cost if cfg.omega is None else cfg.omega
            tau = update_pheromone(tau, tours + [best_seq], best_seq, cfg, omega, edge_mask)
        alpha *= cfg.decay
        beta *= cfg.decay

    cpu = time.perf_counter() - t0
    if best_seq is None or not _score(graph, best_seq, t_total)[3]:
        best_seq = shortest
    return _plan_from(graph, best_seq, t_total, cpu, trace)


def edge_keys(sequence: Sequence[int]) -> list[tuple[int, int]]:
    return [edge_key(a, b) for a, b in zip(sequence[:-1], sequence[1:])]
