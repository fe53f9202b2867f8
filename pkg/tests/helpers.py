"""Shared fixtures and independent oracles for the router tests."""

from __future__ import annotations

import heapq

import numpy as np

from auvmission import terrain as T
from auvmission.aco_router import mission_cost


def small_network(n: int, seed: int, k: int = 3, tasks: int = 6):
    rng = np.random.default_rng(seed)
    m = T.RasterMap.all_water(200, 200, 50.0)
    net = T.build_network(T.generate_waypoints(m, n, rng), connectivity=T.Connectivity(k=k))
    return T.with_tasks(net, T.random_tasks(net, tasks, rng=rng))


def shortest_time(net) -> float:
    return shortest_time_to_goal(net)[net.start_id]


def brute_force(net, t_total: float):
    """(M_Cost, W_M, sequence) of the cheapest edge-simple start-goal walk under the budget."""
    best = (np.inf, 0.0, None)
    lower = shortest_time_to_goal(net)
    used: set = set()

    def dfs(node, elapsed, seq):
        nonlocal best
        if node == net.goal_id:
            edges = [net.edge(a, b) for a, b in zip(seq, seq[1:])]
            cost, valid = mission_cost([e.t for e in edges], [e.w for e in edges], t_total)
            if valid and cost < best[0]:
                best = (cost, float(sum(e.w for e in edges if e.w > 1)), list(seq))
            return
        for nb in net.adjacency[node]:
            key = T.edge_key(node, nb)
            t = net.edge(node, nb).t
            if key in used or elapsed + t + lower[nb] >= t_total:
                continue
            used.add(key)
            seq.append(nb)
            dfs(nb, elapsed + t, seq)
            seq.pop()
            used.discard(key)

    dfs(net.start_id, 0.0, [net.start_id])
    return best


def shortest_time_to_goal(net) -> dict:
    """Plain Dijkstra over the edge times, written without scipy."""
    dist = {net.goal_id: 0.0}
    heap = [(0.0, net.goal_id)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, np.inf):
            continue
        for v in net.adjacency[u]:
            nd = d + net.edge(u, v).t
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return {w: dist.get(w, np.inf) for w in net.waypoints}
