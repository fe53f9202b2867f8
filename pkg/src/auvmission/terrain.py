"""Operating-area map and the task-weighted waypoint network.

The map is a grid of class values (water 1, coast 0, uncertain in
[0.01, 0.3]).  Waypoints are scattered over open water and joined by a
symmetric k-nearest-neighbour graph whose edges carry distance, travel time
and task weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.cluster import KMeans
from sklearn.utils.validation import check_is_fitted

from .errors import (
    ConnectivityError,
    DegenerateClusterError,
    InvalidInputError,
    InvalidSpeedError,
    MapTooConstrainedError,
)
from .seeding import as_rng

WATER = 1.0
COAST = 0.0
UNCERTAIN = 0.15
UNCERTAIN_RANGE = (0.01, 0.3)

# RGB references used to name k-means clusters and to render class grids.
WATER_RGB = (25.0, 70.0, 180.0)
LAND_RGB = (150.0, 125.0, 85.0)
UNCERTAIN_RGB = (120.0, 170.0, 160.0)

DEFAULT_SPEED = 2.5
AREA_SIZE = 10000.0
MAX_DEPTH = 100.0


def _valid_class_values(cells: np.ndarray) -> bool:
    lo, hi = UNCERTAIN_RANGE
    ok = (cells == COAST) | (cells == WATER) | ((cells >= lo) & (cells <= hi))
    return bool(np.all(ok))


@dataclass(frozen=True, eq=False)
class RasterMap:
    """Classified map; ``cells[row, col]`` with row along +y and col along +x."""

    cells: np.ndarray
    cell_size: float

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.ndim != 2 or cells.size == 0:
            raise InvalidInputError("map cells must be a non-empty 2-D grid")
        if not self.cell_size > 0:
            raise InvalidInputError("cell_size must be positive")
        if not _valid_class_values(cells):
            raise InvalidInputError("cell values must be 0, 1 or within [0.01, 0.3]")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def extent(self) -> tuple[float, float]:
        return self.width * self.cell_size, self.height * self.cell_size

    def __eq__(self, other):
        if not isinstance(other, RasterMap):
            return NotImplemented
        return self.cell_size == other.cell_size and np.array_equal(self.cells, other.cells)

    def class_at(self, x, y) -> np.ndarray:
        """Class value under each (x, y); out-of-bounds points read as coast."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        col = np.floor(x / self.cell_size).astype(np.int64)
        row = np.floor(y / self.cell_size).astype(np.int64)
        inside = (col >= 0) & (col < self.width) & (row >= 0) & (row < self.height)
        out = np.zeros(np.broadcast(x, y).shape, dtype=float)
        out[inside] = self.cells[row[inside], col[inside]]
        return out

    def is_coast(self, x, y) -> np.ndarray:
        return self.class_at(x, y) == COAST

    @classmethod
    def all_water(cls, width: int, height: int, cell_size: float) -> "RasterMap":
        return cls(np.ones((height, width)), cell_size)


# ---------------------------------------------------------------------------
# k-means map classification
# ---------------------------------------------------------------------------

def _as_pixels(X) -> tuple[np.ndarray, tuple[int, ...]]:
    arr = np.asarray(X, dtype=float)
    if arr.size == 0:
        raise InvalidInputError("raster is empty")
    if arr.ndim == 2:
        return arr.reshape(-1, 1), arr.shape
    if arr.ndim == 3:
        return arr.reshape(-1, arr.shape[2]), arr.shape[:2]
    raise InvalidInputError(f"raster must be 2-D (class grid) or 3-D (colour image), got {arr.ndim}-D")


class MapClassifier(TransformerMixin, BaseEstimator):
    """k-means segmentation of a colour raster into water / coast / uncertain.

    After fitting, the cluster whose centroid is nearest ``water_color`` is
    labelled water, the remaining cluster nearest ``land_color`` is coast and
    every other cluster gets ``uncertain_value``.  Single-channel input is
    treated as a grid of class values, so the references become 1.0 and 0.0.
    """

    def __init__(
        self,
        n_clusters: int = 3,
        water_color: Sequence[float] = WATER_RGB,
        land_color: Sequence[float] = LAND_RGB,
        uncertain_value: float = UNCERTAIN,
        max_iter: int = 100,
        random_state: int = 0,
    ):
        self.n_clusters = n_clusters
        self.water_color = water_color
        self.land_color = land_color
        self.uncertain_value = uncertain_value
        self.max_iter = max_iter
        self.random_state = random_state

    def _references(self, n_channels: int) -> tuple[np.ndarray, np.ndarray]:
        if n_channels == 1:
            return np.array([WATER]), np.array([COAST])
        water = np.asarray(self.water_color, dtype=float)
        land = np.asarray(self.land_color, dtype=float)
        if water.shape != (n_channels,) or land.shape != (n_channels,):
            raise InvalidInputError("reference colours must match the raster channel count")
        return water, land

    def fit(self, X, y=None):
        if self.n_clusters < 1:
            raise InvalidInputError("n_clusters must be at least 1")
        lo, hi = UNCERTAIN_RANGE
        if not lo <= self.uncertain_value <= hi:
            raise InvalidInputError("uncertain_value must lie in [0.01, 0.3]")
        pixels, _ = _as_pixels(X)
        n_distinct = len(np.unique(pixels, axis=0))
        if self.n_clusters > n_distinct:
            raise DegenerateClusterError(
                f"{self.n_clusters} clusters requested but the raster has {n_distinct} distinct colours"
            )
        km = KMeans(
            n_clusters=self.n_clusters,
            init="k-means++",
            n_init=1,
            max_iter=self.max_iter,
            random_state=self.random_state,
        ).fit(pixels)
        centers = km.cluster_centers_
        water_ref, land_ref = self._references(pixels.shape[1])

        values = np.full(self.n_clusters, float(self.uncertain_value))
        water_idx = int(np.argmin(np.linalg.norm(centers - water_ref, axis=1)))
        values[water_idx] = WATER
        if self.n_clusters > 1:
            land_dist = np.linalg.norm(centers - land_ref, axis=1)
            land_dist[water_idx] = np.inf
            values[int(np.argmin(land_dist))] = COAST

        self.kmeans_ = km
        self.cluster_centers_ = centers
        self.class_values_ = values
        self.n_features_in_ = pixels.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "class_values_")
        pixels, shape = _as_pixels(X)
        if pixels.shape[1] != self.n_features_in_:
            raise InvalidInputError("raster channel count differs from the fitted raster")
        return self.kmeans_.predict(pixels).reshape(shape)

    def transform(self, X) -> np.ndarray:
        return self.class_values_[self.predict(X)]


def classify_map(raster, k: int = 3, cell_size: float = 50.0, seed: int = 0, **kwargs) -> RasterMap:
    """Cluster ``raster`` (H x W x C colours or H x W class values) into a RasterMap."""
    clf = MapClassifier(n_clusters=k, random_state=seed, **kwargs)
    return RasterMap(clf.fit_transform(raster), cell_size)


def render_map(raster_map: RasterMap) -> np.ndarray:
    """Paint a class grid with the reference colours (inverse of classification)."""
    cells = raster_map.cells
    img = np.empty(cells.shape + (3,), dtype=np.uint8)
    img[...] = np.array(UNCERTAIN_RGB, dtype=np.uint8)
    img[cells == WATER] = np.array(WATER_RGB, dtype=np.uint8)
    img[cells == COAST] = np.array(LAND_RGB, dtype=np.uint8)
    return img


def read_raster(path) -> np.ndarray:
    """Load a binary P6 pixmap as RGB, or a whitespace-delimited grid of class values."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P6":
        from PIL import Image

        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"))
    return np.loadtxt(path, ndmin=2)


def load_map(path, cell_size: float = 50.0, k: int = 3, seed: int = 0) -> RasterMap:
    raster = read_raster(path)
    if raster.ndim == 2:
        return RasterMap(raster, cell_size)
    return classify_map(raster, k=k, cell_size=cell_size, seed=seed)


def write_ppm(path, rgb: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path, format="PPM")


def write_grid(path, raster_map: RasterMap) -> None:
    np.savetxt(path, raster_map.cells, fmt="%.6g")


def synthetic_raster(
    size: int = 200,
    n_islands: int = 4,
    island_radius: tuple[float, float] = (0.04, 0.09),
    shoal_width: float = 0.025,
    rng=0,
) -> np.ndarray:
    """Colour image of open water with round islands ringed by shallow shoals.

    Radii are fractions of ``size``.  Colours carry small noise so the
    clustering has real work to do.
    """
    rng = as_rng(rng)
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    cls = np.full((size, size), 2, dtype=np.int8)  # 2 water, 1 shoal, 0 land
    for _ in range(n_islands):
        cx, cy = rng.uniform(0.1, 0.9, size=2) * size
        r = rng.uniform(*island_radius) * size
        dist = np.hypot(xx - cx, yy - cy)
        cls[(dist < r + shoal_width * size) & (cls == 2)] = 1
        cls[dist < r] = 0
    palette = np.array([LAND_RGB, UNCERTAIN_RGB, WATER_RGB])
    img = palette[cls] + rng.normal(0.0, 6.0, size=(size, size, 3))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Waypoints and the network
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Waypoint:
    id: int
    position: tuple[float, float, float]

    def __post_init__(self):
        if self.id < 1:
            raise InvalidInputError("waypoint ids start at 1")
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3:
            raise InvalidInputError("waypoint position must be a 3-vector")
        object.__setattr__(self, "position", pos)

    @property
    def xyz(self) -> np.ndarray:
        return np.array(self.position)


@dataclass(frozen=True)
class Edge:
    """Undirected edge; ``key`` is always (min id, max id)."""

    i: int
    j: int
    d: float
    t: float
    w: float = 1.0

    def __post_init__(self):
        if self.i == self.j:
            raise InvalidInputError("self-loops are not edges")
        if self.i > self.j:
            i, j = self.j, self.i
            object.__setattr__(self, "i", i)
            object.__setattr__(self, "j", j)
        if self.w < 1:
            raise InvalidInputError("task weight must be >= 1")

    @property
    def key(self) -> tuple[int, int]:
        return self.i, self.j

    @property
    def has_task(self) -> bool:
        return self.w > 1


def edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def edge_metrics(p_i, p_j, speed: float = DEFAULT_SPEED) -> tuple[float, float]:
    """Straight-line distance and still-water travel time between two points."""
    if not speed > 0:
        raise InvalidSpeedError(f"speed must be positive, got {speed}")
    d = float(np.linalg.norm(np.asarray(p_j, dtype=float) - np.asarray(p_i, dtype=float)))
    return d, d / speed


@dataclass(frozen=True, eq=False)
class WaypointNetwork:
    """Undirected waypoint graph.

    ``edges`` holds one record per undirected pair; ``n_arcs`` counts both
    directions, which is how edge totals such as "50 nodes / 1600 edges" are
    quoted.
    """

    waypoints: Mapping[int, Waypoint]
    edges: Mapping[tuple[int, int], Edge]
    start_id: int
    goal_id: int
    speed: float = DEFAULT_SPEED
    adjacency: Mapping[int, tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        wps = dict(sorted(self.waypoints.items()))
        edges = dict(sorted(self.edges.items()))
        if self.start_id not in wps or self.goal_id not in wps:
            raise InvalidInputError("start and goal must be waypoints of the network")
        adj: dict[int, list[int]] = {i: [] for i in wps}
        for (i, j), e in edges.items():
            if (i, j) != e.key or i not in wps or j not in wps:
                raise InvalidInputError(f"edge {(i, j)} is inconsistent with the waypoint set")
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "adjacency", {i: tuple(sorted(n)) for i, n in adj.items()})

    def __eq__(self, other):
        if not isinstance(other, WaypointNetwork):
            return NotImplemented
        return (
            self.waypoints == other.waypoints
            and self.edges == other.edges
            and self.start_id == other.start_id
            and self.goal_id == other.goal_id
            and self.speed == other.speed
        )

    @property
    def n_arcs(self) -> int:
        return 2 * len(self.edges)

    def edge(self, a: int, b: int) -> Edge:
        try:
            return self.edges[edge_key(a, b)]
        except KeyError:
            raise KeyError(f"no edge between {a} and {b}") from None

    def has_edge(self, a: int, b: int) -> bool:
        return edge_key(a, b) in self.edges

    def position(self, node: int) -> np.ndarray:
        return self.waypoints[node].xyz

    def connected(self, a: int, b: int) -> bool:
        seen = {a}
        frontier = [a]
        while frontier:
            node = frontier.pop()
            if node == b:
                return True
            for nxt in self.adjacency[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return False

    def replace(self, edges=None, start_id=None) -> "WaypointNetwork":
        return WaypointNetwork(
            self.waypoints,
            self.edges if edges is None else edges,
            self.start_id if start_id is None else start_id,
            self.goal_id,
            self.speed,
        )

    # -- serialisation -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "auvmission.network/1",
            "speed": self.speed,
            "start_id": self.start_id,
            "goal_id": self.goal_id,
            "nodes": [
                {"id": w.id, "x": w.position[0], "y": w.position[1], "z": w.position[2]}
                for w in self.waypoints.values()
            ],
            "edges": [
                {"from": e.i, "to": e.j, "d": e.d, "t": e.t, "w": e.w} for e in self.edges.values()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WaypointNetwork":
        wps = {n["id"]: Waypoint(n["id"], (n["x"], n["y"], n["z"])) for n in data["nodes"]}
        edges = {}
        for rec in data["edges"]:
            e = Edge(rec["from"], rec["to"], rec["d"], rec["t"], rec["w"])
            edges[e.key] = e
        return cls(wps, edges, data["start_id"], data["goal_id"], data["speed"])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "WaypointNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_waypoints(
    raster_map: RasterMap,
    n: int,
    rng=None,
    xy_range: tuple[float, float] = (0.0, AREA_SIZE),
    z_range: tuple[float, float] = (0.0, MAX_DEPTH),
    max_attempts: int | None = None,
) -> list[Waypoint]:
    """Uniformly scatter ``n`` waypoints, rejecting any that land on coast cells."""
    if n < 2:
        raise InvalidInputError("need at least two waypoints")
    if not np.any(raster_map.cells != COAST):
        raise MapTooConstrainedError("map has no open-water cell")
    rng = as_rng(rng)
    max_attempts = 1000 * n if max_attempts is None else max_attempts
    out: list[Waypoint] = []
    attempts = 0
    while len(out) < n:
        if attempts >= max_attempts:
            raise MapTooConstrainedError(
                f"placed {len(out)} of {n} waypoints after {attempts} attempts"
            )
        x, y = rng.uniform(*xy_range, size=2)
        z = rng.uniform(*z_range)
        attempts += 1
        if raster_map.class_at(x, y) != COAST:
            out.append(Waypoint(len(out) + 1, (x, y, z)))
    return out


@dataclass(frozen=True)
class Connectivity:
    """Symmetric k-nearest-neighbour policy.

    With ``k=None`` the smallest-error k for ``target_arcs`` directed arcs is
    searched.  ``avoid_coast`` drops pairs whose straight chord crosses a
    coast cell; ``repair`` then bridges start and goal with the shortest
    admissible cross-component edges if they ended up disconnected.
    """

    k: int | None = None
    target_arcs: int = 1600
    avoid_coast: bool = True
    repair: bool = True


def _chord_crosses_coast(raster_map: RasterMap, a: np.ndarray, b: np.ndarray) -> bool:
    length = float(np.hypot(*(b[:2] - a[:2])))
    n = max(2, int(np.ceil(2.0 * length / raster_map.cell_size)) + 1)
    s = np.linspace(0.0, 1.0, n)
    xs = a[0] + s * (b[0] - a[0])
    ys = a[1] + s * (b[1] - a[1])
    return bool(np.any(raster_map.is_coast(xs, ys)))


def _admissible_pairs(pos: np.ndarray, raster_map: RasterMap | None, avoid_coast: bool) -> np.ndarray:
    n = len(pos)
    ok = ~np.eye(n, dtype=bool)
    if raster_map is not None and avoid_coast:
        for a in range(n):
            for b in range(a + 1, n):
                if _chord_crosses_coast(raster_map, pos[a], pos[b]):
                    ok[a, b] = ok[b, a] = False
    return ok


def _knn_pairs(order: np.ndarray, ok: np.ndarray, k: int) -> set[tuple[int, int]]:
    pairs = set()
    for a in range(len(order)):
        taken = 0
        for b in order[a]:
            if taken >= k:
                break
            if b == a or not ok[a, b]:
                continue
            pairs.add((a, b) if a < b else (b, a))
            taken += 1
    return pairs


def _components(n: int, pairs: Iterable[tuple[int, int]]) -> np.ndarray:
    pairs = list(pairs)
    if not pairs:
        return np.arange(n)
    rows, cols = zip(*pairs)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return connected_components(graph, directed=False)[1]


def build_network(
    waypoints: Sequence[Waypoint],
    task_assignments: Mapping[tuple[int, int], float] | None = None,
    speed: float = DEFAULT_SPEED,
    connectivity: Connectivity | None = None,
    raster_map: RasterMap | None = None,
    start_id: int | None = None,
    goal_id: int | None = None,
) -> WaypointNetwork:
    """Connect waypoints and attach task weights.

    Start defaults to the lowest id and goal to the highest.
    """
    if len(waypoints) < 2:
        raise InvalidInputError("need at least two waypoints")
    if not speed > 0:
        raise InvalidSpeedError(f"speed must be positive, got {speed}")
    policy = connectivity or Connectivity()
    ids = [w.id for w in waypoints]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("waypoint ids must be unique")
    start_id = min(ids) if start_id is None else start_id
    goal_id = max(ids) if goal_id is None else goal_id
    index = {wid: a for a, wid in enumerate(ids)}
    pos = np.array([w.position for w in waypoints])
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    order = np.argsort(dist, axis=1, kind="stable")
    ok = _admissible_pairs(pos, raster_map, policy.avoid_coast)
    n = len(waypoints)

    if policy.k is not None:
        pairs = _knn_pairs(order, ok, min(policy.k, n - 1))
    else:
        best = None
        for k in range(1, n):
            cand = _knn_pairs(order, ok, k)
            err = abs(2 * len(cand) - policy.target_arcs)
            if best is None or err < best[0]:
                best = (err, cand)
            if 2 * len(cand) >= policy.target_arcs:
                break
        pairs = best[1]

    s, g = index[start_id], index[goal_id]
    comp = _components(n, pairs)
    while comp[s] != comp[g]:
        if not policy.repair:
            raise ConnectivityError(f"start {start_id} and goal {goal_id} are disconnected")
        inside = comp == comp[s]
        cross = dist.copy()
        cross[~inside, :] = np.inf
        cross[:, inside] = np.inf
        cross[~ok] = np.inf
        a, b = np.unravel_index(np.argmin(cross), cross.shape)
        if not np.isfinite(cross[a, b]):
            raise ConnectivityError(
                f"start {start_id} and goal {goal_id} cannot be bridged without crossing coast"
            )
        pairs.add((min(a, b), max(a, b)))
        comp = _components(n, pairs)

    edges = {}
    for a, b in sorted(pairs):
        d, t = edge_metrics(pos[a], pos[b], speed)
        e = Edge(ids[a], ids[b], d, t)
        edges[e.key] = e
    net = WaypointNetwork({w.id: w for w in waypoints}, edges, start_id, goal_id, speed)
    if task_assignments:
        net = with_tasks(net, task_assignments)
    return net


def with_tasks(network: WaypointNetwork, assignments: Mapping[tuple[int, int], float]) -> WaypointNetwork:
    edges = dict(network.edges)
    for (a, b), weight in assignments.items():
        if not weight > 1:
            raise InvalidInputError(f"task weight on {(a, b)} must exceed 1, got {weight}")
        key = edge_key(a, b)
        if key not in edges:
            raise InvalidInputError(f"cannot assign a task to missing edge {(a, b)}")
        e = edges[key]
        edges[key] = Edge(e.i, e.j, e.d, e.t, float(weight))
    return network.replace(edges=edges)


def random_tasks(
    network: WaypointNetwork,
    count: int,
    weight_range: tuple[int, int] = (2, 10),
    rng=None,
) -> dict[tuple[int, int], float]:
    """Pick ``count`` distinct edges and give each an integer weight in the inclusive range."""
    rng = as_rng(rng)
    keys = list(network.edges)
    count = min(count, len(keys))
    chosen = rng.choice(len(keys), size=count, replace=False)
    lo, hi = weight_range
    weights = rng.integers(lo, hi + 1, size=count)
    return {keys[c]: float(wt) for c, wt in zip(chosen, weights)}


def remove_visited(
    network: WaypointNetwork,
    traversed_edges: Iterable[tuple[int, int]],
    new_start: int,
) -> WaypointNetwork:
    """Drop already-travelled edges and restart from ``new_start``."""
    if new_start not in network.waypoints:
        raise InvalidInputError(f"unknown start waypoint {new_start}")
    edges = dict(network.edges)
    for a, b in traversed_edges:
        key = edge_key(a, b)
        if key not in edges:
            raise InvalidInputError(f"edge {(a, b)} is not in the network")
        del edges[key]
    shrunk = network.replace(edges=edges, start_id=new_start)
    if not shrunk.connected(new_start, network.goal_id):
        raise ConnectivityError(f"waypoint {new_start} is cut off from goal {network.goal_id}")
    return shrunk
