"""Clamped B-spline candidate paths, their attitude stream, travel time and penalised cost."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidCountError, InvalidInputError, InvalidSpeedError, SplineOrderError
from .ocean import Environment, collision_mask, sample_current_many
from .terrain import DEFAULT_SPEED, MAX_DEPTH
from .vehicle import KinematicLimits, body_velocity_many, compose_velocity_many, limit_violations

N_SAMPLES = 100
ORDER = 4
POINT_RANGE = (5, 8)
GAMMA_GRAD = 100.0
GAMMA_SIGMA = 1000.0
# ground speed never drops below this fraction of the commanded speed
MIN_GROUND_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class ControlPolygon:
    """Control points with start and goal pinned as the first and last rows."""

    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise InvalidInputError("control points must be an (m, 3) array with m >= 2")
        if np.any(lo > hi):
            raise InvalidInputError("lower bound exceeds upper bound")
        for a in (pts, lo, hi):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n_interior(self) -> int:
        return len(self.points) - 2

    @property
    def interior(self) -> np.ndarray:
        return self.points[1:-1]

    def with_interior(self, interior) -> "ControlPolygon":
        inner = np.clip(np.asarray(interior, dtype=float).reshape(-1, 3), self.lower, self.upper)
        return ControlPolygon(np.vstack([self.points[:1], inner, self.points[-1:]]), self.lower, self.upper)

    def within_bounds(self, tol: float = 1e-9) -> bool:
        inner = self.interior
        return bool(np.all(inner >= self.lower - tol) and np.all(inner <= self.upper + tol))


def corridor_bounds(start, goal, margin: float = 0.0, depth_limits=(0.0, MAX_DEPTH)):
    a = np.asarray(start, dtype=float)
    b = np.asarray(goal, dtype=float)
    lo = np.minimum(a, b) - margin
    hi = np.maximum(a, b) + margin
    if depth_limits is not None:
        lo[2] = max(lo[2], min(depth_limits[0], a[2], b[2]))
        hi[2] = min(hi[2], max(depth_limits[1], a[2], b[2]))
    return lo, hi


def sample_control_points(
    start,
    goal,
    n: int,
    rng=None,
    margin: float = 0.0,
    n_range: tuple[int, int] = POINT_RANGE,
    depth_limits=(0.0, MAX_DEPTH),
    sort: bool = True,
) -> ControlPolygon:
    """Uniform interior points inside the start/goal box grown by ``margin``.

    With ``sort`` the interior points are ordered by their projection on the
    start-goal axis, which only relabels the draw.
    """
    if not n_range[0] <= n <= n_range[1]:
        raise InvalidCountError(f"interior point count {n} outside {n_range}")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    a = np.asarray(start, dtype=float)
    b = np.asarray(goal, dtype=float)
    lo, hi = corridor_bounds(a, b, margin, depth_limits)
    inner = lo + rng.random((n, 3)) * (hi - lo)
    if sort:
        axis = b - a
        inner = inner[np.argsort((inner - a) @ axis, kind="stable")]
    return ControlPolygon(np.vstack([a, inner, b]), lo, hi)


@lru_cache(maxsize=64)
def bspline_basis(n_ctrl: int, n_samples: int = N_SAMPLES, order: int = ORDER) -> np.ndarray:
    """(n_samples, n_ctrl) clamped uniform B-spline basis at uniform parameters.

    Cox-de Boor recursion; rows sum to one and the end rows are unit vectors.
    """
    if n_ctrl < order:
        raise SplineOrderError(f"{n_ctrl} control points cannot carry an order-{order} spline")
    if n_samples < 2:
        raise InvalidInputError("need at least two samples")
    n_inner = n_ctrl - order
    knots = np.concatenate([
        np.zeros(order),
        np.arange(1, n_inner + 1) / (n_inner + 1),
        np.ones(order),
    ])
    s = np.linspace(0.0, 1.0, n_samples)
    # order-1 indicator functions; the closing parameter belongs to the last non-empty span
    basis = np.zeros((n_samples, len(knots) - 1))
    for i in range(len(knots) - 1):
        if knots[i] < knots[i + 1]:
            basis[:, i] = (s >= knots[i]) & (s < knots[i + 1])
    last_span = np.nonzero(knots[:-1] < knots[1:])[0][-1]
    basis[-1, :] = 0.0
    basis[-1, last_span] = 1.0
    for k in range(2, order + 1):
        nxt = np.zeros((n_samples, len(knots) - k))
        for i in range(len(knots) - k):
            left = knots[i + k - 1] - knots[i]
            right = knots[i + k] - knots[i + 1]
            if left > 0:
                nxt[:, i] += (s - knots[i]) / left * basis[:, i]
            if right > 0:
                nxt[:, i] += (knots[i + k] - s) / right * basis[:, i + 1]
        basis = nxt
    basis.setflags(write=False)
    return basis


def evaluate_bspline(polygon, n_samples: int = N_SAMPLES, order: int = ORDER) -> np.ndarray:
    pts = polygon.points if isinstance(polygon, ControlPolygon) else np.asarray(polygon, dtype=float)
    return bspline_basis(len(pts), n_samples, order) @ pts


def derive_attitude(positions) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample yaw and pitch from the forward segment; the last sample repeats."""
    pos = np.asarray(positions, dtype=float)
    if len(pos) < 2:
        raise InvalidInputError("need at least two samples")
    d = np.diff(pos, axis=0)
    horiz = np.hypot(d[:, 0], d[:, 1])
    moving = (horiz > 0) | (d[:, 2] != 0)
    psi = np.arctan2(d[:, 1], d[:, 0])
    theta = np.arctan2(-d[:, 2], horiz)
    # zero-length segments inherit the previous attitude (0 at the very start)
    idx = np.where(moving, np.arange(len(d)), -1)
    idx = np.maximum.accumulate(idx)
    psi = np.where(idx >= 0, psi[np.maximum(idx, 0)], 0.0)
    theta = np.where(idx >= 0, theta[np.maximum(idx, 0)], 0.0)
    # a yaw of exactly -pi is reported as +pi
    psi = np.where(psi == -np.pi, np.pi, psi)
    return np.append(psi, psi[-1]), np.append(theta, theta[-1])


def path_length(positions) -> float:
    return float(np.sum(np.linalg.norm(np.diff(np.asarray(positions, dtype=float), axis=0), axis=1)))


def path_time(positions, speed: float = DEFAULT_SPEED) -> float:
    if not speed > 0:
        raise InvalidSpeedError(f"speed must be positive, got {speed}")
    return path_length(positions) / speed


def segment_times(positions, speed: float, current=None) -> np.ndarray:
    """Traversal time of each chord at ``speed`` through water plus the along-track current.

    ``current`` holds one vector per sample (the value at each segment's
    start is used); ``None`` means still water and reduces to chord / speed.
    """
    pos = np.asarray(positions, dtype=float)
    d = np.diff(pos, axis=0)
    chord = np.linalg.norm(d, axis=1)
    if current is None:
        return chord / speed
    moving = chord > 0
    along = np.zeros(len(d))
    along[moving] = np.sum(d[moving] * np.asarray(current)[:-1][moving], axis=1) / chord[moving]
    ground = np.maximum(speed + along, MIN_GROUND_FRACTION * speed)
    return chord / ground


@dataclass(frozen=True, eq=False)
class PathCandidate:
    polygon: ControlPolygon
    # per sample: X, Y, Z, psi, theta, u, v, w (NED composed velocity)
    samples: np.ndarray
    length: float
    time: float
    cost: float
    violations: np.ndarray  # weighted (surge, sway, pitch, yaw rate)
    collisions: int
    seg_times: np.ndarray
    collision_flags: np.ndarray
    body: np.ndarray | None = None  # body-frame (u, v, w) per sample
    cpu_time: float = 0.0

    @property
    def positions(self) -> np.ndarray:
        return self.samples[:, :3]

    @property
    def feasible(self) -> bool:
        return self.collisions == 0

    @property
    def violation_total(self) -> float:
        return float(np.sum(self.violations)) + float(self.collisions)


class CostModel:
    """Evaluates candidate paths against one environment snapshot."""

    def __init__(
        self,
        env: Environment | None = None,
        limits: KinematicLimits | None = None,
        speed: float = DEFAULT_SPEED,
        gamma_grad: float = GAMMA_GRAD,
        gamma_sigma: float = GAMMA_SIGMA,
        n_samples: int = N_SAMPLES,
        order: int = ORDER,
    ):
        if not speed > 0:
            raise InvalidSpeedError(f"speed must be positive, got {speed}")
        self.env = env or Environment()
        self.limits = limits or KinematicLimits()
        self.speed = speed
        self.gamma_grad = gamma_grad
        self.gamma_sigma = gamma_sigma
        self.n_samples = n_samples
        self.order = order

    def _parts(self, pos: np.ndarray):
        env = self.env
        psi, theta = derive_attitude(pos)
        if env.current is not None:
            cur = sample_current_many(env.current, pos)
        else:
            cur = np.zeros_like(pos)
        seg = segment_times(pos, self.speed, cur if env.current is not None else None)
        body = body_velocity_many(self.speed, theta, psi, cur)
        viol = limit_violations(body[:, 0], body[:, 1], theta, psi, seg, self.limits)
        hits = collision_mask(pos, env.obstacles, env.raster_map, env.safety_margin)
        return psi, theta, cur, seg, viol, hits, body

    def cost_of_positions(self, pos: np.ndarray) -> float:
        _, _, _, seg, viol, hits, _ = self._parts(pos)
        return float(np.sum(seg) + self.gamma_grad * np.sum(viol) + self.gamma_sigma * np.count_nonzero(hits))

    def cost(self, points) -> float:
        return self.cost_of_positions(evaluate_bspline(points, self.n_samples, self.order))

    def candidate_from_positions(self, pos: np.ndarray, polygon: ControlPolygon, cpu_time: float = 0.0) -> PathCandidate:
        psi, theta, cur, seg, viol, hits, body = self._parts(pos)
        vel = compose_velocity_many(self.speed, theta, psi, cur)
        samples = np.column_stack([pos, psi, theta, vel])
        time = float(np.sum(seg))
        n_hit = int(np.count_nonzero(hits))
        cost = time + self.gamma_grad * float(np.sum(viol)) + self.gamma_sigma * n_hit
        return PathCandidate(
            polygon, samples, path_length(pos), time, cost, viol, n_hit, seg, hits, body, cpu_time
        )

    def candidate(self, polygon: ControlPolygon, cpu_time: float = 0.0) -> PathCandidate:
        pos = evaluate_bspline(polygon, self.n_samples, self.order)
        return self.candidate_from_positions(pos, polygon, cpu_time)


def path_cost(
    candidate: PathCandidate,
    env: Environment | None = None,
    limits: KinematicLimits | None = None,
    gamma_grad: float = GAMMA_GRAD,
    gamma_sigma: float = GAMMA_SIGMA,
    speed: float = DEFAULT_SPEED,
) -> float:
    """Time plus weighted kinodynamic and collision penalties of ``candidate`` under ``env``."""
    model = CostModel(env, limits, speed, gamma_grad, gamma_sigma)
    return model.cost_of_positions(candidate.positions)


SAMPLE_COLUMNS = ("X", "Y", "Z", "psi", "theta", "u", "v", "w")


def write_path_samples(path, candidate: PathCandidate) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(("i",) + SAMPLE_COLUMNS)
        for i, row in enumerate(candidate.samples):
            out.writerow([i] + [repr(float(x)) for x in row])
