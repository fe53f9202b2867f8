"""Layered Lamb-vortex current field and the uncertain obstacle population.

Everything here is an immutable snapshot; the ``evolve_*`` functions return
new snapshots and leave their inputs alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, PlacementError
from .seeding import as_rng
from .terrain import COAST, MAX_DEPTH, RasterMap

STATIC = "static_uncertain"
DRIFTING = "drifting"


@dataclass(frozen=True)
class Vortex:
    center: tuple[float, float]
    strength: float
    radius: float
    spin: int = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidInputError("vortex radius must be positive")
        if self.spin not in (1, -1):
            raise InvalidInputError("spin must be +1 or -1")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def covariance(self) -> np.ndarray:
        return np.diag([self.radius, self.radius])


@dataclass(frozen=True)
class OceanConfig:
    vortex_count: tuple[int, int] = (3, 6)
    radius_range: tuple[float, float] = (150.0, 450.0)
    # peak horizontal speed of one vortex, m/s; strength is derived from it
    peak_speed_range: tuple[float, float] = (0.1, 0.4)
    n_layers: int = 4
    max_depth: float = MAX_DEPTH
    gamma: float = 0.1
    update_rate: float = 3.0
    sigma_center: float = 15.0
    sigma_radius: float = 5.0
    sigma_strength: float = 20.0
    radius_min: float = 20.0


# max over r of (1 - exp(-r^2/l^2)) * l / r, reached near r = 1.1209 l
_LAMB_PEAK = 0.6381726863389515


@dataclass(frozen=True)
class CurrentField:
    """Vortex sets for each depth layer plus the evolution parameters.

    ``layer_edges`` lists layer boundaries in metres of depth; a query uses
    the layer containing its depth, clamped to the first/last layer.
    """

    layers: tuple[tuple[Vortex, ...], ...]
    layer_edges: tuple[float, ...] = (0.0, 25.0, 50.0, 75.0, 100.0)
    gamma: float = 0.1
    update_rate: float = 3.0
    sigma_center: float = 15.0
    sigma_radius: float = 5.0
    sigma_strength: float = 20.0
    radius_min: float = 20.0

    def __post_init__(self):
        layers = tuple(tuple(layer) for layer in self.layers)
        edges = tuple(float(e) for e in self.layer_edges)
        if len(edges) != len(layers) + 1:
            raise InvalidInputError("need one more layer edge than layers")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InvalidInputError("layer edges must increase")
        if not 0 < self.gamma <= 1:
            raise InvalidInputError("gamma must lie in (0, 1]")
        if not self.radius_min > 0:
            raise InvalidInputError("radius_min must be positive")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "layer_edges", edges)

    def layer_index(self, z) -> np.ndarray:
        inner = np.asarray(self.layer_edges[1:-1])
        return np.searchsorted(inner, np.asarray(z, dtype=float), side="right")

    def to_dict(self) -> dict:
        return {
            "format": "auvmission.current/1",
            "layer_edges": list(self.layer_edges),
            "gamma": self.gamma,
            "update_rate": self.update_rate,
            "sigma_center": self.sigma_center,
            "sigma_radius": self.sigma_radius,
            "sigma_strength": self.sigma_strength,
            "radius_min": self.radius_min,
            "layers": [
                [
                    {"x": v.center[0], "y": v.center[1], "strength": v.strength,
                     "radius": v.radius, "spin": v.spin}
                    for v in layer
                ]
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CurrentField":
        layers = tuple(
            tuple(Vortex((v["x"], v["y"]), v["strength"], v["radius"], v["spin"]) for v in layer)
            for layer in data["layers"]
        )
        return cls(
            layers,
            tuple(data["layer_edges"]),
            data["gamma"],
            data["update_rate"],
            data["sigma_center"],
            data["sigma_radius"],
            data["sigma_strength"],
            data["radius_min"],
        )


def _layer_arrays(layer: Sequence[Vortex]):
    cx = np.array([v.center[0] for v in layer])
    cy = np.array([v.center[1] for v in layer])
    f = np.array([v.spin * v.strength for v in layer])
    ell = np.array([v.radius for v in layer])
    return cx, cy, f, ell


def lamb_velocity(layer: Sequence[Vortex], x, y, gamma: float) -> np.ndarray:
    """Summed (u, v, w) of the vortices in one layer at arrays of (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(x.shape + (3,))
    if not layer:
        return out
    cx, cy, f, ell = _layer_arrays(layer)
    dx = x[..., None] - cx
    dy = y[..., None] - cy
    r2 = dx * dx + dy * dy
    at_center = r2 == 0.0
    safe_r2 = np.where(at_center, 1.0, r2)
    # the horizontal factor stays finite at r = 0 and is multiplied by dx = dy = 0 there
    factor = np.where(at_center, 0.0, f / (2.0 * np.pi * safe_r2) * -np.expm1(-r2 / ell**2))
    out[..., 0] = np.sum(-factor * dy, axis=-1)
    out[..., 1] = np.sum(factor * dx, axis=-1)
    # lambda_w = diag(l, l): sqrt(det(2 pi lambda_w)) = 2 pi l, Mahalanobis term r^2 / l
    out[..., 2] = np.sum(gamma * f / (2.0 * np.pi * ell) * np.exp(-r2 / (2.0 * ell)), axis=-1)
    return out


def sample_current_many(current: CurrentField | None, points) -> np.ndarray:
    """Current vectors at an (N, 3) array of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros((len(pts), 3))
    if current is None:
        return out
    idx = current.layer_index(pts[:, 2])
    for k, layer in enumerate(current.layers):
        sel = idx == k
        if layer and np.any(sel):
            out[sel] = lamb_velocity(layer, pts[sel, 0], pts[sel, 1], current.gamma)
    return out


def sample_current(current: CurrentField | None, pos, t=None) -> tuple[float, float, float]:
    """(u_c, v_c, w_c) at one point.  ``t`` is accepted for interface symmetry;
    a snapshot is already tied to its own time step."""
    u, v, w = sample_current_many(current, [pos])[0]
    return float(u), float(v), float(w)


def _evolve_layer(layer: Sequence[Vortex], current: CurrentField, rng) -> tuple[Vortex, ...]:
    rate = current.update_rate
    out = []
    for v in layer:
        xs, ys, xl, xf = rng.standard_normal(4)
        center = (
            v.center[0] + rate * current.sigma_center * xs,
            v.center[1] + rate * current.sigma_center * ys,
        )
        radius = max(v.radius + rate * current.sigma_radius * xl, current.radius_min)
        strength = v.strength + rate * current.sigma_strength * xf
        out.append(Vortex(center, strength, radius, v.spin))
    return tuple(out)


def evolve_current(current: CurrentField, rng=None) -> CurrentField:
    """One Gaussian random-walk step of every vortex centre, radius and strength."""
    if current.update_rate == 0:
        return current
    rng = as_rng(rng)
    return replace(current, layers=tuple(_evolve_layer(layer, current, rng) for layer in current.layers))


def make_current_field(
    bounds: tuple[float, float, float, float],
    cfg: OceanConfig | None = None,
    rng=None,
) -> CurrentField:
    """Random field over ``bounds`` = (xmin, xmax, ymin, ymax).

    The top layer gets fresh vortices; each deeper layer is the random-walk
    successor of the one above it.
    """
    cfg = cfg or OceanConfig()
    rng = as_rng(rng)
    xmin, xmax, ymin, ymax = bounds
    lo, hi = cfg.vortex_count
    count = int(rng.integers(lo, hi + 1))
    top = []
    for _ in range(count):
        center = (rng.uniform(xmin, xmax), rng.uniform(ymin, ymax))
        radius = rng.uniform(*cfg.radius_range)
        peak = rng.uniform(*cfg.peak_speed_range)
        strength = peak * 2.0 * np.pi * radius / _LAMB_PEAK
        spin = 1 if rng.random() < 0.5 else -1
        top.append(Vortex(center, strength, radius, spin))
    edges = tuple(np.linspace(0.0, cfg.max_depth, cfg.n_layers + 1))
    proto = CurrentField(
        (tuple(top),) * cfg.n_layers,
        edges,
        cfg.gamma,
        cfg.update_rate,
        cfg.sigma_center,
        cfg.sigma_radius,
        cfg.sigma_strength,
        cfg.radius_min,
    )
    layers = [tuple(top)]
    for _ in range(1, cfg.n_layers):
        layers.append(_evolve_layer(layers[-1], proto, rng))
    return replace(proto, layers=tuple(layers))


# ---------------------------------------------------------------------------
# Obstacles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObstacleConfig:
    # radii fit twice into the 100 m depth range so spawning over full depth works
    radius_range: tuple[float, float] = (25.0, 50.0)
    radius_min: float = 10.0
    radius_max: float = 120.0
    sigma0: float = 1.0
    static_uncertainty_rate: float = 0.02
    # uncertainty-rate gain for drifting obstacles, 1/s per m/s of current
    drift_gain: float = 0.01
    position_noise: float = 5.0
    drifting_fraction: float = 0.5


@dataclass(frozen=True)
class Obstacle:
    kind: str
    position: tuple[float, float, float]
    radius: float
    uncertainty_rate: float = 0.0
    sigma0: float = 1.0

    def __post_init__(self):
        if self.kind not in (STATIC, DRIFTING):
            raise InvalidInputError(f"unknown obstacle kind {self.kind!r}")
        if not self.radius > 0:
            raise InvalidInputError("obstacle radius must be positive")
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "position": list(self.position),
            "radius": self.radius,
            "uncertainty_rate": self.uncertainty_rate,
            "sigma0": self.sigma0,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Obstacle":
        return cls(data["kind"], tuple(data["position"]), data["radius"],
                   data["uncertainty_rate"], data["sigma0"])


def spawn_obstacles(
    start,
    target,
    count: int,
    rng=None,
    drifting_fraction: float | None = None,
    cfg: ObstacleConfig | None = None,
    exclude: Iterable = (),
    clearance: float = 0.0,
) -> list[Obstacle]:
    """Place obstacles uniformly inside the start/target box, inset by each radius.

    Centres that would swallow a point in ``exclude`` (plus ``clearance``)
    are redrawn; after 100 failed draws the obstacle is skipped.
    """
    if count < 0:
        raise InvalidInputError("obstacle count must be non-negative")
    cfg = cfg or ObstacleConfig()
    frac = cfg.drifting_fraction if drifting_fraction is None else drifting_fraction
    rng = as_rng(rng)
    a = np.asarray(start, dtype=float)
    b = np.asarray(target, dtype=float)
    lo_box, hi_box = np.minimum(a, b), np.maximum(a, b)
    keep_out = [np.asarray(p, dtype=float) for p in exclude]
    out = []
    for _ in range(count):
        radius = float(rng.uniform(*cfg.radius_range))
        lo, hi = lo_box + radius, hi_box - radius
        if np.any(hi < lo):
            raise PlacementError(
                f"support box {hi_box - lo_box} is narrower than 2 x radius {radius:.1f}"
            )
        kind = DRIFTING if rng.random() < frac else STATIC
        for _attempt in range(100):
            center = rng.uniform(lo, hi)
            if all(np.linalg.norm(center - p) > radius + clearance for p in keep_out):
                break
        else:
            continue
        rate = cfg.static_uncertainty_rate if kind == STATIC else 0.0
        out.append(Obstacle(kind, tuple(center), radius, rate, cfg.sigma0))
    return out


def evolve_obstacle(
    obs: Obstacle,
    local_current,
    rng=None,
    dt: float = 1.0,
    cfg: ObstacleConfig | None = None,
) -> Obstacle:
    """Advance one obstacle by ``dt`` seconds.

    Drifting obstacles are carried by the current with Gaussian position
    noise and get an uncertainty rate proportional to the current speed; the
    radius of either kind takes a Gaussian step scaled by that rate.
    """
    cfg = cfg or ObstacleConfig()
    rng = as_rng(rng)
    vc = np.asarray(local_current, dtype=float)
    pos = np.asarray(obs.position)
    rate = obs.uncertainty_rate
    if obs.kind == DRIFTING:
        noise = rng.normal(0.0, 1.0, size=3) * cfg.position_noise
        pos = pos + vc * dt + noise
        rate = cfg.drift_gain * float(np.linalg.norm(vc))
    x = rng.normal(0.0, 1.0) * obs.sigma0
    radius = float(np.clip(obs.radius + rate * x * dt, cfg.radius_min, cfg.radius_max))
    return Obstacle(obs.kind, tuple(pos), radius, rate, obs.sigma0)


def collision_mask(
    points,
    obstacles: Sequence[Obstacle] = (),
    raster_map: RasterMap | None = None,
    safety_margin: float = 0.0,
) -> np.ndarray:
    """Boolean per point: on a coast/out-of-map cell or inside an inflated obstacle."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hit = np.zeros(len(pts), dtype=bool)
    if raster_map is not None:
        hit |= raster_map.class_at(pts[:, 0], pts[:, 1]) == COAST
    if obstacles:
        centers = np.array([o.position for o in obstacles])
        radii = np.array([o.radius for o in obstacles]) + safety_margin
        d2 = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        hit |= np.any(d2 <= radii**2, axis=1)
    return hit


def collides(point, obstacles: Sequence[Obstacle] = (), raster_map: RasterMap | None = None,
             safety_margin: float = 0.0) -> bool:
    return bool(collision_mask([point], obstacles, raster_map, safety_margin)[0])


@dataclass(frozen=True)
class Environment:
    """What the local planner sees at one instant."""

    raster_map: RasterMap | None = None
    current: CurrentField | None = None
    obstacles: tuple[Obstacle, ...] = field(default_factory=tuple)
    safety_margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def evolve(self, rng, dt: float, cfg: ObstacleConfig | None = None) -> "Environment":
        """Next snapshot: current random walk first, then obstacles in the old current."""
        rng = as_rng(rng)
        obstacles = tuple(
            evolve_obstacle(o, sample_current(self.current, o.position), rng, dt, cfg)
            for o in self.obstacles
        )
        current = evolve_current(self.current, rng) if self.current is not None else None
        return replace(self, current=current, obstacles=obstacles)

    def to_dict(self) -> dict:
        return {
            "current": None if self.current is None else self.current.to_dict(),
            "obstacles": [o.to_dict() for o in self.obstacles],
            "safety_margin": self.safety_margin,
        }
