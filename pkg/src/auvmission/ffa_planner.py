"""Firefly-algorithm search over B-spline control polygons, with warm-started replanning."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError
from .ocean import Environment, collides
from .seeding import as_rng
from .spline_path import (
    POINT_RANGE,
    ControlPolygon,
    CostModel,
    PathCandidate,
    corridor_bounds,
    sample_control_points,
)
from .terrain import DEFAULT_SPEED
from .vehicle import KinematicLimits, VehicleState


@dataclass(frozen=True)
class FfaConfig:
    population: int = 80
    iterations: int = 100
    beta0: float = 2.0
    epsilon: float = 1.0
    alpha0: float = 0.4
    kappa: float = 0.95
    noise: str = "uniform"  # or "gaussian"
    point_range: tuple[int, int] = POINT_RANGE
    # corridor margin around the start/goal box: fraction of the distance, with a floor in metres
    margin_fraction: float = 0.1
    margin_min: float = 100.0
    # stop after this many iterations without a relative improvement above ``tol``
    patience: int | None = None
    tol: float = 1e-3
    n_alternatives: int = 5
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.kappa < 1:
            raise InvalidInputError("kappa must lie in (0, 1)")
        if self.population < 2:
            raise InvalidInputError("population must be at least 2")
        if self.iterations < 0:
            raise InvalidInputError("iterations must be non-negative")
        if self.noise not in ("uniform", "gaussian"):
            raise InvalidInputError(f"unknown noise form {self.noise!r}")
        lo, hi = self.point_range
        if not 1 <= lo <= hi:
            raise InvalidInputError("bad control point range")


@dataclass
class Firefly:
    chi: np.ndarray
    brightness: float

    @property
    def cost(self) -> float:
        return -self.brightness


@dataclass
class PlanResult:
    best: PathCandidate
    alternatives: list[PathCandidate]
    # rows of (iteration, best cost, best violation total)
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    iterations_run: int = 0
    evaluations: int = 0

    def __iter__(self):
        return iter((self.best, self.alternatives))


def firefly_distance(chi_i, chi_j) -> float:
    a = np.asarray(chi_i, dtype=float)
    b = np.asarray(chi_j, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cannot compare fireflies of shape {a.shape} and {b.shape}")
    return float(np.linalg.norm(a - b))


def alpha_at(cfg: FfaConfig, t: int) -> float:
    return cfg.alpha0 * cfg.kappa**t


def move_firefly(chi_i, chi_j, cfg: FfaConfig, t: int, rng=None, lower=None, upper=None, scale=None) -> np.ndarray:
    """Pull ``chi_i`` toward the brighter ``chi_j`` and add a random step.

    ``scale`` (per coordinate) measures distance and noise in units of the
    search box; the default of 1 uses raw coordinates.
    """
    rng = as_rng(rng)
    xi = np.asarray(chi_i, dtype=float)
    xj = np.asarray(chi_j, dtype=float)
    if xi.shape != xj.shape:
        raise DimensionMismatchError("fireflies differ in dimension")
    s = np.ones_like(xi) if scale is None else np.asarray(scale, dtype=float)
    diff = xj - xi
    dist2 = float(np.sum((diff / s) ** 2))
    beta = cfg.beta0 * np.exp(-cfg.epsilon * dist2) if np.isfinite(cfg.epsilon) else 0.0
    if cfg.noise == "uniform":
        step = rng.random(xi.shape) - 0.5
    else:
        step = rng.standard_normal(xi.shape)
    out = xi + beta * diff + alpha_at(cfg, t) * step * s
    if lower is not None or upper is not None:
        out = np.clip(out, lower, upper)
    return out


def _resample_tail(positions: np.ndarray, n: int) -> np.ndarray:
    """``n`` points spread evenly by arc length strictly inside a polyline."""
    d = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(d)])
    if arc[-1] == 0:
        return np.repeat(positions[:1], n, axis=0)
    want = arc[-1] * np.arange(1, n + 1) / (n + 1)
    return np.column_stack([np.interp(want, arc, positions[:, k]) for k in range(3)])


def _strata(cfg: FfaConfig) -> list[tuple[int, int]]:
    """(point count, members) pairs splitting the population as evenly as possible."""
    counts = list(range(cfg.point_range[0], cfg.point_range[1] + 1))
    counts = counts[: max(1, cfg.population // 2)]
    base, extra = divmod(cfg.population, len(counts))
    return [(n, base + (1 if k < extra else 0)) for k, n in enumerate(counts)]


def _trivial(start, model: CostModel, cpu: float) -> PlanResult:
    a = np.asarray(start, dtype=float)
    poly = ControlPolygon(np.repeat(a[None, :], 2, axis=0), a, a)
    pos = np.repeat(a[None, :], model.n_samples, axis=0)
    best = model.candidate_from_positions(pos, poly, cpu)
    return PlanResult(best, [], [(0, best.cost, best.violation_total)], 0, 1)


def plan_path(
    start,
    goal,
    env: Environment | None = None,
    limits: KinematicLimits | None = None,
    cfg: FfaConfig | None = None,
    warm_start=None,
    rng=None,
    speed: float = DEFAULT_SPEED,
    model: CostModel | None = None,
) -> PlanResult:
    """Best path from ``start`` to ``goal`` plus ranked per-iteration alternatives.

    ``warm_start`` may be a previous candidate or an (m, 3) polyline; its
    shape is resampled into one firefly of a matching stratum.
    """
    t0 = time.perf_counter()
    cfg = cfg or FfaConfig()
    rng = as_rng(cfg.seed if rng is None else rng)
    model = model or CostModel(env, limits, speed)
    a = np.asarray(start, dtype=float)
    b = np.asarray(goal, dtype=float)
    dist = float(np.linalg.norm(b - a))
    if dist == 0:
        return _trivial(a, model, time.perf_counter() - t0)
    margin = max(cfg.margin_fraction * dist, cfg.margin_min)
    lo, hi = corridor_bounds(a, b, margin)
    span = np.where(hi - lo > 0, hi - lo, 1.0)

    warm = None
    if warm_start is not None:
        warm = warm_start.positions if isinstance(warm_start, PathCandidate) else np.asarray(warm_start, dtype=float)

    strata = []
    evaluations = 0
    for n, members in _strata(cfg):
        swarm = []
        for _ in range(members):
            poly = sample_control_points(a, b, n, rng, margin, cfg.point_range)
            swarm.append(poly.interior.ravel())
        strata.append({
            "n": n,
            "chi": np.array(swarm),
            "lower": np.tile(lo, n),
            "upper": np.tile(hi, n),
            "scale": np.tile(span, n),
        })
    if warm is not None and len(warm) >= 2:
        # seed the middle stratum so the warm start competes with every point count
        target = strata[len(strata) // 2]
        seed_pts = np.clip(_resample_tail(warm, target["n"]), lo, hi)
        target["chi"][0] = seed_pts.ravel()

    def decode(chi: np.ndarray) -> np.ndarray:
        return np.vstack([a, chi.reshape(-1, 3), b])

    for st in strata:
        st["cost"] = np.array([model.cost(decode(c)) for c in st["chi"]])
        evaluations += len(st["chi"])

    def global_best():
        k = int(np.argmin([st["cost"].min() for st in strata]))
        st = strata[k]
        m = int(np.argmin(st["cost"]))
        return float(st["cost"][m]), st["chi"][m].copy()

    best_cost, best_chi = global_best()
    history = [(best_cost, best_chi)]
    trace = [(0, best_cost, np.nan)]
    stale = 0
    it = 0
    for it in range(1, cfg.iterations + 1):
        for st in strata:
            order = np.argsort(st["cost"], kind="stable")
            chi, cost = st["chi"], st["cost"]
            for p in range(1, len(order)):
                i = order[p]
                own = cost[i]
                moved = False
                for j in order[:p]:
                    if cost[j] < own:
                        chi[i] = move_firefly(chi[i], chi[j], cfg, it, rng, st["lower"], st["upper"], st["scale"])
                        moved = True
                if moved:
                    cost[i] = model.cost(decode(chi[i]))
                    evaluations += 1
        new_cost, new_chi = global_best()
        improved = new_cost < best_cost * (1.0 - cfg.tol) if best_cost > 0 else new_cost < best_cost
        if new_cost < best_cost:
            best_cost, best_chi = new_cost, new_chi
            history.append((best_cost, best_chi))
        trace.append((it, best_cost, np.nan))
        stale = 0 if improved else stale + 1
        if cfg.patience is not None and stale >= cfg.patience:
            break

    cpu = time.perf_counter() - t0
    poly = ControlPolygon(decode(best_chi), lo, hi)
    best = model.candidate(poly, cpu)
    # violation column holds the candidate-level total of the running best
    viol = {}
    for cost_k, chi_k in history:
        viol[cost_k] = model.candidate(ControlPolygon(decode(chi_k), lo, hi)).violation_total
    trace = [(t, c, viol.get(c, np.nan)) for t, c, _ in trace]
    alternatives = []
    for cost_k, chi_k in sorted(history[:-1], key=lambda h: h[0]):
        if len(alternatives) >= cfg.n_alternatives:
            break
        alternatives.append(model.candidate(ControlPolygon(decode(chi_k), lo, hi)))
    return PlanResult(best, alternatives, trace, it, evaluations)


@dataclass
class ReplanResult:
    path: PathCandidate
    accepted_new: bool
    previous_cost: float
    new_cost: float
    cpu_time: float
    emergency: bool = False
    plan: PlanResult | None = None


def remaining_positions(previous: PathCandidate, position) -> np.ndarray:
    """Tail of ``previous`` from the sample nearest ``position``, starting at ``position``."""
    pos = previous.positions
    p = np.asarray(position, dtype=float)
    k = int(np.argmin(np.linalg.norm(pos - p, axis=1)))
    tail = pos[k + 1:] if k < len(pos) - 1 else pos[-1:]
    if np.array_equal(tail[0], p):
        return tail
    return np.vstack([p, tail])


def replan(
    previous_best: PathCandidate,
    current_state: VehicleState,
    goal,
    env: Environment | None = None,
    limits: KinematicLimits | None = None,
    cfg: FfaConfig | None = None,
    flag: bool = True,
    rng=None,
    speed: float = DEFAULT_SPEED,
) -> ReplanResult:
    """Re-plan from the vehicle's position, keeping the old remainder unless the new path is no worse."""
    t0 = time.perf_counter()
    if not flag:
        return ReplanResult(previous_best, False, previous_best.cost, previous_best.cost, 0.0)
    model = CostModel(env, limits, speed)
    here = current_state.position
    tail = remaining_positions(previous_best, here)
    emergency = collides(here, model.env.obstacles, model.env.raster_map, model.env.safety_margin)
    if len(tail) >= 2:
        kept = model.candidate_from_positions(tail, previous_best.polygon)
    else:
        kept = model.candidate_from_positions(np.repeat(tail, 2, axis=0), previous_best.polygon)
    plan = plan_path(here, goal, env, limits, cfg, warm_start=tail, rng=rng, speed=speed, model=model)
    cpu = time.perf_counter() - t0
    if plan.best.cost <= kept.cost:
        path = replace(plan.best, cpu_time=cpu)
        return ReplanResult(path, True, kept.cost, plan.best.cost, cpu, emergency, plan)
    return ReplanResult(replace(kept, cpu_time=cpu), False, kept.cost, plan.best.cost, cpu, emergency, plan)


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(("iteration", "cost", "violation"))
        for it, cost, viol in trace:
            out.writerow((it, repr(float(cost)), repr(float(viol))))

