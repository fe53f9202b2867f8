from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from auvmission.errors import InvalidInputError, PlacementError
from auvmission.ocean import (
    DRIFTING,
    STATIC,
    CurrentField,
    Environment,
    Obstacle,
    ObstacleConfig,
    OceanConfig,
    Vortex,
    collides,
    evolve_current,
    evolve_obstacle,
    make_current_field,
    sample_current,
    sample_current_many,
    spawn_obstacles,
)
from auvmission.terrain import RasterMap


def lone(center=(100.0, -50.0), strength=400.0, radius=200.0, gamma=0.1, **kw) -> CurrentField:
    return CurrentField(((Vortex(center, strength, radius),),), (0.0, 100.0), gamma, **kw)


def central_divergence(field: CurrentField, x: float, y: float, z: float, h: float = 0.01) -> float:
    du = sample_current(field, (x + h, y, z))[0] - sample_current(field, (x - h, y, z))[0]
    dv = sample_current(field, (x, y + h, z))[1] - sample_current(field, (x, y - h, z))[1]
    return du / (2 * h) + dv / (2 * h)


# -- sample_current -----------------------------------------------------------

def test_lone_vortex_centre_has_only_the_gaussian_peak():
    f, ell, gamma = 400.0, 200.0, 0.1
    u, v, w = sample_current(lone(strength=f, radius=ell, gamma=gamma), (100.0, -50.0, 10.0))
    assert u == 0.0 and v == 0.0
    # sqrt(det(2 pi diag(l, l))) = 2 pi l
    assert w == pytest.approx(gamma * f / math.sqrt(np.linalg.det(2 * np.pi * np.diag([ell, ell]))), rel=1e-12)


def test_lone_vortex_at_one_radius():
    f, ell = 400.0, 200.0
    u, v, _ = sample_current(lone(strength=f, radius=ell), (100.0 + ell, -50.0, 10.0))
    assert u == pytest.approx(0.0, abs=1e-15)
    assert v == pytest.approx(f / (2 * np.pi * ell) * (1 - math.exp(-1)), rel=1e-12)


def test_empty_field_is_still_water():
    field = CurrentField(((),), (0.0, 100.0))
    assert sample_current(field, (1.0, 2.0, 3.0)) == (0.0, 0.0, 0.0)
    assert sample_current(None, (1.0, 2.0, 3.0)) == (0.0, 0.0, 0.0)


def test_spin_reverses_horizontal_flow():
    a = sample_current(lone(), (250.0, 10.0, 5.0))
    field = CurrentField(((Vortex((100.0, -50.0), 400.0, 200.0, -1),),), (0.0, 100.0))
    b = sample_current(field, (250.0, 10.0, 5.0))
    assert b[0] == pytest.approx(-a[0]) and b[1] == pytest.approx(-a[1])


def test_layers_select_by_depth():
    top = (Vortex((0.0, 0.0), 300.0, 100.0),)
    field = CurrentField((top, ()), (0.0, 50.0, 100.0))
    assert sample_current(field, (100.0, 0.0, 10.0))[1] != 0.0
    assert sample_current(field, (100.0, 0.0, 80.0)) == (0.0, 0.0, 0.0)


def test_single_vortex_is_divergence_free_at_random_points():
    rng = np.random.default_rng(7)
    f, ell = 400.0, 200.0
    field = lone(strength=f, radius=ell)
    for _ in range(100):
        x, y = rng.uniform(-800, 1000), rng.uniform(-900, 800)
        speed = float(np.hypot(*sample_current(field, (x, y, 5.0))[:2]))
        assert abs(central_divergence(field, x, y, 5.0)) < 1e-6 * speed / ell


def test_superposition_stays_divergence_free():
    field = make_current_field((0, 2000, 0, 2000), OceanConfig(vortex_count=(6, 6)), rng=3)
    rng = np.random.default_rng(1)
    ell_min = min(v.radius for v in field.layers[0])
    for _ in range(50):
        x, y = rng.uniform(0, 2000, size=2)
        speed = float(np.hypot(*sample_current(field, (x, y, 1.0))[:2]))
        assert abs(central_divergence(field, x, y, 1.0)) < 1e-6 * speed / ell_min


def test_field_is_continuous():
    field = make_current_field((0, 2000, 0, 2000), rng=4)
    rng = np.random.default_rng(2)
    pts = np.column_stack([rng.uniform(0, 2000, 100), rng.uniform(0, 2000, 100), rng.uniform(1, 99, 100)])
    shifted = pts + np.array([1e-6, -1e-6, 0.0])
    assert np.max(np.abs(sample_current_many(field, pts) - sample_current_many(field, shifted))) < 1e-8


def test_generated_vortex_counts_respect_range():
    for seed in range(30):
        field = make_current_field((0, 1000, 0, 1000), rng=seed)
        assert all(3 <= len(layer) <= 6 for layer in field.layers)
        assert len({len(layer) for layer in field.layers}) == 1


def test_generated_peak_speed_matches_configuration():
    cfg = OceanConfig(vortex_count=(1, 1), peak_speed_range=(0.3, 0.3))
    field = make_current_field((0, 1000, 0, 1000), cfg, rng=0)
    v = field.layers[0][0]
    r = np.linspace(1.0, 3 * v.radius, 20001)
    speeds = np.hypot(*sample_current_many(field, np.column_stack([v.center[0] + r, np.full_like(r, v.center[1]),
                                                                    np.full_like(r, 1.0)]))[:, :2].T)
    assert speeds.max() == pytest.approx(0.3, rel=1e-6)


def test_current_field_round_trips():
    field = make_current_field((0, 1000, 0, 1000), rng=9)
    assert CurrentField.from_dict(field.to_dict()) == field


def test_gamma_must_be_in_unit_interval():
    with pytest.raises(InvalidInputError):
        lone(gamma=0.0)
    with pytest.raises(InvalidInputError):
        Vortex((0, 0), 1.0, 0.0)


# -- evolve_current -----------------------------------------------------------

def test_zero_update_rate_is_identity():
    field = make_current_field((0, 1000, 0, 1000), rng=1)
    frozen = replace(field, update_rate=0.0)
    assert evolve_current(frozen, 5) == frozen


def test_default_update_rate_is_three():
    assert OceanConfig().update_rate == 3
    assert make_current_field((0, 1, 0, 1), rng=0).update_rate == 3


def test_centre_displacement_variance_matches_random_walk():
    field = lone(sigma_center=15.0)
    rng = np.random.default_rng(11)
    dx = np.array([evolve_current(field, rng).layers[0][0].center[0] - 100.0 for _ in range(10_000)])
    expected = (field.update_rate * field.sigma_center) ** 2
    assert np.var(dx, ddof=1) == pytest.approx(expected, rel=0.05)


def test_evolution_is_pure_and_seeded():
    field = make_current_field((0, 1000, 0, 1000), rng=2)
    snapshot = field.to_dict()
    a = evolve_current(field, 42)
    b = evolve_current(field, 42)
    assert a == b and field.to_dict() == snapshot


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), steps=st.integers(1, 40))
def test_evolved_radius_never_below_floor(seed, steps):
    field = lone(radius=25.0, sigma_radius=30.0)
    rng = np.random.default_rng(seed)
    for _ in range(steps):
        field = evolve_current(field, rng)
        assert field.layers[0][0].radius >= field.radius_min


# -- obstacles ------------------------------------------------------------------

def test_spawn_zero_obstacles():
    assert spawn_obstacles((0, 0, 0), (500, 500, 100), 0, rng=0) == []


def test_spawned_centres_respect_inset_support():
    a, b = np.array([900.0, 100.0, 0.0]), np.array([100.0, 700.0, 100.0])
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    obstacles = spawn_obstacles(a, b, 1000, rng=5)
    assert len(obstacles) == 1000
    for o in obstacles:
        c = np.array(o.position)
        assert np.all(lo + o.radius <= c) and np.all(c <= hi - o.radius)
        assert o.radius > 0


def test_spawn_box_too_thin_for_radius():
    with pytest.raises(PlacementError):
        spawn_obstacles((0, 0, 0), (1000, 1000, 20), 1, rng=0)


def test_spawn_kind_mix():
    obstacles = spawn_obstacles((0, 0, 0), (1000, 1000, 100), 400, rng=1, drifting_fraction=0.25)
    share = np.mean([o.kind == DRIFTING for o in obstacles])
    assert 0.18 < share < 0.32


def test_spawn_keeps_excluded_points_clear():
    a, b = (0.0, 0.0, 0.0), (300.0, 300.0, 100.0)
    obstacles = spawn_obstacles(a, b, 50, rng=2, exclude=[a, b], clearance=20.0)
    for o in obstacles:
        assert not collides(a, [o], None, 20.0) and not collides(b, [o], None, 20.0)


def test_static_obstacle_unchanged_without_noise_or_current():
    obs = Obstacle(STATIC, (10.0, 20.0, 30.0), 40.0, 0.02, sigma0=0.0)
    assert evolve_obstacle(obs, (0.0, 0.0, 0.0), 0) == obs


def test_drifting_obstacle_is_advected():
    cfg = ObstacleConfig(position_noise=0.0)
    obs = Obstacle(DRIFTING, (10.0, 20.0, 30.0), 40.0, 0.0, sigma0=0.0)
    out = evolve_obstacle(obs, (1.0, 0.0, 0.0), 0, dt=1.0, cfg=cfg)
    assert out.position == pytest.approx((11.0, 20.0, 30.0))


def test_uncertainty_rate_slope_doubles_with_current():
    cfg = ObstacleConfig()
    obs = Obstacle(DRIFTING, (0.0, 0.0, 50.0), 40.0)
    speeds = np.linspace(0.05, 0.8, 12)

    def fitted_slope(scale):
        means = []
        for s in speeds:
            rng = np.random.default_rng(int(s * 1000))
            rates = [evolve_obstacle(obs, (scale * s, 0.0, 0.0), rng, 10.0, cfg).uncertainty_rate
                     for _ in range(200)]
            means.append(np.mean(rates))
        return np.polyfit(speeds, means, 1)[0]

    assert fitted_slope(2.0) == pytest.approx(2.0 * fitted_slope(1.0), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from([STATIC, DRIFTING]), steps=st.integers(1, 50))
def test_obstacle_radius_stays_clamped(seed, kind, steps):
    cfg = ObstacleConfig()
    rng = np.random.default_rng(seed)
    obs = Obstacle(kind, (0.0, 0.0, 50.0), 30.0, 0.5, sigma0=50.0)
    for _ in range(steps):
        before = obs
        obs = evolve_obstacle(obs, rng.normal(0, 1, 3), rng, 60.0, cfg)
        assert cfg.radius_min <= obs.radius <= cfg.radius_max
        if kind == STATIC:
            assert obs.position == before.position


def test_collision_examples():
    obs = [Obstacle(STATIC, (0.0, 0.0, 0.0), 10.0)]
    assert collides((5.0, 0.0, 0.0), obs)
    cells = np.ones((10, 10))
    cells[2, 3] = 0.0
    m = RasterMap(cells, 10.0)
    assert collides((35.0, 25.0, 0.0), (), m)
    assert not collides((75.0, 75.0, 0.0), obs, m, safety_margin=5.0)
    assert collides((14.0, 0.0, 0.0), obs, None, safety_margin=5.0)
    assert collides((-1.0, 5.0, 0.0), (), m)  # off the map


def test_environment_evolution_is_pure():
    field = make_current_field((0, 1000, 0, 1000), rng=0)
    obs = tuple(spawn_obstacles((0, 0, 0), (1000, 1000, 100), 4, rng=0))
    env = Environment(None, field, obs, 10.0)
    before = env.to_dict()
    nxt = env.evolve(np.random.default_rng(3), 100.0)
    assert env.to_dict() == before
    assert nxt.to_dict() != before
