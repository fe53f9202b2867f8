from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from auvmission.errors import DimensionMismatchError, InvalidInputError
from auvmission.ffa_planner import (
    FfaConfig,
    alpha_at,
    firefly_distance,
    move_firefly,
    plan_path,
    replan,
)
from auvmission.ocean import STATIC, Environment, Obstacle
from auvmission.vehicle import VehicleState

SMALL = FfaConfig(population=20, iterations=30)


def test_firefly_distance_examples():
    assert firefly_distance([0, 0, 0], [3, 4, 0]) == 5.0
    assert firefly_distance(np.ones(15), np.ones(15)) == 0.0
    with pytest.raises(DimensionMismatchError):
        firefly_distance(np.zeros(15), np.zeros(18))


def test_alpha_schedule():
    cfg = FfaConfig(alpha0=0.4, kappa=0.95)
    assert alpha_at(cfg, 0) == 0.4
    assert alpha_at(cfg, 1) == pytest.approx(0.38)
    assert alpha_at(cfg, 10) == pytest.approx(0.4 * 0.95**10)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        FfaConfig(kappa=1.0)
    with pytest.raises(InvalidInputError):
        FfaConfig(population=1)


def test_coincident_fireflies_without_noise_stay_put():
    cfg = FfaConfig(alpha0=0.0)
    x = np.arange(6.0)
    np.testing.assert_array_equal(move_firefly(x, x, cfg, 3, 0), x)


def test_attraction_at_zero_distance_is_beta0():
    # with no noise the step is beta0 * (chi_j - chi_i), scaled distance ~ 0
    cfg = FfaConfig(alpha0=0.0, beta0=2.0, epsilon=1.0)
    xi, xj = np.zeros(3), np.full(3, 1e-6)
    np.testing.assert_allclose(move_firefly(xi, xj, cfg, 0, 0), 2.0 * xj, rtol=1e-9)


def test_infinite_absorption_leaves_only_noise():
    cfg = FfaConfig(alpha0=0.0, epsilon=np.inf)
    xi, xj = np.zeros(6), np.ones(6)
    np.testing.assert_array_equal(move_firefly(xi, xj, cfg, 0, 0), xi)


def test_zero_absorption_moves_along_the_segment():
    cfg = FfaConfig(alpha0=0.0, epsilon=0.0, beta0=0.5)
    xi, xj = np.zeros(3), np.array([2.0, -4.0, 6.0])
    np.testing.assert_allclose(move_firefly(xi, xj, cfg, 0, 0), 0.5 * xj)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.integers(0, 100))
def test_moves_respect_bounds(seed, t):
    rng = np.random.default_rng(seed)
    lo, hi = np.zeros(9), np.full(9, 10.0)
    xi, xj = rng.uniform(0, 10, 9), rng.uniform(0, 10, 9)
    out = move_firefly(xi, xj, FfaConfig(alpha0=5.0), t, rng, lo, hi, scale=hi - lo)
    assert np.all(out >= lo) and np.all(out <= hi)


def test_open_water_path_is_near_the_chord():
    a, b = (0.0, 0.0, 20.0), (2000.0, 1000.0, 60.0)
    res = plan_path(a, b, cfg=SMALL, rng=3)
    chord = np.linalg.norm(np.subtract(b, a))
    assert res.best.collisions == 0
    assert res.best.length <= 1.05 * chord
    np.testing.assert_allclose(res.best.positions[0], a)
    np.testing.assert_allclose(res.best.positions[-1], b)


def test_planning_is_deterministic_per_seed():
    a, b = (0.0, 0.0, 20.0), (1500.0, -800.0, 40.0)
    r1 = plan_path(a, b, cfg=SMALL, rng=11)
    r2 = plan_path(a, b, cfg=SMALL, rng=11)
    np.testing.assert_array_equal(r1.best.samples, r2.best.samples)
    assert r1.trace == r2.trace


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_best_so_far_never_increases(seed):
    env = Environment(obstacles=(Obstacle(STATIC, (500.0, 0.0, 50.0), 120.0),))
    res = plan_path((0, 0, 50), (1000, 0, 50), env, cfg=FfaConfig(population=10, iterations=15), rng=seed)
    costs = [c for _, c, _ in res.trace]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] == pytest.approx(res.best.cost)
    assert all(alt.cost >= res.best.cost for alt in res.alternatives)


def test_obstacle_in_the_way_is_avoided():
    env = Environment(obstacles=(Obstacle(STATIC, (500.0, 0.0, 50.0), 100.0),), safety_margin=10.0)
    res = plan_path((0, 0, 50), (1000, 0, 50), env, cfg=FfaConfig(population=40, iterations=60), rng=0)
    assert res.best.collisions == 0


def test_start_equals_goal_is_trivial():
    res = plan_path((1, 2, 3), (1, 2, 3), cfg=SMALL)
    assert res.best.length == 0.0 and res.best.time == 0.0


def test_replan_disabled_returns_previous_untouched():
    prev = plan_path((0, 0, 20), (1000, 0, 20), cfg=SMALL, rng=0).best
    out = replan(prev, VehicleState(X=300.0, Z=20.0), (1000, 0, 20), flag=False)
    assert out.path is prev and not out.accepted_new


def test_replan_keeps_the_cheaper_remainder():
    prev = plan_path((0, 0, 20), (1000, 0, 20), cfg=SMALL, rng=0).best
    out = replan(prev, VehicleState(X=300.0, Z=20.0), (1000, 0, 20), cfg=SMALL, rng=1)
    assert out.path.cost == pytest.approx(min(out.previous_cost, out.new_cost))
    assert out.accepted_new == (out.new_cost <= out.previous_cost)
    np.testing.assert_allclose(out.path.positions[-1], (1000, 0, 20), atol=1e-9)
