"""Vehicle state, kinematics and kinodynamic limit checks (NED world frame, body frame)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvalidSpeedError


@dataclass(frozen=True)
class VehicleState:
    # pose in the NED frame: metres, radians
    X: float = 0.0
    Y: float = 0.0
    Z: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0
    # body-frame velocities: m/s, rad/s (p, q, r are carried but never driven)
    u: float = 0.0
    v: float = 0.0
    w: float = 0.0
    p: float = 0.0
    q: float = 0.0
    r: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if not -np.pi / 2 < self.theta < np.pi / 2:
            raise InvalidInputError(f"pitch {self.theta} outside (-pi/2, pi/2)")
        if not -np.pi < self.psi <= np.pi:
            raise InvalidInputError(f"yaw {self.psi} outside (-pi, pi]")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.Z])

    @property
    def body_velocity(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w])


@dataclass(frozen=True)
class KinematicLimits:
    u_max: float = 3.0
    v_min: float = -1.0
    v_max: float = 1.0
    theta_max: float = 0.6
    yaw_rate_max: float = 0.3
    gamma_u: float = 10.0
    gamma_v: float = 10.0
    gamma_theta: float = 10.0
    gamma_psi: float = 10.0

    def __post_init__(self):
        if min(self.u_max, self.v_max, self.theta_max, self.yaw_rate_max) <= 0:
            raise InvalidInputError("limit maxima must be positive")
        if self.v_min > self.v_max:
            raise InvalidInputError("v_min must not exceed v_max")

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.gamma_u, self.gamma_v, self.gamma_theta, self.gamma_psi])


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


def rotation(psi: float, theta: float, phi: float = 0.0) -> np.ndarray:
    """Body-to-NED linear velocity rotation (z-y-x Euler convention)."""
    cps, sps = np.cos(psi), np.sin(psi)
    cth, sth = np.cos(theta), np.sin(theta)
    cph, sph = np.cos(phi), np.sin(phi)
    return np.array([
        [cps * cth, -sps * cph + cps * sth * sph, sps * sph + cps * cph * sth],
        [sps * cth, cps * cph + sph * sth * sps, -cps * sph + sth * sps * cph],
        [-sth, cth * sph, cth * cph],
    ])


def compose_velocity(speed: float, theta: float, psi: float, current=(0.0, 0.0, 0.0)) -> tuple[float, float, float]:
    """Commanded heading at ``speed`` plus the ambient current."""
    if not speed > 0:
        raise InvalidSpeedError(f"speed must be positive, got {speed}")
    uc, vc, wc = current
    return (
        speed * np.cos(theta) * np.cos(psi) + uc,
        speed * np.cos(theta) * np.sin(psi) + vc,
        speed * np.sin(theta) + wc,
    )


def compose_velocity_many(speed: float, theta, psi, current) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    own = np.stack([np.cos(theta) * np.cos(psi), np.cos(theta) * np.sin(psi), np.sin(theta)], axis=-1)
    return speed * own + np.asarray(current, dtype=float)


def body_velocity_many(speed: float, theta, psi, current) -> np.ndarray:
    """Surge/sway/heave when holding ``speed`` through the water along (psi, theta).

    The current is rotated into the body frame, so a following current adds
    to surge and a cross current shows up as sway.
    """
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    c = np.asarray(current, dtype=float)
    cps, sps, cth, sth = np.cos(psi), np.sin(psi), np.cos(theta), np.sin(theta)
    # rows of R^T for phi = 0
    u = cps * cth * c[..., 0] + sps * cth * c[..., 1] - sth * c[..., 2]
    v = -sps * c[..., 0] + cps * c[..., 1]
    w = cps * sth * c[..., 0] + sps * sth * c[..., 1] + cth * c[..., 2]
    return np.stack([speed + u, v, w], axis=-1)


def integrate_kinematics(state: VehicleState, body_velocity, dt: float) -> VehicleState:
    """One explicit Euler step of the position; attitude is carried over unchanged."""
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    nu = np.asarray(body_velocity, dtype=float)
    step = rotation(state.psi, state.theta, state.phi) @ nu * dt
    return VehicleState(
        state.X + step[0], state.Y + step[1], state.Z + step[2],
        state.phi, state.theta, state.psi,
        nu[0], nu[1], nu[2], state.p, state.q, state.r,
        state.t + dt,
    )


def limit_violations(u, v, theta, psi, dt, limits: KinematicLimits) -> np.ndarray:
    """Weighted violation sums (surge, sway, pitch, yaw rate) over sample arrays.

    ``dt`` is a scalar step or one step per consecutive pair of samples.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    psi = np.unwrap(np.asarray(psi, dtype=float))
    raw = np.zeros(4)
    raw[0] = np.sum(np.maximum(0.0, u - limits.u_max))
    raw[1] = np.sum(np.maximum(0.0, v - limits.v_max) + np.maximum(0.0, limits.v_min - v))
    raw[2] = np.sum(np.maximum(0.0, theta - limits.theta_max))
    if len(psi) > 1:
        steps = np.broadcast_to(np.asarray(dt, dtype=float), (len(psi) - 1,))
        moving = steps > 0
        rate = np.zeros(len(psi) - 1)
        rate[moving] = np.diff(psi)[moving] / steps[moving]
        raw[3] = np.sum(np.maximum(0.0, np.abs(rate) - limits.yaw_rate_max))
    return limits.weights * raw


def check_limits(state_stream: Sequence[VehicleState], limits: KinematicLimits | None = None, dt=1.0) -> np.ndarray:
    if not state_stream:
        raise InvalidInputError("state stream is empty")
    limits = limits or KinematicLimits()
    arr = np.array([(s.u, s.v, s.theta, s.psi) for s in state_stream])
    return limit_violations(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], dt, limits)


STATE_COLUMNS = ("t", "X", "Y", "Z", "psi", "theta", "u", "v", "w")


def write_state_stream(path, states: Sequence[VehicleState]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(STATE_COLUMNS)
        for s in states:
            out.writerow([repr(float(getattr(s, c))) for c in STATE_COLUMNS])


def read_state_stream(path) -> list[VehicleState]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [VehicleState(**{c: float(row[c]) for c in STATE_COLUMNS}) for row in rows]

