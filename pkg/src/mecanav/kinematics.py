"""Mecanum wheel kinematics: forward odometry, inverse kinematics, calibration.

Wheel order everywhere is (fl, fr, rl, rr).  Forward odometry turns
per-interval encoder ticks into a body-frame displacement and integrates
it with the midpoint heading rule; inverse kinematics is the unique
right-inverse of that mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Pose2D, Twist2D, WheelDistances, WheelTicks, normalize_angle
from .errors import CalibrationError, DomainError


@dataclass(frozen=True)
class KinematicParams:
    """Encoder scale and wheel geometry.

    distance_per_tick: meters of wheel travel per encoder tick.
    wheel_separation: the averaged distance between the wheels, a single
    scalar; beta = 1 / (4 * wheel_separation) is derived, never stored.
    """

    distance_per_tick: float = 5.0e-5
    wheel_separation: float = 0.4

    def __post_init__(self):
        if self.distance_per_tick <= 0.0:
            raise DomainError("distance_per_tick must be positive")
        if self.wheel_separation <= 0.0:
            raise DomainError("wheel_separation must be positive")

    @property
    def beta(self) -> float:
        return 1.0 / (4.0 * self.wheel_separation)


@dataclass(frozen=True)
class OdometryDelta:
    """Body-frame displacement over one interval: ds_x, ds_y (m), dtheta (rad)."""

    ds_x: float = 0.0
    ds_y: float = 0.0
    dtheta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.ds_x) and math.isfinite(self.ds_y)
                and math.isfinite(self.dtheta)):
            raise DomainError("non-finite odometry delta")

    @property
    def translation(self) -> float:
        return math.hypot(self.ds_x, self.ds_y)


def ticks_to_distances(ticks: WheelTicks, params: KinematicParams) -> WheelDistances:
    """Scale tick counts to per-wheel rolling distances."""
    d = params.distance_per_tick
    return WheelDistances(ticks.fl * d, ticks.fr * d, ticks.rl * d, ticks.rr * d)


def body_delta(dist: WheelDistances, params: KinematicParams) -> OdometryDelta:
    """Combine per-wheel distances into a body-frame displacement.

    dtheta = (-fl + fr - rl + rr) * beta
    ds_x   = ( fl + fr + rl + rr) / 4
    ds_y   = (-fl + fr + rl - rr) / 4
    """
    dtheta = (-dist.fl + dist.fr - dist.rl + dist.rr) * params.beta
    ds_x = (dist.fl + dist.fr + dist.rl + dist.rr) / 4.0
    ds_y = (-dist.fl + dist.fr + dist.rl - dist.rr) / 4.0
    return OdometryDelta(ds_x, ds_y, dtheta)


def advance(x, y, theta, ds_x, ds_y, dtheta):
    """Midpoint-rule pose update on plain scalars or numpy arrays.

    Returns (x', y', theta') with theta' NOT normalized; callers wrap it.
    """
    phi = theta + dtheta / 2.0
    cos_phi = np.cos(phi)
    sin_phi = np.sin(phi)
    return (x + ds_x * cos_phi - ds_y * sin_phi,
            y + ds_x * sin_phi + ds_y * cos_phi,
            theta + dtheta)


def integrate_pose(pose: Pose2D, delta: OdometryDelta) -> Pose2D:
    """Advance a pose by a body-frame delta using the midpoint heading."""
    phi = pose.theta + delta.dtheta / 2.0
    cos_phi = math.cos(phi)
    sin_phi = math.sin(phi)
    return Pose2D(
        pose.x + delta.ds_x * cos_phi - delta.ds_y * sin_phi,
        pose.y + delta.ds_x * sin_phi + delta.ds_y * cos_phi,
        normalize_angle(pose.theta + delta.dtheta),
    )


def relative_delta(start: Pose2D, end: Pose2D) -> OdometryDelta:
    """Body-frame delta d such that integrate_pose(start, d) == end.

    Exact inverse of the midpoint rule: the world displacement is rotated
    back by the midpoint heading.
    """
    dtheta = normalize_angle(end.theta - start.theta)
    phi = start.theta + dtheta / 2.0
    dx = end.x - start.x
    dy = end.y - start.y
    cos_phi = math.cos(phi)
    sin_phi = math.sin(phi)
    return OdometryDelta(dx * cos_phi + dy * sin_phi,
                         -dx * sin_phi + dy * cos_phi,
                         dtheta)


def odometry_step(pose: Pose2D, ticks: WheelTicks,
                  params: KinematicParams) -> tuple[Pose2D, OdometryDelta]:
    """One odometry update: ticks -> distances -> body delta -> new pose.

    Returns both the integrated pose and the delta (the delta feeds the
    SLAM drift step).
    """
    delta = body_delta(ticks_to_distances(ticks, params), params)
    return integrate_pose(pose, delta), delta


def inverse_kinematics(twist: Twist2D, params: KinematicParams) -> tuple[float, float, float, float]:
    """Per-wheel linear speeds (m/s, order fl, fr, rl, rr) for a body twist.

    The unique right-inverse of body_delta: feeding the returned speeds
    times dt back through body_delta recovers (vx*dt, vy*dt, omega*dt).
    """
    w = twist.omega * params.wheel_separation
    return (twist.vx - twist.vy - w,
            twist.vx + twist.vy + w,
            twist.vx + twist.vy - w,
            twist.vx - twist.vy + w)


def calibrate_distance_per_tick(measured_distance: float, ticks_observed: int) -> float:
    """Distance-per-tick from driving a known distance and counting ticks."""
    if ticks_observed == 0:
        raise CalibrationError("cannot calibrate from zero observed ticks")
    if measured_distance <= 0.0:
        raise CalibrationError("measured distance must be positive")
    return measured_distance / abs(ticks_observed)
