"""Particle-filter SLAM on a counting occupancy grid.

Pipeline per accepted update: drift (motion model with fractional
Gaussian spread) -> measure (beam-endpoint likelihood against the map)
-> estimate (average of the top-weighted particles) -> map update at the
estimate -> systematic resampling.  Updates are gated on accumulated
odometry: the robot must move at least 10 mm or turn 5 degrees.

The measure step is pure per particle, so evaluation order never affects
the result; all particle math is vectorized over the ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    LaserScan,
    OccupancyGrid,
    Pose2D,
    normalize_angle,
    normalize_angles,
)
from .errors import ParameterError
from .kinematics import OdometryDelta, advance, integrate_pose, relative_delta
from .raycast import beam_cells


@dataclass(frozen=True)
class Particle:
    """One pose hypothesis with its importance weight."""

    pose: Pose2D
    weight: float


@dataclass(frozen=True)
class SlamConfig:
    particle_count: int = 1000
    cell_resolution: float = 0.05
    gate_translation: float = 0.010          # meters
    gate_rotation: float = math.radians(5.0)  # radians
    trans_error_frac: float = 0.02
    rot_error_frac: float = 0.03
    rot_trans_coupling: float = 0.1          # rad of heading noise per meter driven
    estimate_top_fraction: float = 0.05
    map_size_x: float = 7.0                  # 7 x 5 m = 35 m^2 default extent
    map_size_y: float = 5.0
    map_origin_x: float | None = None        # None: center the map on the start pose
    map_origin_y: float | None = None
    measure_epsilon: float = 0.1
    unknown_score: float = 0.5
    beam_stride: int = 8

    def __post_init__(self):
        if self.particle_count < 1:
            raise ParameterError("particle_count must be at least 1")
        if not 0.0 < self.estimate_top_fraction <= 1.0:
            raise ParameterError("estimate_top_fraction must be in (0, 1]")
        for name in ("cell_resolution", "gate_translation", "gate_rotation",
                     "map_size_x", "map_size_y", "beam_stride"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        for name in ("trans_error_frac", "rot_error_frac", "rot_trans_coupling",
                     "measure_epsilon", "unknown_score"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")


class ParticleSet:
    """Ensemble storage: poses (N, 3) and weights (N,), kept in sync."""

    __slots__ = ("poses", "weights")

    def __init__(self, poses: np.ndarray, weights: np.ndarray):
        self.poses = np.asarray(poses, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if self.poses.ndim != 2 or self.poses.shape[1] != 3 \
                or self.weights.shape != (self.poses.shape[0],):
            raise ParameterError("poses must be (N, 3) with matching weights")
        if np.any(self.weights < 0.0):
            raise ParameterError("weights must be non-negative")

    @classmethod
    def at_pose(cls, pose: Pose2D, count: int) -> "ParticleSet":
        poses = np.tile([pose.x, pose.y, pose.theta], (count, 1))
        return cls(poses, np.full(count, 1.0 / count))

    def __len__(self) -> int:
        return self.poses.shape[0]

    def particle(self, i: int) -> Particle:
        x, y, theta = self.poses[i]
        return Particle(Pose2D(x, y, theta), float(self.weights[i]))

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.poses.copy(), self.weights.copy())


@dataclass
class SlamState:
    config: SlamConfig
    particles: ParticleSet
    map: OccupancyGrid
    last_update_pose: Pose2D          # odometry frame, at the last accepted update
    odom_pose: Pose2D                 # integrated odometry since init
    accumulated: OdometryDelta = field(default_factory=OdometryDelta)
    last_estimate: Pose2D = Pose2D(0.0, 0.0, 0.0)
    weights_degenerate: bool = False  # set when measure had to fall back to uniform


def init(config: SlamConfig, initial_pose: Pose2D,
         map_origin: Pose2D | None = None) -> SlamState:
    """Fresh filter: all particles at the initial pose, empty map.

    The map covers config.map_size_x x map_size_y meters, centered on the
    initial pose unless an explicit map_origin (argument or config) is
    given.
    """
    if map_origin is None:
        if config.map_origin_x is not None and config.map_origin_y is not None:
            map_origin = Pose2D(config.map_origin_x, config.map_origin_y, 0.0)
        else:
            map_origin = Pose2D(initial_pose.x - config.map_size_x / 2.0,
                                initial_pose.y - config.map_size_y / 2.0, 0.0)
    grid = OccupancyGrid(config.cell_resolution,
                         round(config.map_size_x / config.cell_resolution),
                         round(config.map_size_y / config.cell_resolution),
                         map_origin)
    return SlamState(
        config=config,
        particles=ParticleSet.at_pose(initial_pose, config.particle_count),
        map=grid,
        last_update_pose=initial_pose,
        odom_pose=initial_pose,
        accumulated=OdometryDelta(),
        last_estimate=initial_pose,
    )


def should_update(accumulated: OdometryDelta, config: SlamConfig) -> bool:
    """Gate: at least 10 mm of translation or 5 degrees of rotation."""
    return (accumulated.translation >= config.gate_translation
            or abs(accumulated.dtheta) >= config.gate_rotation)


def drift(particles: ParticleSet, delta: OdometryDelta, config: SlamConfig,
          rng: np.random.Generator) -> ParticleSet:
    """Advance every particle by the delta in its own heading, then spread.

    Translation noise is zero-mean Gaussian with sigma = 2% of the step
    length on each axis; heading noise sigma = 3% of the step rotation
    plus a translation-coupled term (rot_trans_coupling, rad/m).
    """
    x, y, theta = particles.poses.T
    nx, ny, ntheta = advance(x, y, theta, delta.ds_x, delta.ds_y, delta.dtheta)
    dist = delta.translation
    sigma_trans = config.trans_error_frac * dist
    sigma_rot = (config.rot_error_frac * abs(delta.dtheta)
                 + config.trans_error_frac * dist * config.rot_trans_coupling)
    n = len(particles)
    if sigma_trans > 0.0:
        nx = nx + rng.normal(0.0, sigma_trans, n)
        ny = ny + rng.normal(0.0, sigma_trans, n)
    if sigma_rot > 0.0:
        ntheta = ntheta + rng.normal(0.0, sigma_rot, n)
    poses = np.column_stack([nx, ny, normalize_angles(ntheta)])
    return ParticleSet(poses, particles.weights.copy())


def _endpoint_scores(particles: ParticleSet, scan: LaserScan, grid: OccupancyGrid,
                     config: SlamConfig) -> np.ndarray | None:
    """Per-particle likelihood under the beam-endpoint model.

    Beam scores stay within [epsilon, 1 + epsilon] and at most a few
    hundred beams are used, so the plain product cannot underflow.
    """
    idx = np.flatnonzero(scan.valid)[::config.beam_stride]
    if idx.size == 0:
        return None
    beam_angles = scan.angles()[idx]
    r = scan.ranges[idx]
    lx = r * np.cos(beam_angles)
    ly = r * np.sin(beam_angles)

    x = particles.poses[:, 0:1]
    y = particles.poses[:, 1:2]
    theta = particles.poses[:, 2:3]
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    inv_res = 1.0 / grid.resolution
    cols = np.floor((x + lx * cos_t - ly * sin_t - grid.origin.x) * inv_res).astype(np.int64)
    rows = np.floor((y + lx * sin_t + ly * cos_t - grid.origin.y) * inv_res).astype(np.int64)
    inside = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
    flat = rows * grid.width + cols
    flat[~inside] = 0

    hits = grid.hit_count.ravel()[flat]
    total = hits + grid.miss_count.ravel()[flat]
    p_occ = hits / np.maximum(total, 1)
    score = np.where(inside & (total > 0),
                     p_occ + config.measure_epsilon,
                     config.unknown_score)
    return np.prod(score, axis=1)


def measure(particles: ParticleSet, scan: LaserScan, grid: OccupancyGrid,
            config: SlamConfig) -> tuple[ParticleSet, bool]:
    """Reweight particles by scan likelihood; weights normalized to one.

    Returns (particles, degenerate) where degenerate reports a fallback
    to uniform weights (no usable likelihood).
    """
    likelihood = _endpoint_scores(particles, scan, grid, config)
    n = len(particles)
    if likelihood is None:
        return ParticleSet(particles.poses.copy(), particles.weights.copy()), False
    total = likelihood.sum()
    if not np.isfinite(total) or total <= 0.0:
        return ParticleSet(particles.poses.copy(), np.full(n, 1.0 / n)), True
    return ParticleSet(particles.poses.copy(), likelihood / total), False


def resample(particles: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Low-variance (systematic) resampling to uniform weights.

    Each particle is copied floor(N*w) or ceil(N*w) times; with uniform
    input weights the output is exactly the input.
    """
    n = len(particles)
    cumulative = np.cumsum(particles.weights)
    if cumulative[-1] <= 0.0:
        raise ParameterError("cannot resample from all-zero weights")
    cumulative /= cumulative[-1]
    positions = (rng.random() + np.arange(n)) / n
    chosen = np.searchsorted(cumulative, positions, side="left")
    chosen = np.minimum(chosen, n - 1)
    return ParticleSet(particles.poses[chosen].copy(), np.full(n, 1.0 / n))


def estimate_pose(particles: ParticleSet, config: SlamConfig) -> Pose2D:
    """Average pose of the top-weighted particles.

    Selects ceil(top_fraction * N) particles (ties broken by particle
    index); position is the arithmetic mean, heading the circular mean.
    """
    n = len(particles)
    if n == 0:
        raise ParameterError("cannot estimate from an empty particle set")
    k = math.ceil(config.estimate_top_fraction * n)
    order = np.lexsort((np.arange(n), -particles.weights))[:k]
    sel = particles.poses[order]
    x = float(np.mean(sel[:, 0]))
    y = float(np.mean(sel[:, 1]))
    heading = math.atan2(float(np.mean(np.sin(sel[:, 2]))),
                         float(np.mean(np.cos(sel[:, 2]))))
    return Pose2D(x, y, normalize_angle(heading))


def update_map(grid: OccupancyGrid, scan: LaserScan, pose: Pose2D) -> OccupancyGrid:
    """Fold one scan into the evidence counters at the given pose.

    Valid beams: every crossed cell before the endpoint gets miss += 1
    and the endpoint cell hit += 1.  Invalid beams are traversed to
    range_max as misses only.  Beams leaving the map are clipped.
    """
    angles = pose.theta + scan.angles()
    reach = np.where(scan.valid, scan.ranges, scan.range_max)
    ox = pose.x - grid.origin.x
    oy = pose.y - grid.origin.y
    ex = ox + np.cos(angles) * reach
    ey = oy + np.sin(angles) * reach
    miss_rows, miss_cols, end_rows, end_cols, end_inside = beam_cells(
        grid.resolution, ox, oy, ex, ey, grid.width, grid.height)
    np.add.at(grid.miss_count, (miss_rows, miss_cols), 1)
    hit_beams = scan.valid & end_inside
    np.add.at(grid.hit_count, (end_rows[hit_beams], end_cols[hit_beams]), 1)
    return grid


def slam_step(state: SlamState, delta: OdometryDelta, scan: LaserScan,
              rng: np.random.Generator) -> tuple[SlamState, Pose2D]:
    """One filter tick: accumulate odometry, and on gate pass run the
    full drift -> measure -> estimate -> map update -> resample cycle.

    Below the gate the state is unchanged apart from the accumulator and
    the previous estimate is returned.
    """
    state.odom_pose = integrate_pose(state.odom_pose, delta)
    state.accumulated = relative_delta(state.last_update_pose, state.odom_pose)
    if not should_update(state.accumulated, state.config):
        return state, state.last_estimate

    particles = drift(state.particles, state.accumulated, state.config, rng)
    particles, degenerate = measure(particles, scan, state.map, state.config)
    estimate = estimate_pose(particles, state.config)
    update_map(state.map, scan, estimate)
    state.particles = resample(particles, rng)
    state.last_update_pose = state.odom_pose
    state.accumulated = OdometryDelta()
    state.last_estimate = estimate
    state.weights_degenerate = degenerate
    return state, estimate
