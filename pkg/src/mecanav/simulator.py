"""Deterministic 2D world simulation for a mecanum base.

Motion is the exact inverse of the odometry pipeline: commanded wheel
speeds become per-wheel distances, a body-frame delta, and a midpoint
pose update on the ground-truth pose.  Collisions against occupied cells
truncate motion at first contact.  Encoders emit integer ticks with a
per-wheel quantization carry plus optional additive Gaussian noise, and
the lidar ray-casts with exact grid traversal.

Dynamic obstacles are rasterized into the grid (cell centers inside the
shape) so ray casting and collision share one source of truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import LaserScan, OccupancyGrid, Pose2D, Twist2D, WheelDistances, WheelTicks
from .errors import BoundsError, ParameterError
from .kinematics import KinematicParams, OdometryDelta, body_delta, integrate_pose
from .raycast import cast_rays

# Simulation rates: encoders at 100 Hz, lidar every 10 ticks (10 Hz).
SIM_DT = 0.01
SCAN_EVERY = 10

DEFAULT_FOOTPRINT_RADIUS = 0.28  # circumscribed disc of the 0.45 x 0.35 m base


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned rectangle or disc, optionally time-gated.

    kind 'rect': params = (xmin, ymin, xmax, ymax)
    kind 'disc': params = (cx, cy, radius)
    Active while t_on <= t < t_off.
    """

    kind: str
    params: tuple[float, ...]
    t_on: float = 0.0
    t_off: float = math.inf

    def __post_init__(self):
        if self.kind == "rect":
            if len(self.params) != 4 or self.params[0] >= self.params[2] \
                    or self.params[1] >= self.params[3]:
                raise ParameterError(f"bad rect params {self.params}")
        elif self.kind == "disc":
            if len(self.params) != 3 or self.params[2] <= 0.0:
                raise ParameterError(f"bad disc params {self.params}")
        else:
            raise ParameterError(f"unknown obstacle kind {self.kind!r}")
        if self.t_off <= self.t_on:
            raise ParameterError("obstacle t_off must be greater than t_on")

    def active(self, time: float) -> bool:
        return self.t_on <= time < self.t_off

    def bounding_box(self) -> tuple[float, float, float, float]:
        if self.kind == "rect":
            return self.params
        cx, cy, r = self.params
        return (cx - r, cy - r, cx + r, cy + r)


@dataclass(frozen=True)
class SensorNoise:
    """Noise magnitudes and the RNG seed for one simulation run."""

    encoder_tick_noise: float = 0.5  # std-dev in ticks per interval
    lidar_range_noise: float = 0.0   # std-dev in meters
    seed: int = 0

    def __post_init__(self):
        if self.encoder_tick_noise < 0.0 or self.lidar_range_noise < 0.0:
            raise ParameterError("noise std-devs must be non-negative")


@dataclass(frozen=True)
class LidarModel:
    """240-degree scanning range finder, URG-04LX class defaults."""

    angle_min: float = -2.094
    angle_max: float = 2.094
    beam_count: int = 683
    range_min: float = 0.02
    range_max: float = 5.6

    def __post_init__(self):
        if self.beam_count < 2 or self.angle_max <= self.angle_min:
            raise ParameterError("lidar needs at least two beams spanning a positive arc")
        if not (0.0 <= self.range_min < self.range_max):
            raise ParameterError("lidar range bounds must satisfy 0 <= min < max")

    @property
    def angle_increment(self) -> float:
        return (self.angle_max - self.angle_min) / (self.beam_count - 1)

    def angles(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.beam_count)


@dataclass
class RobotState:
    """Ground-truth robot state; body_twist is the achieved twist."""

    pose: Pose2D
    body_twist: Twist2D = Twist2D()
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS


class World:
    """Static occupancy plus a schedule of dynamic obstacles.

    The static grid is strictly binary: every cell carries evidence, so
    there are no unknown cells.
    """

    def __init__(self, static_grid: OccupancyGrid, obstacles: tuple[Obstacle, ...] = ()):
        total = static_grid.hit_count + static_grid.miss_count
        if np.any(total == 0):
            raise ParameterError("world static grid must have no unknown cells")
        self.static_grid = static_grid
        self.obstacles = tuple(obstacles)
        self._static_occ = static_grid.hit_count > static_grid.miss_count
        for obs in self.obstacles:
            self._check_bounds(obs)
        self._mask_cache: dict[frozenset, np.ndarray] = {}

    @classmethod
    def from_occupied(cls, occupied: np.ndarray, resolution: float,
                      origin: Pose2D = Pose2D(0.0, 0.0, 0.0),
                      obstacles: tuple[Obstacle, ...] = ()) -> "World":
        occupied = np.asarray(occupied, dtype=bool)
        grid = OccupancyGrid(resolution, occupied.shape[1], occupied.shape[0], origin,
                             hit_count=occupied.astype(np.int64),
                             miss_count=(~occupied).astype(np.int64))
        return cls(grid, obstacles)

    @property
    def resolution(self) -> float:
        return self.static_grid.resolution

    @property
    def origin(self) -> Pose2D:
        return self.static_grid.origin

    def extent(self) -> tuple[float, float, float, float]:
        g = self.static_grid
        return (g.origin.x, g.origin.y,
                g.origin.x + g.width * g.resolution,
                g.origin.y + g.height * g.resolution)

    def _check_bounds(self, obs: Obstacle):
        xmin, ymin, xmax, ymax = obs.bounding_box()
        wx0, wy0, wx1, wy1 = self.extent()
        if xmin < wx0 or ymin < wy0 or xmax > wx1 or ymax > wy1:
            raise ParameterError(f"obstacle {obs} extends outside the world")

    def _rasterize(self, obs: Obstacle, into: np.ndarray):
        g = self.static_grid
        res = g.resolution
        xmin, ymin, xmax, ymax = obs.bounding_box()
        c0 = max(0, int((xmin - g.origin.x) / res) - 1)
        r0 = max(0, int((ymin - g.origin.y) / res) - 1)
        c1 = min(g.width - 1, int((xmax - g.origin.x) / res) + 1)
        r1 = min(g.height - 1, int((ymax - g.origin.y) / res) + 1)
        cols = np.arange(c0, c1 + 1)
        rows = np.arange(r0, r1 + 1)
        cx = g.origin.x + (cols + 0.5) * res
        cy = g.origin.y + (rows + 0.5) * res
        if obs.kind == "rect":
            inside = ((cx >= xmin) & (cx <= xmax))[None, :] & ((cy >= ymin) & (cy <= ymax))[:, None]
        else:
            ox, oy, r = obs.params
            inside = ((cx - ox) ** 2)[None, :] + ((cy - oy) ** 2)[:, None] <= r * r
        into[r0:r1 + 1, c0:c1 + 1] |= inside

    def occupied_mask(self, time: float = 0.0) -> np.ndarray:
        """Boolean occupancy at a simulation time (static + active obstacles)."""
        active = frozenset(i for i, o in enumerate(self.obstacles) if o.active(time))
        cached = self._mask_cache.get(active)
        if cached is None:
            cached = self._static_occ.copy()
            for i in active:
                self._rasterize(self.obstacles[i], cached)
            cached.flags.writeable = False
            self._mask_cache[active] = cached
        return cached


def spawn_obstacle(world: World, obstacle: Obstacle) -> World:
    """World with one more scheduled obstacle (bounds-checked)."""
    return World(world.static_grid, world.obstacles + (obstacle,))


def despawn_obstacle(world: World, index: int, time: float) -> World:
    """World where obstacle `index` disappears at `time`."""
    if not 0 <= index < len(world.obstacles):
        raise ParameterError(f"no obstacle with index {index}")
    obs = world.obstacles[index]
    if time <= obs.t_on:
        raise ParameterError("despawn time must be after the obstacle appears")
    updated = replace(obs, t_off=time)
    return World(world.static_grid, world.obstacles[:index] + (updated,) + world.obstacles[index + 1:])


def _clearance(occ: np.ndarray, res: float, gx: float, gy: float, window: float) -> float:
    """Distance from a grid-local point to the nearest occupied cell box.

    Only cells within `window` meters are examined; returns +inf when no
    occupied cell lies in the window (true distance then exceeds window).
    """
    height, width = occ.shape
    c = int(gx / res)
    r = int(gy / res)
    w = int(math.ceil(window / res)) + 1
    r0, r1 = max(0, r - w), min(height, r + w + 1)
    c0, c1 = max(0, c - w), min(width, c + w + 1)
    sub = occ[r0:r1, c0:c1]
    if not sub.any():
        return math.inf
    rows, cols = np.nonzero(sub)
    rows = rows + r0
    cols = cols + c0
    dx = np.maximum.reduce([cols * res - gx, gx - (cols + 1) * res, np.zeros(cols.size)])
    dy = np.maximum.reduce([rows * res - gy, gy - (rows + 1) * res, np.zeros(rows.size)])
    return float(np.min(np.hypot(dx, dy)))


def footprint_clearance(world: World, pose: Pose2D, radius: float, time: float = 0.0) -> float:
    """Signed clearance of the footprint disc: <= 0 means contact."""
    occ = world.occupied_mask(time)
    gx = pose.x - world.origin.x
    gy = pose.y - world.origin.y
    return _clearance(occ, world.resolution, gx, gy, radius + 4 * world.resolution) - radius


def simulate_scan(world: World, pose: Pose2D, model: LidarModel,
                  range_noise: float = 0.0, rng: np.random.Generator | None = None,
                  time: float = 0.0) -> LaserScan:
    """Ray-cast a scan from a pose against the world at a given time.

    Beams that hit nothing within range_max, or whose true range falls
    below range_min, are flagged invalid (sentinel -1).  Valid ranges get
    additive Gaussian noise clamped to [range_min, range_max].
    """
    if not world.static_grid.contains(pose.x, pose.y):
        raise BoundsError(f"scan pose ({pose.x}, {pose.y}) outside world bounds")
    occ = world.occupied_mask(time)
    angles = pose.theta + model.angles()
    true_ranges = cast_rays(occ, world.resolution,
                            pose.x - world.origin.x, pose.y - world.origin.y,
                            angles, model.range_max)
    valid = np.isfinite(true_ranges) & (true_ranges >= model.range_min)
    ranges = np.full(model.beam_count, -1.0)
    if valid.any():
        measured = true_ranges[valid]
        if range_noise > 0.0:
            if rng is None:
                raise ParameterError("range noise requires an RNG")
            measured = measured + rng.normal(0.0, range_noise, measured.size)
            measured = np.clip(measured, model.range_min, model.range_max)
        ranges[valid] = measured
    return LaserScan(model.angle_min, model.angle_increment,
                     model.range_min, model.range_max, ranges, valid)


class MecanumSimulator:
    """Single-owner simulation session.

    Owns the RNG, the simulation clock, the per-wheel encoder carries and
    the collision counter.  Read-only snapshots (pose, scans) may be
    shared freely between steps.
    """

    def __init__(self, world: World, initial_pose: Pose2D,
                 params: KinematicParams | None = None,
                 noise: SensorNoise | None = None,
                 lidar: LidarModel | None = None,
                 footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS):
        self.world = world
        self.params = params or KinematicParams()
        self.noise = noise or SensorNoise()
        self.lidar = lidar or LidarModel()
        self.rng = np.random.default_rng(self.noise.seed)
        self.time = 0.0
        self.collision_count = 0
        self._carry = np.zeros(4)
        self._in_contact = False
        if footprint_clearance(world, initial_pose, footprint_radius, 0.0) <= 0.0:
            raise ParameterError("initial pose overlaps an occupied cell")
        self.state = RobotState(pose=initial_pose, footprint_radius=footprint_radius)

    def spawn_obstacle(self, obstacle: Obstacle):
        """Add an obstacle; refuses shapes overlapping the robot right now."""
        candidate = spawn_obstacle(self.world, obstacle)
        if obstacle.active(self.time):
            clear = footprint_clearance(candidate, self.state.pose,
                                        self.state.footprint_radius, self.time)
            if clear <= 0.0:
                raise ParameterError("obstacle would overlap the robot at spawn time")
        self.world = candidate

    def despawn_obstacle(self, index: int, time: float | None = None):
        self.world = despawn_obstacle(self.world, index, self.time if time is None else time)

    def _clearance_at(self, pose: Pose2D, occ: np.ndarray, window: float) -> float:
        gx = pose.x - self.world.origin.x
        gy = pose.y - self.world.origin.y
        return (_clearance(occ, self.world.resolution, gx, gy, window)
                - self.state.footprint_radius)

    def step(self, wheel_speeds, dt: float) -> tuple[RobotState, WheelTicks, bool]:
        """Advance one interval; returns (state, emitted ticks, collision flag).

        Motion is truncated at first footprint contact; while in contact
        only motion that does not reduce clearance further is allowed.
        """
        if dt <= 0.0:
            raise ParameterError("dt must be positive")
        speeds = np.asarray(wheel_speeds, dtype=float)
        if speeds.shape != (4,):
            raise ParameterError("wheel_speeds must have four entries (fl, fr, rl, rr)")

        dist_full = speeds * dt
        delta = body_delta(WheelDistances(*dist_full), self.params)
        occ = self.world.occupied_mask(self.time + dt)
        window = self.state.footprint_radius + 4 * self.world.resolution + delta.translation

        pose0 = self.state.pose
        d0 = self._clearance_at(pose0, occ, window)
        pose1 = integrate_pose(pose0, delta)
        d1 = self._clearance_at(pose1, occ, window)

        if d1 > 0.0:
            scale = 1.0
            final_pose = pose1
            collided = False
        elif d0 <= 0.0:
            # Already touching: allow sliding/escape, refuse deeper penetration.
            if d1 >= d0 - 1e-12:
                scale, final_pose = 1.0, pose1
            else:
                scale, final_pose = 0.0, pose0
            collided = True
        else:
            # First contact inside the interval: bisect the motion fraction.
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                pose_mid = integrate_pose(pose0, self._scaled(delta, mid))
                if self._clearance_at(pose_mid, occ, window) > 0.0:
                    lo = mid
                else:
                    hi = mid
            scale = hi
            final_pose = integrate_pose(pose0, self._scaled(delta, scale))
            collided = True

        actual = self._scaled(delta, scale)
        achieved = Twist2D(actual.ds_x / dt, actual.ds_y / dt, actual.dtheta / dt)

        # Encoders: quantization carry per wheel plus additive tick noise.
        true_ticks = (dist_full * scale) / self.params.distance_per_tick
        self._carry += true_ticks
        base = np.rint(self._carry)
        self._carry -= base
        if self.noise.encoder_tick_noise > 0.0:
            base = base + np.rint(self.rng.normal(0.0, self.noise.encoder_tick_noise, 4))
        ticks = WheelTicks(*(int(t) for t in base))

        if collided and not self._in_contact:
            self.collision_count += 1
        self._in_contact = collided

        self.time += dt
        self.state = RobotState(pose=final_pose, body_twist=achieved,
                                footprint_radius=self.state.footprint_radius)
        return self.state, ticks, collided

    @staticmethod
    def _scaled(delta: OdometryDelta, s: float) -> OdometryDelta:
        return OdometryDelta(delta.ds_x * s, delta.ds_y * s, delta.dtheta * s)

    def scan(self) -> LaserScan:
        return simulate_scan(self.world, self.state.pose, self.lidar,
                             self.noise.lidar_range_noise, self.rng, self.time)
