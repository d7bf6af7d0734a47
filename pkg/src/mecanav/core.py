"""Shared geometric and grid types.

Conventions used by every module: x forward / y left in the body frame,
heading theta counter-clockwise positive and always normalized to
[-pi, pi).  Grids are axis-aligned, row-major numpy arrays indexed as
[row, col] where col runs along world x and row along world y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, DomainError

TWO_PI = 2.0 * math.pi

# Tri-state cell classification values.
FREE = 0
OCCUPIED = 1
UNKNOWN = -1

# Default probability thresholds for classifying counter evidence.
OCCUPIED_THRESHOLD = 0.65
FREE_THRESHOLD = 0.196


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi).

    Raises DomainError for non-finite input.
    """
    if not math.isfinite(theta):
        raise DomainError(f"cannot normalize non-finite angle {theta!r}")
    wrapped = math.fmod(theta + math.pi, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    result = wrapped - math.pi
    if result >= math.pi:  # guard against fmod rounding up to 2*pi
        result = -math.pi
    return result


def normalize_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized normalize_angle for numpy arrays."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(wrapped >= np.pi, wrapped - TWO_PI, wrapped)


@dataclass(frozen=True)
class Pose2D:
    """Planar pose: position in meters, heading in radians.

    theta is normalized to [-pi, pi) on construction; all components
    must be finite.
    """

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise DomainError(f"non-finite pose ({self.x}, {self.y}, {self.theta})")
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass(frozen=True)
class Twist2D:
    """Body-frame velocity command: vx forward, vy left (m/s), omega (rad/s)."""

    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.vx) and math.isfinite(self.vy) and math.isfinite(self.omega)):
            raise DomainError("non-finite twist")


@dataclass(frozen=True)
class WheelTicks:
    """Signed encoder tick counts over one interval (fl, fr, rl, rr)."""

    fl: int
    fr: int
    rl: int
    rr: int


@dataclass(frozen=True)
class WheelDistances:
    """Signed rolling distance per wheel over one interval, meters."""

    fl: float
    fr: float
    rl: float
    rr: float


@dataclass(frozen=True)
class GridIndex:
    """Integer cell coordinates (col along x, row along y)."""

    col: int
    row: int


class LaserScan:
    """Ordered range readings with angular extents.

    ranges and valid are parallel float/bool arrays.  Invalid readings
    (no return, or below minimum range) carry the sentinel -1.0 in
    ranges and False in valid; every valid range r satisfies
    range_min <= r <= range_max.
    """

    __slots__ = ("angle_min", "angle_increment", "range_min", "range_max", "ranges", "valid")

    def __init__(self, angle_min, angle_increment, range_min, range_max, ranges, valid=None):
        ranges = np.asarray(ranges, dtype=float)
        if ranges.ndim != 1 or ranges.size < 1:
            raise DomainError("scan needs at least one range reading")
        if angle_increment <= 0.0:
            raise DomainError("angle_increment must be positive")
        self.angle_min = float(angle_min)
        self.angle_increment = float(angle_increment)
        self.range_min = float(range_min)
        self.range_max = float(range_max)
        self.ranges = ranges
        if valid is None:
            valid = ranges >= 0.0
        self.valid = np.asarray(valid, dtype=bool)
        if self.valid.shape != self.ranges.shape:
            raise DomainError("valid mask must match ranges shape")
        live = self.ranges[self.valid]
        if live.size and (np.any(live < self.range_min) or np.any(live > self.range_max)):
            raise DomainError("valid ranges must lie within [range_min, range_max]")

    @property
    def beam_count(self) -> int:
        return int(self.ranges.size)

    def angles(self) -> np.ndarray:
        """Beam angles relative to the sensor x axis."""
        return self.angle_min + self.angle_increment * np.arange(self.beam_count)


class OccupancyGrid:
    """Fixed-resolution 2D grid with per-cell hit/miss evidence counters.

    A cell with hit + miss == 0 is unknown; otherwise its occupancy
    probability is hit / (hit + miss).  origin is the world pose of the
    corner of cell (0, 0); only axis-aligned grids are supported, so
    origin.theta must be 0.
    """

    __slots__ = ("resolution", "width", "height", "origin", "hit_count", "miss_count")

    def __init__(self, resolution, width, height, origin=Pose2D(0.0, 0.0, 0.0),
                 hit_count=None, miss_count=None):
        if resolution <= 0.0:
            raise DomainError("resolution must be positive")
        if width < 1 or height < 1:
            raise DomainError("grid needs at least one cell")
        if origin.theta != 0.0:
            raise DomainError("only axis-aligned grids are supported (origin.theta must be 0)")
        self.resolution = float(resolution)
        self.width = int(width)
        self.height = int(height)
        self.origin = origin
        shape = (self.height, self.width)
        self.hit_count = self._init_counter(hit_count, shape)
        self.miss_count = self._init_counter(miss_count, shape)

    @staticmethod
    def _init_counter(values, shape):
        if values is None:
            return np.zeros(shape, dtype=np.int64)
        arr = np.asarray(values, dtype=np.int64)
        if arr.shape != shape:
            raise DomainError(f"counter shape {arr.shape} does not match grid {shape}")
        if np.any(arr < 0):
            raise DomainError("evidence counters must be non-negative")
        return arr.copy()

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.width, self.height, self.origin,
                             self.hit_count, self.miss_count)

    def probability(self) -> np.ndarray:
        """Occupancy probability per cell; NaN where unknown."""
        total = self.hit_count + self.miss_count
        with np.errstate(invalid="ignore"):
            return np.where(total > 0, self.hit_count / np.maximum(total, 1), np.nan)

    def classify(self, occupied_threshold=OCCUPIED_THRESHOLD,
                 free_threshold=FREE_THRESHOLD) -> np.ndarray:
        """Tri-state map: OCCUPIED, FREE, or UNKNOWN per cell.

        Cells with evidence but probability between the thresholds stay
        UNKNOWN (ambiguous evidence is not traversable).
        """
        total = self.hit_count + self.miss_count
        p = self.hit_count / np.maximum(total, 1)
        states = np.full((self.height, self.width), UNKNOWN, dtype=np.int8)
        observed = total > 0
        states[observed & (p >= occupied_threshold)] = OCCUPIED
        states[observed & (p <= free_threshold)] = FREE
        return states

    def observed(self) -> np.ndarray:
        return (self.hit_count + self.miss_count) > 0

    def contains(self, x: float, y: float) -> bool:
        dx = x - self.origin.x
        dy = y - self.origin.y
        return (0.0 <= dx < self.width * self.resolution
                and 0.0 <= dy < self.height * self.resolution)

    def cell_center(self, index: GridIndex) -> tuple[float, float]:
        return (self.origin.x + (index.col + 0.5) * self.resolution,
                self.origin.y + (index.row + 0.5) * self.resolution)


def world_to_grid(x: float, y: float, grid: OccupancyGrid) -> GridIndex:
    """Convert a world position to the grid cell containing it.

    index = floor((p - origin) / resolution) per axis.  Raises
    BoundsError for positions outside the grid (never clamps).
    """
    col = math.floor((x - grid.origin.x) / grid.resolution)
    row = math.floor((y - grid.origin.y) / grid.resolution)
    if not (0 <= col < grid.width and 0 <= row < grid.height):
        raise BoundsError(
            f"position ({x}, {y}) maps to cell ({col}, {row}) outside "
            f"{grid.width}x{grid.height} grid")
    return GridIndex(col, row)


def pose_error(goal: Pose2D, achieved: Pose2D) -> tuple[float, float]:
    """Translation (m) and absolute rotation (rad) error between two poses."""
    translation = math.hypot(goal.x - achieved.x, goal.y - achieved.y)
    rotation = abs(normalize_angle(goal.theta - achieved.theta))
    return translation, rotation
