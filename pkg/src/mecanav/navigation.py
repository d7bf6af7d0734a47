"""Path-transform navigation on the occupancy grid.

Planning runs on a per-cycle overlay: the current scan is merged into a
copy of the map (endpoints occupied, swept rays free) so transient
obstacles affect planning immediately while the persistent map stays
untouched.  The cost field combines 8-connected step length with an
obstacle-proximity danger term; with the danger weight at zero it
reduces to the plain shortest-path metric, which the tests exploit as an
oracle.  Unknown cells are untraversable.

A blocked planned path starts a timer; once the blockage persists past
the configured interval the path is recomputed on the merged grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from .core import (
    FREE,
    OCCUPIED,
    GridIndex,
    LaserScan,
    OccupancyGrid,
    Pose2D,
    Twist2D,
    normalize_angle,
    pose_error,
)
from .errors import BoundsError, GoalError, NoPathError, ParameterError
from .raycast import beam_cells

_SQRT2 = math.sqrt(2.0)
_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class NavConfig:
    robot_radius: float = 0.28
    clearance_weight: float = 2.0    # danger cost multiplier (alpha)
    danger_horizon: float = 0.5      # meters; obstacles farther than this cost nothing
    blocked_interval: float = 2.0    # seconds a blockage must persist before replanning
    goal_tolerance_trans: float = 0.05
    goal_tolerance_rot: float = 0.05
    max_speed: float = 0.3
    max_omega: float = 1.0
    lookahead: float = 0.3
    approach_gain: float = 2.0       # speed per meter of remaining distance
    rot_gain: float = 2.0

    def __post_init__(self):
        for name in ("robot_radius", "danger_horizon", "blocked_interval",
                     "goal_tolerance_trans", "goal_tolerance_rot", "max_speed",
                     "max_omega", "lookahead", "approach_gain", "rot_gain"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be positive")
        # zero disables the danger term, reducing the field to pure distance
        if self.clearance_weight < 0.0:
            raise ParameterError("clearance_weight must be non-negative")


class PlanningGrid:
    """Tri-state snapshot the planner works on (FREE/OCCUPIED/UNKNOWN)."""

    __slots__ = ("states", "resolution", "origin")

    def __init__(self, states: np.ndarray, resolution: float, origin: Pose2D):
        self.states = states
        self.resolution = resolution
        self.origin = origin

    @classmethod
    def from_occupancy(cls, grid: OccupancyGrid) -> "PlanningGrid":
        return cls(grid.classify(), grid.resolution, grid.origin)

    @property
    def width(self) -> int:
        return self.states.shape[1]

    @property
    def height(self) -> int:
        return self.states.shape[0]

    def cell_of(self, x: float, y: float) -> GridIndex:
        col = math.floor((x - self.origin.x) / self.resolution)
        row = math.floor((y - self.origin.y) / self.resolution)
        if not (0 <= col < self.width and 0 <= row < self.height):
            raise BoundsError(f"position ({x}, {y}) outside planning grid")
        return GridIndex(col, row)

    def cell_center(self, col: int, row: int) -> tuple[float, float]:
        return (self.origin.x + (col + 0.5) * self.resolution,
                self.origin.y + (row + 0.5) * self.resolution)


def merge_scan(static_map: OccupancyGrid, scan: LaserScan | None,
               pose: Pose2D) -> PlanningGrid:
    """Overlay the current scan on the map classification.

    Swept ray cells become free, every scan endpoint cell becomes
    occupied (scan wins over the map); the map itself is not touched.
    """
    merged = PlanningGrid.from_occupancy(static_map)
    if scan is None:
        return merged
    angles = pose.theta + scan.angles()
    reach = np.where(scan.valid, scan.ranges, scan.range_max)
    ox = pose.x - static_map.origin.x
    oy = pose.y - static_map.origin.y
    miss_rows, miss_cols, end_rows, end_cols, end_inside = beam_cells(
        static_map.resolution, ox, oy,
        ox + np.cos(angles) * reach, oy + np.sin(angles) * reach,
        static_map.width, static_map.height)
    merged.states[miss_rows, miss_cols] = FREE
    hit = scan.valid & end_inside
    merged.states[end_rows[hit], end_cols[hit]] = OCCUPIED
    return merged


def obstacle_transform(grid: PlanningGrid) -> np.ndarray:
    """Exact Euclidean distance to the nearest occupied (or unknown) cell.

    Distances are cell-boundary free: an occupied cell itself is 0, its
    orthogonal neighbor one cell size away.  A grid with no obstacle at
    all is +inf everywhere.
    """
    blocked = grid.states != FREE
    if not blocked.any():
        return np.full(grid.states.shape, np.inf)
    distances = ndimage.distance_transform_edt(~blocked)
    return distances * grid.resolution


@dataclass
class CostField:
    """Cost-to-goal per cell, +inf where unreachable."""

    costs: np.ndarray
    goal: Pose2D
    goal_cell: GridIndex
    resolution: float
    origin: Pose2D

    def cell_of(self, x: float, y: float) -> GridIndex:
        col = math.floor((x - self.origin.x) / self.resolution)
        row = math.floor((y - self.origin.y) / self.resolution)
        if not (0 <= col < self.costs.shape[1] and 0 <= row < self.costs.shape[0]):
            raise BoundsError(f"position ({x}, {y}) outside cost field")
        return GridIndex(col, row)


def path_transform(grid: PlanningGrid, goal: Pose2D, cfg: NavConfig) -> CostField:
    """Cost-to-goal field over free cells with enough clearance.

    Propagates from the goal over cells whose obstacle distance is at
    least robot_radius; moving into a cell costs the step length plus
    clearance_weight * max(0, danger_horizon - obstacle_distance).
    """
    height, width = grid.states.shape
    dist = obstacle_transform(grid)
    try:
        goal_cell = grid.cell_of(goal.x, goal.y)
    except BoundsError as exc:
        raise GoalError(str(exc)) from exc
    if grid.states[goal_cell.row, goal_cell.col] != FREE:
        raise GoalError("goal cell is not free")
    if dist[goal_cell.row, goal_cell.col] < cfg.robot_radius:
        raise GoalError("goal lies inside the inflation radius")

    traversable = (grid.states == FREE) & (dist >= cfg.robot_radius)
    danger = np.maximum(0.0, cfg.danger_horizon - dist)
    n = width * height
    ids = np.arange(n).reshape(height, width)
    res = grid.resolution

    def shifted(arr, dr, dc):
        # paired views: element i of src is the cell, of dst its (dr, dc) neighbor
        src = arr[max(0, -dr):height - max(0, dr), max(0, -dc):width - max(0, dc)]
        dst = arr[max(0, dr):height - max(0, -dr), max(0, dc):width - max(0, -dc)]
        return src, dst

    rows_from, cols_to, weights = [], [], []
    danger_flat = danger.ravel()
    for dr, dc in _NEIGHBORS:
        src_ok, dst_ok = shifted(traversable, dr, dc)
        both = src_ok & dst_ok
        if not both.any():
            continue
        src_ids, dst_ids = shifted(ids, dr, dc)
        u = src_ids[both]
        v = dst_ids[both]
        step = res * (_SQRT2 if dr != 0 and dc != 0 else 1.0)
        rows_from.append(u)
        cols_to.append(v)
        weights.append(step + cfg.clearance_weight * danger_flat[v])

    costs = np.full(n, np.inf)
    goal_id = goal_cell.row * width + goal_cell.col
    if rows_from:
        graph = sparse.csr_matrix(
            (np.concatenate(weights),
             (np.concatenate(rows_from), np.concatenate(cols_to))),
            shape=(n, n))
        costs = csgraph.dijkstra(graph, directed=True, indices=goal_id)
    costs[goal_id] = 0.0
    field = costs.reshape(height, width)
    field[~traversable] = np.inf
    field[goal_cell.row, goal_cell.col] = 0.0
    return CostField(field, goal, goal_cell, grid.resolution, grid.origin)


@dataclass
class Path:
    """Steepest-descent route: world-frame waypoints plus goal heading."""

    waypoints: np.ndarray  # (M, 2) cell centers, start first, goal last
    goal_heading: float

    def __len__(self) -> int:
        return self.waypoints.shape[0]


def extract_path(field: CostField, start: Pose2D) -> Path:
    """Walk the cost field from the start cell down to the goal cell."""
    try:
        cell = field.cell_of(start.x, start.y)
    except BoundsError as exc:
        raise NoPathError(str(exc)) from exc
    costs = field.costs
    height, width = costs.shape
    if not np.isfinite(costs[cell.row, cell.col]):
        raise NoPathError("start cell cannot reach the goal")

    res = field.resolution
    ox, oy = field.origin.x, field.origin.y
    waypoints = []
    col, row = cell.col, cell.row
    for _ in range(width * height):
        waypoints.append((ox + (col + 0.5) * res, oy + (row + 0.5) * res))
        if costs[row, col] == 0.0:
            break
        best = None
        best_cost = costs[row, col]
        for dr, dc in _NEIGHBORS:
            r, c = row + dr, col + dc
            if 0 <= r < height and 0 <= c < width and costs[r, c] < best_cost:
                best_cost = costs[r, c]
                best = (r, c)
        if best is None:  # cannot happen on a Dijkstra field; defensive
            raise NoPathError("descent stalled before reaching the goal")
        row, col = best
    else:
        raise NoPathError("descent exceeded the cell count without reaching the goal")
    return Path(np.array(waypoints), field.goal.theta)


def follow_path(path: Path, current: Pose2D, cfg: NavConfig,
                goal: Pose2D | None = None) -> Twist2D:
    """Carrot-point pursuit producing a body-frame velocity command.

    Strafes directly toward the farthest waypoint within the lookahead;
    rotation toward the goal heading happens only once the position
    tolerance is met.  Returns a zero twist when both tolerances hold.
    """
    if len(path) == 0:
        raise ParameterError("cannot follow an empty path")
    if goal is None:
        gx, gy = path.waypoints[-1]
        goal = Pose2D(gx, gy, path.goal_heading)

    trans_err, rot_err = pose_error(goal, current)
    if trans_err <= cfg.goal_tolerance_trans and rot_err <= cfg.goal_tolerance_rot:
        return Twist2D(0.0, 0.0, 0.0)
    if trans_err <= cfg.goal_tolerance_trans:
        turn = normalize_angle(goal.theta - current.theta)
        omega = max(-cfg.max_omega, min(cfg.max_omega, cfg.rot_gain * turn))
        return Twist2D(0.0, 0.0, omega)

    deltas = path.waypoints - (current.x, current.y)
    dists = np.hypot(deltas[:, 0], deltas[:, 1])
    nearest = int(np.argmin(dists))
    carrot = nearest
    for j in range(nearest, len(path)):
        if dists[j] <= cfg.lookahead:
            carrot = j
        else:
            break
    if dists[carrot] < 1e-9 and carrot < len(path) - 1:
        carrot += 1  # sitting exactly on a waypoint: aim at the next one
    if carrot == len(path) - 1:
        target = (goal.x, goal.y)
    else:
        target = path.waypoints[carrot]

    dx = target[0] - current.x
    dy = target[1] - current.y
    cos_t = math.cos(current.theta)
    sin_t = math.sin(current.theta)
    bx = dx * cos_t + dy * sin_t
    by = -dx * sin_t + dy * cos_t
    norm = math.hypot(bx, by)
    if norm < 1e-12:
        return Twist2D(0.0, 0.0, 0.0)
    speed = min(cfg.max_speed, cfg.approach_gain * trans_err)
    return Twist2D(bx / norm * speed, by / norm * speed, 0.0)


# navigate_tick status values
ACTIVE = "active"
REACHED = "reached"
REPLANNED = "replanned"
BLOCKED = "blocked"


class Navigator:
    """Goal-session state machine around the planner and follower.

    Single owner per goal session; each tick takes a read-only map
    snapshot, so SLAM updates and planning may interleave across ticks
    but never within one.
    """

    def __init__(self, nav_map: OccupancyGrid, cfg: NavConfig | None = None):
        self.map = nav_map
        self.cfg = cfg or NavConfig()
        self.goal: Pose2D | None = None
        self.path: Path | None = None
        self.blocked_time = 0.0

    def set_map(self, nav_map: OccupancyGrid):
        self.map = nav_map

    def set_goal(self, goal: Pose2D):
        self.goal = goal
        self.path = None
        self.blocked_time = 0.0

    def _plan(self, grid: PlanningGrid, pose: Pose2D) -> Path | None:
        try:
            field = path_transform(grid, self.goal, self.cfg)
        except GoalError:
            return None
        try:
            return extract_path(field, pose)
        except NoPathError:
            # The robot's own cell can fall inside the scan-inflated
            # region while it stands next to a fresh obstacle; start the
            # descent from the nearest reachable cell instead.
            start = self._nearest_reachable(field, pose)
            if start is None:
                return None
            return extract_path(field, start)

    def _nearest_reachable(self, field: CostField, pose: Pose2D,
                           window_m: float = 0.4) -> Pose2D | None:
        res = field.resolution
        col = int((pose.x - field.origin.x) / res)
        row = int((pose.y - field.origin.y) / res)
        height, width = field.costs.shape
        w = int(math.ceil(window_m / res))
        r0, r1 = max(0, row - w), min(height, row + w + 1)
        c0, c1 = max(0, col - w), min(width, col + w + 1)
        sub = field.costs[r0:r1, c0:c1]
        finite = np.isfinite(sub)
        if not finite.any():
            return None
        rows, cols = np.nonzero(finite)
        cx = field.origin.x + (cols + c0 + 0.5) * res
        cy = field.origin.y + (rows + r0 + 0.5) * res
        nearest = np.argmin(np.hypot(cx - pose.x, cy - pose.y))
        return Pose2D(cx[nearest], cy[nearest], pose.theta)

    def _path_blocked(self, grid: PlanningGrid, pose: Pose2D) -> bool:
        dist = obstacle_transform(grid)
        deltas = self.path.waypoints - (pose.x, pose.y)
        nearest = int(np.argmin(np.hypot(deltas[:, 0], deltas[:, 1])))
        for x, y in self.path.waypoints[nearest:]:
            col = int((x - grid.origin.x) / grid.resolution)
            row = int((y - grid.origin.y) / grid.resolution)
            if dist[row, col] < self.cfg.robot_radius:
                return True
        return False

    def tick(self, pose: Pose2D, scan: LaserScan | None, dt: float) -> tuple[Twist2D, str]:
        """One control cycle; returns the velocity command and the status."""
        if self.goal is None:
            raise GoalError("no goal set")
        trans_err, rot_err = pose_error(self.goal, pose)
        if (trans_err <= self.cfg.goal_tolerance_trans
                and rot_err <= self.cfg.goal_tolerance_rot):
            return Twist2D(0.0, 0.0, 0.0), REACHED

        grid = merge_scan(self.map, scan, pose)
        if self.path is None:
            self.path = self._plan(grid, pose)
            if self.path is None:
                return Twist2D(0.0, 0.0, 0.0), BLOCKED
            return follow_path(self.path, pose, self.cfg, self.goal), ACTIVE

        if self._path_blocked(grid, pose):
            self.blocked_time += dt
            if self.blocked_time >= self.cfg.blocked_interval:
                path = self._plan(grid, pose)
                if path is not None:
                    self.path = path
                    self.blocked_time = 0.0
                    return follow_path(self.path, pose, self.cfg, self.goal), REPLANNED
                # keep the old path and the elapsed timer: the replan is
                # retried every tick until a route exists again
                return Twist2D(0.0, 0.0, 0.0), BLOCKED
            # wait out short blockages without abandoning the path
            return Twist2D(0.0, 0.0, 0.0), ACTIVE
        self.blocked_time = 0.0
        return follow_path(self.path, pose, self.cfg, self.goal), ACTIVE
