"""Full-stack session: simulator -> odometry -> SLAM -> navigation.

The loop runs the simulator at the encoder rate (100 Hz) and fires a
scan, a SLAM update and a navigation tick every tenth step.  Navigation
can be driven either by the SLAM estimate (benchmark legs) or by ground
truth (the mapping tour, standing in for the human operator who drives
the robot while the map is built).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Pose2D, normalize_angle
from .kinematics import KinematicParams, inverse_kinematics, odometry_step, relative_delta
from .navigation import NavConfig, Navigator, REACHED, REPLANNED
from .simulator import (
    SCAN_EVERY,
    SIM_DT,
    MecanumSimulator,
    SensorNoise,
    World,
)
from .slam import SlamConfig, SlamState, init as slam_init, slam_step


@dataclass
class LegResult:
    """Outcome of driving toward one goal."""

    goal: Pose2D
    reached: bool
    replanned: bool
    translation_error: float
    rotation_error: float
    hits: int
    sim_time: float


@dataclass
class LogSink:
    """Collects pipeline events as (time, kind, payload) tuples."""

    records: list = field(default_factory=list)

    def add(self, t: float, kind: str, payload):
        self.records.append((round(t, 6), kind, payload))


class StackSession:
    """One robot run in one world, holding every stage of the stack."""

    def __init__(self, world: World, start: Pose2D,
                 params: KinematicParams | None = None,
                 noise: SensorNoise | None = None,
                 slam_config: SlamConfig | None = None,
                 nav_config: NavConfig | None = None,
                 slam_seed: int = 1,
                 prior_map: bool = False,
                 log: LogSink | None = None):
        self.params = params or KinematicParams()
        self.nav_config = nav_config or NavConfig()
        self.log = log

        base_slam = slam_config or SlamConfig()
        x0, y0, x1, y1 = world.extent()
        slam_cfg = replace(base_slam, map_size_x=x1 - x0, map_size_y=y1 - y0,
                           cell_resolution=world.resolution)
        self.sim = MecanumSimulator(world, start, params=self.params,
                                    noise=noise or SensorNoise())
        self.slam_state: SlamState = slam_init(slam_cfg, start, map_origin=world.origin)
        if prior_map:
            # map known from an earlier mapping run: seed the evidence
            # counters from the static world
            occ = world.static_grid.hit_count > world.static_grid.miss_count
            self.slam_state.map.hit_count[:] = occ * 5
            self.slam_state.map.miss_count[:] = (~occ) * 5
        self.slam_rng = np.random.default_rng(slam_seed)
        self.odom_pose = start
        self._last_scan_odom = start
        self.estimate = start
        self.navigator = Navigator(self.slam_state.map, self.nav_config)

    @property
    def ground_truth(self) -> Pose2D:
        return self.sim.state.pose

    def _scan_update(self):
        """Scan, fold odometry into SLAM, refresh the estimate; logs too."""
        scan = self.sim.scan()
        delta = relative_delta(self._last_scan_odom, self.odom_pose)
        self._last_scan_odom = self.odom_pose
        self.slam_state, self.estimate = slam_step(
            self.slam_state, delta, scan, self.slam_rng)
        if self.log is not None:
            gt = self.ground_truth
            self.log.add(self.sim.time, "SCAN", scan)
            self.log.add(self.sim.time, "GT", (gt.x, gt.y, gt.theta))
        return scan

    def run_leg(self, goal: Pose2D, use_ground_truth: bool,
                navigator: Navigator | None = None,
                timeout: float = 120.0) -> LegResult:
        """Drive toward one goal until reached or timed out."""
        nav = navigator or self.navigator
        nav.set_goal(goal)
        start_time = self.sim.time
        hits_before = self.sim.collision_count
        replanned = False
        speeds = (0.0, 0.0, 0.0, 0.0)
        reached = False
        step_idx = 0
        while self.sim.time - start_time < timeout:
            if step_idx % SCAN_EVERY == 0:
                scan = self._scan_update()
                pose = self.ground_truth if use_ground_truth else self.estimate
                cmd, status = nav.tick(pose, scan, SCAN_EVERY * SIM_DT)
                if status == REPLANNED:
                    replanned = True
                if status == REACHED:
                    reached = True
                    break
                speeds = inverse_kinematics(cmd, self.params)
                if self.log is not None:
                    self.log.add(self.sim.time, "CMD", (cmd.vx, cmd.vy, cmd.omega))
            _, ticks, _ = self.sim.step(speeds, SIM_DT)
            self.odom_pose, _ = odometry_step(self.odom_pose, ticks, self.params)
            if self.log is not None:
                self.log.add(self.sim.time, "TICKS", (ticks.fl, ticks.fr, ticks.rl, ticks.rr))
            step_idx += 1

        gt = self.ground_truth
        trans = math.hypot(goal.x - gt.x, goal.y - gt.y)
        rot = abs(normalize_angle(goal.theta - gt.theta))
        return LegResult(goal=goal, reached=reached, replanned=replanned,
                         translation_error=trans, rotation_error=rot,
                         hits=self.sim.collision_count - hits_before,
                         sim_time=self.sim.time - start_time)

    def run_mapping_tour(self, waypoints, timeout_per_leg: float = 60.0):
        """Build the map by driving a waypoint tour under operator control.

        The tour navigator plans on the ground-truth grid with ground
        truth poses (the operator can see); SLAM runs along and maps.
        """
        tour_cfg = replace(self.nav_config, goal_tolerance_trans=0.10,
                           goal_tolerance_rot=math.pi)
        tour_nav = Navigator(self.sim.world.static_grid, tour_cfg)
        for x, y in waypoints:
            self.run_leg(Pose2D(x, y, 0.0), use_ground_truth=True,
                         navigator=tour_nav, timeout=timeout_per_leg)

    def drive_commands(self, commands, duration: float | None = None):
        """Open-loop command playback: list of (time, Twist2D), held between
        entries.  Returns when `duration` (or the last command time) passes."""
        if not commands:
            return
        end_time = duration if duration is not None else commands[-1][0] + 1.0
        idx = 0
        speeds = (0.0, 0.0, 0.0, 0.0)
        step_idx = 0
        while self.sim.time < end_time:
            while idx < len(commands) and commands[idx][0] <= self.sim.time + 1e-9:
                twist = commands[idx][1]
                speeds = inverse_kinematics(twist, self.params)
                if self.log is not None:
                    self.log.add(self.sim.time, "CMD", (twist.vx, twist.vy, twist.omega))
                idx += 1
            if step_idx % SCAN_EVERY == 0:
                self._scan_update()
            _, ticks, _ = self.sim.step(speeds, SIM_DT)
            self.odom_pose, _ = odometry_step(self.odom_pose, ticks, self.params)
            if self.log is not None:
                self.log.add(self.sim.time, "TICKS", (ticks.fl, ticks.fr, ticks.rl, ticks.rr))
            step_idx += 1
