"""Navigation benchmarks at desk scale.

`run_fbm2` reproduces the random-goal navigation benchmark: per round
the stack maps the world on a tour, then serves goals on the SLAM
estimate alone; the ground-truth pose at the moment the stack declares
arrival is scored against the goal for translation and rotation
separately, and collision events count as hits.  `run_tbm4` runs the
blocked-path scenario: goals whose primary route gets blocked so an
alternative path has to be found.

All reported times are simulated seconds: reports must be reproducible
byte for byte under a fixed seed, which host wall-clock time would break.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Pose2D
from .errors import ParameterError
from .navigation import NavConfig, PlanningGrid, obstacle_transform
from .pipeline import LegResult, StackSession
from .simulator import SensorNoise, World
from .slam import SlamConfig


@dataclass(frozen=True)
class Fbm2Scenario:
    """Goal-navigation scenario: a world, a start, a tour and goals.

    Goals are either given explicitly or drawn uniformly over free space
    with at least goal_clearance to the nearest obstacle, using the
    scenario seed.
    """

    world: World
    start: Pose2D
    tour: tuple[tuple[float, float], ...]
    goals: tuple[Pose2D, ...] = ()
    goal_count: int = 5
    goal_clearance: float = 0.35
    noise: SensorNoise = SensorNoise()
    timeout: float = 120.0
    seed: int = 0

    def __post_init__(self):
        if not self.goals and self.goal_count < 1:
            raise ParameterError("scenario needs explicit goals or goal_count >= 1")


@dataclass
class RoundResult:
    goals: list[LegResult] = field(default_factory=list)

    @property
    def translation_mean(self) -> float:
        return float(np.mean([g.translation_error for g in self.goals]))

    @property
    def rotation_mean(self) -> float:
        return float(np.mean([g.rotation_error for g in self.goals]))

    @property
    def hits(self) -> int:
        return sum(g.hits for g in self.goals)

    @property
    def reached_count(self) -> int:
        return sum(1 for g in self.goals if g.reached)


@dataclass
class BenchReport:
    rounds: list[RoundResult] = field(default_factory=list)
    top_k: int = 3

    def aggregate(self) -> dict:
        return aggregate(self.rounds, self.top_k)


def draw_goals(world: World, count: int, clearance: float,
               rng: np.random.Generator) -> list[Pose2D]:
    """Uniform free-space goals with a clearance margin, seeded."""
    grid = PlanningGrid.from_occupancy(world.static_grid)
    dist = obstacle_transform(grid)
    eligible = np.argwhere(dist >= clearance)
    if eligible.size == 0:
        raise ParameterError(f"no free cell has {clearance} m clearance")
    rows = rng.integers(0, len(eligible), size=count)
    goals = []
    for i in rows:
        r, c = eligible[i]
        x, y = grid.cell_center(int(c), int(r))
        goals.append(Pose2D(x, y, rng.uniform(-math.pi, math.pi)))
    return goals


def _scenario_goals(scenario: Fbm2Scenario, round_index: int) -> list[Pose2D]:
    if scenario.goals:
        return list(scenario.goals)
    rng = np.random.default_rng([scenario.seed, round_index])
    return draw_goals(scenario.world, scenario.goal_count,
                      scenario.goal_clearance, rng)


def run_fbm2(scenario: Fbm2Scenario, rounds: int = 1,
             slam_config: SlamConfig | None = None,
             nav_config: NavConfig | None = None,
             top_k: int = 3) -> BenchReport:
    """Run the goal-navigation benchmark for a number of rounds."""
    report = BenchReport(top_k=top_k)
    for round_index in range(rounds):
        noise = SensorNoise(scenario.noise.encoder_tick_noise,
                            scenario.noise.lidar_range_noise,
                            seed=scenario.noise.seed + round_index)
        session = StackSession(scenario.world, scenario.start,
                               noise=noise,
                               slam_config=slam_config,
                               nav_config=nav_config,
                               slam_seed=scenario.seed + 1000 * (round_index + 1))
        session.run_mapping_tour(scenario.tour)
        result = RoundResult()
        for goal in _scenario_goals(scenario, round_index):
            result.goals.append(session.run_leg(goal, use_ground_truth=False,
                                                timeout=scenario.timeout))
        report.rounds.append(result)
    return report


def run_tbm4(world: World, goals, start: Pose2D,
             noise: SensorNoise | None = None,
             slam_config: SlamConfig | None = None,
             nav_config: NavConfig | None = None,
             seed: int = 0,
             timeout: float = 120.0) -> list[LegResult]:
    """Blocked-path scenario: serve goals in a world whose obstacle
    schedule blocks primary routes.

    The map is known beforehand (the robot mapped the place earlier), so
    obstacle times are absolute simulation time from run start.  Returns
    one result per goal with reached/replanned flags.
    """
    session = StackSession(world, start,
                           noise=noise or SensorNoise(seed=seed),
                           slam_config=slam_config,
                           nav_config=nav_config,
                           slam_seed=seed + 17,
                           prior_map=True)
    return [session.run_leg(goal, use_ground_truth=False, timeout=timeout)
            for goal in goals]


def aggregate(rounds: list[RoundResult], top_k: int) -> dict:
    """Means over the best top_k rounds.

    Rounds rank by achievement count (more goals reached first), then by
    combined mean error (lower first).  top_k beyond the round count
    uses every round.
    """
    if not rounds:
        raise ParameterError("aggregate needs at least one round")
    ranked = sorted(
        rounds,
        key=lambda r: (-r.reached_count, r.translation_mean + r.rotation_mean))
    best = ranked[:min(top_k, len(ranked))]
    return {
        "rounds_used": len(best),
        "translation_mean": float(np.mean([r.translation_mean for r in best])),
        "rotation_mean": float(np.mean([r.rotation_mean for r in best])),
        "hits": int(sum(r.hits for r in best)),
        "reached": int(sum(r.reached_count for r in best)),
        "goals": int(sum(len(r.goals) for r in best)),
    }
