import math

import numpy as np
import pytest

from mecanav.bench import (
    BenchReport,
    Fbm2Scenario,
    RoundResult,
    aggregate,
    draw_goals,
    run_tbm4,
)
from mecanav.core import Pose2D
from mecanav.errors import ParameterError
from mecanav.navigation import PlanningGrid, obstacle_transform
from mecanav.pipeline import LegResult
from mecanav.simulator import SensorNoise
from mecanav.worlds import apartment_world, two_door_start, two_door_world


def leg(trans, rot, reached=True, hits=0, replanned=False):
    return LegResult(goal=Pose2D(0, 0, 0), reached=reached, replanned=replanned,
                     translation_error=trans, rotation_error=rot, hits=hits,
                     sim_time=10.0)


def round_of(trans, rot):
    return RoundResult(goals=[leg(trans, rot)])


class TestAggregate:
    # per-round series as reported for the navigation benchmark:
    # translation (0.31, 0.11, 0.12), rotation (0.27, 0.0031, 0.09)
    SERIES = [(0.31, 0.27), (0.11, 0.0031), (0.12, 0.09)]

    def rounds(self):
        return [round_of(t, r) for t, r in self.SERIES]

    def test_top_three_mean(self):
        agg = aggregate(self.rounds(), top_k=3)
        assert agg["translation_mean"] == pytest.approx(0.18)
        assert agg["rotation_mean"] == pytest.approx((0.27 + 0.0031 + 0.09) / 3)
        assert agg["rounds_used"] == 3

    def test_single_round(self):
        agg = aggregate([round_of(0.2, 0.1)], top_k=3)
        assert agg["translation_mean"] == pytest.approx(0.2)
        assert agg["rounds_used"] == 1

    def test_top_one_takes_best_round(self):
        agg = aggregate(self.rounds(), top_k=1)
        assert agg["translation_mean"] == pytest.approx(0.11)
        assert agg["rotation_mean"] == pytest.approx(0.0031)

    def test_achievements_rank_before_errors(self):
        good = RoundResult(goals=[leg(0.5, 0.5)])
        better_errors_but_failed = RoundResult(goals=[leg(0.01, 0.01, reached=False)])
        agg = aggregate([good, better_errors_but_failed], top_k=1)
        assert agg["translation_mean"] == pytest.approx(0.5)
        assert agg["reached"] == 1

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            aggregate([], top_k=3)


class TestDrawGoals:
    def test_clearance_and_determinism(self):
        world = apartment_world()
        goals_a = draw_goals(world, 8, 0.35, np.random.default_rng(5))
        goals_b = draw_goals(world, 8, 0.35, np.random.default_rng(5))
        assert [(g.x, g.y, g.theta) for g in goals_a] == \
               [(g.x, g.y, g.theta) for g in goals_b]
        dist = obstacle_transform(PlanningGrid.from_occupancy(world.static_grid))
        for g in goals_a:
            col = int(g.x / 0.05)
            row = int(g.y / 0.05)
            assert dist[row, col] >= 0.35
            assert -math.pi <= g.theta < math.pi

    def test_impossible_clearance_rejected(self):
        with pytest.raises(ParameterError):
            draw_goals(apartment_world(), 1, 10.0, np.random.default_rng(0))


class TestScenarioValidation:
    def test_needs_goals_or_count(self):
        with pytest.raises(ParameterError):
            Fbm2Scenario(world=apartment_world(), start=Pose2D(0.7, 0.7, 0),
                         tour=((1.0, 1.0),), goal_count=0)


class TestTbm4:
    def test_control_case_no_blockage(self):
        world = two_door_world()
        legs = run_tbm4(world, [Pose2D(1.7, 3.6, math.pi / 2)], two_door_start(),
                        noise=SensorNoise(0.5, 0.01, seed=2), seed=2, timeout=60.0)
        assert legs[0].reached
        assert not legs[0].replanned
        assert legs[0].hits == 0

    def test_blocked_door_replans_and_reaches(self):
        world = two_door_world(block_at=3.0)
        legs = run_tbm4(world, [Pose2D(1.7, 4.0, math.pi / 2)], two_door_start(),
                        noise=SensorNoise(0.5, 0.01, seed=3), seed=3, timeout=90.0)
        assert legs[0].reached
        assert legs[0].replanned
        assert legs[0].hits == 0

    def test_permanently_blocked_world_fails_goal(self):
        # both doors shut from the start: no route exists
        base = two_door_world(block_at=0.0)
        occ = base.occupied_mask(0.0) | two_door_world(
            block_at=0.0, blocked_door="right").occupied_mask(0.0)
        world = type(base).from_occupied(occ, 0.05)
        legs = run_tbm4(world, [Pose2D(1.7, 4.0, math.pi / 2)], two_door_start(),
                        noise=SensorNoise(0.5, 0.01, seed=4), seed=4, timeout=12.0)
        assert not legs[0].reached


class TestReportInvariants:
    def test_round_means(self):
        rnd = RoundResult(goals=[leg(0.1, 0.2), leg(0.3, 0.4, hits=2)])
        assert rnd.translation_mean == pytest.approx(0.2)
        assert rnd.rotation_mean == pytest.approx(0.3)
        assert rnd.hits == 2
        assert rnd.reached_count == 2

    def test_report_aggregate_uses_all_when_topk_large(self):
        report = BenchReport(rounds=[round_of(0.1, 0.1), round_of(0.2, 0.2)], top_k=5)
        assert report.aggregate()["rounds_used"] == 2
