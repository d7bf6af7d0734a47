"""Acceptance suite: one test per release criterion, each printing a
pass/fail line with the measured value against its tolerance.

Run `pytest tests/test_acceptance.py -v -s` to see the lines as they
complete.
"""

import heapq
import math
import time

import numpy as np

from mecanav.bench import Fbm2Scenario, run_fbm2, run_tbm4
from mecanav.cli import EXIT_OK, main
from mecanav.core import OCCUPIED, FREE, Pose2D, Twist2D
from mecanav.kinematics import (
    KinematicParams,
    OdometryDelta,
    body_delta,
    inverse_kinematics,
    odometry_step,
)
from mecanav.navigation import NavConfig, PlanningGrid, obstacle_transform, path_transform
from mecanav.pipeline import StackSession
from mecanav.simulator import LidarModel, MecanumSimulator, SensorNoise, simulate_scan
from mecanav.slam import ParticleSet, SlamConfig, drift, init as slam_init, slam_step
from mecanav.worlds import (
    apartment_start,
    apartment_tour,
    apartment_world,
    empty_world,
    two_door_start,
    two_door_world,
)
from mecanav.core import WheelDistances


def report(criterion, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion} failed: {detail}"


class TestCriterion1KinematicRoundTrip:
    def test_inverse_forward_round_trip(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(101)
        k = KinematicParams(wheel_separation=0.4)
        dt = 0.01
        worst = 0.0
        for _ in range(1000):
            twist = Twist2D(*rng.uniform(-1.5, 1.5, 3))
            speeds = inverse_kinematics(twist, k)
            d = body_delta(WheelDistances(*(s * dt for s in speeds)), k)
            for got, want in ((d.ds_x, twist.vx * dt), (d.ds_y, twist.vy * dt),
                              (d.dtheta, twist.omega * dt)):
                err = abs(got - want) / max(abs(want), 1e-30) if want != 0 else abs(got)
                worst = max(worst, err)
        elapsed = time.perf_counter() - t0
        report(1, worst <= 1e-12 and elapsed < 1.0,
               f"max relative error {worst:.2e} (tol 1e-12), {elapsed:.2f}s (< 1s)")


class TestCriterion2OdometryClosure:
    def test_closed_square_path(self):
        t0 = time.perf_counter()
        k = KinematicParams(distance_per_tick=5e-5)
        sim = MecanumSimulator(empty_world(12.0, 12.0), Pose2D(6.0, 6.0, 0.0),
                               params=k, noise=SensorNoise(0.0, 0.0, 0))
        odo = Pose2D(6.0, 6.0, 0.0)
        steps = 0
        # 4 x 2 m legs (forward, strafe, back, strafe back) at 0.1 m/s, 100 Hz
        for twist in (Twist2D(0.1, 0, 0), Twist2D(0, 0.1, 0),
                      Twist2D(-0.1, 0, 0), Twist2D(0, -0.1, 0)):
            speeds = inverse_kinematics(twist, k)
            for _ in range(2000):
                _, ticks, _ = sim.step(speeds, 0.01)
                odo, _ = odometry_step(odo, ticks, k)
                steps += 1
        gt = sim.state.pose
        err = math.hypot(odo.x - gt.x, odo.y - gt.y)
        bound = 0.5 * k.distance_per_tick * steps
        elapsed = time.perf_counter() - t0
        report(2, err <= bound and err <= 0.02 and bound <= 0.2 and elapsed < 5.0,
               f"odometry error {err:.2e} m over {steps} steps "
               f"(bound {bound:.3f} m, expected <= 0.02 m), {elapsed:.2f}s (< 5s)")


class TestCriterion3DriftStatistics:
    def test_empirical_sigmas(self):
        t0 = time.perf_counter()
        cfg = SlamConfig()
        n = 100_000
        parts = ParticleSet.at_pose(Pose2D(0, 0, 0), n)
        out = drift(parts, OdometryDelta(1.0, 0, 0), cfg, np.random.default_rng(33))
        sigma_t = float(np.std(out.poses[:, 0] - 1.0))
        se_t = 0.02 / math.sqrt(2 * n)
        out = drift(parts, OdometryDelta(0, 0, 1.0), cfg, np.random.default_rng(34))
        sigma_r = float(np.std(out.poses[:, 2] - 1.0))
        se_r = 0.03 / math.sqrt(2 * n)
        ok_t = abs(sigma_t - 0.02) <= 3 * se_t
        ok_r = abs(sigma_r - 0.03) <= 3 * se_r
        elapsed = time.perf_counter() - t0
        report(3, ok_t and ok_r and elapsed < 10.0,
               f"translation sigma {sigma_t:.5f} (2% +- {3 * se_t:.5f}), "
               f"rotation sigma {sigma_r:.5f} (3% +- {3 * se_r:.5f}), "
               f"{elapsed:.2f}s (< 10s)")


def dijkstra_oracle(traversable, res, goal_rc):
    height, width = traversable.shape
    dist = np.full((height, width), np.inf)
    dist[goal_rc] = 0.0
    heap = [(0.0, *goal_rc)]
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                rr, cc = r + dr, c + dc
                if 0 <= rr < height and 0 <= cc < width and traversable[rr, cc]:
                    nd = d + res * (math.sqrt(2.0) if dr and dc else 1.0)
                    if nd < dist[rr, cc]:
                        dist[rr, cc] = nd
                        heapq.heappush(heap, (nd, rr, cc))
    return dist


class TestCriterion4PathTransformOracle:
    def test_alpha_zero_matches_dijkstra(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(404)
        cfg = NavConfig(robot_radius=0.04, clearance_weight=0.0)
        mismatches = 0
        for _ in range(20):
            blocked = rng.random((50, 50)) < 0.2
            states = np.where(blocked, OCCUPIED, FREE).astype(np.int8)
            grid = PlanningGrid(states, 0.05, Pose2D(0, 0, 0))
            dist = obstacle_transform(grid)
            traversable = (states == FREE) & (dist >= cfg.robot_radius)
            cells = np.argwhere(traversable)
            gr, gc = cells[rng.integers(len(cells))]
            goal = Pose2D((gc + 0.5) * 0.05, (gr + 0.5) * 0.05, 0.0)
            field = path_transform(grid, goal, cfg)
            oracle = dijkstra_oracle(traversable, 0.05, (gr, gc))
            finite = np.isfinite(oracle)
            if not np.array_equal(np.isfinite(field.costs), finite):
                mismatches += 1
            elif not np.array_equal(field.costs[finite], oracle[finite]):
                mismatches += 1
        elapsed = time.perf_counter() - t0
        report(4, mismatches == 0 and elapsed < 10.0,
               f"{20 - mismatches}/20 random 50x50 grids match the independent "
               f"Dijkstra exactly, {elapsed:.2f}s (< 10s)")


class TestCriterion5SlamEndToEnd:
    def test_apartment_loop(self):
        t0 = time.perf_counter()
        world = apartment_world()
        session = StackSession(world, apartment_start(),
                               noise=SensorNoise(0.5, 0.01, seed=7), slam_seed=3)
        errors = []
        original = session._scan_update

        def tracked():
            scan = original()
            gt = session.ground_truth
            est = session.estimate
            errors.append(math.hypot(est.x - gt.x, est.y - gt.y))
            return scan

        session._scan_update = tracked
        tour = apartment_tour()
        length = sum(math.hypot(b[0] - a[0], b[1] - a[1])
                     for a, b in zip(tour, tour[1:]))
        session.run_mapping_tour(tour)
        ate = float(np.mean(errors))

        slam_map = session.slam_state.map
        observed = slam_map.observed()
        states = slam_map.classify()
        gt_occ = world.occupied_mask(0.0)
        agree = ((states == OCCUPIED) & gt_occ) | ((states == FREE) & ~gt_occ)
        agreement = agree[observed].sum() / observed.sum()
        elapsed = time.perf_counter() - t0
        report(5, ate <= 0.10 and agreement >= 0.90 and elapsed < 60.0,
               f"tour {length:.1f} m, mean trajectory error {ate:.4f} m (<= 0.10), "
               f"map agreement {agreement * 100:.1f}% (>= 90%) on "
               f"{int(observed.sum())} observed cells, {elapsed:.1f}s (< 60s)")


class TestCriterion6Fbm2Reproduction:
    def test_three_rounds_top_three(self):
        t0 = time.perf_counter()
        scenario = Fbm2Scenario(
            world=apartment_world(), start=apartment_start(),
            tour=tuple(apartment_tour()), goal_count=5,
            noise=SensorNoise(0.5, 0.01, seed=11), seed=21)
        rep = run_fbm2(scenario, rounds=3, top_k=3)
        agg = rep.aggregate()
        elapsed = time.perf_counter() - t0
        ok = (agg["translation_mean"] <= 0.15 and agg["rotation_mean"] <= 0.10
              and agg["hits"] == 0 and elapsed < 180.0)
        report(6, ok,
               f"top-3 mean translation {agg['translation_mean']:.4f} m (<= 0.15, "
               f"reference 0.12), rotation {agg['rotation_mean']:.4f} rad (<= 0.10, "
               f"reference 0.09), hits {agg['hits']} (== 0), "
               f"{agg['reached']}/{agg['goals']} goals, {elapsed:.0f}s (< 180s)")


class TestCriterion7Tbm4BlockedPath:
    def test_ten_seeded_runs(self):
        t0 = time.perf_counter()
        nav_cfg = NavConfig(max_speed=0.5)
        goal = Pose2D(1.7, 4.0, math.pi / 2)
        successes = 0
        for seed in range(10):
            world = two_door_world(block_at=2.0)
            leg = run_tbm4(world, [goal], two_door_start(),
                           noise=SensorNoise(0.5, 0.01, seed=seed),
                           nav_config=nav_cfg, seed=seed, timeout=90.0)[0]
            if leg.reached and leg.replanned:
                successes += 1
        elapsed = time.perf_counter() - t0
        report(7, successes == 10 and elapsed < 60.0,
               f"{successes}/10 seeded runs replanned and reached the goal "
               f"through the alternative door, {elapsed:.0f}s (< 60s)")


class TestCriterion8PerformanceBudget:
    def test_slam_step_median(self):
        world = apartment_world()
        pose = Pose2D(1.0, 1.0, 0.2)
        scan = simulate_scan(world, pose, LidarModel())
        assert scan.beam_count == 683
        state = slam_init(SlamConfig(), pose, map_origin=Pose2D(0, 0, 0))
        assert state.config.particle_count == 1000
        rng = np.random.default_rng(0)
        times = []
        for _ in range(30):
            t0 = time.perf_counter()
            state, _ = slam_step(state, OdometryDelta(0.03, 0.0, 0.0), scan, rng)
            times.append(time.perf_counter() - t0)
        median = sorted(times)[len(times) // 2] * 1000
        report("8a", median <= 50.0,
               f"slam_step median {median:.1f} ms (<= 50 ms, 1000 particles, "
               f"683 beams, 0.05 m grid)")

    def test_path_transform_median(self):
        rng = np.random.default_rng(1)
        blocked = rng.random((100, 140)) < 0.1
        states = np.where(blocked, OCCUPIED, FREE).astype(np.int8)
        grid = PlanningGrid(states, 0.05, Pose2D(0, 0, 0))
        cfg = NavConfig(robot_radius=0.04)
        dist = obstacle_transform(grid)
        cells = np.argwhere((states == FREE) & (dist >= cfg.robot_radius))
        gr, gc = cells[len(cells) // 2]
        goal = Pose2D((gc + 0.5) * 0.05, (gr + 0.5) * 0.05, 0)
        times = []
        for _ in range(21):
            t0 = time.perf_counter()
            path_transform(grid, goal, cfg)
            times.append(time.perf_counter() - t0)
        median = sorted(times)[len(times) // 2] * 1000
        report("8b", median <= 20.0,
               f"path_transform median {median:.1f} ms (<= 20 ms on 140x100)")


class TestCriterion9Determinism:
    def test_bench_byte_identical(self, tmp_path):
        scenario = tmp_path / "tbm4.scenario"
        scenario.write_text(
            "world=builtin:two_door\n"
            "benchmark=tbm4\n"
            "goal=1.7,4.0,1.5708\n"
            "timeout=90\n")
        reports = []
        for name in ("a.txt", "b.txt"):
            out = tmp_path / name
            code = main(["bench", "--scenario", str(scenario), "--seed", "12",
                         "--out", str(out)])
            assert code == EXIT_OK
            reports.append(out.read_bytes())
        identical = reports[0] == reports[1]
        report(9, identical,
               f"two `bench` invocations with seed 12 produced byte-identical "
               f"reports ({len(reports[0])} bytes)")
