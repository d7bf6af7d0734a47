"""Command implementations behind the service endpoints.

Each job is a pure function from parsed inputs to output payloads; the
FastAPI layer only translates between HTTP and these calls, and the CLI
reaches them through HTTP.
"""

from __future__ import annotations

import io
import numpy as np

from ..bench import Fbm2Scenario, run_fbm2, run_tbm4
from ..core import Pose2D, Twist2D
from ..errors import FormatError, ParameterError
from ..formats import (
    ScenarioSpec,
    StackConfig,
    WorldInfo,
    build_stack_config,
    fbm2_report_text,
    grid_to_pgm,
    map_meta_text,
    parse_log,
    parse_trajectory,
    pgm_to_grid,
    pgm_to_world,
    record_to_scan,
    resolve_world,
    serialize_log,
    sink_to_records,
    tbm4_report_text,
    trajectory_text,
)
from ..kinematics import odometry_step, relative_delta
from ..pipeline import LogSink, StackSession
from ..render import render_map
from ..simulator import SensorNoise
from ..slam import init as slam_init, slam_step
from ..core import WheelTicks


def parse_script(text: str):
    """Simulation scripts: `cmd <t> <vx> <vy> <omega>`, `goal <x> <y> <theta>`,
    optional `start <x> <y> <theta>`; one directive per line."""
    commands, goals, start = [], [], None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "cmd" and len(parts) == 5:
                t, vx, vy, omega = (float(p) for p in parts[1:])
                commands.append((t, Twist2D(vx, vy, omega)))
            elif parts[0] == "goal" and len(parts) == 4:
                goals.append(Pose2D(*(float(p) for p in parts[1:])))
            elif parts[0] == "start" and len(parts) == 4:
                start = Pose2D(*(float(p) for p in parts[1:]))
            else:
                raise FormatError(f"unknown script directive {line!r}", i)
        except ValueError as exc:
            raise FormatError(f"bad script line {line!r}: {exc}", i) from exc
    commands.sort(key=lambda c: c[0])
    return commands, goals, start


def _session(world_info: WorldInfo, start: Pose2D | None, seed: int,
             config: StackConfig, prior_map: bool, log: LogSink | None) -> StackSession:
    start = start or world_info.start
    if start is None:
        raise ParameterError("no start pose: give one or use a world that declares it")
    noise = SensorNoise(config.noise.encoder_tick_noise,
                        config.noise.lidar_range_noise, seed=seed)
    return StackSession(world_info.world, start, params=config.kinematics,
                        noise=noise, slam_config=config.slam, nav_config=config.nav,
                        slam_seed=seed + 101, prior_map=prior_map, log=log)


def job_simulate(world_info: WorldInfo, script: str, seed: int,
                 config: StackConfig, duration: float | None) -> dict:
    """Run the simulator from a script; goal directives engage the full
    stack (on a known map), cmd directives play back open loop."""
    commands, goals, start = parse_script(script)
    if commands and goals:
        raise ParameterError("script mixes cmd and goal directives; use one kind")
    log = LogSink()
    session = _session(world_info, start, seed, config,
                       prior_map=bool(goals), log=log)
    if goals:
        for goal in goals:
            session.run_leg(goal, use_ground_truth=False)
    else:
        session.drive_commands(commands, duration)
    gt = session.ground_truth
    return {
        "log": serialize_log(sink_to_records(log)),
        "collisions": session.sim.collision_count,
        "sim_time": session.sim.time,
        "final_pose": {"x": gt.x, "y": gt.y, "theta": gt.theta},
    }


def job_slam(log_text: str, config: StackConfig) -> dict:
    """Replay TICKS + SCAN records through the filter; emit map + trajectory."""
    records = parse_log(log_text)
    if not records:
        raise FormatError("log contains no records")
    start = Pose2D(0.0, 0.0, 0.0)
    for rec in records:
        if rec.kind == "GT":
            start = Pose2D(*rec.values)
            break
    state = slam_init(config.slam, start)
    rng = np.random.default_rng(config.noise.seed)
    odom = start
    last_update_odom = start
    trajectory = []
    for rec in records:
        if rec.kind == "TICKS":
            odom, _ = odometry_step(odom, WheelTicks(*rec.values), config.kinematics)
        elif rec.kind == "SCAN":
            scan = record_to_scan(rec, config.lidar)
            delta = relative_delta(last_update_odom, odom)
            last_update_odom = odom
            state, estimate = slam_step(state, delta, scan, rng)
            trajectory.append((rec.t, estimate.x, estimate.y, estimate.theta))
    return {
        "map_pgm_b64": _b64(grid_to_pgm(state.map)),
        "map_meta": map_meta_text(state.map),
        "trajectory": trajectory_text(trajectory),
    }


def job_navigate(world_info: WorldInfo, goal: Pose2D, start: Pose2D | None,
                 seed: int, timeout: float, config: StackConfig) -> dict:
    """Drive to a single goal on a known map using the SLAM estimate."""
    log = LogSink()
    session = _session(world_info, start, seed, config, prior_map=True, log=log)
    leg = session.run_leg(goal, use_ground_truth=False, timeout=timeout)
    gt = session.ground_truth
    est = session.estimate
    return {
        "log": serialize_log(sink_to_records(log)),
        "reached": leg.reached,
        "replanned": leg.replanned,
        "translation_error": leg.translation_error,
        "rotation_error": leg.rotation_error,
        "hits": leg.hits,
        "sim_time": leg.sim_time,
        "final_pose": {"x": gt.x, "y": gt.y, "theta": gt.theta},
        "estimate": {"x": est.x, "y": est.y, "theta": est.theta},
    }


def job_bench(spec: ScenarioSpec, world_info: WorldInfo, rounds: int, top_k: int,
              seed: int | None, config: StackConfig) -> dict:
    """Run a scenario file's benchmark and serialize the report."""
    effective_seed = spec.seed if seed is None else seed
    start = spec.start or world_info.start
    if start is None:
        raise ParameterError("scenario has no start pose and the world declares none")
    if spec.benchmark == "tbm4":
        if not spec.goals:
            raise ParameterError("tbm4 scenarios need explicit goal= lines")
        noise = SensorNoise(spec.encoder_noise, spec.lidar_noise, seed=effective_seed)
        legs = run_tbm4(world_info.world, spec.goals, start, noise=noise,
                        slam_config=config.slam, nav_config=config.nav,
                        seed=effective_seed, timeout=spec.timeout)
        return {"report": tbm4_report_text(legs, effective_seed)}

    tour = spec.tour or world_info.tour
    if not tour:
        raise ParameterError("fbm2 scenarios need a mapping tour "
                             "(tour= in the scenario or the world metadata)")
    scenario = Fbm2Scenario(
        world=world_info.world,
        start=start,
        tour=tuple(tour),
        goals=tuple(spec.goals or ()),
        goal_count=spec.goal_count,
        goal_clearance=spec.goal_clearance,
        noise=SensorNoise(spec.encoder_noise, spec.lidar_noise, seed=effective_seed),
        timeout=spec.timeout,
        seed=effective_seed,
    )
    report = run_fbm2(scenario, rounds=rounds, slam_config=config.slam,
                      nav_config=config.nav, top_k=top_k)
    return {"report": fbm2_report_text(report, effective_seed)}


def job_render(map_pgm: bytes, map_meta: str, trajectory: str | None,
               path: str | None, scale: int) -> dict:
    grid = pgm_to_grid(map_pgm, map_meta)
    traj = parse_trajectory(trajectory) if trajectory else None
    overlay_path = parse_trajectory(path) if path else None
    image = render_map(grid, trajectory=traj, path=overlay_path, scale=scale)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return {"png_b64": _b64(buf.getvalue())}


def job_replay(log_text: str, world_info: WorldInfo, seed: int,
               duration: float | None, config: StackConfig) -> dict:
    """Re-simulate a log's CMD stream against a world; emits a fresh log."""
    records = parse_log(log_text)
    commands = [(r.t, Twist2D(*r.values)) for r in records if r.kind == "CMD"]
    if not commands:
        raise ParameterError("log contains no CMD records to replay")
    start = None
    for rec in records:
        if rec.kind == "GT":
            start = Pose2D(*rec.values)
            break
    log = LogSink()
    session = _session(world_info, start, seed, config, prior_map=False, log=log)
    session.drive_commands(commands, duration)
    return {"log": serialize_log(sink_to_records(log))}


def resolve_world_payload(builtin: str | None, pgm_b64: str | None,
                          meta: str | None) -> WorldInfo:
    from ..formats import decode_bytes

    if builtin:
        return resolve_world(f"builtin:{builtin}")
    if pgm_b64 is None or meta is None:
        raise ParameterError("world payload needs builtin or pgm_b64 + meta")
    return pgm_to_world(decode_bytes(pgm_b64), meta)


def _b64(data: bytes) -> str:
    from ..formats import encode_bytes

    return encode_bytes(data)


def build_config(overrides: dict[str, str]) -> StackConfig:
    return build_stack_config(overrides)
