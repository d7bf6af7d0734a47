"""FastAPI service wrapping the robot stack.

Stateless job endpoints: every request carries its inputs (world files
inline, base64 for binary) and every response carries the outputs, so
multiple clients can share one instance.  Domain errors map to 400 with
the error message in the detail field.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..core import Pose2D
from ..errors import StackError
from ..formats import decode_bytes, parse_scenario, resolve_world
from . import jobs
from .schemas import (
    BenchRequest,
    BenchResponse,
    HealthResponse,
    NavigateRequest,
    NavigateResponse,
    RenderRequest,
    RenderResponse,
    ReplayRequest,
    ReplayResponse,
    SimulateRequest,
    SimulateResponse,
    SlamRequest,
    SlamResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="mecanav", version=__version__,
                  description="Mecanum robot stack: simulation, SLAM, "
                              "navigation and benchmarks as a service")

    def _world(payload):
        return jobs.resolve_world_payload(payload.builtin, payload.pgm_b64,
                                          payload.meta)

    def _guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StackError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        config = _guard(jobs.build_config, req.config)
        world = _guard(_world, req.world)
        return _guard(jobs.job_simulate, world, req.script, req.seed,
                      config, req.duration)

    @app.post("/slam", response_model=SlamResponse)
    def slam(req: SlamRequest):
        config = _guard(jobs.build_config, req.config)
        return _guard(jobs.job_slam, req.log, config)

    @app.post("/navigate", response_model=NavigateResponse)
    def navigate(req: NavigateRequest):
        config = _guard(jobs.build_config, req.config)
        world = _guard(_world, req.world)
        goal = Pose2D(req.goal.x, req.goal.y, req.goal.theta)
        start = Pose2D(req.start.x, req.start.y, req.start.theta) if req.start else None
        return _guard(jobs.job_navigate, world, goal, start, req.seed,
                      req.timeout, config)

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        config = _guard(jobs.build_config, req.config)
        spec = _guard(parse_scenario, req.scenario)
        if req.world is not None:
            world = _guard(_world, req.world)
        else:
            world = _guard(resolve_world, spec.world_ref)
        return _guard(jobs.job_bench, spec, world, req.rounds, req.top_k,
                      req.seed, config)

    @app.post("/render", response_model=RenderResponse)
    def render(req: RenderRequest):
        return _guard(jobs.job_render, decode_bytes(req.map_pgm_b64),
                      req.map_meta, req.trajectory, req.path, req.scale)

    @app.post("/replay", response_model=ReplayResponse)
    def replay(req: ReplayRequest):
        config = _guard(jobs.build_config, req.config)
        world = _guard(_world, req.world)
        return _guard(jobs.job_replay, req.log, world, req.seed,
                      req.duration, config)

    return app


app = create_app()
