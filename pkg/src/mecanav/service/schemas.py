"""Request/response models for the HTTP service.

File contents travel inline: text formats as strings, binary (PGM, PNG)
base64-encoded, so the service stays stateless and a thin client can
keep all file I/O on its side.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class PoseModel(BaseModel):
    x: float
    y: float
    theta: float = 0.0


class WorldPayload(BaseModel):
    """Either a builtin world name or an inline PGM + metadata pair."""

    builtin: str | None = None
    pgm_b64: str | None = None
    meta: str | None = None


class SimulateRequest(BaseModel):
    world: WorldPayload
    script: str = ""
    seed: int = 0
    duration: float | None = None
    config: dict[str, str] = Field(default_factory=dict)


class SimulateResponse(BaseModel):
    log: str
    collisions: int
    sim_time: float
    final_pose: PoseModel


class SlamRequest(BaseModel):
    log: str
    config: dict[str, str] = Field(default_factory=dict)


class SlamResponse(BaseModel):
    map_pgm_b64: str
    map_meta: str
    trajectory: str


class NavigateRequest(BaseModel):
    world: WorldPayload
    goal: PoseModel
    start: PoseModel | None = None
    seed: int = 0
    timeout: float = 120.0
    config: dict[str, str] = Field(default_factory=dict)


class NavigateResponse(BaseModel):
    log: str
    reached: bool
    replanned: bool
    translation_error: float
    rotation_error: float
    hits: int
    sim_time: float
    final_pose: PoseModel
    estimate: PoseModel


class BenchRequest(BaseModel):
    scenario: str
    world: WorldPayload | None = None  # inline world when the scenario references a file
    rounds: int = 1
    top_k: int = 3
    seed: int | None = None
    config: dict[str, str] = Field(default_factory=dict)


class BenchResponse(BaseModel):
    report: str


class RenderRequest(BaseModel):
    map_pgm_b64: str
    map_meta: str
    trajectory: str | None = None
    path: str | None = None
    scale: int = 1


class RenderResponse(BaseModel):
    png_b64: str


class ReplayRequest(BaseModel):
    log: str
    world: WorldPayload
    seed: int = 0
    duration: float | None = None
    config: dict[str, str] = Field(default_factory=dict)


class ReplayResponse(BaseModel):
    log: str


class HealthResponse(BaseModel):
    status: str
    version: str
