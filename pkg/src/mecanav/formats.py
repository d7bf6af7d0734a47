"""File formats: run logs, PGM maps and worlds, configs, scenarios, reports.

Log format: line-delimited text, one record per line,
`<timestamp> <KIND> <fields...>` with space separation and fixed field
order.  Timestamps are fixed-point with microsecond precision; float
payload fields use repr (shortest round-trip), so parse(serialize(r))
reproduces every record bit for bit.

  TICKS fl fr rl rr             (integers)
  SCAN  angle_min angle_inc n r1..rn   (-1 marks an invalid reading)
  CMD   vx vy omega
  GT    x y theta

Map format: binary PGM (P5, maxval 255) plus a `<stem>.meta` sidecar.
Written pixels are 0 = occupied, 255 = free, 127 = unknown; on load,
values <= 89 are occupied, >= 205 free, anything between unknown (the
unknown gray band).  Image row 0 is the top of the picture and maps to
the highest grid row (y up).  World PGMs are strictly binary: pixel
values <= 127 are occupied, everything else free.

Config files are flat `key=value` lines; `#` starts a comment.  Every
SlamConfig/NavConfig/KinematicParams/SensorNoise/LidarModel field can be
overridden by its field name.
"""

from __future__ import annotations

import base64
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path as FilePath

import numpy as np

from .core import FREE, OCCUPIED, LaserScan, OccupancyGrid, Pose2D
from .errors import FormatError, ParameterError
from .kinematics import KinematicParams
from .navigation import NavConfig
from .simulator import LidarModel, Obstacle, SensorNoise, World
from .slam import SlamConfig
from . import worlds as builtin_worlds

LOG_KINDS = ("TICKS", "SCAN", "CMD", "GT")

# PGM pixel conventions
PGM_OCCUPIED = 0
PGM_FREE = 255
PGM_UNKNOWN = 127
OCCUPIED_MAX_PIXEL = 89   # pixels at or below: occupied
FREE_MIN_PIXEL = 205      # pixels at or above: free


@dataclass(frozen=True)
class LogRecord:
    """One log line: microsecond-quantized timestamp, kind, typed values."""

    t: float
    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in LOG_KINDS:
            raise ParameterError(f"unknown log record kind {self.kind!r}")
        object.__setattr__(self, "t", round(float(self.t), 6))
        if self.kind == "TICKS":
            if len(self.values) != 4:
                raise ParameterError("TICKS record needs four tick counts")
            object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        elif self.kind in ("CMD", "GT"):
            if len(self.values) != 3:
                raise ParameterError(f"{self.kind} record needs three fields")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        else:  # SCAN: angle_min, angle_inc, n, ranges...
            vals = (float(self.values[0]), float(self.values[1]), int(self.values[2]),
                    *(float(v) for v in self.values[3:]))
            if len(vals) != 3 + vals[2]:
                raise ParameterError("SCAN record length does not match its beam count")
            object.__setattr__(self, "values", vals)


def serialize_record(record: LogRecord) -> str:
    parts = [f"{record.t:.6f}", record.kind]
    for v in record.values:
        parts.append(str(v) if isinstance(v, int) else repr(float(v)))
    return " ".join(parts)


def parse_record(line: str, line_number: int | None = None) -> LogRecord:
    parts = line.split()
    if len(parts) < 2:
        raise FormatError(f"malformed log record {line!r}", line_number)
    try:
        t = float(parts[0])
        kind = parts[1]
        if kind == "TICKS":
            values = tuple(int(p) for p in parts[2:])
        elif kind == "SCAN":
            values = (float(parts[2]), float(parts[3]), int(parts[4]),
                      *(float(p) for p in parts[5:]))
        else:
            values = tuple(float(p) for p in parts[2:])
        return LogRecord(t, kind, values)
    except (ValueError, IndexError, ParameterError) as exc:
        raise FormatError(f"malformed log record: {exc}", line_number) from exc


def write_log(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(serialize_record(rec) + "\n")


def serialize_log(records) -> str:
    return "".join(serialize_record(r) + "\n" for r in records)


def parse_log(text: str) -> list[LogRecord]:
    records = []
    last_t = -math.inf
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rec = parse_record(line, i)
        if rec.t < last_t:
            raise FormatError("timestamps must be non-decreasing", i)
        last_t = rec.t
        records.append(rec)
    return records


def read_log(path) -> list[LogRecord]:
    try:
        text = FilePath(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read log {path}: {exc}") from exc
    return parse_log(text)


def scan_record(t: float, scan: LaserScan) -> LogRecord:
    ranges = np.where(scan.valid, scan.ranges, -1.0)
    return LogRecord(t, "SCAN", (scan.angle_min, scan.angle_increment,
                                 scan.beam_count, *ranges.tolist()))


def record_to_scan(record: LogRecord, lidar: LidarModel) -> LaserScan:
    """Rebuild a LaserScan; range bounds come from the lidar config
    (the wire format does not carry them).  Readings outside the device
    bounds are unusable and flagged invalid."""
    angle_min, angle_inc, n = record.values[0], record.values[1], record.values[2]
    ranges = np.array(record.values[3:], dtype=float)
    valid = (ranges >= lidar.range_min) & (ranges <= lidar.range_max)
    return LaserScan(angle_min, angle_inc, lidar.range_min, lidar.range_max,
                     ranges, valid)


def sink_to_records(sink) -> list[LogRecord]:
    """Convert pipeline LogSink entries into typed records."""
    out = []
    for t, kind, payload in sink.records:
        if kind == "SCAN":
            out.append(scan_record(t, payload))
        else:
            out.append(LogRecord(t, kind, tuple(payload)))
    return out


# --- PGM maps -----------------------------------------------------------

def _pgm_bytes(pixels: np.ndarray) -> bytes:
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n255\n".encode()
    return header + np.flipud(pixels).astype(np.uint8).tobytes()


def _parse_pgm(data: bytes) -> np.ndarray:
    # header: magic, width, height, maxval; comments allowed before maxval
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise FormatError("truncated PGM header", 1)
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        if data[pos:pos + 1].isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    pos += 1  # single whitespace after maxval
    if tokens[0] != b"P5":
        raise FormatError(f"not a binary PGM (magic {tokens[0]!r})", 1)
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise FormatError(f"unsupported PGM maxval {maxval}", 1)
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise FormatError("PGM pixel data shorter than header promises", 1)
    return np.flipud(np.frombuffer(body, dtype=np.uint8).reshape(height, width)).copy()


def grid_to_pgm(grid: OccupancyGrid) -> bytes:
    states = grid.classify()
    pixels = np.full(states.shape, PGM_UNKNOWN, dtype=np.uint8)
    pixels[states == OCCUPIED] = PGM_OCCUPIED
    pixels[states == FREE] = PGM_FREE
    return _pgm_bytes(pixels)


def map_meta_text(grid: OccupancyGrid) -> str:
    return (f"resolution={grid.resolution!r}\n"
            f"origin_x={grid.origin.x!r}\n"
            f"origin_y={grid.origin.y!r}\n"
            f"origin_theta={grid.origin.theta!r}\n"
            f"occupied_thresh=0.65\n"
            f"free_thresh=0.196\n")


def _parse_kv(text: str) -> tuple[dict, list]:
    """key=value lines -> dict; repeated keys collected into the list."""
    single: dict[str, str] = {}
    repeated: list[tuple[int, str, str]] = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"expected key=value, got {line!r}", i)
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key in ("obstacle", "goal"):
            repeated.append((i, key, value))
        else:
            single[key] = value
    return single, repeated


def pgm_to_grid(pgm: bytes, meta: str) -> OccupancyGrid:
    pixels = _parse_pgm(pgm)
    kv, _ = _parse_kv(meta)
    try:
        res = float(kv["resolution"])
        origin = Pose2D(float(kv.get("origin_x", 0.0)), float(kv.get("origin_y", 0.0)),
                        float(kv.get("origin_theta", 0.0)))
    except KeyError as exc:
        raise FormatError(f"map metadata missing {exc}") from exc
    height, width = pixels.shape
    hit = np.zeros(pixels.shape, dtype=np.int64)
    miss = np.zeros(pixels.shape, dtype=np.int64)
    hit[pixels <= OCCUPIED_MAX_PIXEL] = 1
    miss[pixels >= FREE_MIN_PIXEL] = 1
    return OccupancyGrid(res, width, height, origin, hit, miss)


def save_map(grid: OccupancyGrid, path):
    path = FilePath(path)
    path.write_bytes(grid_to_pgm(grid))
    path.with_suffix(".meta").write_text(map_meta_text(grid))


def load_map(path) -> OccupancyGrid:
    path = FilePath(path)
    try:
        pgm = path.read_bytes()
        meta = path.with_suffix(".meta").read_text()
    except OSError as exc:
        raise FormatError(f"cannot read map {path}: {exc}") from exc
    return pgm_to_grid(pgm, meta)


# --- worlds ---------------------------------------------------------------

def world_to_pgm(world: World) -> bytes:
    occ = world.static_grid.hit_count > world.static_grid.miss_count
    pixels = np.where(occ, PGM_OCCUPIED, PGM_FREE).astype(np.uint8)
    return _pgm_bytes(pixels)


def world_meta_text(world: World, tour=None, start: Pose2D | None = None) -> str:
    g = world.static_grid
    lines = [f"resolution={g.resolution!r}",
             f"origin_x={g.origin.x!r}",
             f"origin_y={g.origin.y!r}",
             f"origin_theta={g.origin.theta!r}"]
    if start is not None:
        lines.append(f"start={start.x!r},{start.y!r},{start.theta!r}")
    if tour:
        lines.append("tour=" + ";".join(f"{x!r},{y!r}" for x, y in tour))
    for obs in world.obstacles:
        t_off = "inf" if math.isinf(obs.t_off) else repr(obs.t_off)
        params = ",".join(repr(p) for p in obs.params)
        lines.append(f"obstacle={obs.kind},{params},{obs.t_on!r},{t_off}")
    return "\n".join(lines) + "\n"


def _parse_obstacle(value: str, line: int) -> Obstacle:
    parts = [p.strip() for p in value.split(",")]
    try:
        kind = parts[0]
        if kind == "rect":
            params = tuple(float(p) for p in parts[1:5])
            rest = parts[5:]
        elif kind == "disc":
            params = tuple(float(p) for p in parts[1:4])
            rest = parts[4:]
        else:
            raise FormatError(f"unknown obstacle kind {kind!r}", line)
        t_on = float(rest[0]) if rest else 0.0
        t_off = float(rest[1]) if len(rest) > 1 else math.inf
        return Obstacle(kind, params, t_on, t_off)
    except (ValueError, IndexError, ParameterError) as exc:
        raise FormatError(f"bad obstacle spec {value!r}: {exc}", line) from exc


@dataclass
class WorldInfo:
    world: World
    start: Pose2D | None = None
    tour: list | None = None


def pgm_to_world(pgm: bytes, meta: str) -> WorldInfo:
    pixels = _parse_pgm(pgm)
    kv, repeated = _parse_kv(meta)
    try:
        res = float(kv["resolution"])
    except KeyError as exc:
        raise FormatError(f"world metadata missing {exc}") from exc
    origin = Pose2D(float(kv.get("origin_x", 0.0)), float(kv.get("origin_y", 0.0)),
                    float(kv.get("origin_theta", 0.0)))
    occupied = pixels <= PGM_UNKNOWN
    obstacles = tuple(_parse_obstacle(v, i) for i, key, v in repeated if key == "obstacle")
    world = World.from_occupied(occupied, res, origin, obstacles)
    start = None
    if "start" in kv:
        start = Pose2D(*_floats(kv["start"], 3))
    tour = None
    if "tour" in kv:
        tour = [tuple(_floats(wp, 2)) for wp in kv["tour"].split(";") if wp.strip()]
    return WorldInfo(world, start, tour)


def _floats(value: str, n: int) -> list[float]:
    parts = [float(p) for p in value.split(",")]
    if len(parts) != n:
        raise FormatError(f"expected {n} comma-separated numbers, got {value!r}")
    return parts


def save_world(world: World, path, tour=None, start: Pose2D | None = None):
    path = FilePath(path)
    path.write_bytes(world_to_pgm(world))
    path.with_suffix(".meta").write_text(world_meta_text(world, tour, start))


def load_world(path) -> WorldInfo:
    path = FilePath(path)
    try:
        pgm = path.read_bytes()
        meta = path.with_suffix(".meta").read_text()
    except OSError as exc:
        raise FormatError(f"cannot read world {path}: {exc}") from exc
    return pgm_to_world(pgm, meta)


def resolve_world(ref: str, base_dir=None) -> WorldInfo:
    """Resolve `builtin:<name>` or a world file path."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in builtin_worlds.BUILTIN_WORLDS:
            raise FormatError(f"unknown builtin world {name!r}")
        world = builtin_worlds.BUILTIN_WORLDS[name]()
        start = builtin_worlds.BUILTIN_STARTS[name]()
        tour = builtin_worlds.BUILTIN_TOURS[name]()
        return WorldInfo(world, start, tour)
    path = FilePath(ref)
    if base_dir is not None and not path.is_absolute():
        path = FilePath(base_dir) / path
    return load_world(path)


# --- configuration ---------------------------------------------------------

_CONFIG_CLASSES = (SlamConfig, NavConfig, KinematicParams, SensorNoise, LidarModel)
_INT_FIELDS = {"particle_count", "beam_count", "beam_stride", "seed"}


@dataclass
class StackConfig:
    slam: SlamConfig
    nav: NavConfig
    kinematics: KinematicParams
    noise: SensorNoise
    lidar: LidarModel


def parse_config(text: str) -> dict[str, str]:
    kv, repeated = _parse_kv(text)
    if repeated:
        raise FormatError("config files cannot contain obstacle/goal lines")
    return kv


def build_stack_config(overrides: dict[str, str] | None = None) -> StackConfig:
    """Defaults with flat key=value overrides applied by field name."""
    overrides = dict(overrides or {})
    instances = {}
    for cls in _CONFIG_CLASSES:
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name in overrides:
                raw = overrides.pop(f.name)
                kwargs[f.name] = int(raw) if f.name in _INT_FIELDS else float(raw)
        instances[cls] = cls(**kwargs) if kwargs else cls()
    if overrides:
        unknown = ", ".join(sorted(overrides))
        raise FormatError(f"unknown config keys: {unknown}")
    return StackConfig(slam=instances[SlamConfig], nav=instances[NavConfig],
                       kinematics=instances[KinematicParams],
                       noise=instances[SensorNoise], lidar=instances[LidarModel])


# --- scenarios --------------------------------------------------------------

@dataclass
class ScenarioSpec:
    """Parsed scenario file (world still unresolved)."""

    world_ref: str
    benchmark: str = "fbm2"
    seed: int = 0
    start: Pose2D | None = None
    tour: list | None = None
    goals: list[Pose2D] | None = None
    goal_count: int = 5
    goal_clearance: float = 0.35
    encoder_noise: float = 0.5
    lidar_noise: float = 0.01
    timeout: float = 120.0


def parse_scenario(text: str) -> ScenarioSpec:
    kv, repeated = _parse_kv(text)
    if "world" not in kv:
        raise FormatError("scenario needs a world= entry")
    spec = ScenarioSpec(world_ref=kv["world"])
    if "benchmark" in kv:
        if kv["benchmark"] not in ("fbm2", "tbm4"):
            raise FormatError(f"unknown benchmark {kv['benchmark']!r}")
        spec.benchmark = kv["benchmark"]
    if "seed" in kv:
        spec.seed = int(kv["seed"])
    if "start" in kv:
        spec.start = Pose2D(*_floats(kv["start"], 3))
    if "tour" in kv and kv["tour"] != "auto":
        spec.tour = [tuple(_floats(wp, 2)) for wp in kv["tour"].split(";") if wp.strip()]
    goals = [Pose2D(*_floats(v, 3)) for i, key, v in repeated if key == "goal"]
    if goals:
        spec.goals = goals
    for key, attr, conv in (("random_goals", "goal_count", int),
                            ("goal_clearance", "goal_clearance", float),
                            ("encoder_noise", "encoder_noise", float),
                            ("lidar_noise", "lidar_noise", float),
                            ("timeout", "timeout", float)):
        if key in kv:
            setattr(spec, attr, conv(kv[key]))
    return spec


# --- reports and trajectories ----------------------------------------------

def trajectory_text(samples) -> str:
    """samples: iterable of (t, x, y, theta)."""
    return "".join(f"{t:.6f} {x!r} {y!r} {theta!r}\n" for t, x, y, theta in samples)


def parse_trajectory(text: str) -> list[tuple[float, float, float, float]]:
    out = []
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError("trajectory lines are `t x y theta`", i)
        out.append(tuple(float(p) for p in parts))
    return out


def fbm2_report_text(report, scenario_seed: int) -> str:
    lines = [f"benchmark=fbm2", f"seed={scenario_seed}",
             f"rounds={len(report.rounds)}", f"top_k={report.top_k}"]
    for ri, rnd in enumerate(report.rounds):
        for gi, g in enumerate(rnd.goals):
            lines.append(
                f"round={ri} goal={gi} x={g.goal.x!r} y={g.goal.y!r} "
                f"theta={g.goal.theta!r} reached={int(g.reached)} "
                f"trans={g.translation_error!r} rot={g.rotation_error!r} "
                f"hits={g.hits} time={g.sim_time:.6f}")
        lines.append(
            f"round={ri} summary trans={rnd.translation_mean!r} "
            f"rot={rnd.rotation_mean!r} hits={rnd.hits} "
            f"reached={rnd.reached_count} goals={len(rnd.goals)}")
    agg = report.aggregate()
    lines.append(
        f"aggregate trans={agg['translation_mean']!r} rot={agg['rotation_mean']!r} "
        f"hits={agg['hits']} reached={agg['reached']} goals={agg['goals']} "
        f"rounds_used={agg['rounds_used']}")
    return "\n".join(lines) + "\n"


def tbm4_report_text(legs, seed: int) -> str:
    lines = [f"benchmark=tbm4", f"seed={seed}", f"goals={len(legs)}"]
    for gi, g in enumerate(legs):
        lines.append(
            f"goal={gi} x={g.goal.x!r} y={g.goal.y!r} theta={g.goal.theta!r} "
            f"reached={int(g.reached)} replanned={int(g.replanned)} "
            f"trans={g.translation_error!r} rot={g.rotation_error!r} "
            f"hits={g.hits} time={g.sim_time:.6f}")
    return "\n".join(lines) + "\n"


def encode_bytes(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def decode_bytes(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))
