"""Command-line client for the mecanav service.

Every command is a thin HTTP client: it reads local files, posts one
request and writes the response payloads back to disk.  By default the
service app is mounted in-process (no server to manage); `--server URL`
targets a running instance instead (`mecanav serve` starts one).

Exit codes: 0 success, 1 runtime error, 2 usage error.  A failed
benchmark goal is data in the report, not an error.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path

import httpx

from .errors import StackError
from .formats import decode_bytes, encode_bytes, parse_config

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class ServiceClient:
    """POSTs to a remote server or to the in-process ASGI app."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                response = client.post(path, json=payload)
        else:
            response = asyncio.run(self._post_inprocess(path, payload))
        if response.status_code >= 400:
            detail = response.json().get("detail", response.text)
            raise StackError(f"service error ({response.status_code}): {detail}")
        return response.json()

    async def _post_inprocess(self, path: str, payload: dict):
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://mecanav", timeout=None) as client:
            return await client.post(path, json=payload)


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise StackError(f"cannot read {path}: {exc}") from exc


def _world_payload(ref: str) -> dict:
    if ref.startswith("builtin:"):
        return {"builtin": ref.split(":", 1)[1]}
    path = Path(ref)
    try:
        pgm = path.read_bytes()
        meta = path.with_suffix(".meta").read_text()
    except OSError as exc:
        raise StackError(f"cannot read world {ref}: {exc}") from exc
    return {"pgm_b64": encode_bytes(pgm), "meta": meta}


def _pose_arg(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("pose must be x,y,theta")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _config_dict(args) -> dict:
    config = {}
    if args.config:
        config.update(parse_config(_read_text(args.config)))
    if getattr(args, "seed", None) is not None:
        config["seed"] = str(args.seed)
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecanav",
        description="Mecanum robot stack: simulate, map, navigate, benchmark")
    parser.add_argument("--server", help="service URL (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--out", default=out_default, help="output path")

    p = sub.add_parser("simulate", help="run the simulator from a script, write a log")
    p.add_argument("--world", required=True, help="world PGM path or builtin:<name>")
    p.add_argument("--script", required=True, help="script file (cmd/goal lines)")
    p.add_argument("--duration", type=float, help="stop time for cmd scripts, seconds")
    common(p, "simulate.log")

    p = sub.add_parser("slam", help="replay a log through SLAM, write map + trajectory")
    p.add_argument("--log", required=True, help="input log file")
    p.add_argument("--trajectory", help="trajectory output (default <out>.traj)")
    common(p, "map.pgm")

    p = sub.add_parser("navigate", help="drive to a goal on a known map, write a log")
    p.add_argument("--world", required=True)
    p.add_argument("--goal", required=True, type=_pose_arg, metavar="X,Y,THETA")
    p.add_argument("--start", type=_pose_arg, metavar="X,Y,THETA")
    p.add_argument("--timeout", type=float, default=120.0)
    common(p, "navigate.log")

    p = sub.add_parser("bench", help="run a benchmark scenario, write a report")
    p.add_argument("--scenario", required=True, help="scenario file")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--top-k", type=int, default=3, dest="top_k")
    common(p, "report.txt")

    p = sub.add_parser("render", help="rasterize a map with optional overlays")
    p.add_argument("--map", required=True, dest="map_path")
    p.add_argument("--trajectory")
    p.add_argument("--path", dest="path_overlay")
    p.add_argument("--scale", type=int, default=1)
    common(p, "map.png")

    p = sub.add_parser("replay", help="re-simulate a log's command stream")
    p.add_argument("--log", required=True)
    p.add_argument("--world", required=True)
    p.add_argument("--duration", type=float)
    common(p, "replay.log")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8330)

    return parser


def cmd_simulate(client, args) -> int:
    payload = {
        "world": _world_payload(args.world),
        "script": _read_text(args.script),
        "seed": args.seed or 0,
        "duration": args.duration,
        "config": _config_dict(args),
    }
    result = client.post("/simulate", payload)
    Path(args.out).write_text(result["log"])
    pose = result["final_pose"]
    print(f"simulated {result['sim_time']:.2f} s, collisions {result['collisions']}, "
          f"final pose ({pose['x']:.3f}, {pose['y']:.3f}, {pose['theta']:.3f})")
    print(f"log written to {args.out}")
    return EXIT_OK


def cmd_slam(client, args) -> int:
    payload = {"log": _read_text(args.log), "config": _config_dict(args)}
    result = client.post("/slam", payload)
    out = Path(args.out)
    out.write_bytes(decode_bytes(result["map_pgm_b64"]))
    out.with_suffix(".meta").write_text(result["map_meta"])
    traj_path = args.trajectory or str(out.with_suffix(".traj"))
    Path(traj_path).write_text(result["trajectory"])
    print(f"map written to {out} (+ {out.with_suffix('.meta').name}), "
          f"trajectory to {traj_path}")
    return EXIT_OK


def cmd_navigate(client, args) -> int:
    gx, gy, gt = args.goal
    payload = {
        "world": _world_payload(args.world),
        "goal": {"x": gx, "y": gy, "theta": gt},
        "seed": args.seed or 0,
        "timeout": args.timeout,
        "config": _config_dict(args),
    }
    if args.start:
        sx, sy, st = args.start
        payload["start"] = {"x": sx, "y": sy, "theta": st}
    result = client.post("/navigate", payload)
    Path(args.out).write_text(result["log"])
    status = "reached" if result["reached"] else "not reached"
    print(f"{status} in {result['sim_time']:.2f} s "
          f"(trans err {result['translation_error']:.3f} m, "
          f"rot err {result['rotation_error']:.3f} rad, hits {result['hits']})")
    print(f"log written to {args.out}")
    return EXIT_OK


def cmd_bench(client, args) -> int:
    scenario_text = _read_text(args.scenario)
    payload = {
        "scenario": scenario_text,
        "rounds": args.rounds,
        "top_k": args.top_k,
        "seed": args.seed,
        "config": _config_dict(args),
    }
    # inline the world when the scenario references a file next to it
    from .formats import parse_scenario

    spec = parse_scenario(scenario_text)
    if not spec.world_ref.startswith("builtin:"):
        ref = Path(spec.world_ref)
        if not ref.is_absolute():
            ref = Path(args.scenario).parent / ref
        payload["world"] = _world_payload(str(ref))
    result = client.post("/bench", payload)
    Path(args.out).write_text(result["report"])
    print(result["report"].splitlines()[-1])
    print(f"report written to {args.out}")
    return EXIT_OK


def cmd_render(client, args) -> int:
    map_path = Path(args.map_path)
    try:
        pgm = map_path.read_bytes()
        meta = map_path.with_suffix(".meta").read_text()
    except OSError as exc:
        raise StackError(f"cannot read map {args.map_path}: {exc}") from exc
    payload = {
        "map_pgm_b64": encode_bytes(pgm),
        "map_meta": meta,
        "trajectory": _read_text(args.trajectory) if args.trajectory else None,
        "path": _read_text(args.path_overlay) if args.path_overlay else None,
        "scale": args.scale,
    }
    result = client.post("/render", payload)
    Path(args.out).write_bytes(decode_bytes(result["png_b64"]))
    print(f"image written to {args.out}")
    return EXIT_OK


def cmd_replay(client, args) -> int:
    payload = {
        "log": _read_text(args.log),
        "world": _world_payload(args.world),
        "seed": args.seed or 0,
        "duration": args.duration,
        "config": _config_dict(args),
    }
    result = client.post("/replay", payload)
    Path(args.out).write_text(result["log"])
    print(f"replayed log written to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    client = ServiceClient(args.server)
    handlers = {
        "simulate": cmd_simulate,
        "slam": cmd_slam,
        "navigate": cmd_navigate,
        "bench": cmd_bench,
        "render": cmd_render,
        "replay": cmd_replay,
    }
    try:
        return handlers[args.command](client, args)
    except StackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
