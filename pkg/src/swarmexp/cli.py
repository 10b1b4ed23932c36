"""Command-line interface: map generation, validation, benchmarks, serving."""

from __future__ import annotations

import argparse
import sys

from . import kernels
from .configio import EXAMPLE_CONFIG, load_env_config
from .env import EnvConfig
from .mapcore import load_map, save_map
from .scenario import ScenarioSpec, gen_maze, gen_random_obstacle, ingest_cloud, validate_map


def _add_gen(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("gen", help="generate a procedural map")
    p.add_argument("kind", choices=["random-obstacle", "maze"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=float, default=125.0, help="square side, meters")
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--density", type=float, default=0.15,
                   help="obstacle area fraction (random-obstacle)")
    p.add_argument("--cells", type=int, default=10, help="maze cells per side")
    p.add_argument("--corridor-width", type=float, default=5.0)
    p.add_argument("-o", "--output", required=True)


def _add_ingest(sub) -> None:
    p = sub.add_parser("ingest", help="classify an x y z point file into a map")
    p.add_argument("--input", required=True)
    p.add_argument("--resolution", type=float, required=True)
    p.add_argument("--z-band", required=True, metavar="LO,HI")
    p.add_argument("--height-threshold", type=float, default=0.3)
    p.add_argument("-o", "--output", required=True)


def _add_validate(sub) -> None:
    p = sub.add_parser("validate", help="connectivity/clearance report for a map")
    p.add_argument("map")
    p.add_argument("--footprint", type=float, default=0.5)


def _add_bench(sub) -> None:
    p = sub.add_parser("bench", help="run scripted-policy episodes, report metrics")
    p.add_argument("--config", help="environment config file (INI)")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--policy", choices=["frontier", "random"], default="frontier")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--timing", action="store_true",
                   help="append per-step timing for N agents (non-reproducible)")
    p.add_argument("--out", default=None, help="write the report here as well")


def _add_timing(sub) -> None:
    p = sub.add_parser("timing", help="wall-clock per macro step for team sizes")
    p.add_argument("--agents", default="2,4,6,8")
    p.add_argument("--map", dest="map_path", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--envs", type=int, default=1)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--workers", type=int, default=None,
                   help="thread workers for the env batch (default: serial)")
    p.add_argument("--backend", choices=["active", "python", "compiled", "both"],
                   default="active")
    p.add_argument("--wire", action="store_true",
                   help="also measure stepping through a loopback protocol session")


def _add_serve(sub) -> None:
    p = sub.add_parser("serve", help="serve environments over the wire protocol")
    p.add_argument("--bind", default=None, metavar="HOST:PORT")
    p.add_argument("--stdio", action="store_true")
    p.add_argument("--config", default=None)


def _add_example_config(sub) -> None:
    sub.add_parser("example-config", help="print a fully commented config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmexp",
        description="Multi-agent exploration simulator on point-cloud maps")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_gen(sub)
    _add_ingest(sub)
    _add_validate(sub)
    _add_bench(sub)
    _add_timing(sub)
    _add_serve(sub)
    _add_example_config(sub)
    return parser


def _load_config(path: str | None) -> EnvConfig:
    return load_env_config(path) if path else EnvConfig()


def cmd_gen(args) -> int:
    if args.kind == "random-obstacle":
        spec = ScenarioSpec(kind="random_obstacle", seed=args.seed, size=args.size,
                            resolution=args.resolution,
                            obstacle_density=args.density)
        wmap = gen_random_obstacle(spec)
    else:
        spec = ScenarioSpec(kind="maze", seed=args.seed, size=args.size,
                            resolution=args.resolution, cell_count=args.cells,
                            corridor_width=args.corridor_width)
        wmap = gen_maze(spec)
    save_map(wmap, args.output)
    print(f"wrote {args.output}: {wmap.n_free} free, {wmap.n_obstacle} obstacle points")
    return 0


def cmd_ingest(args) -> int:
    lo, hi = (float(v) for v in args.z_band.split(","))
    wmap = ingest_cloud(args.input, args.resolution, (lo, hi),
                        height_threshold=args.height_threshold)
    save_map(wmap, args.output)
    print(f"wrote {args.output}: {wmap.n_free} free, {wmap.n_obstacle} obstacle points")
    return 0


def cmd_validate(args) -> int:
    wmap = load_map(args.map)
    report = validate_map(wmap, args.footprint)
    print(report.to_text())
    return 0 if report.valid else 1


def cmd_bench(args) -> int:
    from .metrics import run_benchmark

    config = _load_config(args.config)
    report = run_benchmark(config, episodes=args.episodes, policy_name=args.policy,
                           base_seed=args.seed, max_steps=args.max_steps,
                           measure_timing=args.timing)
    text = report.to_text()
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0 if not report.incomplete else 1


def cmd_timing(args) -> int:
    from dataclasses import replace

    from .metrics import measure_step_time, measure_vector_throughput

    config = _load_config(args.config)
    if args.map_path:
        config = replace(config, map_source=args.map_path)
    agents = [int(v) for v in args.agents.split(",")]
    backends = (["python", "compiled"] if args.backend == "both"
                else [args.backend])
    print("# paper platform context (GPU): N=2 0.0144s, N=4 0.0254s, "
          "N=6 0.0373s, N=8 0.0477s per step")
    for backend in backends:
        if backend != "active":
            try:
                kernels.set_backend(backend)
            except ValueError as exc:
                print(f"backend {backend}: {exc}")
                continue
        label = kernels.backend_name()
        for n in agents:
            cfg_n = replace(config, n_agents=n)
            per_step = measure_step_time(cfg_n, seed=config.seed, steps=args.steps)
            print(f"backend={label} N={n} step_seconds={per_step:.6f}")
        if args.envs > 1:
            rate = measure_vector_throughput(config, args.envs,
                                             max_workers=args.workers,
                                             seed=config.seed)
            print(f"backend={label} M={args.envs} aggregate_steps_per_second={rate:.2f}")
        if args.wire:
            overhead = measure_wire_overhead(config, steps=args.steps)
            print(f"backend={label} wire_step_seconds={overhead[0]:.6f} "
                  f"inproc_step_seconds={overhead[1]:.6f} "
                  f"overhead_ratio={overhead[0] / overhead[1]:.3f}")
    kernels.set_backend("active" if args.backend == "active" else backends[-1])
    return 0


def measure_wire_overhead(config: EnvConfig, steps: int = 20) -> tuple[float, float]:
    """(seconds/step over loopback TCP, seconds/step in-process)."""
    import socket
    import time

    from .metrics import make_policy, measure_step_time
    from .protocol import FrameDecoder, encode_frame
    from .server import ProtocolServer

    inproc = measure_step_time(config, seed=config.seed, steps=steps)

    server = ProtocolServer("127.0.0.1:0", config)
    server.start()
    try:
        conn = socket.create_connection((server.host, server.port), timeout=10)
        decoder = FrameDecoder()
        msg_id = 0

        def call(verb, payload):
            nonlocal msg_id
            msg_id += 1
            conn.sendall(encode_frame({"id": msg_id, "verb": verb, "payload": payload}))
            while True:
                msgs = decoder.feed(conn.recv(1 << 20))
                if msgs:
                    return msgs[0]

        call("hello", {})
        call("configure", {"envs": 1})
        call("reset", {"seeds": [config.seed]})
        from .env import ExplorationEnv

        env = ExplorationEnv(config)
        policy = make_policy("random", env, config.seed)

        class _FakeOutcome:
            agents = [None] * config.n_agents

        goals = [[list((g[0], g[1][0], g[1][1])) for g in policy(_FakeOutcome())]]
        t0 = time.perf_counter()
        for _ in range(steps):
            resp = call("step", goals)
            if not resp["ok"]:
                call("reset", {"seeds": [config.seed]})
        wire = (time.perf_counter() - t0) / steps
        call("close", {})
        conn.close()
    finally:
        server.shutdown()
    return wire, inproc


def cmd_serve(args) -> int:
    from .server import serve

    config = _load_config(args.config)
    serve(args.bind, config, stdio=args.stdio,
          announce=lambda line: print(line, flush=True))
    return 0


def cmd_example_config(args) -> int:
    print(EXAMPLE_CONFIG, end="")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "gen": cmd_gen,
        "ingest": cmd_ingest,
        "validate": cmd_validate,
        "bench": cmd_bench,
        "timing": cmd_timing,
        "serve": cmd_serve,
        "example-config": cmd_example_config,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
