"""explore-client: run external policies against a swarmexp server."""

from __future__ import annotations

import argparse
import json
import sys

from .client import connect_and_configure, run_episode
from .plotting import plot_episode
from .policies import make_policy
from .wire import RequestError, WireError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="explore-client")
    p.add_argument("--server", required=True, metavar="HOST:PORT")
    p.add_argument("--policy", choices=["frontier", "random"], default="frontier")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="seed of the first episode")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--plot", default=None, metavar="DIR",
                   help="write coverage/trajectory plots per episode")
    p.add_argument("--config", default=None,
                   help="JSON dict of config overrides, e.g. '{\"n_agents\": 3}'")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = json.loads(args.config) if args.config else {}
    try:
        handle = connect_and_configure(args.server, overrides)
    except WireError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"connected: protocol v{handle.version}, map {handle.map.name!r} "
          f"({len(handle.map.free)} free / {len(handle.map.obstacle)} obstacle), "
          f"{handle.n_agents} agents")
    try:
        for ep in range(args.episodes):
            seed = args.seed + ep
            policy = make_policy(args.policy, handle.map.bounds,
                                 handle.region_grid, seed)
            record, metrics = run_episode(handle, policy, seed,
                                          max_steps=args.max_steps)
            line = (f"episode seed={seed} er={metrics.er:.4f} "
                    f"cs85={metrics.cs85} cs95={metrics.cs95} "
                    f"mo85={metrics.mo85} mo95={metrics.mo95} rv={metrics.rv:.3f}")
            print(line)
            if args.plot:
                for path in plot_episode(record, args.plot):
                    print(f"  wrote {path}")
    except (WireError, RequestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        handle.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
