"""Operator entry point: run/sweep execution, map and trip generation."""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import simcore
from .config import ScenarioConfig, apply_override, load_config, resolve_config
from .errors import ConfigError, InternalInvariantError, SimError
from .mobility import generate_trip, write_traces_csv
from .report import aggregate, write_migrations_csv, write_summary_csv
from .roadnet import build_grid_graph, load_road_graph, save_road_graph
from .simcore import derive_seed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


def _load_with_overrides(args) -> ScenarioConfig:
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"{args.config}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<file>", f"{args.config} must hold a JSON object")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.speeds:
        raw["speeds_kmh"] = [float(s) for s in args.speeds.split(",")]
    if args.strategy:
        raw["strategies"] = [args.strategy]
    for assignment in args.override or []:
        apply_override(raw, assignment)
    return resolve_config(raw)


def _write_bundle(reports, config: ScenarioConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_migrations_csv(reports, out_dir / "migrations.csv")
    write_summary_csv(aggregate(reports), out_dir / "summary.csv")
    with open(out_dir / "resolved_config.json", "w", encoding="utf-8") as fh:
        json.dump(config.raw, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")


def cmd_run(args) -> int:
    config = _load_with_overrides(args)
    if len(config.speeds_mps) != 1 or len(config.strategies) != 1:
        raise ConfigError("speeds_kmh",
                          "run expects exactly one speed and one strategy; use sweep")
    report = simcore.run(config)
    _write_bundle([report], config, Path(args.out))
    print(f"run complete: {len(report.records)} migration records "
          f"-> {args.out}/migrations.csv")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_with_overrides(args)
    reports = simcore.sweep(config, parallel=args.parallel)
    _write_bundle(reports, config, Path(args.out))
    total = sum(len(r.records) for r in reports)
    print(f"sweep complete: {len(reports)} runs, {total} migration records "
          f"-> {args.out}/migrations.csv")
    return EXIT_OK


def cmd_gen_map(args) -> int:
    graph = build_grid_graph(args.rows, args.cols, args.separation)
    save_road_graph(graph, args.out)
    print(f"wrote {len(graph.nodes)} nodes, {len(graph.segments)} segments "
          f"-> {args.out}")
    return EXIT_OK


def cmd_gen_trips(args) -> int:
    graph = load_road_graph(args.graph)
    traces = []
    for i in range(args.n):
        trace = generate_trip(graph, derive_seed(args.seed, "trip", i),
                              args.speed_kmh / 3.6, args.duration, args.dt)
        trace.ue_id = i
        traces.append(trace)
    write_traces_csv(traces, args.out)
    print(f"wrote {args.n} traces -> {args.out}")
    return EXIT_OK


def cmd_dump_mrmap(args) -> int:
    config = _load_with_overrides(args)
    _, _, mr = simcore.build_scenario_topology(config)
    rows = mr.dump_rows()
    lines = ["segment tier server start_m end_m"]
    lines += [f"{seg} {tier} {srv} {start:.3f} {end:.3f}"
              for seg, tier, srv, start, end in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(rows)} coverage intervals -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_config_flags(sub) -> None:
    sub.add_argument("--config", required=True, help="scenario config JSON")
    sub.add_argument("--seed", type=int, default=None, help="override the seed")
    sub.add_argument("--speeds", default=None,
                     help="comma-separated km/h list replacing speeds_kmh")
    sub.add_argument("--strategy", default=None,
                     help="single strategy label replacing the config list")
    sub.add_argument("--override", action="append", metavar="KEY=VALUE",
                     help="override any config key (JSON value); repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecmigsim",
        description="Discrete-event simulator of multitier service migration "
                    "in mobile edge computing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run (one speed, one strategy)")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="speed x strategy sweep")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--parallel", action="store_true",
                   help="run cells in worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-map", help="write a synthetic grid road network")
    p.add_argument("rows", type=int)
    p.add_argument("cols", type=int)
    p.add_argument("--separation", type=float, default=500.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_map)

    p = sub.add_parser("gen-trips", help="write seeded random vehicle traces")
    p.add_argument("--graph", required=True, help="road-graph JSON file")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--speed-kmh", type=float, default=50.0)
    p.add_argument("--duration", type=float, default=600.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_trips)

    p = sub.add_parser("dump-mrmap", help="print the road/server coverage table")
    _add_config_flags(p)
    p.add_argument("--out", default=None, help="write to a file instead of stdout")
    p.set_defaults(func=cmd_dump_mrmap)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InternalInvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
