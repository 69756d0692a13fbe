"""Command-line entry points.

    tagloop simulate --config exp.json --out runs/ [--parallel N] [--seed-override 1,2]
    tagloop report <log dir> [--out table.tsv]
    tagloop serve <project dir> [--config server.cfg] [--host H] [--port P]
    tagloop import-corpus --config project.json --out <project dir>
    tagloop export-annotations <project dir> [--out file.jsonl]

Simulation runs one deterministic loop per (strategy, seed) cell and
exits 0 only if every run completed; failures are listed on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import (
    load_project_config,
    load_simulation_config,
    server_settings,
)
from .records import read_round_log, write_round_log

__all__ = ["main"]


def _run_name(strategy: str, seed: int) -> str:
    return f"{strategy}-seed{seed}"


def _simulate_one(config_path: str, strategy: str, seed: int, out_dir: str) -> str:
    """One matrix cell, safe to execute in a worker process."""
    from .loop import run_simulation

    config = load_simulation_config(config_path)
    split, scheme = config.build()
    records = run_simulation(
        split,
        config.loop_config(strategy, seed),
        scheme,
        hard_bio_constraints=config.hard_bio_constraints,
    )
    path = os.path.join(out_dir, _run_name(strategy, seed) + ".jsonl")
    write_round_log(records, path)
    return path


def cmd_simulate(args) -> int:
    try:
        config = load_simulation_config(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    seeds = config.seeds
    if args.seed_override:
        seeds = tuple(int(s) for s in args.seed_override.split(","))
    runs = [(strategy, seed) for strategy in config.strategies for seed in seeds]
    os.makedirs(args.out, exist_ok=True)

    failures = []
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            futures = {
                pool.submit(_simulate_one, args.config, strategy, seed, args.out): (
                    strategy,
                    seed,
                )
                for strategy, seed in runs
            }
            for future, (strategy, seed) in futures.items():
                try:
                    future.result()
                except Exception as err:
                    failures.append((_run_name(strategy, seed), str(err)))
    else:
        for strategy, seed in runs:
            try:
                _simulate_one(args.config, strategy, seed, args.out)
            except Exception as err:
                failures.append((_run_name(strategy, seed), str(err)))

    _write_learning_curves(args.out)
    if failures:
        for name, message in failures:
            print(f"run {name} failed: {message}", file=sys.stderr)
        return 1
    print(f"{len(runs)} runs written to {args.out}")
    return 0


def _parse_run_name(filename: str) -> tuple[str, int] | None:
    stem = filename[: -len(".jsonl")]
    if "-seed" not in stem:
        return None
    strategy, _, seed = stem.rpartition("-seed")
    try:
        return strategy, int(seed)
    except ValueError:
        return None


def _iter_runs(log_dir: str):
    names = sorted(n for n in os.listdir(log_dir) if n.endswith(".jsonl"))
    for name in names:
        parsed = _parse_run_name(name)
        records = read_round_log(os.path.join(log_dir, name))
        if not records:
            continue
        if parsed is None:
            strategy, seed = records[0].scores[0].strategy, 0
        else:
            strategy, seed = parsed
        yield strategy, seed, records


def _write_learning_curves(out_dir: str) -> None:
    rows = []
    for strategy, seed, records in _iter_runs(out_dir):
        for record in records:
            rows.append(
                (strategy, seed, record.round_index, record.labeled_count,
                 record.exclusive["f1"])
            )
    if not rows:
        return
    path = os.path.join(out_dir, "learning_curves.tsv")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("strategy\tseed\tround\tlabeled\tf1\n")
        for row in sorted(rows):
            handle.write("\t".join(str(v) for v in row) + "\n")


def cmd_report(args) -> int:
    if not os.path.isdir(args.log_dir):
        print(f"error: {args.log_dir} is not a directory", file=sys.stderr)
        return 2
    cells: dict[tuple[str, int], list[tuple[float, int]]] = {}
    found = False
    for strategy, _seed, records in _iter_runs(args.log_dir):
        found = True
        for record in records:
            cells.setdefault((strategy, record.round_index), []).append(
                (record.exclusive["f1"], record.workload["cumulative_corrections"])
            )
    if not found:
        print(f"error: no run logs in {args.log_dir}", file=sys.stderr)
        return 2
    lines = ["strategy\tround\truns\tmean_f1\tstddev_f1\tmean_cumulative_corrections"]
    for (strategy, round_index), values in sorted(cells.items()):
        f1s = [v[0] for v in values]
        works = [v[1] for v in values]
        mean = sum(f1s) / len(f1s)
        stddev = math.sqrt(sum((x - mean) ** 2 for x in f1s) / len(f1s))
        mean_work = sum(works) / len(works)
        lines.append(
            f"{strategy}\t{round_index}\t{len(values)}\t{mean:.6f}\t{stddev:.6f}"
            f"\t{mean_work:.2f}"
        )
    table = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(table)
    else:
        sys.stdout.write(table)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    try:
        settings = server_settings(
            config_path=args.config,
            overrides={
                "host": args.host,
                "port": args.port,
                "lease_seconds": args.lease_seconds,
                "project_dir": args.project,
            },
        )
        if not settings["project_dir"]:
            print("error: no project directory given", file=sys.stderr)
            return 2
        app = create_app(settings["project_dir"], lease_seconds=settings["lease_seconds"])
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    uvicorn.run(app, host=settings["host"], port=settings["port"], log_level="warning")
    return 0


def cmd_import_corpus(args) -> int:
    from .service import create_project

    try:
        parts = load_project_config(args.config)
        create_project(args.out, **parts)
    except (OSError, ValueError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"project created at {args.out}")
    return 0


def cmd_export_annotations(args) -> int:
    path = os.path.join(args.project, "annotations.jsonl")
    if not os.path.exists(path):
        print(f"error: no annotations log in {args.project}", file=sys.stderr)
        return 2
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as out:
            out.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tagloop")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a strategy x seed simulation matrix")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--out", required=True)
    simulate.add_argument("--parallel", type=int, default=1, metavar="N")
    simulate.add_argument("--seed-override", default=None,
                          help="comma-separated seeds replacing the config's list")
    simulate.set_defaults(func=cmd_simulate)

    report = sub.add_parser("report", help="aggregate run logs into a table")
    report.add_argument("log_dir")
    report.add_argument("--out", default=None)
    report.set_defaults(func=cmd_report)

    serve = sub.add_parser("serve", help="serve a project over HTTP")
    serve.add_argument("project", nargs="?", default=None)
    serve.add_argument("--config", default=None, help="KEY=VALUE server config file")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--lease-seconds", type=float, default=None)
    serve.set_defaults(func=cmd_serve)

    imp = sub.add_parser("import-corpus", help="create a project from a config")
    imp.add_argument("--config", required=True)
    imp.add_argument("--out", required=True)
    imp.set_defaults(func=cmd_import_corpus)

    export = sub.add_parser("export-annotations", help="dump the annotation log")
    export.add_argument("project")
    export.add_argument("--out", default=None)
    export.set_defaults(func=cmd_export_annotations)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
