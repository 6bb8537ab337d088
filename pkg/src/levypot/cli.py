"""Command line front end.

    levypot <experiment> --config FILE [--seed N] [--paths N] [--out DIR]
    levypot aggregate DIR [DIR ...]

Exit codes: 0 pass, 1 execution/config error, 2 verdict failure.
LEVYPOT_THREADS caps worker parallelism (results are identical for any
value: work is decomposed into fixed chunks regardless of workers).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, load_config
from .manifest import (
    MANIFEST_NAME,
    ManifestCorruption,
    read_manifest,
    timestamp,
    verify_manifest,
    write_manifest,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levypot",
        description="numerical laboratory for symmetric pure-jump Levy operators")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--paths", type=int, default=None, help="override n_paths")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--plot", dest="plot", action="store_true", default=None)
        p.add_argument("--no-plot", dest="plot", action="store_false")

    agg = sub.add_parser("aggregate", help="collate verdicts from run directories")
    agg.add_argument("dirs", nargs="*", help="run output directories")
    agg.add_argument("--out", default="summary.csv", help="summary CSV path")
    return parser


def run_experiment(args) -> int:
    from .experiments import RUNNERS

    try:
        cfg = load_config(args.config, {
            "seed": args.seed,
            "n_paths": args.paths,
            "output_dir": args.out,
            "plot": args.plot,
        })
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if cfg.experiment != args.command:
        # the subcommand wins; the config names the default experiment
        cfg.experiment = args.command

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = timestamp()
    try:
        outputs, sheet = RUNNERS[cfg.experiment](cfg, out_dir)
    except Exception as exc:  # module errors surface verbatim
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    outputs = list(outputs) + [sheet.write(out_dir)]
    finished = timestamp()
    write_manifest(out_dir, cfg.resolved_lines(), outputs, started, finished)
    for row in sheet.rows:
        print(f"{row[0]}: {row[4]} (constant {row[2]:.6g})")
    if sheet.failed:
        print("verdict failure", file=sys.stderr)
        return 2
    return 0


def run_aggregate(args) -> int:
    rows = []
    for run_dir in args.dirs:
        manifest = Path(run_dir) / MANIFEST_NAME
        try:
            verify_manifest(manifest)
        except FileNotFoundError:
            print(f"error: {manifest} not found", file=sys.stderr)
            return 1
        except ManifestCorruption as exc:
            print(f"error: corruption: {exc}", file=sys.stderr)
            return 1
        verd = Path(run_dir) / "verdicts.csv"
        lines = verd.read_text().splitlines()
        rows.extend(lines[1:])
    out = Path(args.out)
    out.write_text("inequality,model,constant,ci,verdict\n"
                   + "".join(line + "\n" for line in rows))
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def main(argv=None) -> int:
    if "LEVYPOT_THREADS" in os.environ:
        # fixed chunk decomposition keeps results identical for any value
        try:
            workers = int(os.environ["LEVYPOT_THREADS"])
            if workers < 1:
                raise ValueError
        except ValueError:
            print("error: LEVYPOT_THREADS must be a positive integer", file=sys.stderr)
            return 1
    args = build_parser().parse_args(argv)
    if args.command == "aggregate":
        return run_aggregate(args)
    return run_experiment(args)


if __name__ == "__main__":
    sys.exit(main())
