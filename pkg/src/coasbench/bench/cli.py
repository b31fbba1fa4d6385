"""Command-line interface.

    coasbench validate --config cfg.json
    coasbench run --config cfg.json
    coasbench report --input out/results.csv [--friedman-top K] [--output-dir DIR]
    coasbench datasets make-blobs --n 200 --k 4 --dim 2 --spread 0.5 --seed 7 --out blobs.csv

Exit codes: 0 success, 2 configuration error, 3 some cells failed.
"""
from __future__ import annotations

import argparse
import sys

from ..data import make_blobs, save_csv
from ..numerics import Rng
from .config import ConfigError, load_config
from .report import ReportError, report
from .runner import run


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coasbench",
                                description="adaptive-sampling benchmark harness")
    sub = p.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment grid")
    p_run.add_argument("--config", required=True)

    p_rep = sub.add_parser("report", help="rank table, tests and figures")
    p_rep.add_argument("--input", required=True, help="results.csv from a run")
    p_rep.add_argument("--friedman-top", type=int, default=None,
                       help="restrict the Friedman test to the top K methods")
    p_rep.add_argument("--output-dir", default=None)

    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("--config", required=True)

    p_ds = sub.add_parser("datasets", help="dataset utilities")
    ds_sub = p_ds.add_subparsers(dest="ds_command", required=True)
    p_blobs = ds_sub.add_parser("make-blobs", help="write a synthetic blobs CSV")
    p_blobs.add_argument("--n", type=int, required=True)
    p_blobs.add_argument("--k", type=int, required=True)
    p_blobs.add_argument("--dim", type=int, default=2)
    p_blobs.add_argument("--spread", type=float, default=1.0)
    p_blobs.add_argument("--seed", type=int, default=0)
    p_blobs.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        cells = len(cfg.datasets) * len(cfg.sizes) * len(cfg.methods) * cfg.trials
        print(f"ok: task={cfg.task} cells={cells} output={cfg.output_dir}")
        return 0

    if args.command == "run":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        done = {"n": 0}

        def progress(record):
            done["n"] += 1
            print(f"[{done['n']}] {record.dataset} {record.method} {record.size} "
                  f"trial={record.trial} {record.metric_name}={record.metric_value:.4g} "
                  f"({record.wall_time_ms:.0f} ms)")

        path, n_errors = run(cfg, progress=progress)
        print(f"results: {path}")
        if n_errors:
            print(f"{n_errors} cells failed", file=sys.stderr)
            return 3
        return 0

    if args.command == "report":
        try:
            result = report(args.input, friedman_top=args.friedman_top,
                            output_dir=args.output_dir)
        except ReportError as exc:
            print(f"report error: {exc}", file=sys.stderr)
            return 2
        print(result.text)
        for fig in result.figures:
            print(f"figure: {fig}")
        return 0

    if args.command == "datasets" and args.ds_command == "make-blobs":
        ds = make_blobs(args.n, args.k, args.dim, args.spread, Rng(args.seed))
        save_csv(ds, args.out)
        print(f"wrote {args.out} ({ds.n} rows, {ds.dim} features, {ds.n_classes} classes)")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
