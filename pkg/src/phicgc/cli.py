"""``phicgc`` command line: run experiments, verify bounds, merge tables."""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys

from .exceptions import ConfigError, PhiCGCError

log = logging.getLogger("phicgc")

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _thread_limit():
    n = os.environ.get("PHICGC_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def cmd_run(args) -> int:
    from .bench import ExperimentConfig, run_experiment

    try:
        cfg = ExperimentConfig.from_json(args.config)
        if args.output_dir:
            cfg.output_dir = args.output_dir
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = run_experiment(cfg)
    except PhiCGCError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(out["markdown"].read_text())
    print(f"wrote {out['csv']} and {out['markdown']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(args.suite, tolerance_fault=args.corrupt_tolerance)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        print(f"first failure: {failed[0].name}: {failed[0].detail}")
        return EXIT_FAILED_CHECK
    return EXIT_OK


def cmd_table(args) -> int:
    from .bench import csv_header, markdown_table, read_csv, rows_to_records

    chunks = []
    all_rows = []
    for path in args.inputs:
        try:
            rows = read_csv(path)
        except (OSError, KeyError, ValueError) as exc:
            print(f"cannot read {path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        all_rows += rows
        chunks.append(markdown_table(rows, title=os.path.basename(path)))
    if args.format == "md":
        print("\n".join(chunks), end="")
    else:
        import csv

        n = max(len(r["matvecs"]) for r in all_rows)
        w = csv.writer(sys.stdout)
        w.writerow(csv_header(n))
        w.writerows(rows_to_records(all_rows, n))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phicgc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--output-dir", help="override output_dir from the config")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the numerical verification suite")
    ver.add_argument("--suite", choices=["fast", "full"], default="fast")
    ver.add_argument("--corrupt-tolerance", type=float, default=1.0, help=argparse.SUPPRESS)
    ver.set_defaults(func=cmd_verify)

    tab = sub.add_parser("table", help="merge experiment CSVs into one table")
    tab.add_argument("--inputs", nargs="+", required=True)
    tab.add_argument("--format", choices=["md", "csv"], default="md")
    tab.set_defaults(func=cmd_table)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    with _thread_limit():
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
