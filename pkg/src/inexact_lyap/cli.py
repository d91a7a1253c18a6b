"""Command line entry point: ``lyap-bench --config suite.ini --out results/``."""
from __future__ import annotations

import argparse
import logging
import sys

from .bench import default_config_path, load_suite, run_suite, summarize

log = logging.getLogger("inexact_lyap")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lyap-bench", description="Run a suite of inexact Lyapunov solver experiments.")
    p.add_argument("--config", default=str(default_config_path()), help="suite INI file (default: bundled desk.ini)")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the seed of every run")
    p.add_argument("--desk-scale", type=float, default=1.0, help="multiply grid sizes by this factor")
    p.add_argument("--parallel", action="store_true", help="run rows in worker processes (no timing columns)")
    p.add_argument("--only", default=None, help="comma-separated run labels to keep")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    configs = load_suite(args.config, seed=args.seed, desk_scale=args.desk_scale)
    if args.only:
        keep = set(args.only.split(","))
        configs = [c for c in configs if c.label in keep]
    log.info("running %d rows from %s", len(configs), args.config)
    rows = run_suite(configs, args.out, parallel=args.parallel)
    for r in rows:
        if r.error:
            print(f"{r.label}: FAILED {r.error}", file=sys.stderr)
    print(summarize(rows))
    print(f"wrote {args.out}/results.csv, {args.out}/results.md and traces/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
