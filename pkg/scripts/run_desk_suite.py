"""Run the bundled desk suite and print the markdown table.

    python3 scripts/run_desk_suite.py --out results/desk
"""
import argparse
from pathlib import Path

from inexact_lyap.bench import default_config_path, load_suite, run_suite, summarize


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(default_config_path("desk.ini")))
    ap.add_argument("--out", default="results/desk")
    ap.add_argument("--desk-scale", type=float, default=1.0)
    args = ap.parse_args()
    rows = run_suite(load_suite(args.config, desk_scale=args.desk_scale), args.out)
    print((Path(args.out) / "results.md").read_text())
    print(summarize(rows))
    for r in rows:
        flag = "ok " if r.gap_true <= r.gap_bound + r.gap_slack else "BAD"
        print(f"[{flag}] {r.label:32s} res_true {r.res_true:.2e} gap {r.gap_true:.2e} bound {r.gap_bound:.2e}")


if __name__ == "__main__":
    main()
