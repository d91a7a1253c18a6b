"""Row norms of Y_j and H_j^{-1} Y_j with their decay bounds, as plot-ready CSV.

The bounds need a negative definite symmetric part, so the default problem is
heat3d; ``--problem cd2d`` writes the same data with the report marked not
applicable.

    python3 scripts/decay_figure_data.py --out results/decay
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from inexact_lyap.problems import gen_cd2d, gen_heat3d
from inexact_lyap.rksm import rksm_solve
from inexact_lyap.verify import decay_bounds_check


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", choices=("heat3d", "cd2d"), default="heat3d")
    ap.add_argument("--grid", type=int, default=None)
    ap.add_argument("--out", default="results/decay")
    args = ap.parse_args()
    if args.problem == "heat3d":
        p = gen_heat3d(args.grid or 10, r=1)
    else:
        p = gen_cd2d(args.grid or 31)
    res = rksm_solve(p, eps_hat=1e-10, j_max=50, keep_history=True)
    rep = decay_bounds_check(p, res)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.to_csv(out / f"{args.problem}_bounds.csv")
    st = res.state
    Y = st.Y
    HY = np.linalg.solve(st.Hj(), Y) if not st.breakdown else None
    with (out / f"{args.problem}_rows.csv").open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["row", "norm_Y", "norm_HinvY", "res_true_prev"])
        for l in range(Y.shape[0]):
            hy = "" if HY is None else f"{np.linalg.norm(HY[l]):.6e}"
            wr.writerow([l + 1, f"{np.linalg.norm(Y[l]):.6e}", hy, f"{rep.res_true[l]:.6e}"])
    print(rep.text())


if __name__ == "__main__":
    main()
