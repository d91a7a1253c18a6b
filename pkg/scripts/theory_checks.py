"""Run the dense verification checks on small problems and print the reports.

    python3 scripts/theory_checks.py
"""
import numpy as np

from inexact_lyap.inner import InnerConfig
from inexact_lyap.lradi import lradi_solve
from inexact_lyap.problems import gen_cd2d, gen_heat3d, gen_msd
from inexact_lyap.relax import AdiRelaxPolicy, RelaxPolicy
from inexact_lyap.rksm import rksm_solve
from inexact_lyap.shifts import adi_adaptive_shifts
from inexact_lyap.verify import (adi_identity_checks, lemma5_check, random_hessenberg, rksm_decomposition_check,
                                 rksm_gap_check, theo_relaxation_check, adi_decay_check, posteriori_tolerance_check)


def main():
    reports = []
    rng = np.random.default_rng(0)
    lem = [lemma5_check(random_hessenberg(rng, 12)) for _ in range(100)]
    print(f"null-vector formulas: {sum(r.passed for r in lem)}/{sum(r.applicable for r in lem)} applicable trials pass")
    for p in (gen_cd2d(20), gen_msd(20, 1)):
        pol = RelaxPolicy("fixed", tau=1e-6, relative=False)
        r = rksm_solve(p, pol, inner_cfg=InnerConfig("forced"), j_max=25, stop=False)
        reports += [rksm_decomposition_check(p, r), rksm_gap_check(p, r)]
        a = lradi_solve(p, AdiRelaxPolicy("prac2"), inner_cfg=InnerConfig("bicgstab", "ilut"))
        reports.append(adi_identity_checks(p, a))
    reports += [theo_relaxation_check(gen_cd2d(15), k)[0] for k in ("theo1", "theo2")]
    reports.append(posteriori_tolerance_check(gen_heat3d(7, r=1)))
    q = gen_heat3d(6, r=1)
    reports.append(adi_decay_check(q, adi_adaptive_shifts(q.A, q.M, None, q.B, 1)[:8], j_max=32))
    for rep in reports:
        print(rep.text())
    print(f"{sum(r.passed for r in reports)}/{len(reports)} reports pass")


if __name__ == "__main__":
    main()
