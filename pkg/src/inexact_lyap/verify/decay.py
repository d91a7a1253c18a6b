"""Decay bounds for the Galerkin solution ``Y_j`` and the rows of ``H_j^{-1} Y_j``.

Needs an exact-solve RKSM run with ``keep_history=True`` and ``r = 1`` (for
the row bounds).  The bounds hold when the symmetric part of ``A`` is
negative definite; otherwise the report is marked not applicable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from ..factor import LowRankFactor
from ..trace import fmt_float
from .nullvec import NullVectorOracle
from .residual import DENSE_MAX_N, true_residual_norm


def symmetric_part_max(A) -> float:
    """Largest eigenvalue of ``(A + A^*)/2``."""
    S = 0.5 * (A + A.conj().T)
    if A.shape[0] <= DENSE_MAX_N:
        return float(np.linalg.eigvalsh(S.toarray() if hasattr(S, "toarray") else S)[-1])
    return float(spla.eigsh(S.tocsc(), k=1, which="LA", return_eigenvectors=False)[0])


def decay_constant(A) -> tuple[float, float, bool]:
    """``(c_A, alpha_A, negative_definite)`` with ``c_A = (1 + sqrt 2)^2 / (2 alpha_A)``.

    ``alpha_A`` is half the modulus of the eigenvalue of ``A + A^*`` closest to zero.
    """
    lam = symmetric_part_max(A)
    alpha = abs(lam)  # lam already belongs to the halved matrix
    c = (1 + np.sqrt(2)) ** 2 / (2 * alpha) if alpha > 0 else np.inf
    return float(c), float(alpha), lam < 0


@dataclass
class DecayBoundReport:
    c_A: float
    alpha_A: float
    applicable: bool
    reason: str = ""
    deltaY: list = field(default_factory=list)  # (j, k, measured, bound)
    entries: list = field(default_factory=list)  # (j, max ratio, violations, count)
    rows: list = field(default_factory=list)  # (j, l, measured, bound)
    res_true: list = field(default_factory=list)

    @property
    def deltaY_violations(self) -> int:
        return sum(m > b for _, _, m, b in self.deltaY)

    @property
    def entry_violations(self) -> int:
        return sum(v for _, _, v, _ in self.entries)

    @property
    def row_violations(self) -> int:
        return sum(m > b for _, _, m, b in self.rows)

    @property
    def violations(self) -> int:
        return self.deltaY_violations + self.entry_violations + self.row_violations

    @property
    def n_checks(self) -> int:
        return len(self.deltaY) + sum(c for *_, c in self.entries) + len(self.rows)

    @property
    def passed(self) -> bool:
        return self.applicable and self.violations == 0

    def overestimation(self) -> dict:
        """Median and minimum of bound/measured per bound family."""
        out = {}
        for name, data in (("deltaY", self.deltaY), ("rows", self.rows)):
            f = np.array([b / m for *_, m, b in data if m > 0])
            if f.size:
                out[name] = (float(np.min(f)), float(np.median(f)))
        return out

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["family", "j", "index", "measured", "bound"])
            for j, k, m, b in self.deltaY:
                wr.writerow(["deltaY", j, k, fmt_float(m), fmt_float(b)])
            for j, l, m, b in self.rows:
                wr.writerow(["row", j, l, fmt_float(m), fmt_float(b)])

    def text(self) -> str:
        s = (f"decay bounds: c_A={self.c_A:.3e} alpha_A={self.alpha_A:.3e} applicable={self.applicable}"
             f" checks={self.n_checks} violations={self.violations}")
        if self.reason:
            s += f" ({self.reason})"
        for name, (lo, med) in self.overestimation().items():
            s += f"\n  {name}: overestimation min {lo:.2e} median {med:.2e}"
        return s


def decay_bounds_check(problem, result, rows: bool = True) -> DecayBoundReport:
    """Check the ``Y_j`` perturbation, entry and row bounds along an exact RKSM run."""
    c, alpha, negdef = decay_constant(problem.A)
    rep = DecayBoundReport(c, alpha, negdef)
    if not negdef:
        rep.reason = "symmetric part of A is not negative definite"
    if not problem.has_identity_mass:
        rep.applicable = False
        rep.reason = "bounds are stated for M = I"
    st = result.state
    r = st.r
    Ys = st.Y_history
    J = len(Ys)
    if J == 0:
        return rep
    # true residual norms R_0..R_J of the intermediate Galerkin solutions
    Rt = [problem.normB2]
    for k in range(1, J + 1):
        Q = st.Q[:, : k * r]
        Rt.append(true_residual_norm(problem, LowRankFactor(Q, Ys[k - 1])))
    rep.res_true = Rt
    for j in range(1, J + 1):
        Yj = Ys[j - 1]
        for k in range(1, j):
            P = np.zeros_like(Yj)
            P[: k * r, : k * r] = Ys[k - 1]
            rep.deltaY.append((j, k, float(np.linalg.norm(Yj - P, 2)), c * Rt[k]))
        # entries: |Y_j(l, i)| <= c_A min_{p <= max(l, i)} R_{p-1}, block indices
        idx = np.arange(j * r) // r + 1
        mx = np.maximum(idx[:, None], idx[None, :])
        runmin = np.minimum.accumulate(np.array(Rt[:j]))
        bound = c * runmin[mx - 1]
        ratio = np.abs(Yj) / bound
        rep.entries.append((j, float(ratio.max()), int(np.sum(ratio > 1)), ratio.size))
    if rows and r == 1:
        res_comp = [s.res_comp for s in result.trace.steps]
        for j in range(1, J + 1):
            if j > st.H.shape[1]:
                break
            Hu = st.H[: j + 1, :j]
            orc = NullVectorOracle(Hu, cond_guard=np.inf)
            HY = np.linalg.solve(Hu[:j, :j], Ys[j - 1])
            for l in range(1, j + 1):
                meas = float(np.linalg.norm(HY[l - 1]))
                fn = float(np.linalg.norm(orc.f(l)))
                if l == 1:
                    b = c * fn * Rt[0]
                else:
                    phi = abs(orc.phi(l))
                    g = st.g_norms[l - 2]
                    b = res_comp[l - 2] / (phi * g) + c * fn * Rt[l - 1] if phi * g > 0 else np.inf
                rep.rows.append((j, l, meas, b))
    return rep
