"""Dense checks of the LR-ADI identities, gap bounds and theoretical relaxation."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from ..factor import LowRankFactor
from ..inner import InnerConfig
from ..lradi import adi_T_matrix, lradi_solve
from ..relax import AdiRelaxPolicy
from .report import CheckReport
from .residual import DENSE_MAX_N, residual_matrix_dense, residual_rounding_allowance


def cayley_dense(A: np.ndarray, M: np.ndarray, alpha) -> np.ndarray:
    """``(A - conj(alpha) M)(A + alpha M)^{-1}``, the map ``w_{j-1} -> w_j`` of exact ADI."""
    return np.linalg.solve((A + alpha * M).T, (A - np.conj(alpha) * M).T).T


def cayley_apply(A: np.ndarray, M: np.ndarray, alpha):
    """``x -> C x`` for the Cayley map of :func:`cayley_dense`, through one dense LU."""
    lu = scipy.linalg.lu_factor(A + alpha * M)
    B = A - np.conj(alpha) * M
    return lambda x: B @ scipy.linalg.lu_solve(lu, x)



def _dense(problem):
    if problem.n > DENSE_MAX_N:
        raise ValueError(f"dense check needs n <= {DENSE_MAX_N}")
    return problem.A.toarray(), problem.M.toarray()


def adi_identity_checks(problem, result, tol: float = 1e-9) -> CheckReport:
    """Decomposition, residual identity, T structure, residual-factor recursion and gap bound."""
    A, M = _dense(problem)
    st = result.state
    r = st.r
    rep = CheckReport(f"adi identities ({problem.name})")
    Z = st.Z
    S = np.hstack(st.S)
    T, g, Gam = adi_T_matrix(st.shifts, r)
    # the shift-built quantities
    rep.add("T_structure", np.linalg.norm(T + T.conj().T + g @ g.conj().T, 2),
            1e-14 * max(np.linalg.norm(T, 2), 1.0))
    nA = np.linalg.norm(A, 2)
    nZ = np.linalg.norm(Z, 2)
    dec = A @ Z - M @ Z @ T - st.w @ g.conj().T + S @ Gam
    rep.add("decomposition", np.linalg.norm(dec, 2), tol * nA * max(nZ, 1.0))

    X = LowRankFactor(Z)
    Rtrue = residual_matrix_dense(problem, X)
    eta = -S @ Gam @ Z.conj().T @ M.T
    Rid = eta + eta.conj().T + st.w @ st.w.conj().T
    scale = nA * np.linalg.norm(M, 2) * nZ**2 + problem.normB2
    rep.add("residual_identity", np.linalg.norm(Rtrue - Rid, 2), tol * scale)

    # residual factors from Cayley products: w_j = C_j w_{j-1} - (C_j - I) s_j
    exact_run = all(t is None for t in result.trace.column("tau_k"))
    w = np.asarray(problem.B, dtype=complex)
    w_exact = w.copy()
    Cn = []
    for k, a in enumerate(st.shifts):
        apply_C = cayley_apply(A, M, a)
        s = st.S[k]
        w = apply_C(w - s) + s
        w_exact = apply_C(w_exact)
        if exact_run:
            C = apply_C(np.eye(problem.n))
            # largest eigenvalue of the Gram matrix: accurate for the top singular value, cheaper than an SVD
            G = C.conj().T @ C
            Cn.append(float(np.sqrt(scipy.linalg.eigh(G, eigvals_only=True,
                                                      subset_by_index=[problem.n - 1, problem.n - 1])[0])))
    nw = max(np.linalg.norm(st.w), 1e-300)
    rep.add("residual_factor_recursion", np.linalg.norm(w - st.w) / max(np.linalg.norm(problem.B), 1e-300), 1e-10,
            note=f"||w_j|| = {nw:.2e}")
    if exact_run:
        rep.add("exact_residual_factor", np.linalg.norm(st.w - w_exact) / np.linalg.norm(problem.B), 1e-10)
        # contraction: ||R_j|| <= ||C_j||^2 ||R_{j-1}|| whenever ||C_j|| < 1
        prev = problem.normB2
        ratios = []
        for k, rec in enumerate(result.trace.steps):
            if Cn[k] < 1:
                ratios.append(rec.res_comp / (Cn[k] ** 2 * prev))
            prev = rec.res_comp
        if ratios:
            rep.add("contraction", max(ratios), 1 + 1e-10, note=f"{len(ratios)} contractive steps")

    ne = np.linalg.norm(eta, 2)
    slack = residual_rounding_allowance(problem, X)
    rep.add("eta_below_u", ne, st.u * (1 + 1e-12) + slack)
    dR = np.linalg.norm(Rtrue - st.w @ st.w.conj().T, 2)
    rep.add("gap_below_2u", dR, 2 * st.u * (1 + 1e-12) + slack)
    return rep


def theo_relaxation_check(problem, kind: str = "theo1", shifts=None, eps_hat: float = 1e-8, j_max: int = 50,
                    seed: int = 12345):
    """Run LR-ADI with forced ``||s_k|| = tau_k`` from the theoretical rule; check ``||Delta R|| <= eps``.

    Returns ``(report, result)``.
    """
    rep = CheckReport(f"{kind} ({problem.name})")
    pol = AdiRelaxPolicy(kind, tau_min=1e-300, tau_max=1.0)
    res = lradi_solve(problem, pol, shift_source=shifts, inner_cfg=InnerConfig("forced", seed=seed),
                      eps_hat=eps_hat, j_max=j_max, stop=False)
    eps = eps_hat * problem.normB2
    st = res.state
    Rtrue = residual_matrix_dense(problem, LowRankFactor(st.Z))
    dR = np.linalg.norm(Rtrue - st.w @ st.w.conj().T, 2)
    rep.add("gap_below_eps", dR, eps)
    rep.add("s_equals_tau", max(abs(s - t) / t for s, t in zip(st.s_norms, res.trace.column("tau_k"))), 1e-6,
            note="forced residual norms")
    return rep, res


def adi_decay_check(problem, shifts, eps_hat: float = 1e-8, j_max: int = 30, seed: int = 12345) -> CheckReport:
    """``||R^comp_jmax|| <= ||R^exact_jmax|| + eps`` for a theo1 run and an exact run on the same shifts."""
    A, M = _dense(problem)
    rep = CheckReport(f"computed residual decay ({problem.name})")
    norms = [np.linalg.norm(cayley_dense(A, M, a), 2) for a in shifts]
    rep.add("cayley_contractive", max(norms), 1.0, passed=max(norms) < 1)
    exact = lradi_solve(problem, shift_source=shifts, eps_hat=eps_hat, j_max=j_max, stop=False)
    rep_theo, inexact = theo_relaxation_check(problem, "theo1", shifts, eps_hat, j_max, seed)
    eps = eps_hat * problem.normB2
    rc = inexact.trace.steps[-1].res_comp
    re = exact.trace.steps[-1].res_comp
    rep.add("computed_residual_decay", rc, re + eps)
    rt = np.linalg.norm(residual_matrix_dense(problem, LowRankFactor(inexact.state.Z)), 2)
    rep.add("true_residual_decay", rt, re + 2 * eps)
    rep.items.extend(rep_theo.items)
    return rep
