"""Dense checks of the inexact rational Arnoldi relations and the RKSM residual gap.

Small ``n`` only; everything is assembled from the stored basis, Hessenberg
matrix, poles and recorded linear residuals rather than recomputed by the
solver's recurrences.
"""
from __future__ import annotations

import numpy as np

from ..factor import LowRankFactor
from ..inner import InnerConfig
from ..relax import RelaxPolicy
from ..rksm import rksm_solve
from .decay import decay_constant
from .nullvec import NullVectorOracle
from .report import CheckReport
from .residual import DENSE_MAX_N, residual_matrix_dense, true_residual_norm_dense
from .residual import residual_rounding_allowance


def _dense_AM(problem) -> np.ndarray:
    """Dense ``A M^{-1}``."""
    A = problem.A.toarray()
    if problem.has_identity_mass:
        return A
    return np.linalg.solve(problem.M.toarray().T, A.T).T


def _pieces(problem, result):
    st = result.state
    r, j = st.r, st.j
    m = j * r
    Q1 = st.Q  # j+1 blocks unless the space became invariant
    Hu = st.H
    xi = np.asarray(st.xi, dtype=complex)
    D = np.kron(np.diag(xi), np.eye(r))
    S = np.hstack(st.S) if st.S else np.zeros((problem.n, 0))
    return st, r, j, m, Q1, Hu, D, S


def rksm_decomposition_check(problem, result, tol: float = 1e-9) -> CheckReport:
    """Inexact decomposition, explicit/implicit ``T`` relation and the exact decomposition.

    * ``A Q_{j+1} H_under = Q_{j+1} M_under - S_j``, ``M_under = [I; 0] + H_under D_j``
    * ``T_expl - T_impl + Q_j^* S_j H_j^{-1} = 0``
    * ``A Q_j - Q_j T_expl - g_tilde H_j^{-1} = 0`` with
      ``g_tilde = g_j h_{j+1,j} E_j^* - (I - Q_j Q_j^*) S_j``
    """
    if problem.n > DENSE_MAX_N:
        raise ValueError(f"dense check needs n <= {DENSE_MAX_N}")
    st, r, j, m, Q1, Hu, D, S = _pieces(problem, result)
    rep = CheckReport(f"rksm decomposition ({problem.name})")
    if st.breakdown:
        rep.applicable = False
        rep.reason = "invariant subspace reached, no q_{j+1}"
        return rep
    AM = _dense_AM(problem)
    nA = np.linalg.norm(AM, 2)
    nH = np.linalg.norm(Hu, 2)
    Mu = np.vstack([np.eye(m), np.zeros((r, m))]) + Hu @ D
    lhs = AM @ Q1 @ Hu
    rep.add("inexact_decomposition", np.linalg.norm(lhs - Q1 @ Mu + S, 2), tol * nA * max(nH, 1.0))

    Qj = Q1[:, :m]
    Hj = Hu[:m, :m]
    Texpl = Qj.conj().T @ AM @ Qj
    Timpl = st.T_impl
    rel = Texpl - Timpl + np.linalg.solve(Hj.T, (Qj.conj().T @ S).T).T
    rep.add("T_relation", np.linalg.norm(rel, 2), tol * max(np.linalg.norm(Texpl, 2), 1e-300))
    rep.add("T_expl_recurrence", np.linalg.norm(Texpl - st.T_expl, 2), tol * np.linalg.norm(Texpl, 2))

    q = Q1[:, m:]
    g = q * st.xi[-1] - (AM @ q - Qj @ (Qj.conj().T @ (AM @ q)))
    E = np.zeros((r, m))
    E[:, m - r:] = np.eye(r)
    gt = g @ Hu[m:, m - r:] @ E - (S - Qj @ (Qj.conj().T @ S))
    res = AM @ Qj - Qj @ Texpl - np.linalg.solve(Hj.T, gt.T).T
    rep.add("decomposition_with_gtilde", np.linalg.norm(res, 2), tol * nA)
    if all(t is None for t in result.trace.column("tau_k")):
        # direct inner solves: the exact rational Arnoldi relation itself
        exact = AM @ Qj - Qj @ Texpl - np.linalg.solve(Hj.T, (g @ Hu[m:, m - r:] @ E).T).T
        rep.add("exact_decomposition", np.linalg.norm(exact, 2), tol * nA)
    return rep


def eta_dense(problem, result) -> np.ndarray:
    """``eta_j = (I - Q Q^*) S_j H_j^{-1} Y_j Q_j^*`` (explicit projection)."""
    st, r, j, m, Q1, Hu, D, S = _pieces(problem, result)
    Qj = Q1[:, :m]
    HY = np.linalg.solve(Hu[:m, :m], st.Y)
    SH = S @ HY
    return (SH - Qj @ (Qj.conj().T @ SH)) @ Qj.conj().T


def rksm_gap_check(problem, result, tol: float = 1e-8) -> CheckReport:
    """Dense residual gap versus ``||eta_j||`` and the recorded a-posteriori bound."""
    st, r, j, m, Q1, Hu, D, S = _pieces(problem, result)
    rep = CheckReport(f"rksm gap ({problem.name})")
    Qj = Q1[:, :m]
    X = LowRankFactor(Qj if problem.has_identity_mass else problem.mass.solve(Qj), st.Y)
    Rtrue = residual_matrix_dense(problem, X)
    # computed residual F + F^* with F = g h E^* H^{-1} Y Q^*
    if st.breakdown:
        Rcomp = np.zeros_like(Rtrue)
    else:
        AM = _dense_AM(problem)
        q = Q1[:, m:]
        g = q * st.xi[-1] - (AM @ q - Qj @ (Qj.conj().T @ (AM @ q)))
        HY = np.linalg.solve(Hu[:m, :m], st.Y)
        F = g @ Hu[m:, m - r:] @ HY[-r:] @ Qj.conj().T
        Rcomp = F + F.conj().T
    dR = np.linalg.norm(Rtrue - Rcomp, 2)
    eta = eta_dense(problem, result) if st.S and not st.breakdown else np.zeros((1, 1))
    ne = np.linalg.norm(eta, 2)
    slack = residual_rounding_allowance(problem, X)
    rep.add("gap_equals_eta", abs(dR - ne), tol * max(dR, ne) + slack)
    bound = result.trace.steps[-1].gap_bound
    rep.add("eta_below_bound", ne, bound * (1 + 1e-12) + slack)
    nt = true_residual_norm_dense(problem, X)
    rep.add("norm_gap_below_bound", abs(nt - result.trace.steps[-1].res_comp), bound * (1 + 1e-12) + slack)
    return rep


# ------------------------------------------- a-posteriori tolerances
def posteriori_tolerances(problem, result, eps: float) -> np.ndarray:
    """A-posteriori tolerances ``tau_k`` built from the final ``H_j`` of a run (``r = 1``)."""
    st = result.state
    if st.r != 1:
        raise ValueError("the a-posteriori tolerances are scalar (r = 1)")
    c, _, _ = decay_constant(problem.A)
    j = st.j
    Hu = st.H[: j + 1, :j]
    orc = NullVectorOracle(Hu, cond_guard=np.inf)
    Rt = [problem.normB2]
    for k in range(1, j):
        Rt.append(true_residual_norm_dense(problem, LowRankFactor(st.Q[:, :k], st.Y_history[k - 1])))
    res_comp = [s.res_comp for s in result.trace.steps]
    tau = np.empty(j)
    tau[0] = eps / (j * c * np.linalg.norm(orc.f(1)) * Rt[0])
    for k in range(2, j + 1):
        phi = abs(orc.phi(k))
        den = j / (phi * st.g_norms[k - 2]) * res_comp[k - 2] + j * c * np.linalg.norm(orc.f(k)) * Rt[k - 1]
        tau[k - 1] = eps / den
    return tau


def posteriori_tolerance_check(problem, eps_hat: float = 1e-8, j_max: int = 50, shrink: float = 0.5,
                   attempts: int = 6, seed: int = 12345) -> CheckReport:
    """Run RKSM with forced linear residuals at the a-posteriori tolerances and check ``||eta_j|| <= eps``.

    1. exact run: fixes the poles and gives a first estimate of the tolerances;
    2. forced run with ``||s_k|| = shrink * tau_k`` and the same poles, all steps;
    3. recompute ``tau_k`` from the forced run; shrink further until every
       ``||s_k|| <= tau_k`` holds for the run's own quantities.
    """
    rep = CheckReport(f"a-posteriori tolerances ({problem.name})")
    c, _, negdef = decay_constant(problem.A)
    if not negdef:
        rep.applicable = False
        rep.reason = "symmetric part of A is not negative definite"
        return rep
    eps = eps_hat * problem.normB2
    exact = rksm_solve(problem, eps_hat=eps_hat, j_max=j_max, keep_history=True)
    poles = list(exact.shifts.values)
    j = exact.state.j
    tau = posteriori_tolerances(problem, exact, eps)
    sched = shrink * tau
    ok = False
    run = None
    for _ in range(attempts):
        pol = RelaxPolicy("schedule", schedule=list(sched), tau_min=1e-300, tau_max=1.0)
        run = rksm_solve(problem, pol, shift_source=poles, inner_cfg=InnerConfig("forced", seed=seed),
                         eps_hat=eps_hat, j_max=j, keep_history=True, stop=False)
        if run.state.j != j:
            break
        tau_run = posteriori_tolerances(problem, run, eps)
        s = np.asarray(run.state.s_norms)
        if np.all(s <= tau_run):
            ok = True
            break
        sched = sched * np.minimum(1.0, shrink * tau_run / np.maximum(s, 1e-300))
    rep.add("tolerances_satisfied_a_posteriori", 0.0 if ok else 1.0, 0.0)
    if run is not None:
        ne = np.linalg.norm(eta_dense(problem, run), 2)
        rep.add("eta_below_eps", ne, eps)
        rep.add("eta_positive", 0.0 if ne > 0 else 1.0, 0.0, note="forced residuals are nonzero")
    return rep
