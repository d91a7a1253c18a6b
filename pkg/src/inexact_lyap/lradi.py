"""Inexact low-rank ADI iteration with residual factors.

One step with shift ``alpha`` (``Re alpha < 0``)::

    v = (A + alpha M)^{-1} w          (inexact: s = w - (A + alpha M) v)
    w <- w - 2 Re(alpha) M v
    Z <- [Z, gamma v],  gamma = sqrt(-2 Re alpha)

so that ``A Z M^T + M Z A^T + B B^T = w w^*`` for exact solves.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dense_eig import spectral_norm_small
from .factor import LowRankFactor, realify
from .inner import InnerConfig, ShiftedSolver
from .problems import LyapunovProblem
from .relax import AdiRelaxPolicy, adi_prac1_tau, adi_prac2_tau, adi_theo_tau
from .shifts import ShiftSequence, adi_adaptive_shifts, is_real_shift
from .trace import SolverTrace, StepRecord

THEO_MAX_N = 500


@dataclass
class AdiState:
    """Iterates of LR-ADI after ``j`` steps; ``u`` bounds ``||S Gamma Z^* M^*||``."""

    Z: np.ndarray
    w: np.ndarray
    shifts: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    s_norms: list = field(default_factory=list)
    Mv_norms: list = field(default_factory=list)
    S: list = field(default_factory=list)
    u: float = 0.0
    u_history: list = field(default_factory=list)

    @property
    def j(self) -> int:
        return len(self.shifts)

    @property
    def r(self) -> int:
        return self.w.shape[1]


def adi_init(problem: LyapunovProblem) -> AdiState:
    B = np.asarray(problem.B, dtype=float)
    return AdiState(Z=np.zeros((problem.n, 0)), w=B.copy())


def adi_residual_norm(state: AdiState) -> float:
    """``||w^* w||_2``, the computed Lyapunov residual norm."""
    return spectral_norm_small(state.w) ** 2 if state.w.size else 0.0


def adi_gap_update(state: AdiState, gamma2: float, Mv_norm: float, s_norm: float) -> float:
    """``u_k = u_{k-1} + gamma_k^2 ||M v_k|| ||s_k||``."""
    state.u += gamma2 * Mv_norm * s_norm
    state.u_history.append(state.u)
    return state.u


def adi_step(state: AdiState, alpha, solver: ShiftedSolver, tau: float, M=None, keep_residuals: bool = True):
    """One inexact LR-ADI step; returns ``(state, solve_result, Mv)``."""
    if np.real(alpha) >= 0:
        raise ValueError("ADI shifts must satisfy Re(alpha) < 0")
    res = solver.solve(alpha, state.w, tau)
    v = res.X
    Mv = v if M is None else M @ v
    ra = float(np.real(alpha))
    gamma2 = -2.0 * ra
    w = state.w - 2.0 * ra * Mv
    dt = np.result_type(state.Z, v)
    state.Z = np.hstack([state.Z.astype(dt, copy=False), np.sqrt(gamma2) * v])
    state.w = w
    state.shifts.append(alpha)
    state.gammas.append(np.sqrt(gamma2))
    state.s_norms.append(res.s_norm)
    Mv_norm = float(np.linalg.norm(Mv, 2)) if Mv.shape[1] > 1 else float(np.linalg.norm(Mv))
    state.Mv_norms.append(Mv_norm)
    state.S.append(res.S if keep_residuals else None)
    adi_gap_update(state, gamma2, Mv_norm, res.s_norm)
    return state, res, Mv


def dense_sigma(problem: LyapunovProblem, alpha) -> float:
    """``||M (A + alpha M)^{-1}||_2`` by a dense SVD (small ``n`` only)."""
    if problem.n > THEO_MAX_N:
        raise ValueError(f"theoretical relaxation needs n <= {THEO_MAX_N}")
    A = problem.A.toarray()
    M = problem.M.toarray()
    K = np.linalg.solve((A + alpha * M).T, M.T).T
    return float(np.linalg.norm(K, 2))


def relax_tolerance_adi(policy: AdiRelaxPolicy, state: AdiState, k: int, res_prev: float,
                        sigma: float | None = None, alpha=None) -> float:
    """Absolute bound on ``||s_k||`` for step ``k`` (1-based)."""
    if policy.kind == "fixed":
        if policy.relative:
            return policy.tau * spectral_norm_small(state.w)
        return policy.tau
    if policy.kind == "schedule":
        return float(policy.schedule[min(k - 1, len(policy.schedule) - 1)])
    if policy.kind == "prac1":
        return adi_prac1_tau(policy, res_prev)
    if policy.kind == "prac2":
        return adi_prac2_tau(policy, k, res_prev, state.u)
    gamma2 = -2.0 * float(np.real(alpha))
    return adi_theo_tau(policy, k, np.sqrt(res_prev), sigma, gamma2, state.u)


@dataclass
class AdiResult:
    factor: LowRankFactor
    trace: SolverTrace
    state: AdiState
    shifts: ShiftSequence
    converged: bool


def lradi_solve(problem: LyapunovProblem, policy: AdiRelaxPolicy | None = None, shift_source=None,
                inner_cfg: InnerConfig | None = None, eps_hat: float = 1e-8, j_max: int | None = None,
                keep_residuals: bool = True, stop: bool = True) -> AdiResult:
    """Inexact LR-ADI for ``A X M^T + M X A^T + B B^T = 0``.

    Parameters
    ----------
    policy : AdiRelaxPolicy, optional
        Inner tolerances; ``eps`` is set to ``eps_hat * ||B||^2``.
    shift_source : None | "adaptive" | sequence
        User shifts (``Re < 0``, conjugates adjacent) are cycled; otherwise
        batches of projection shifts are generated from the trailing columns of ``Z``.
    stop : bool
        ``False`` runs all ``j_max`` steps regardless of the residual.

    Notes
    -----
    The trace column ``gap_bound`` holds ``2 u_k``, which bounds the norm of
    the residual gap ``Delta R = eta + eta^*``.
    """
    inner_cfg = inner_cfg or InnerConfig("direct")
    normB2 = problem.normB2
    eps = eps_hat * normB2
    if policy is None:
        policy = AdiRelaxPolicy("fixed", eps=eps, tau=1e-10)
    if j_max is None:
        j_max = policy.j_max
    policy.eps = eps
    policy.j_max = j_max
    if policy.kind in ("theo1", "theo2") and problem.n > THEO_MAX_N:
        raise ValueError(f"theoretical relaxation needs n <= {THEO_MAX_N}")
    solver = ShiftedSolver(problem.A, problem.M, inner_cfg)
    M = None if problem.mass.kind == "identity" else problem.M
    state = adi_init(problem)
    trace = SolverTrace("lradi", res0=normB2)
    shifts = ShiftSequence()
    user = None if shift_source in (None, "adaptive") else list(np.atleast_1d(shift_source))
    if user is not None and any(np.real(a) >= 0 for a in user):
        raise ValueError("ADI shifts must lie in the open left half-plane")
    batch: list = []
    last_batch: list = []
    sigma_cache: dict = {}
    res_prev = normB2
    converged = res_prev <= eps

    k = 0
    while (not converged or not stop) and k < j_max:
        k += 1
        t0 = time.perf_counter()
        if user is not None:
            alpha, prov = user[(k - 1) % len(user)], "user"
        else:
            if not batch:
                batch = adi_adaptive_shifts(problem.A, problem.M, state.Z, problem.B, problem.r)
                if not batch:
                    if not last_batch:
                        raise RuntimeError("no stable projection shifts available")
                    batch = list(last_batch)
                    trace.flags.setdefault("reused_shift_batch", []).append(k)
                last_batch = list(batch)
            alpha, prov = batch.pop(0), "adaptive"
        alpha = float(np.real(alpha)) if is_real_shift(alpha) else complex(alpha)
        shifts.append(alpha, prov, paired=not is_real_shift(alpha))

        sigma = None
        if policy.kind in ("theo1", "theo2"):
            key = complex(alpha)
            if key not in sigma_cache:
                sigma_cache[key] = dense_sigma(problem, alpha)
            sigma = sigma_cache[key]
        w_norm = spectral_norm_small(state.w)
        tau = relax_tolerance_adi(policy, state, k, res_prev, sigma, alpha)
        state, res, _ = adi_step(state, alpha, solver, tau, M, keep_residuals)
        if inner_cfg.method in ("bicgstab", "minres") and not res.converged:
            trace.flags.setdefault("inner_not_converged", []).append(k)
        res_prev = adi_residual_norm(state)
        trace.append(StepRecord(k, alpha, None if inner_cfg.method == "direct" else tau, res.iterations,
                                res.s_norm, res_prev, 2.0 * state.u, 1e3 * (time.perf_counter() - t0),
                                rhs_norm=w_norm))
        # a pair is only complete after the conjugate step
        pair_open = not is_real_shift(alpha) and not shifts.closes_pairs()
        converged = res_prev <= eps and not pair_open

    Z = state.Z
    if np.iscomplexobj(Z):
        if shifts.closes_pairs():
            factor = realify(Z)
        else:
            factor = LowRankFactor(Z, complex_flag=True)
            trace.flags["complex_factor"] = True
    else:
        factor = LowRankFactor(Z)
    trace.converged = converged
    return AdiResult(factor, trace, state, shifts, converged)


def adi_T_matrix(shifts, r: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(T, g, Gamma)`` of the rational Arnoldi-like decomposition
    ``A Z = M Z T + w g^* - S Gamma``.

    ``T`` is lower triangular with ``T_kk = conj(alpha_k)`` and
    ``T_ik = -gamma_i gamma_k`` (``i > k``); ``g = (gamma_k)`` and
    ``Gamma = diag(gamma_k)``, all Kronecker-expanded by ``I_r``.
    """
    a = np.asarray(shifts, dtype=complex)
    gam = np.sqrt(-2.0 * a.real)
    T = -np.tril(np.outer(gam, gam), -1) + np.diag(a.conj())
    if np.all(a.imag == 0):
        T = T.real
    I = np.eye(r)
    return np.kron(T, I), np.kron(gam[:, None], I), np.kron(np.diag(gam), I)
