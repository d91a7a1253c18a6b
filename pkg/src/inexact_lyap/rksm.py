"""Inexact rational Krylov subspace method (block rational Arnoldi + Galerkin).

Generalized equations ``A X M^T + M X A^T + B B^T = 0`` are handled through
the equivalent standard equation with ``A_M = A M^{-1}`` (so ``L_M = I``,
``U_M = M``): shifted solves use the pencil, ``w = M w_hat``, and the final
factor is ``X = (M^{-1} Q) Y (M^{-1} Q)^*``.  With this choice every residual
in the standard form equals the residual of the original equation.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dense_eig import lyap_dense, spectral_norm_small
from .factor import LowRankFactor, realify
from .inner import InnerConfig, ShiftedSolver
from .lacore import BREAKDOWN_TOL, OrthoBasis, gram_schmidt_extend, thin_qr
from .problems import LyapunovProblem
from .relax import RelaxPolicy, rksm_prac_tau
from .shifts import ShiftSequence, adaptive_shift_rksm, is_real_shift, power_estimate
from .trace import SolverTrace, StepRecord


class DeflationError(np.linalg.LinAlgError):
    """The new basis block is rank deficient but not zero (partial deflation)."""


class InnerSolveError(RuntimeError):
    def __init__(self, step: int, reports):
        super().__init__(f"inner solve failed at outer step {step}")
        self.step = step
        self.reports = reports


class _StandardOperator:
    """``x -> A M^{-1} x`` and its adjoint ``x -> M^{-1} A^T x``."""

    def __init__(self, problem: LyapunovProblem):
        self.A = problem.A
        self.mass = problem.mass
        self.AT = problem.A.T.tocsr()
        if self.mass.kind == "general":
            raise NotImplementedError("RKSM supports identity, diagonal or banded SPD mass matrices")

    def matvec(self, X):
        return self.A @ self.mass.solve(X)

    def rmatvec(self, X):
        return self.mass.solve(self.AT @ X)


@dataclass
class RksmState:
    """Quantities of the block rational Arnoldi process after ``j`` completed steps.

    ``Q`` holds ``j+1`` blocks, ``H`` is ``(j+1) r x j r`` and ``T_full`` is the
    explicit restriction onto all of ``Q``; ``T_expl`` refers to its leading
    ``j r`` block.
    """

    r: int
    Q: np.ndarray
    beta: np.ndarray
    H: np.ndarray
    xi: list
    T_full: np.ndarray
    AQ_last: np.ndarray  # A_M q_{j+1}
    T_impl: np.ndarray | None = None
    Y: np.ndarray | None = None
    S: list = field(default_factory=list)
    s_norms: list = field(default_factory=list)
    omega: np.ndarray | None = None  # raw left null row block, r x (j+1) r
    breakdown: bool = False  # invariant subspace found (h_{j+1,j} = 0)
    g_norms: list = field(default_factory=list)  # ||g_k|| after each step
    Y_history: list = field(default_factory=list)

    @property
    def j(self) -> int:
        return self.H.shape[1] // self.r

    @property
    def basis(self) -> OrthoBasis:
        return OrthoBasis(self.Q, self.r)

    @property
    def T_expl(self) -> np.ndarray:
        m = self.j * self.r
        return self.T_full[:m, :m]

    @property
    def D(self) -> np.ndarray:
        return np.kron(np.diag(np.asarray(self.xi, dtype=complex if any(np.iscomplexobj(x) for x in self.xi) else float)),
                       np.eye(self.r))

    def Hj(self) -> np.ndarray:
        m = self.j * self.r
        return self.H[:m, :m]

    def h_last(self) -> np.ndarray:
        r, m = self.r, self.j * self.r
        return self.H[m:m + r, m - r:m]

    def g(self) -> np.ndarray:
        """``g_j = q_{j+1} xi_{j+1} - (I - Q_j Q_j^*) A q_{j+1}``."""
        r, m = self.r, self.j * self.r
        q = self.Q[:, m:m + r]
        return q * self.xi[-1] - self.AQ_last + self.Q[:, :m] @ self.T_full[:m, m:m + r]


def rksm_init(problem: LyapunovProblem, op: _StandardOperator | None = None) -> RksmState:
    op = op or _StandardOperator(problem)
    q1, beta = thin_qr(problem.B)
    AQ = op.matvec(q1)
    T = q1.T @ AQ
    r = problem.r
    return RksmState(r=r, Q=q1, beta=beta, H=np.zeros((r, 0)), xi=[], T_full=T, AQ_last=AQ,
                     omega=np.eye(r))


def projected_solve(state: RksmState, projection: str = "expl") -> np.ndarray:
    """Solve ``T Y + Y T^* + Bt Bt^* = 0`` on the current basis.

    ``expl`` uses the explicit restriction onto all basis blocks (so it is
    available before the next solve), ``impl`` the implicit restriction of the
    last completed step.
    """
    if projection == "expl":
        T = state.T_full
    elif projection == "impl":
        T = state.T_impl
    else:
        raise ValueError("projection must be 'expl' or 'impl'")
    m = T.shape[0]
    Bt = np.zeros((m, state.r), dtype=state.beta.dtype)
    Bt[: state.r] = state.beta
    return lyap_dense(T, Bt @ Bt.conj().T)


def omega_extend(omega: np.ndarray, H: np.ndarray, r: int) -> tuple[np.ndarray, bool]:
    """Append the block ``x = -(omega h_{1:j,j}) h_{j+1,j}^{-1}`` so that ``omega H_under = 0``.

    Returns the extended row block and a flag for a singular ``h_{j+1,j}``.
    """
    m = H.shape[1]
    hcol = H[:m, m - r:m]
    hsub = H[m:m + r, m - r:m]
    rhs = -(omega @ hcol)
    dt = np.result_type(omega, H)
    if np.linalg.norm(hsub) == 0 or np.min(np.abs(np.diag(hsub))) <= BREAKDOWN_TOL * max(np.linalg.norm(H), 1e-300):
        return np.hstack([omega, np.zeros((r, r), dtype=dt)]), True
    x = np.linalg.solve(hsub.T, rhs.T).T
    return np.hstack([omega.astype(dt), x]), False


def normalized_omega(omega: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(omega, 2)
    return omega / n if n > 0 else omega


def rksm_arnoldi_step(state: RksmState, op: _StandardOperator, xi, solver: ShiftedSolver, tau: float,
                      mass=None, keep_residuals: bool = True):
    """One inexact rational Arnoldi step with pole ``xi``.

    Solves ``(A - xi M) w_hat = q_j`` to tolerance ``tau``, sets ``w = M w_hat``,
    extends the basis by CGS2 and updates ``H``, ``T_full``, ``T_impl``, ``omega``.

    Returns ``(state, solve_result)``.  A zero new block sets
    ``state.breakdown`` (invariant subspace); a partially rank deficient block
    raises :class:`DeflationError`.
    """
    r = state.r
    m_old = state.Q.shape[1]
    q = state.Q[:, m_old - r:]
    res = solver.solve(-xi, q, tau)
    w = res.X if mass is None else mass.matvec(res.X)
    Qn, h, rank_def = gram_schmidt_extend(OrthoBasis(state.Q, r), w)
    if rank_def:
        tail = np.abs(np.diag(h[-r:]))
        if np.all(tail < BREAKDOWN_TOL * max(np.linalg.norm(w), 1e-300)):
            state.breakdown = True
        else:
            raise DeflationError(f"rank-deficient basis block at step {state.j + 1}")
    dt = np.result_type(state.H.dtype, h.dtype, np.asarray(xi).dtype)
    H = np.zeros((m_old + r, state.H.shape[1] + r), dtype=dt)
    H[: state.H.shape[0], : state.H.shape[1]] = state.H
    H[:, state.H.shape[1]:] = h
    state.H = H
    state.xi.append(xi)
    S_blk = res.S.astype(dt, copy=False) if keep_residuals else None
    state.S.append(S_blk)
    state.s_norms.append(res.s_norm)

    if state.breakdown:
        state.omega, _ = omega_extend(state.omega, H, r)
        return state, res

    qn = Qn.Q[:, m_old:]
    AQn = op.matvec(qn)
    z = op.rmatvec(qn)
    Qold = state.Q.astype(np.result_type(state.Q, qn), copy=False)
    col = Qn.Q.conj().T @ AQn  # Q_{j+1}^* A q_{j+1}
    row = z.conj().T @ Qold  # q_{j+1}^* A Q_j
    T = np.zeros((m_old + r, m_old + r), dtype=np.result_type(state.T_full, col, row))
    T[:m_old, :m_old] = state.T_full
    T[:, m_old:] = col
    T[m_old:, :m_old] = row
    state.Q = Qn.Q
    state.T_full = T
    state.AQ_last = AQn

    m = state.j * r
    Hj = H[:m, :m]
    hsub = H[m:m + r, m - r:m]
    E = np.zeros((r, m))
    E[:, m - r:] = np.eye(r)
    lhs = np.eye(m) + Hj @ state.D - col[:m] @ hsub @ E
    state.T_impl = np.linalg.solve(Hj.T, lhs.T).T
    state.omega, _ = omega_extend(state.omega, H, r)
    return state, res


def _hinv_y(state: RksmState, Y: np.ndarray) -> np.ndarray:
    return np.linalg.solve(state.Hj(), Y)


def computed_residual_norm(state: RksmState, Y: np.ndarray | None = None) -> float:
    """``|| R_g h_{j+1,j} E_j^* H_j^{-1} Y_j ||`` with ``g_j = Q_g R_g`` (0 after a breakdown)."""
    if state.j == 0:
        return float(np.linalg.norm(state.beta, 2) ** 2)
    if state.breakdown:
        return 0.0
    Y = state.Y if Y is None else Y
    r = state.r
    HY = _hinv_y(state, Y)
    last = state.h_last() @ HY[-r:]
    _, Rg = np.linalg.qr(state.g())
    return spectral_norm_small(Rg @ last)


def _record_g(state: RksmState) -> None:
    state.g_norms.append(0.0 if state.breakdown else spectral_norm_small(state.g()))


def computed_residual_factor(state: RksmState, Y: np.ndarray | None = None) -> LowRankFactor:
    """``F + F^*`` with ``F = g_j h_{j+1,j} E_j^* H_j^{-1} Y_j Q_j^*`` as ``W [[0, I], [I, 0]] W^*``."""
    r, m = state.r, state.j * state.r
    n = state.Q.shape[0]
    if state.breakdown or state.j == 0:
        return LowRankFactor(np.zeros((n, 0)))
    Y = state.Y if Y is None else Y
    a = state.h_last() @ _hinv_y(state, Y)[-r:]
    W = np.hstack([state.g(), state.Q[:, :m] @ a.conj().T])
    K = np.block([[np.zeros((r, r)), np.eye(r)], [np.eye(r), np.zeros((r, r))]])
    return LowRankFactor(W, K)


def residual_gap_bound(state: RksmState, Y: np.ndarray | None = None) -> float:
    """``sum_k ||s_k|| ||E_k^* H_j^{-1} Y_j||`` over the completed steps."""
    if state.j == 0:
        return 0.0
    Y = state.Y if Y is None else Y
    r = state.r
    HY = _hinv_y(state, Y)
    total = 0.0
    for k, sn in enumerate(state.s_norms):
        if sn:
            total += sn * spectral_norm_small(HY[k * r:(k + 1) * r])
    return float(total)


def relax_tolerance_rksm(policy: RelaxPolicy, state: RksmState, k: int, prev_last_row=None, rhs_norm: float = 1.0) -> float:
    """Inner tolerance for step ``k`` (1-based).

    ``prev_last_row`` is ``h_{k,k-1} E_{k-1}^* H_{k-1}^{-1} Y_{k-1}`` from the
    previous step; ``state.Y`` must hold ``Y_k`` for ``prac2``.
    """
    if policy.kind == "fixed":
        return policy.tau * (rhs_norm if policy.relative else 1.0)
    if policy.kind == "schedule":
        return float(policy.schedule[min(k - 1, len(policy.schedule) - 1)])
    if k == 1 or prev_last_row is None:
        return rksm_prac_tau(policy, None)
    if policy.kind == "prac1":
        return rksm_prac_tau(policy, spectral_norm_small(prev_last_row))
    r = state.r
    Yk = state.Y
    rowvec = np.hstack([-prev_last_row, np.eye(r)])
    return rksm_prac_tau(policy, spectral_norm_small(rowvec @ Yk))


@dataclass
class RksmResult:
    factor: LowRankFactor
    trace: SolverTrace
    state: RksmState
    shifts: ShiftSequence
    converged: bool


def rksm_solve(problem: LyapunovProblem, policy: RelaxPolicy | None = None, shift_source=None,
               inner_cfg: InnerConfig | None = None, eps_hat: float = 1e-8, j_max: int | None = None,
               projection: str = "expl", keep_history: bool = False, pair_complex: bool = True,
               stop: bool = True) -> RksmResult:
    """Inexact RKSM for ``A X M^T + M X A^T + B B^T = 0``.

    Parameters
    ----------
    policy : RelaxPolicy, optional
        Inner tolerances; its ``eps`` is overwritten by ``eps_hat * ||B||^2``.
        Defaults to a fixed tolerance ``1e-10``.
    shift_source : None | "adaptive" | sequence
        User shifts (``Re > 0``) are cycled through; ``None`` selects adaptive poles.
    inner_cfg : InnerConfig, optional
        Defaults to sparse direct solves.
    keep_history : bool
        Keep every ``Y_k`` (needed by the a-posteriori theory checks).
    pair_complex : bool
        Follow an adaptive complex pole by its conjugate.
    stop : bool
        Stop once the computed residual reaches the tolerance; ``False`` runs
        all ``j_max`` steps (unless the space becomes invariant).
    """
    inner_cfg = inner_cfg or InnerConfig("direct")
    normB2 = problem.normB2
    eps = eps_hat * normB2
    if policy is None:
        policy = RelaxPolicy("fixed", eps=eps, tau=1e-10, delta=problem.delta)
    if j_max is None:
        j_max = policy.j_max
    policy.eps = eps
    policy.j_max = j_max
    policy.res0 = normB2
    op = _StandardOperator(problem)
    solver = ShiftedSolver(problem.A, problem.M, inner_cfg)
    mass = None if problem.mass.kind == "identity" else problem.mass
    state = rksm_init(problem, op)
    trace = SolverTrace("rksm", res0=normB2)
    shifts = ShiftSequence()
    user = None if shift_source in (None, "adaptive") else [s for s in np.atleast_1d(shift_source)]
    if user is not None and any(np.real(s) <= 0 for s in user):
        raise ValueError("RKSM poles must lie in the right half-plane")
    seed_shift = None
    pending_conj = None
    prev_last_row = None
    converged = False
    Y = None

    for k in range(1, j_max + 1):
        t0 = time.perf_counter()
        if projection == "expl":
            state.Y = projected_solve(state, "expl")
            if keep_history:
                state.Y_history.append(state.Y.copy())
        tau = relax_tolerance_rksm(policy, state, k, prev_last_row)

        if user is not None:
            xi, prov = user[(k - 1) % len(user)], "user"
            xi = float(np.real(xi)) if is_real_shift(xi) else complex(xi)
        elif pending_conj is not None:
            xi, prov, pending_conj = pending_conj, "adaptive", None
        else:
            if seed_shift is None:
                seed_shift = power_estimate(op.matvec, problem.n, 10)
            if k == 1:
                xi, prov = float(seed_shift), "seed"
            else:
                ritz = np.linalg.eigvals(state.T_full)
                prev = shifts.values[-1] if len(shifts) else None
                xi = adaptive_shift_rksm(ritz, shifts.as_array(), seed_shift, prev)
                prov = "adaptive"
                if pair_complex and not is_real_shift(xi):
                    pending_conj = np.conj(xi)
        shifts.append(xi, prov, paired=not is_real_shift(xi))

        state, res = rksm_arnoldi_step(state, op, xi, solver, tau, mass)
        if inner_cfg.method in ("bicgstab", "minres") and not res.converged:
            trace.flags.setdefault("inner_not_converged", []).append(k)

        if projection == "impl":
            # after a breakdown the space is invariant and the explicit restriction is exact
            state.Y = projected_solve(state, "expl" if state.breakdown else "impl")
            if keep_history:
                state.Y_history.append(state.Y.copy())
        Y = state.Y
        if keep_history:
            _record_g(state)
        res_comp = computed_residual_norm(state, Y)
        # explicit T: ||Delta R|| = ||eta||; implicit T: ||Delta R|| <= 2 ||eta||
        gap = residual_gap_bound(state, Y) * (2.0 if projection == "impl" else 1.0)
        if not state.breakdown:
            HY = _hinv_y(state, Y)
            prev_last_row = state.h_last() @ HY[-state.r:]
        trace.append(StepRecord(k, xi, None if inner_cfg.method == "direct" else tau, res.iterations, res.s_norm,
                                res_comp, gap, 1e3 * (time.perf_counter() - t0), rhs_norm=1.0))
        if state.breakdown:
            trace.flags["invariant_subspace"] = k
        if state.breakdown:
            converged = True
            break
        converged = res_comp <= eps
        # Q_j carries the poles xi_1..xi_{j-1}; stopping inside a conjugate pair leaves a complex X
        if converged and stop and shifts.closes_pairs(upto=state.j - 1):
            break

    m = state.j * state.r
    Qj = state.Q[:, :m]
    V = Qj if mass is None else mass.solve(Qj)
    if np.iscomplexobj(V) or np.iscomplexobj(Y):
        if shifts.closes_pairs(upto=state.j - 1):
            factor = realify(V, Y)
        else:
            factor = LowRankFactor(V, Y, complex_flag=True)
            trace.flags["complex_factor"] = True
    else:
        factor = LowRankFactor(V, Y)
    trace.converged = converged
    return RksmResult(factor, trace, state, shifts, converged)

