"""True Lyapunov residual norms, by dense assembly or matrix-free Lanczos."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as spnorm

from ..factor import LowRankFactor
from ..rng import gaussian_matrix

DENSE_MAX_N = 2000


def _mass(problem):
    return problem.M if problem.M is not None else sp.identity(problem.n, format="csr")


def residual_matrix_dense(problem, factor: LowRankFactor | None) -> np.ndarray:
    """``A X M^T + M X A^T + B B^*`` as a dense array."""
    if problem.n > DENSE_MAX_N:
        raise ValueError(f"dense residual needs n <= {DENSE_MAX_N}")
    B = np.asarray(problem.B)
    R = B @ B.conj().T
    if factor is None or factor.ncols == 0:
        return R
    X = factor.dense()
    M = _mass(problem)
    AX = problem.A @ X
    AXMt = (M @ AX.T).T
    R = R + AXMt + AXMt.conj().T
    return 0.5 * (R + R.conj().T)


def true_residual_norm_dense(problem, factor: LowRankFactor | None) -> float:
    """Largest eigenvalue modulus of the assembled (Hermitian) residual."""
    lam = np.linalg.eigvalsh(residual_matrix_dense(problem, factor))
    return float(np.max(np.abs(lam)))


@dataclass
class LanczosEstimate:
    value: float  # Ritz value of largest modulus (a lower bound)
    upper: float  # value + residual estimate
    converged: bool
    steps: int

    def __float__(self) -> float:
        return self.value


def residual_operator(problem, factor: LowRankFactor | None):
    """``y -> A X M^T y + M X A^T y + B B^* y`` without forming ``X``."""
    A, AT = problem.A, problem.A.T.tocsr()
    M = _mass(problem)
    MT = M.T.tocsr()
    B = np.asarray(problem.B)

    def apply(y):
        out = B @ (B.conj().T @ y)
        if factor is not None and factor.ncols:
            out = out + A @ factor.matvec(MT @ y) + M @ factor.matvec(AT @ y)
        return out

    return apply


def lanczos_norm(apply, n: int, complex_: bool = False, steps: int = 80, tol: float = 1e-6,
                 seed: int = 0) -> LanczosEstimate:
    """Largest eigenvalue modulus of a Hermitian operator by Lanczos with full reorthogonalization."""
    dt = complex if complex_ else float
    v = gaussian_matrix(seed, n, 1)[:, 0].astype(dt)
    v /= np.linalg.norm(v)
    V = np.zeros((n, steps + 1), dt)
    V[:, 0] = v
    alph, bet = [], []
    theta, est, conv = 0.0, np.inf, False
    m = 0
    for k in range(steps):
        w = apply(V[:, k])
        a = float(np.real(np.vdot(V[:, k], w)))
        w = w - a * V[:, k] - (bet[-1] * V[:, k - 1] if k else 0.0)
        for _ in range(2):
            w -= V[:, : k + 1] @ (V[:, : k + 1].conj().T @ w)
        b = float(np.linalg.norm(w))
        alph.append(a)
        m = k + 1
        T = np.diag(alph) + np.diag(bet, 1) + np.diag(bet, -1)
        lam, U = np.linalg.eigh(T)
        i = int(np.argmax(np.abs(lam)))
        theta = abs(lam[i])
        est = b * abs(U[-1, i])
        if b <= 1e-13 * max(theta, 1e-300) or est <= tol * theta:
            conv = True
            break
        bet.append(b)
        V[:, k + 1] = w / b
    return LanczosEstimate(float(theta), float(theta + est), conv, m)


def true_residual_norm_lanczos(problem, factor: LowRankFactor | None, steps: int = 80, tol: float = 1e-6,
                               seed: int = 0) -> LanczosEstimate:
    """Lanczos on the residual operator.

    The residual has rank at most ``2 ncols + r``, so the recurrence usually
    breaks down (exactly) well before ``steps``.
    """
    cplx = factor is not None and factor.is_complex
    return lanczos_norm(residual_operator(problem, factor), problem.n, cplx, steps, tol, seed)


def residual_gap_norm(problem, factor: LowRankFactor | None, computed: LowRankFactor, **kw) -> float:
    """``||R_true - R_comp||`` with the computed residual given in low-rank form."""
    if problem.n <= DENSE_MAX_N:
        D = residual_matrix_dense(problem, factor) - computed.dense()
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (D + D.conj().T)))))
    true_op = residual_operator(problem, factor)
    cplx = computed.is_complex or (factor is not None and factor.is_complex)
    return lanczos_norm(lambda y: true_op(y) - computed.matvec(y), problem.n, cplx, **kw).value


def true_residual_norm(problem, factor: LowRankFactor | None, **kw) -> float:
    """Dense oracle up to ``DENSE_MAX_N``, Lanczos beyond."""
    if problem.n <= DENSE_MAX_N:
        return true_residual_norm_dense(problem, factor)
    return true_residual_norm_lanczos(problem, factor, **kw).value


def residual_rounding_allowance(problem, factor: LowRankFactor | None) -> float:
    """Rough size of the rounding error in an evaluated residual norm.

    ``sqrt(n) u (2 ||A|| ||M|| ||X|| + ||B||^2)`` with 1-norms as cheap
    stand-ins; used as slack when comparing measured gaps to bounds.
    """
    u = np.finfo(float).eps
    normB2 = problem.normB2
    if factor is None or factor.ncols == 0:
        return np.sqrt(problem.n) * u * normB2
    nV = np.linalg.norm(factor.V, 2)
    nX = nV**2 * (np.linalg.norm(factor.Y, 2) if factor.Y is not None else 1.0)
    nA = spnorm(problem.A, 1)
    nM = spnorm(_mass(problem), 1)
    return float(np.sqrt(problem.n) * u * (2 * nA * nM * nX + normB2))
