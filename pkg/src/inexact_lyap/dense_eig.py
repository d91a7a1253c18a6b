"""Small dense eigen machinery and the projected Lyapunov solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class SpectrumSplittingError(np.linalg.LinAlgError):
    """``T`` has eigenvalues ``l_i, l_k`` with ``l_i + conj(l_k) ~ 0``."""

    def __init__(self, lam_i, lam_k):
        super().__init__(
            f"eigenvalues {lam_i:.6g} and {lam_k:.6g} violate the splitting condition "
            f"(lambda_i + conj(lambda_k) = {lam_i + np.conj(lam_k):.3g})"
        )
        self.pair = (lam_i, lam_k)


class SchurConvergenceError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SchurForm:
    """Complex Schur form ``T = U S U*``."""

    U: np.ndarray
    S: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.diag(self.S).copy()


def _square(T) -> np.ndarray:
    T = np.asarray(T)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {T.shape}")
    return T


def hessenberg_reduce(T) -> tuple[np.ndarray, np.ndarray]:
    """Unitary reduction ``T = V H V*`` with ``H`` upper Hessenberg."""
    T = _square(T)
    if T.shape[0] <= 2:
        return np.eye(T.shape[0], dtype=T.dtype), T.copy()
    H, V = sla.hessenberg(T, calc_q=True)
    return V, H


def schur(T) -> SchurForm:
    """Complex Schur decomposition (LAPACK ``gees``: Hessenberg + shifted QR with deflation)."""
    T = _square(T)
    if T.shape[0] == 0:
        return SchurForm(np.zeros((0, 0), complex), np.zeros((0, 0), complex))
    try:
        S, U = sla.schur(T.astype(complex), output="complex")
    except np.linalg.LinAlgError as exc:
        raise SchurConvergenceError(f"Schur QR iteration failed: {exc}") from exc
    return SchurForm(U, S)


def lyap_dense(T, W, *, split_tol: float = 1e-13, schur_form: SchurForm | None = None) -> np.ndarray:
    """Solve ``T Y + Y T* + W = 0`` by Bartels–Stewart on the complex Schur form.

    The result is Hermitian-symmetrized; it is returned real when ``T`` and
    ``W`` are both real.

    Raises
    ------
    SpectrumSplittingError
        If two eigenvalues satisfy ``|l_i + conj(l_k)| <= split_tol * max|l|``.
    """
    T = _square(T)
    W = _square(W)
    if W.shape != T.shape:
        raise ValueError("T and W must have the same shape")
    n = T.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=np.result_type(T, W))
    sf = schur_form if schur_form is not None else schur(T)
    U, S = sf.U, sf.S
    lam = np.diag(S)
    sums = lam[:, None] + np.conj(lam)[None, :]
    scale = max(np.max(np.abs(lam)), np.finfo(float).tiny)
    bad = np.argwhere(np.abs(sums) <= split_tol * scale)
    if bad.size:
        i, k = bad[0]
        raise SpectrumSplittingError(lam[i], lam[k])

    Wt = U.conj().T @ W @ U
    Y = np.zeros((n, n), dtype=complex)
    Sc = S.conj()
    # column k couples to columns i>k through conj(S[k, i]); sweep right to left
    for k in range(n - 1, -1, -1):
        rhs = -Wt[:, k]
        if k + 1 < n:
            rhs = rhs - Y[:, k + 1:] @ Sc[k, k + 1:]
        Sk = S + Sc[k, k] * np.eye(n)
        Y[:, k] = sla.solve_triangular(Sk, rhs, lower=False, check_finite=False)
    Y = U @ Y @ U.conj().T
    Y = 0.5 * (Y + Y.conj().T)
    if np.isrealobj(T) and np.isrealobj(W):
        Y = Y.real.copy()
    return Y


def spectral_norm_small(X, tol: float = 1e-12, maxit: int = 500) -> float:
    """2-norm of a small dense matrix via power iteration on the smaller Gram matrix."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0:
        return 0.0
    G = X.conj().T @ X if X.shape[1] <= X.shape[0] else X @ X.conj().T
    if G.shape[0] == 1:
        return float(np.sqrt(abs(G[0, 0].real)))
    v = np.random.default_rng(0).standard_normal(G.shape[0]).astype(G.dtype)
    v /= np.linalg.norm(v)
    lam = 0.0
    # residual test: the Rayleigh-quotient error is O(res^2 / gap)
    for _ in range(maxit):
        u = G @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        lam = float(np.vdot(v, u).real)
        res = np.linalg.norm(u - lam * v)
        v = u / nu
        if res <= np.sqrt(tol) * abs(lam):
            break
    lam = float(np.vdot(v, G @ v).real)
    return float(np.sqrt(max(lam, 0.0)))
