"""Linear-algebra kernels shared by the outer solvers.

Sparse matrices are carried as canonical ``scipy.sparse.csr_matrix`` objects
(sorted, duplicate-free column indices).  Dense blocks are plain numpy arrays
that are promoted to complex the first time a complex shift touches them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

BREAKDOWN_TOL = 1e-14


class RankDeficientError(np.linalg.LinAlgError):
    """Raised by :func:`thin_qr` when the input has numerically dependent columns."""

    def __init__(self, rank: int, ncols: int):
        super().__init__(f"numerical rank {rank} < {ncols} columns")
        self.rank = rank
        self.ncols = ncols


def as_csr(A) -> sp.csr_matrix:
    """Return ``A`` as a canonical CSR matrix without stored zeros (copying if needed)."""
    A = sp.csr_matrix(A)
    if not A.has_canonical_format or (A.nnz and not np.all(A.data)):
        A = A.copy()
        A.sum_duplicates()
        A.eliminate_zeros()
    A.sort_indices()
    return A


def check_csr(A: sp.csr_matrix) -> None:
    """Validate the CSR layout invariants; raise ``ValueError`` on the first violation."""
    n_rows, n_cols = A.shape
    ptr, idx = A.indptr, A.indices
    if ptr.shape[0] != n_rows + 1 or ptr[0] != 0 or ptr[-1] != idx.shape[0]:
        raise ValueError("row_ptr must start at 0 and end at nnz")
    if np.any(np.diff(ptr) < 0):
        raise ValueError("row_ptr must be nondecreasing")
    if idx.size and (idx.min() < 0 or idx.max() >= n_cols):
        raise ValueError("col_idx out of range")
    for i in range(n_rows):
        row = idx[ptr[i]:ptr[i + 1]]
        if row.size > 1 and np.any(np.diff(row) <= 0):
            raise ValueError(f"col_idx not strictly increasing in row {i}")


def spmv(A, x: np.ndarray) -> np.ndarray:
    """Sparse (or dense) matrix times vector/block with a dimension check."""
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, x has {x.shape[0]} rows")
    return A @ x


def matrix_fingerprint(A) -> str:
    """Short content hash of a sparse matrix (used to tag preconditioners)."""
    import hashlib

    A = as_csr(A)
    h = hashlib.sha1()
    h.update(np.asarray(A.shape, dtype=np.int64).tobytes())
    for arr in (A.indptr, A.indices, A.data):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def thin_qr(B: np.ndarray, *, check_rank: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization ``B = Q1 @ beta`` with a nonnegative real diagonal.

    Raises
    ------
    RankDeficientError
        If ``check_rank`` and some ``|beta_ii| < 1e-14 * ||B||``.
    """
    B = np.asarray(B)
    if B.ndim == 1:
        B = B[:, None]
    n, r = B.shape
    if n < r:
        raise ValueError("thin_qr needs n >= r")
    Q, R = np.linalg.qr(B, mode="reduced")
    d = np.diag(R)
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    Q = Q * phase[None, :]
    R = np.conj(phase)[:, None] * R
    if np.isrealobj(B):
        Q, R = Q.real, R.real
    if check_rank:
        nrm = np.linalg.norm(B, 2) if B.size else 0.0
        rank = int(np.sum(np.abs(np.diag(R)) >= BREAKDOWN_TOL * nrm)) if nrm > 0 else 0
        if rank < r:
            raise RankDeficientError(rank, r)
    return Q, R


@dataclass(frozen=True)
class OrthoBasis:
    """Orthonormal basis matrix built in blocks of ``block_size`` columns."""

    Q: np.ndarray
    block_size: int

    @classmethod
    def empty(cls, n: int, r: int, dtype=float) -> "OrthoBasis":
        return cls(np.zeros((n, 0), dtype=dtype), r)

    @property
    def ncols(self) -> int:
        return self.Q.shape[1]

    @property
    def nblocks(self) -> int:
        return self.ncols // self.block_size

    def orthogonality_error(self) -> float:
        G = self.Q.conj().T @ self.Q
        return float(np.linalg.norm(G - np.eye(G.shape[0]), "fro"))


def gram_schmidt_extend(Q: OrthoBasis | np.ndarray, W: np.ndarray, r: int | None = None):
    """Orthogonally extend ``Q`` by the block ``W`` (classical Gram–Schmidt, twice).

    Returns
    -------
    Q_new : OrthoBasis
    h : ndarray, shape ((j+1) r, r)
        Coefficients with ``W = Q_new @ h``; the trailing ``r x r`` block is
        upper triangular with nonnegative diagonal.
    rank_deficient : bool
        True when a new column fell below ``1e-14 * ||W||`` after projection.
    """
    if not isinstance(Q, OrthoBasis):
        Q = OrthoBasis(np.asarray(Q), r if r is not None else W.shape[1])
    W = np.asarray(W)
    if W.ndim == 1:
        W = W[:, None]
    dtype = np.result_type(Q.Q.dtype, W.dtype)
    Qm = Q.Q.astype(dtype, copy=False)
    W0 = W.astype(dtype, copy=True)
    nrmW = np.linalg.norm(W0, 2) if W0.size else 0.0

    coef = np.zeros((Qm.shape[1], W0.shape[1]), dtype=dtype)
    for _ in range(2):
        if Qm.shape[1]:
            c = Qm.conj().T @ W0
            W0 -= Qm @ c
            coef += c
    Qn, R = thin_qr(W0, check_rank=False)
    rank_deficient = bool(nrmW == 0 or np.any(np.abs(np.diag(R)) < BREAKDOWN_TOL * nrmW))
    h = np.vstack([coef, R])
    return OrthoBasis(np.hstack([Qm, Qn]), Q.block_size), h, rank_deficient


def orth(X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis for ``range(X)`` via SVD, dropping directions below ``tol``."""
    if X.shape[1] == 0:
        return X.copy()
    try:
        U, s, _ = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        # gesdd occasionally fails on nearly rank-deficient input; gesvd is slower but robust
        U, s, _ = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesvd")
    keep = s > tol * s[0] if s.size and s[0] > 0 else np.zeros(0, bool)
    return U[:, keep]
