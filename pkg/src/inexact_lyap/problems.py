"""Test equations ``A X M^T + M X A^T = -B B^T`` and external-matrix loading."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .lacore import as_csr
from .mmio import read_matrix_market
from .rng import gaussian_matrix

# safeguard delta of the RKSM practical relaxation, per test problem
DEFAULT_DELTA = {"cd2d": 0.01, "heat3d": 1.0, "msd": 0.1}
GENERIC_DELTA = 0.5


class MassOperator:
    """Exact products and solves with the mass matrix ``M``.

    Supported structures: identity, diagonal and banded SPD (banded Cholesky).
    """

    def __init__(self, M: sp.csr_matrix, max_band: int = 64):
        self.M = M
        n = M.shape[0]
        off = M - sp.diags(M.diagonal())
        off.eliminate_zeros()
        d = M.diagonal()
        if off.nnz == 0:
            self.kind = "identity" if np.all(d == 1.0) else "diagonal"
            self._diag = d.copy()
            if np.any(d == 0):
                raise ValueError("singular diagonal mass matrix")
            return
        coo = M.tocoo()
        band = int(np.max(np.abs(coo.row - coo.col)))
        sym = abs(M - M.T).max() == 0
        if sym and band <= max_band and np.all(d > 0):
            ab = np.zeros((band + 1, n))
            for k in range(band + 1):
                ab[band - k, k:] = M.diagonal(k)
            self.kind = "banded"
            self._band = band
            self._chol = sla.cholesky_banded(ab, lower=False)
        else:
            self.kind = "general"

    def matvec(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return X.copy()
        if self.kind == "diagonal":
            return self._diag[:, None] * X if X.ndim == 2 else self._diag * X
        return self.M @ X

    def solve(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return X.copy()
        if self.kind == "diagonal":
            return X / self._diag[:, None] if X.ndim == 2 else X / self._diag
        if self.kind == "banded":
            if np.iscomplexobj(X):
                return (sla.cho_solve_banded((self._chol, False), X.real)
                        + 1j * sla.cho_solve_banded((self._chol, False), X.imag))
            return sla.cho_solve_banded((self._chol, False), X)
        raise NotImplementedError("exact solves with a general mass matrix are not supported")


@dataclass
class LyapunovProblem:
    """``A X M^T + M X A^T + B B^T = 0`` with sparse ``A``, ``M`` and dense ``B``."""

    A: sp.csr_matrix
    B: np.ndarray
    M: sp.csr_matrix | None = None
    symmetric: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)
    rng_seed: int | None = None

    def __post_init__(self):
        self.A = as_csr(self.A)
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        self.M = as_csr(sp.identity(n, format="csr")) if self.M is None else as_csr(self.M)
        if self.M.shape != (n, n):
            raise ValueError("M must be square with the size of A")
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, A has {n}")
        self.B = B
        if self.symmetric:
            if abs(self.A - self.A.T).max() != 0 or abs(self.M - self.M.T).max() != 0:
                raise ValueError("symmetric flag set but A or M is not symmetric")
        self._mass = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.B.shape[1]

    @property
    def mass(self) -> MassOperator:
        if self._mass is None:
            self._mass = MassOperator(self.M)
        return self._mass

    @property
    def has_identity_mass(self) -> bool:
        return self.mass.kind == "identity"

    @property
    def normB2(self) -> float:
        """``||B B^T||_2 = ||B||_2^2``."""
        return float(np.linalg.norm(self.B, 2) ** 2)

    @property
    def delta(self) -> float:
        return DEFAULT_DELTA.get(self.name, GENERIC_DELTA)


def _tridiag(n: int, lo: float, d: float, up: float) -> sp.csr_matrix:
    return sp.diags([np.full(n - 1, lo), np.full(n, d), np.full(n - 1, up)], [-1, 0, 1], format="csr")


def gen_cd2d(grid_n: int, r: int = 1, seed: int = 0) -> LyapunovProblem:
    """Centered finite differences for ``Lap u - 100 x u_x - 200 y u_y`` on the unit square.

    Unknowns are ordered lexicographically with ``x`` running fastest;
    ``h = 1/(grid_n + 1)`` and homogeneous Dirichlet boundary conditions.
    """
    N = int(grid_n)
    if N < 1:
        raise ValueError("grid_n must be positive")
    h = 1.0 / (N + 1)
    t = h * np.arange(1, N + 1)
    I = sp.identity(N, format="csr")
    L1 = _tridiag(N, 1.0, -2.0, 1.0) / h**2
    D1 = _tridiag(N, -1.0, 0.0, 1.0) / (2 * h)  # centered first derivative
    conv_x = sp.diags(-100.0 * t) @ D1
    conv_y = sp.diags(-200.0 * t) @ D1
    A = sp.kron(I, L1 + conv_x) + sp.kron(L1 + conv_y, I)
    B = gaussian_matrix(seed, N * N, r)
    return LyapunovProblem(A, B, None, False, "cd2d", {"grid_n": N, "r": r}, seed)


def gen_heat3d(grid_n: int, r: int = 4, seed: int = 0) -> LyapunovProblem:
    """7-point finite-difference Laplacian on the unit cube (Dirichlet), ``M = I``."""
    N = int(grid_n)
    if N < 1:
        raise ValueError("grid_n must be positive")
    h = 1.0 / (N + 1)
    I = sp.identity(N, format="csr")
    L1 = _tridiag(N, 1.0, -2.0, 1.0) / h**2
    A = sp.kron(sp.kron(I, I), L1) + sp.kron(sp.kron(I, L1), I) + sp.kron(sp.kron(L1, I), I)
    B = gaussian_matrix(seed, N**3, r)
    return LyapunovProblem(A, B, None, True, "heat3d", {"grid_n": N, "r": r}, seed)


def msd_blocks(n1: int, m_pairs: int = 2):
    """Unshuffled linearization ``(A_hat, M_hat, B_hat)`` of the triple-chain oscillator."""
    if n1 < 2:
        raise ValueError("n1 must be >= 2")
    k0, k1, k2, k3 = 0.1, 1.0, 2.0, 4.0
    m0, m1, m2, m3 = 1000.0, 10.0, k2, k3
    alpha, beta, nu = 0.8, 0.1, 16.0
    n2 = 3 * n1 + 1
    m = int(m_pairs)
    if not 1 <= m <= n2 // 2:
        raise ValueError("m_pairs out of range")
    K1 = _tridiag(n1, -1.0, 2.0, -1.0)
    K = sp.block_diag([sp.kron(sp.identity(3), K1), sp.csr_matrix([[k0 + k1 + k2 + k3]])], format="lil")
    kplus = np.zeros(n2)
    kplus[[n1 - 1, 2 * n1 - 1, 3 * n1 - 1]] = (k1, k2, k3)
    # skew rank-2 coupling to the last mass: + k_+ e_n^T - e_n k_+^T
    K[:, n2 - 1] = K[:, n2 - 1].toarray() + kplus[:, None]
    K[n2 - 1, :] = K[n2 - 1, :].toarray() - kplus[None, :]
    K = as_csr(K)
    mdiag = np.concatenate([np.full(n1, m1), np.full(n1, m2), np.full(n1, m3), [m0]])
    M1 = sp.diags(mdiag, format="csr")
    P = sp.diags(1.0 / mdiag) @ K  # M1^{-1} K
    KP = K @ P
    KPP = KP @ P
    KPPP = KPP @ P
    F = sp.csr_matrix((np.ones(3), ([0, n1 - 1, 2 * n1], [0, 1, 2])), shape=(n2, 3))
    D = alpha * M1 + beta * (K + KP + KPP + KPPP) + nu * (F @ F.T)
    I2 = sp.identity(n2, format="csr")
    Ahat = sp.bmat([[None, I2], [-K, -D]], format="csr")
    Mhat = sp.block_diag([I2, M1], format="csr")
    n = 2 * n2
    Bhat = np.zeros((n, 2 * m))
    for c in range(2 * m):
        Bhat[c, c] = 1.0
        # velocity block: the last m unit vectors first, then the first m
        Bhat[n2 + (n2 - m + c if c < m else c - m), c] = 1.0
    return as_csr(Ahat), as_csr(Mhat), Bhat, as_csr(K), D


def perfect_shuffle(n2: int) -> np.ndarray:
    """Permutation interleaving positions and velocities: ``[0, n2, 1, n2+1, ...]``."""
    perm = np.empty(2 * n2, dtype=np.int64)
    perm[0::2] = np.arange(n2)
    perm[1::2] = np.arange(n2, 2 * n2)
    return perm


def gen_msd(n1: int, m_pairs: int = 2) -> LyapunovProblem:
    """Shuffled first-order form of the damped triple-chain mass-spring system.

    ``B`` has ``2 m_pairs`` columns; the problem is deterministic (no RNG).
    """
    Ahat, Mhat, Bhat, _, _ = msd_blocks(n1, m_pairs)
    perm = perfect_shuffle(3 * n1 + 1)
    A = Ahat[perm][:, perm]
    M = Mhat[perm][:, perm]
    B = Bhat[perm]
    return LyapunovProblem(A, B, M, False, "msd", {"n1": n1, "m": m_pairs, "r": 2 * m_pairs}, None)


def load_matrix_market(path_A, path_B, path_M=None, name: str = "mm", symmetric: bool | None = None) -> LyapunovProblem:
    """Assemble a problem from Matrix Market files (``M`` defaults to the identity)."""
    A = read_matrix_market(path_A)
    if not sp.issparse(A):
        A = sp.csr_matrix(A)
    Bm = read_matrix_market(path_B)
    B = Bm.toarray() if sp.issparse(Bm) else Bm
    if B.shape[0] != A.shape[0]:
        raise ValueError(f"B file {path_B} has {B.shape[0]} rows but A has {A.shape[0]}")
    M = None
    if path_M is not None:
        M = read_matrix_market(path_M)
        if not sp.issparse(M):
            M = sp.csr_matrix(M)
        if M.shape != A.shape:
            raise ValueError(f"M file {path_M} has shape {M.shape}, A has {A.shape}")
    if symmetric is None:
        symmetric = abs(A - A.T).max() == 0 and (M is None or abs(M - M.T).max() == 0)
    params = {"A": str(Path(path_A)), "B": str(Path(path_B)), "M": None if path_M is None else str(Path(path_M))}
    return LyapunovProblem(A, B, M, bool(symmetric), name, params, None)


def make_problem(kind: str, **params) -> LyapunovProblem:
    """Dispatch by generator name (``cd2d``, ``heat3d``, ``msd``, ``mm``)."""
    if kind == "cd2d":
        return gen_cd2d(int(params.get("grid_n", 50)), int(params.get("r", 1)), int(params.get("seed", 0)))
    if kind == "heat3d":
        return gen_heat3d(int(params.get("grid_n", 16)), int(params.get("r", 4)), int(params.get("seed", 0)))
    if kind == "msd":
        return gen_msd(int(params.get("n1", 200)), int(params.get("m", 2)))
    if kind == "mm":
        return load_matrix_market(params["A"], params["B"], params.get("M"))
    raise ValueError(f"unknown problem kind '{kind}'")
