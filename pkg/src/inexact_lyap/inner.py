"""Inner linear solves for the shifted systems of the outer iterations.

Right-preconditioned BiCGstab and preconditioned MINRES, both delivering a
bound on the *unpreconditioned* true residual ``||b - Op x||``, plus a
per-shift driver that handles block right-hand sides, direct solves and
artificially perturbed ("forced") solves used by the verification suite.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _factor
from .lacore import as_csr, matrix_fingerprint
from .rng import gaussian_matrix

PREC_KINDS = ("identity", "jacobi", "ilu0", "ilut", "ic0", "ict")


class FactorizationError(ValueError):
    def __init__(self, row: int, msg: str):
        super().__init__(f"{msg} in row {row}")
        self.row = row


@dataclass(frozen=True)
class Preconditioner:
    """Approximate inverse applied through triangular factors.

    ``apply(y)`` returns ``sign * P^{-1} y`` where ``P`` is the factored
    approximation of ``sign * A``; ``sign = -1`` lets incomplete Cholesky act
    on negative definite operators while the factors stay SPD.
    """

    kind: str
    n: int
    droptol: float | None = None
    L: sp.csr_matrix | None = None
    U: sp.csr_matrix | None = None
    diag: np.ndarray | None = None
    sign: float = 1.0
    built_from: str = ""

    def _apply_real(self, y: np.ndarray) -> np.ndarray:
        k = self.kind
        if k == "identity":
            return y.copy()
        if k == "jacobi":
            return y / self.diag
        if k in ("ilu0", "ilut"):
            z = _factor.lower_unit_solve(self.n, self.L.indptr, self.L.indices, self.L.data, y)
            return _factor.upper_solve(self.n, self.U.indptr, self.U.indices, self.U.data, z)
        # A ~ U^T D^{-1} U
        U = self.U
        z = _factor.upper_transpose_solve(self.n, U.indptr, U.indices, U.data, y)
        z = z * self.diag
        return _factor.upper_solve(self.n, U.indptr, U.indices, U.data, z)

    def apply(self, y: np.ndarray) -> np.ndarray:
        y = np.ascontiguousarray(y)
        if np.iscomplexobj(y):
            out = self._apply_real(np.ascontiguousarray(y.real)) + 1j * self._apply_real(np.ascontiguousarray(y.imag))
        else:
            out = self._apply_real(y.astype(float, copy=False))
        return self.sign * out if self.sign != 1.0 else out

    def cholesky_factor(self) -> sp.csr_matrix:
        """Upper factor ``C`` with ``sign * A ~ C^T C`` (ic variants only)."""
        if self.kind not in ("ic0", "ict"):
            raise ValueError("cholesky_factor only exists for ic0/ict")
        return as_csr(sp.diags(1.0 / np.sqrt(self.diag)) @ self.U)


def build_preconditioner(A, kind: str = "identity", droptol: float | None = None, sign: float | None = None) -> Preconditioner:
    """Build a preconditioner for the real sparse matrix ``A``.

    For ``ic0``/``ict`` the factorization is applied to ``sign * A``; by default
    the sign is chosen so that the diagonal is positive.

    Raises
    ------
    FactorizationError
        On a zero (or, for ic, nonpositive) pivot, naming the row.
    ValueError
        For non-symmetric input to ic or an unknown kind.
    """
    A = as_csr(A)
    if np.iscomplexobj(A.data):
        raise ValueError("preconditioners are built from real matrices")
    n = A.shape[0]
    fp = matrix_fingerprint(A)
    if kind == "identity":
        return Preconditioner("identity", n, built_from=fp)
    if kind == "jacobi":
        d = A.diagonal()
        zero = np.flatnonzero(d == 0)
        if zero.size:
            raise FactorizationError(int(zero[0]), "zero diagonal")
        return Preconditioner("jacobi", n, diag=d.copy(), built_from=fp)
    if kind in ("ilu0", "ilut"):
        tol = 0.0 if kind == "ilu0" else float(1e-3 if droptol is None else droptol)
        st, lp, li, lv, up, ui, uv = _factor.ilut_kernel(n, A.indptr.astype(np.int64), A.indices.astype(np.int64),
                                                         A.data.astype(np.float64), tol, kind == "ilu0")
        if st < 0:
            raise FactorizationError(-st - 1, "zero pivot")
        L = sp.csr_matrix((lv, li, lp), shape=(n, n))
        U = sp.csr_matrix((uv, ui, up), shape=(n, n))
        return Preconditioner(kind, n, droptol=None if kind == "ilu0" else tol, L=L, U=U, built_from=fp)
    if kind in ("ic0", "ict"):
        if abs(A - A.T).max() != 0:
            raise ValueError("incomplete Cholesky needs a symmetric matrix")
        if sign is None:
            sign = -1.0 if A.diagonal().min() < 0 and A.diagonal().max() < 0 else 1.0
        As = as_csr(sign * A)
        if As.diagonal().min() <= 0:
            raise ValueError("incomplete Cholesky needs a positive diagonal")
        tol = 0.0 if kind == "ic0" else float(1e-2 if droptol is None else droptol)
        st, up, ui, uv = _factor.ict_kernel(n, As.indptr.astype(np.int64), As.indices.astype(np.int64),
                                            As.data.astype(np.float64), tol, kind == "ic0")
        if st < 0:
            raise FactorizationError(-st - 1, "nonpositive pivot")
        U = sp.csr_matrix((uv, ui, up), shape=(n, n))
        dinv = uv[up[:-1]]
        return Preconditioner(kind, n, droptol=None if kind == "ic0" else tol, U=U, diag=dinv.copy(), sign=float(sign),
                              built_from=fp)
    raise ValueError(f"unknown preconditioner kind '{kind}'")


@dataclass
class LinearSolveReport:
    """Outcome of one inner solve; ``residual_norm`` is the recomputed true residual."""

    iterations: int = 0
    residual_norm: float = 0.0
    converged: bool = True
    breakdown: bool = False
    residual_gap: float = 0.0  # |recursive - true| at exit
    history: list = field(default_factory=list)


def _norm(x) -> float:
    return float(np.linalg.norm(x))


def bicgstab(apply_op: Callable, b: np.ndarray, prec: Preconditioner | None, tau: float, maxit: int = 2000,
             stagnation: int = 50, x0: np.ndarray | None = None):
    """Right-preconditioned BiCGstab for ``Op x = b`` with ``||b - Op x|| <= tau``.

    At every convergence signal of the recursive residual the true residual is
    recomputed; if it is not below ``tau`` the recursion restarts from the true
    residual.  Stagnation for ``stagnation`` consecutive iterations (no new
    minimum of the residual norm) or a ``rho``/``omega`` breakdown returns the
    best iterate with the breakdown flag set.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    Pinv = (lambda y: y.copy()) if prec is None else prec.apply
    dtype = np.result_type(b.dtype, np.float64)
    x = np.zeros(b.shape, dtype) if x0 is None else x0.astype(dtype, copy=True)
    r = b - apply_op(x) if x0 is not None else b.astype(dtype, copy=True)
    rn = _norm(r)
    rep = LinearSolveReport(residual_norm=rn, converged=rn <= tau, history=[rn])
    if rn <= tau:
        return x, rep
    best_x, best_r, since_best = x.copy(), rn, 0
    it = 0

    def init(rvec):
        one = np.ones(1, dtype)[0]
        return rvec.copy(), one, one, one, np.zeros_like(rvec), np.zeros_like(rvec)

    rhat, rho, alpha, omega, v, p = init(r)
    while it < maxit:
        it += 1
        rho_new = np.vdot(rhat, r)
        if abs(rho_new) < 1e-300 or abs(rho_new) < 1e-30 * _norm(rhat) * rn:
            rep.breakdown = True
            break
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        phat = Pinv(p)
        v = apply_op(phat)
        denom = np.vdot(rhat, v)
        if denom == 0:
            rep.breakdown = True
            break
        alpha = rho / denom
        s = r - alpha * v
        sn = _norm(s)
        if sn <= tau:
            xh = x + alpha * phat
            true_r = b - apply_op(xh)
            tn = _norm(true_r)
            if tn <= tau:
                x, rn = xh, tn
                rep.residual_gap = abs(sn - tn)
                rep.history.append(tn)
                rep.iterations = it
                rep.residual_norm = tn
                rep.converged = True
                return x, rep
            # replace the drifted recursion by the true residual and restart
            x, r, rn = xh, true_r, tn
            rhat, rho, alpha, omega, v, p = init(r)
            rep.history.append(rn)
            continue
        shat = Pinv(s)
        t = apply_op(shat)
        tt = np.vdot(t, t).real
        if tt == 0:
            x = x + alpha * phat
            r = s
            rn = sn
            rep.breakdown = True
            break
        omega = np.vdot(t, s) / tt
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        rn = _norm(r)
        rep.history.append(rn)
        if rn <= tau:
            true_r = b - apply_op(x)
            tn = _norm(true_r)
            if tn <= tau:
                rep.residual_gap = abs(rn - tn)
                rep.iterations = it
                rep.residual_norm = tn
                rep.converged = True
                return x, rep
            r, rn = true_r, tn
            rhat, rho, alpha, omega, v, p = init(r)
        if omega == 0:
            rep.breakdown = True
            break
        if rn < best_r:
            best_x, best_r, since_best = x.copy(), rn, 0
        else:
            since_best += 1
            if since_best >= stagnation:
                rep.breakdown = True
                break
    # not converged: return the best iterate measured by its true residual
    cand = [(x, b - apply_op(x)), (best_x, b - apply_op(best_x))]
    xb, rb = min(cand, key=lambda c: _norm(c[1]))
    rep.iterations = it
    rep.residual_norm = _norm(rb)
    rep.residual_gap = abs(rn - _norm(b - apply_op(x)))
    rep.converged = rep.residual_norm <= tau
    return xb, rep


def minres(apply_op: Callable, b: np.ndarray, prec: Preconditioner | None, tau: float, maxit: int = 2000):
    """Preconditioned MINRES (Paige–Saunders recurrences) for Hermitian ``Op``.

    ``prec.apply`` must be Hermitian positive definite.  The recurrences track
    the residual in the preconditioner norm; whenever that estimate, rescaled
    by the last observed ratio to the true 2-norm residual, drops below
    ``tau``, the true residual ``b - Op x`` is recomputed and decides.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    # the factors approximate sign * Op; MINRES needs the SPD part, so undo the sign
    Pinv = (lambda y: y.copy()) if prec is None else (lambda y: prec.sign * prec.apply(y))
    dtype = np.result_type(b.dtype, np.float64)
    x = np.zeros(b.shape, dtype)
    bn = _norm(b)
    rep = LinearSolveReport(residual_norm=bn, converged=bn <= tau, history=[bn])
    if bn <= tau:
        return x, rep

    r1 = b.astype(dtype, copy=True)
    y = Pinv(r1)
    beta1 = np.vdot(r1, y).real
    if beta1 <= 0:
        raise ValueError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    r2 = r1.copy()
    oldb, beta = 0.0, beta1
    dbar, epsln, phibar = 0.0, 0.0, beta1
    cs, sn = -1.0, 0.0
    w = np.zeros_like(x)
    w2 = np.zeros_like(x)
    ratio = bn / beta1  # true residual / phibar, refreshed at each check
    it = 0
    while it < maxit:
        it += 1
        s = 1.0 / beta
        v = s * y
        y = apply_op(v)
        if it >= 2:
            y = y - (beta / oldb) * r1
        alfa = np.vdot(v, y).real
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = Pinv(r2)
        oldb = beta
        beta2 = np.vdot(r2, y).real
        if beta2 < 0:
            rep.breakdown = True
            break
        beta = np.sqrt(beta2)
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar
        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        est = abs(phibar) * ratio
        rep.history.append(abs(phibar))
        if est <= tau or beta == 0.0:
            tn = _norm(b - apply_op(x))
            if tn <= tau:
                rep.iterations = it
                rep.residual_norm = tn
                rep.residual_gap = abs(est - tn)
                rep.converged = True
                return x, rep
            if abs(phibar) > 0:
                ratio = tn / abs(phibar)
            if beta == 0.0:
                rep.breakdown = True
                break
    tn = _norm(b - apply_op(x))
    rep.iterations = it
    rep.residual_norm = tn
    rep.converged = tn <= tau
    return x, rep


@dataclass
class InnerConfig:
    """How the outer methods solve ``(A + c M) x = rhs``.

    method: ``direct`` (sparse LU), ``bicgstab``, ``minres`` or ``forced``
    (exact solve of a perturbed right-hand side so that the true residual has
    a prescribed norm; used to test the outer theory).
    """

    method: str = "direct"
    prec: str = "identity"
    droptol: float | None = None
    maxit: int = 2000
    seed: int = 12345

    def __post_init__(self):
        if self.method not in ("direct", "bicgstab", "minres", "forced"):
            raise ValueError(f"unknown inner method '{self.method}'")
        if self.prec not in PREC_KINDS:
            raise ValueError(f"unknown preconditioner '{self.prec}'")


@dataclass
class BlockSolveResult:
    X: np.ndarray
    S: np.ndarray  # true residual block rhs - (A + cM) X
    s_norm: float  # ||S||_2
    iterations: int
    converged: bool
    reports: list


class ShiftedSolver:
    """Solves ``(A + c M) X = R`` column by column with tolerance ``tau / r``.

    Preconditioners and LU factors are cached per shift value.
    """

    def __init__(self, A, M, cfg: InnerConfig):
        self.A = as_csr(A)
        self.M = as_csr(M)
        self.cfg = cfg
        self._cache: dict = {}
        self._nforced = 0

    def _matrix(self, c):
        return as_csr(self.A + c * self.M)

    def _prec(self, c) -> Preconditioner:
        key = ("prec", complex(c))
        if key not in self._cache:
            cr = c.real if isinstance(c, complex) else c
            self._cache[key] = build_preconditioner(self._matrix(float(cr)), self.cfg.prec, self.cfg.droptol)
        return self._cache[key]

    def _lu(self, c):
        key = ("lu", complex(c))
        if key not in self._cache:
            Ac = self._matrix(c).tocsc()
            self._cache[key] = (spla.splu(Ac), np.iscomplexobj(Ac.data))
        return self._cache[key]

    def lu_solve(self, c, R: np.ndarray) -> np.ndarray:
        lu, is_complex = self._lu(c)
        if np.iscomplexobj(R) and not is_complex:
            return lu.solve(np.ascontiguousarray(R.real)) + 1j * lu.solve(np.ascontiguousarray(R.imag))
        return lu.solve(np.ascontiguousarray(R.astype(complex) if is_complex else R))

    def solve(self, c, R: np.ndarray, tau: float) -> BlockSolveResult:
        c = complex(c) if np.iscomplexobj(c) and complex(c).imag != 0 else float(np.real(c))
        R = np.asarray(R)
        if R.ndim == 1:
            R = R[:, None]
        r = R.shape[1]
        dtype = np.result_type(R.dtype, np.asarray(c).dtype, np.float64)
        A, M = self.A, self.M

        def op(x):
            return A @ x + c * (M @ x)

        X = np.zeros(R.shape, dtype)
        reports = []
        method = self.cfg.method
        if method == "direct":
            X = self.lu_solve(c, R.astype(dtype)).reshape(R.shape)
            reports = [LinearSolveReport(iterations=0) for _ in range(r)]
        elif method == "forced":
            # s_col drawn at random with ||s_col|| = tau / r, then solved exactly
            Scol = np.zeros(R.shape, dtype)
            if tau > 0:
                G = gaussian_matrix(self.cfg.seed + self._nforced, R.shape[0], r)
                self._nforced += 1
                Scol = (tau / r) * G / np.linalg.norm(G, axis=0)[None, :]
            X = self.lu_solve(c, (R - Scol).astype(dtype)).reshape(R.shape)
            reports = [LinearSolveReport(iterations=0) for _ in range(r)]
        else:
            prec = self._prec(c)
            solver = bicgstab if method == "bicgstab" else minres
            for col in range(r):
                b = np.ascontiguousarray(R[:, col].astype(dtype))
                x, rep = solver(op, b, prec, tau / r, self.cfg.maxit)
                X[:, col] = x
                reports.append(rep)
        S = R - op(X)
        s_norm = float(np.linalg.norm(S, 2)) if r > 1 else float(np.linalg.norm(S))
        it = sum(rp.iterations for rp in reports)
        conv = all(rp.converged for rp in reports) if method in ("bicgstab", "minres") else True
        return BlockSolveResult(X, S, s_norm, it, conv, reports)
