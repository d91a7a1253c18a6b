"""Left null vectors of Hessenberg matrices and the rows ``e_k^* H_j^{-1}``.

Everything here is dense and scalar (``r = 1``); the oracle deliberately does
not reuse the recursive null-vector update of the solver.
"""
from __future__ import annotations

import numpy as np

from .report import CheckReport


def random_hessenberg(rng: np.random.Generator, j: int, complex_: bool = False) -> np.ndarray:
    """Random unreduced ``(j+1) x j`` upper Hessenberg matrix."""
    H = rng.standard_normal((j + 1, j))
    if complex_:
        H = H + 1j * rng.standard_normal((j + 1, j))
    H = np.triu(H, -1)
    sub = np.arange(j)
    H[sub + 1, sub] = np.sign(H[sub + 1, sub].real) * (0.5 + np.abs(H[sub + 1, sub]))
    return H


class NullVectorOracle:
    """Quantities ``omega``, ``v_j^{(k)}``, ``phi_j^{(k)}``, ``f_m^{(k)}`` for a given ``H_under``.

    Indices ``k, m`` are 1-based as in the formulas.
    """

    def __init__(self, H_under: np.ndarray, cond_guard: float = 1e12):
        H_under = np.asarray(H_under)
        jp1, j = H_under.shape
        if jp1 != j + 1:
            raise ValueError("H_under must be (j+1) x j")
        self.H_under = H_under
        self.j = j
        self.Hj = H_under[:j, :j]
        self.h = H_under[j, j - 1]
        U, _, _ = np.linalg.svd(H_under)
        om = U[:, -1].conj()
        self.omega = om / np.linalg.norm(om)
        self.conds = [np.linalg.cond(H_under[:k, :k]) for k in range(1, j + 1)]
        self.well_conditioned = max(self.conds) <= cond_guard
        self._f: dict = {}

    @property
    def null_residual(self) -> float:
        return float(np.linalg.norm(self.omega @ self.H_under))

    def f(self, k: int, m: int | None = None) -> np.ndarray:
        """``e_k^* H_m^{-1}`` by dense inversion."""
        m = self.j if m is None else m
        key = (k, m)
        if key not in self._f:
            self._f[key] = np.linalg.inv(self.H_under[:m, :m])[k - 1]
        return self._f[key]

    def v(self, k: int) -> np.ndarray:
        j = self.j
        out = self.omega[:j].astype(np.result_type(self.omega, self.H_under), copy=True)
        if k < j:
            rhs = np.zeros(j - k, out.dtype)
            rhs[-1] = self.h * self.omega[j]
            Hs = self.H_under[k:j, k:j]
            out[k:] += np.linalg.solve(Hs.T, rhs)
        return out

    def phi(self, k: int) -> complex:
        return self.v(k) @ self.Hj[:, k - 1]

    def f_formula(self, k: int) -> np.ndarray:
        """Row ``e_k^* H_j^{-1}`` from the null vector."""
        if k == self.j:
            return -self.omega[: self.j] / (self.omega[self.j] * self.h)
        return self.v(k) / self.phi(k)

    def prefix_formula(self, k: int) -> np.ndarray:
        """``(v_j^{(k)})_{1:k} = [-h_{k,k-1} f_{k-1}^{(k-1)}, 1] omega_k`` for ``k > 1``."""
        if k < 2:
            raise ValueError("prefix identity needs k > 1")
        row = np.append(-self.H_under[k - 1, k - 2] * self.f(k - 1, k - 1), 1.0)
        return row * self.omega[k - 1]


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / (nb if nb > 0 else 1.0))


def lemma5_check(H_under: np.ndarray, tol: float = 1e-10, cond_guard: float = 1e12) -> CheckReport:
    """Compare the null-vector formulas for ``e_k^* H_j^{-1}`` with dense inversion."""
    orc = NullVectorOracle(H_under, cond_guard)
    rep = CheckReport("null-vector formulas")
    if not orc.well_conditioned:
        rep.applicable = False
        rep.reason = f"cond(H_k) = {max(orc.conds):.1e} above guard"
        return rep
    j = orc.j
    scale = np.linalg.norm(H_under, 2)
    rep.add("null_vector", orc.null_residual, 1e-12 * max(scale, 1.0))
    rep.add("f_jj", _rel(orc.f_formula(j), orc.f(j)), tol)
    err_b = max(_rel(orc.f_formula(k), orc.f(k)) for k in range(1, j + 1))
    rep.add("f_jk", err_b, tol)
    if j > 1:
        err_c = max(_rel(orc.prefix_formula(k), orc.v(k)[:k]) for k in range(2, j + 1))
        rep.add("prefix", err_c, tol)
    return rep
