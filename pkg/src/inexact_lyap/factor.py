"""Low-rank representations ``X = Z Z*`` or ``X = V Y V*``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lacore import orth


@dataclass
class LowRankFactor:
    """``X = V Y V*`` (``Y=None`` means ``X = V V*``)."""

    V: np.ndarray
    Y: np.ndarray | None = None
    complex_flag: bool = False  # True if a complex factor is returned because shifts did not pair up

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def ncols(self) -> int:
        return self.V.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.V) or (self.Y is not None and np.iscomplexobj(self.Y))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        t = self.V.conj().T @ x
        if self.Y is not None:
            t = self.Y @ t
        return self.V @ t

    def dense(self) -> np.ndarray:
        if self.Y is None:
            return self.V @ self.V.conj().T
        return self.V @ self.Y @ self.V.conj().T

    def Z(self, tol: float = 0.0) -> np.ndarray:
        """Thin factor with ``X ~ Z Z*`` (negative eigenvalues of ``Y`` from roundoff are clipped)."""
        if self.Y is None:
            return self.V
        lam, U = np.linalg.eigh(0.5 * (self.Y + self.Y.conj().T))
        keep = lam > tol * max(lam.max(initial=0.0), 0.0)
        return self.V @ (U[:, keep] * np.sqrt(lam[keep]))


def realify(V: np.ndarray, Y: np.ndarray | None = None, tol: float = 1e-14) -> LowRankFactor:
    """Real factor of ``Re(V Y V*)`` (``Y=None``: ``Re(V V*)``).

    For ``Y=None`` the identity ``Re(V V*) = [Re V, Im V][Re V, Im V]^T`` is
    compressed by a thin SVD.
    """
    if not np.iscomplexobj(V) and (Y is None or not np.iscomplexobj(Y)):
        return LowRankFactor(V, Y)
    if Y is None:
        W = np.hstack([V.real, V.imag])
        if W.shape[1] == 0:
            return LowRankFactor(W)
        # an SVD of W itself; an eigendecomposition of W W^T would square the drop tolerance
        U, sv, _ = scipy.linalg.svd(W, full_matrices=False, lapack_driver="gesvd")
        keep = sv > tol * sv.max(initial=0.0)
        return LowRankFactor(U[:, keep] * sv[keep])
    Qr = orth(np.hstack([V.real, V.imag]))
    C = Qr.T @ V
    Yr = (C @ Y @ C.conj().T).real
    return LowRankFactor(Qr, 0.5 * (Yr + Yr.T))
