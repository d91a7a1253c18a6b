"""Shift parameters: bookkeeping plus the adaptive rules for RKSM and LR-ADI."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .lacore import orth
from .rng import gaussian_matrix

PAIR_TOL = 1e-10


@dataclass
class ShiftSequence:
    """Shifts in the order they were used, with provenance and pairing flags."""

    values: list = field(default_factory=list)
    provenance: list = field(default_factory=list)  # "user" | "adaptive" | "seed"
    paired: list = field(default_factory=list)  # True if the conjugate is adjacent

    def append(self, value, provenance: str, paired: bool = False) -> None:
        self.values.append(value)
        self.provenance.append(provenance)
        self.paired.append(bool(paired))

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=complex)

    def closes_pairs(self, tol: float = PAIR_TOL, upto: int | None = None) -> bool:
        """True if every non-real shift among the first ``upto`` has a matching conjugate among them."""
        vals = self.as_array()[:upto]
        used = np.zeros(vals.size, bool)
        for i, v in enumerate(vals):
            if used[i] or abs(v.imag) <= tol * max(abs(v), 1.0):
                used[i] = True
                continue
            match = [k for k in range(vals.size) if not used[k] and k != i
                     and abs(vals[k] - np.conj(v)) <= tol * max(abs(v), 1.0)]
            if not match:
                return False
            used[i] = used[match[0]] = True
        return True


def is_real_shift(z, tol: float = PAIR_TOL) -> bool:
    return abs(complex(z).imag) <= tol * max(abs(z), 1.0)


def power_estimate(apply_op, n: int, steps: int = 10, seed: int = 0) -> float:
    """Estimate ``|lambda_max|`` with a few power-iteration steps."""
    v = gaussian_matrix(seed, n, 1)[:, 0]
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(steps):
        u = apply_op(v)
        est = float(np.linalg.norm(u))
        if est == 0.0:
            break
        v = u / est
    return est


# --------------------------------------------------------------------- RKSM
def boundary_candidates(points: np.ndarray, per_edge: int = 20, real_tol: float = 1e-10) -> np.ndarray:
    """Discretized boundary of the region spanned by ``points`` (in the right half-plane).

    Real point sets give the interval between the extreme points (sampled
    between consecutive sorted points), complex sets the convex hull edges.
    """
    pts = np.asarray(points, dtype=complex)
    pts = pts[np.isfinite(pts)]
    if pts.size == 0:
        return pts
    scale = max(np.max(np.abs(pts)), 1e-300)
    if np.all(np.abs(pts.imag) <= real_tol * scale):
        x = np.unique(pts.real)
        if x.size == 1:
            return x.astype(complex)
        segs = [np.linspace(x[i], x[i + 1], per_edge, endpoint=False) for i in range(x.size - 1)]
        return np.concatenate(segs + [x[-1:]]).astype(complex)
    # the region is symmetric about the real axis: add conjugates before taking the hull
    P = np.concatenate([pts, pts.conj()])
    xy = np.unique(np.column_stack([P.real, P.imag]), axis=0)
    try:
        from scipy.spatial import ConvexHull

        hull = ConvexHull(xy)
        verts = xy[hull.vertices]
    except Exception:  # collinear or too few points: use the extreme points in order
        order = np.lexsort((xy[:, 1], xy[:, 0]))
        verts = xy[order]
        verts = verts[[0, -1]]
    z = verts[:, 0] + 1j * verts[:, 1]
    m = z.size
    segs = [z[i] + (z[(i + 1) % m] - z[i]) * np.linspace(0, 1, per_edge, endpoint=False) for i in range(m)]
    return np.concatenate(segs)


def adaptive_shift_rksm(ritz: np.ndarray, poles: np.ndarray, seed_shift: float, previous=None,
                        per_edge: int = 20):
    """Next RKSM pole: maximize ``1/|r(z)|`` over the discretized region boundary.

    ``r(z) = prod(z - ritz_i) / prod(z - pole_i)``; the region is formed by the
    Ritz values mirrored into the right half-plane plus ``seed_shift``.
    Returns ``previous`` (or the seed) when no admissible candidate exists.
    """
    ritz = np.asarray(ritz, dtype=complex)
    poles = np.asarray(poles, dtype=complex)
    mirrored = np.abs(ritz.real) + 1j * ritz.imag
    cand = boundary_candidates(np.concatenate([mirrored, [complex(seed_shift)]]), per_edge)
    cand = cand[cand.real > 0]
    if poles.size:
        scale = max(np.max(np.abs(cand)) if cand.size else 1.0, 1.0)
        keep = np.min(np.abs(cand[:, None] - poles[None, :]), axis=1) > 1e-12 * scale
        cand = cand[keep]
    if cand.size == 0:
        return previous if previous is not None else complex(seed_shift)
    with np.errstate(divide="ignore"):
        logv = np.zeros(cand.size)
        if poles.size:
            logv += np.sum(np.log(np.abs(cand[:, None] - poles[None, :])), axis=1)
        if ritz.size:
            logv -= np.sum(np.log(np.abs(cand[:, None] - ritz[None, :])), axis=1)
    logv[~np.isfinite(logv)] = -np.inf
    if not np.any(np.isfinite(logv)):
        return previous if previous is not None else complex(seed_shift)
    z = cand[int(np.argmax(logv))]
    return float(z.real) if is_real_shift(z) else complex(z)


# ------------------------------------------------------------------- LR-ADI
def order_shift_batch(vals: np.ndarray) -> list:
    """Descending ``|Re|``; a complex value is followed by its conjugate."""
    vals = np.asarray(vals, dtype=complex)
    out, used = [], np.zeros(vals.size, bool)
    groups = []
    for i, v in enumerate(vals):
        if used[i]:
            continue
        used[i] = True
        if is_real_shift(v):
            groups.append([float(v.real)])
            continue
        k = [m for m in range(vals.size) if not used[m] and abs(vals[m] - np.conj(v)) <= 1e-8 * abs(v)]
        if k:
            used[k[0]] = True
        top = complex(v.real, abs(v.imag))
        groups.append([top, np.conj(top)])
    groups.sort(key=lambda g: (-abs(np.real(g[0])), np.imag(g[0])))
    for g in groups:
        out.extend(g)
    return out


def projection_shifts(A, M, U: np.ndarray) -> list:
    """Stable Ritz values of ``(U* A U, U* M U)`` for a real orthonormal ``U``, ordered."""
    if U.shape[1] == 0:
        return []
    Ar = U.T @ (A @ U)
    Mr = U.T @ (M @ U)
    lam = sla.eigvals(Ar, Mr)
    lam = lam[np.isfinite(lam) & (lam.real < 0)]
    return order_shift_batch(lam)


def adi_adaptive_shifts(A, M, Z: np.ndarray, B: np.ndarray, r: int) -> list:
    """Shift batch from the last ``min(cols, 10 r)`` columns of ``Z`` (``orth(B)`` if empty)."""
    if Z is None or Z.shape[1] == 0:
        U = orth(B)
    else:
        W = Z[:, -min(Z.shape[1], 10 * r):]
        if np.iscomplexobj(W):
            W = np.hstack([W.real, W.imag])
        U = orth(W)
    return projection_shifts(A, M, U)
