"""Portable Gaussian samples from a counter-based generator.

Algorithm (reproducible in any language with a Philox4x64-10 implementation):

1. ``Philox(key=seed)`` with zero counter, drawing raw 64-bit words in order.
2. Each word ``w`` becomes a uniform ``u = ((w >> 11) + 0.5) * 2**-53`` in (0, 1).
3. Consecutive uniforms ``(u1, u2)`` map to two normals by Box–Muller:
   ``sqrt(-2 ln u1) * cos(2 pi u2)`` and ``sqrt(-2 ln u1) * sin(2 pi u2)``.
4. Matrices are filled in column-major order.
"""
from __future__ import annotations

import numpy as np


def philox_uniforms(seed: int, count: int) -> np.ndarray:
    bitgen = np.random.Philox(key=int(seed))
    raw = bitgen.random_raw(count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gaussian_matrix(seed: int, n: int, r: int) -> np.ndarray:
    """``n x r`` standard-normal matrix from the documented Philox + Box–Muller recipe."""
    m = n * r
    u = philox_uniforms(seed, 2 * ((m + 1) // 2))
    u1, u2 = u[0::2], u[1::2]
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * u1.size)
    z[0::2] = rad * np.cos(2.0 * np.pi * u2)
    z[1::2] = rad * np.sin(2.0 * np.pi * u2)
    return z[:m].reshape((n, r), order="F")
