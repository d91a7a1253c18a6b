"""Numba kernels: incomplete factorizations and sparse triangular solves.

All kernels work on raw CSR arrays (``indptr``, ``indices``, ``data``) and
return new CSR arrays; negative return codes signal a zero pivot.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _grow_i(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow_f(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def ilut_kernel(n, indptr, indices, data, droptol, pattern_only):
    """Row-wise IKJ incomplete LU.

    ``pattern_only`` gives ILU(0); otherwise ILUT with the relative drop rule
    ``|entry| < droptol * ||a_i||_2`` (applied to ``L[i,k] * U[k,k]`` for the
    lower part) and no fill limit.  ``L`` is unit lower
    triangular (diagonal not stored), ``U`` stores the diagonal first in each row.

    Returns ``(status, l_ptr, l_idx, l_val, u_ptr, u_idx, u_val)`` where
    ``status = -(i+1)`` flags a zero pivot in row ``i``.
    """
    cap = indptr[n] + n + 8
    l_ptr = np.zeros(n + 1, np.int64)
    u_ptr = np.zeros(n + 1, np.int64)
    l_idx = np.empty(cap, np.int64)
    l_val = np.empty(cap, np.float64)
    u_idx = np.empty(cap, np.int64)
    u_val = np.empty(cap, np.float64)
    nl = 0
    nu = 0
    w = np.zeros(n, np.float64)
    pos = -np.ones(n, np.int64)  # column -> slot in jw, -1 if absent
    inpat = np.zeros(n, np.bool_)
    jw = np.empty(n, np.int64)
    done = np.zeros(n, np.bool_)
    udiag = np.zeros(n, np.int64)  # offset of U[k,k] in u arrays

    for i in range(n):
        nj = 0
        rnorm = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            c = indices[p]
            w[c] = data[p]
            pos[c] = nj
            jw[nj] = c
            inpat[c] = True
            nj += 1
            rnorm += data[p] * data[p]
        rnorm = np.sqrt(rnorm)
        thresh = droptol * rnorm
        if pos[i] < 0:
            w[i] = 0.0
            pos[i] = nj
            jw[nj] = i
            nj += 1

        # eliminate lower entries in increasing column order
        while True:
            k = n
            for q in range(nj):
                c = jw[q]
                if c < i and not done[c] and c < k:
                    k = c
            if k == n:
                break
            done[k] = True
            # drop test on the unscaled entry L[i,k] * U[k,k], as for the U part
            if not pattern_only and abs(w[k]) < thresh:
                w[k] = 0.0
                continue
            mult = w[k] / u_val[udiag[k]]
            w[k] = mult
            for p in range(udiag[k] + 1, u_ptr[k + 1]):
                c = u_idx[p]
                if pos[c] >= 0:
                    w[c] -= mult * u_val[p]
                elif not pattern_only:
                    w[c] = -mult * u_val[p]
                    pos[c] = nj
                    jw[nj] = c
                    nj += 1

        # gather L part (sorted) and U part (diagonal first, then sorted)
        order = np.sort(jw[:nj])
        for q in range(nj):
            c = order[q]
            if c < i:
                v = w[c]
                if (inpat[c] if pattern_only else v != 0.0):
                    l_idx = _grow_i(l_idx, nl + 1)
                    l_val = _grow_f(l_val, nl + 1)
                    l_idx[nl] = c
                    l_val[nl] = v
                    nl += 1
        dv = w[i]
        if dv == 0.0:
            return -(i + 1), l_ptr, l_idx, l_val, u_ptr, u_idx, u_val
        u_idx = _grow_i(u_idx, nu + nj + 1)
        u_val = _grow_f(u_val, nu + nj + 1)
        udiag[i] = nu
        u_idx[nu] = i
        u_val[nu] = dv
        nu += 1
        for q in range(nj):
            c = order[q]
            if c > i:
                v = w[c]
                if pattern_only or abs(v) >= thresh:
                    u_idx[nu] = c
                    u_val[nu] = v
                    nu += 1
        l_ptr[i + 1] = nl
        u_ptr[i + 1] = nu
        for q in range(nj):
            c = jw[q]
            w[c] = 0.0
            pos[c] = -1
            inpat[c] = False
            done[c] = False
    return 0, l_ptr, l_idx[:nl], l_val[:nl], u_ptr, u_idx[:nu], u_val[:nu]


@njit(cache=True)
def ict_kernel(n, indptr, indices, data, droptol, pattern_only):
    """Incomplete Cholesky ``A ~ U^T D^{-1} U`` built row by row (upper part of ``A``).

    Column linked lists (``head``/``nxt``) give access to the already computed
    rows ``k < i`` with a nonzero in column ``i``.  Returns
    ``(status, u_ptr, u_idx, u_val)`` with the diagonal first in each row;
    ``status = -(i+1)`` flags a nonpositive pivot in row ``i``.
    """
    cap = indptr[n] + n + 8
    u_ptr = np.zeros(n + 1, np.int64)
    u_idx = np.empty(cap, np.int64)
    u_val = np.empty(cap, np.float64)
    rowof = np.empty(cap, np.int64)
    nxt = np.empty(cap, np.int64)
    head = -np.ones(n, np.int64)
    nu = 0
    w = np.zeros(n, np.float64)
    pos = -np.ones(n, np.int64)
    jw = np.empty(n, np.int64)

    for i in range(n):
        nj = 0
        rnorm = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            c = indices[p]
            rnorm += data[p] * data[p]
            if c >= i:
                w[c] = data[p]
                pos[c] = nj
                jw[nj] = c
                nj += 1
        rnorm = np.sqrt(rnorm)
        thresh = droptol * rnorm
        if pos[i] < 0:
            w[i] = 0.0
            pos[i] = nj
            jw[nj] = i
            nj += 1

        p = head[i]
        while p >= 0:
            k = rowof[p]
            dk = u_val[u_ptr[k]]
            lk = u_val[p] / dk
            for q in range(u_ptr[k] + 1, u_ptr[k + 1]):
                c = u_idx[q]
                if c < i:
                    continue
                if pos[c] >= 0:
                    w[c] -= lk * u_val[q]
                elif not pattern_only:
                    w[c] = -lk * u_val[q]
                    pos[c] = nj
                    jw[nj] = c
                    nj += 1
            p = nxt[p]

        dv = w[i]
        if not dv > 0.0:
            return -(i + 1), u_ptr, u_idx, u_val
        order = np.sort(jw[:nj])
        u_idx = _grow_i(u_idx, nu + nj + 1)
        u_val = _grow_f(u_val, nu + nj + 1)
        rowof = _grow_i(rowof, nu + nj + 1)
        nxt = _grow_i(nxt, nu + nj + 1)
        u_idx[nu] = i
        u_val[nu] = dv
        rowof[nu] = i
        nu += 1
        for q in range(nj):
            c = order[q]
            if c > i:
                v = w[c]
                if pattern_only or abs(v) >= thresh:
                    u_idx[nu] = c
                    u_val[nu] = v
                    rowof[nu] = i
                    nxt[nu] = head[c]
                    head[c] = nu
                    nu += 1
        u_ptr[i + 1] = nu
        for q in range(nj):
            c = jw[q]
            w[c] = 0.0
            pos[c] = -1
    return 0, u_ptr, u_idx[:nu], u_val[:nu]


@njit(cache=True)
def lower_unit_solve(n, ptr, idx, val, b):
    """Solve ``L x = b`` with unit diagonal (diagonal not stored)."""
    x = b.copy()
    for i in range(n):
        s = x[i]
        for p in range(ptr[i], ptr[i + 1]):
            s -= val[p] * x[idx[p]]
        x[i] = s
    return x


@njit(cache=True)
def upper_solve(n, ptr, idx, val, b):
    """Solve ``U x = b``, diagonal stored first in each row."""
    x = b.copy()
    for i in range(n - 1, -1, -1):
        s = x[i]
        for p in range(ptr[i] + 1, ptr[i + 1]):
            s -= val[p] * x[idx[p]]
        x[i] = s / val[ptr[i]]
    return x


@njit(cache=True)
def upper_transpose_solve(n, ptr, idx, val, b):
    """Solve ``U^T x = b`` by column-oriented forward substitution."""
    x = b.copy()
    for i in range(n):
        xi = x[i] / val[ptr[i]]
        x[i] = xi
        for p in range(ptr[i] + 1, ptr[i + 1]):
            x[idx[p]] -= val[p] * xi
    return x
