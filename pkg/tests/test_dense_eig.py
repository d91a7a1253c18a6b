import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import stable_matrix
from inexact_lyap.dense_eig import (SpectrumSplittingError, hessenberg_reduce, lyap_dense, schur,
                                    spectral_norm_small)


def _lyap_res(T, Y, W):
    return np.linalg.norm(T @ Y + Y @ T.conj().T + W, 2) / (np.linalg.norm(T, 2) * np.linalg.norm(Y, 2)
                                                            + np.linalg.norm(W, 2))


def test_hessenberg_small_inputs_unchanged():
    T = np.array([[1.0, 2.0], [3.0, 4.0]])
    V, H = hessenberg_reduce(T)
    np.testing.assert_array_equal(V, np.eye(2))
    np.testing.assert_array_equal(H, T)
    D = np.diag([1.0, 2.0, 3.0])
    V, H = hessenberg_reduce(D)
    np.testing.assert_allclose(H, D, atol=1e-15)


def test_hessenberg_random(rng):
    T = rng.standard_normal((20, 20))
    V, H = hessenberg_reduce(T)
    assert np.allclose(np.tril(H, -2), 0)
    assert np.linalg.norm(V @ H @ V.T - T, 2) <= 1e-13 * np.linalg.norm(T, 2)


def test_schur_diag():
    sf = schur(np.diag([-1.0, -2.0]))
    assert sorted(sf.eigenvalues.real) == [-2.0, -1.0]


def test_schur_rotation():
    sf = schur(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    ev = sf.eigenvalues[np.argsort(sf.eigenvalues.imag)]
    np.testing.assert_allclose(ev, [-1j, 1j], atol=1e-15)


def _companion_roots(T, dps=80):
    # independent oracle: exact-ish characteristic polynomial (Faddeev-LeVerrier in high
    # precision), then the eigenvalues of its companion matrix, also in high precision
    n = T.shape[0]
    with mpmath.workdps(dps):
        A = mpmath.matrix(T.tolist())
        c = [mpmath.mpf(1)]
        Mk = mpmath.zeros(n, n)
        for k in range(1, n + 1):
            Mk = A * Mk + c[-1] * mpmath.eye(n)
            AM = A * Mk
            c.append(-sum(AM[i, i] for i in range(n)) / k)
        C = mpmath.zeros(n, n)
        for i in range(n):
            C[0, i] = -c[i + 1]
        for i in range(1, n):
            C[i, i - 1] = 1
        ev = mpmath.eig(C, left=False, right=False)
        return np.array([complex(z) for z in ev])


def _match(a, b):
    # greedy nearest matching
    b = list(b)
    err = 0.0
    for z in a:
        i = int(np.argmin([abs(z - w) for w in b]))
        err = max(err, abs(z - b.pop(i)))
    return err


def test_schur_vs_companion_oracle(rng):
    n = 25
    T = stable_matrix(rng, n)
    sf = schur(T)
    assert np.linalg.norm(sf.U @ sf.S @ sf.U.conj().T - T, 2) <= 1e-12 * np.linalg.norm(T, 2)
    assert np.linalg.norm(sf.U.conj().T @ sf.U - np.eye(n), 2) <= 1e-12
    assert _match(sf.eigenvalues, _companion_roots(T)) <= 1e-8


def test_schur_similarity_invariance(rng):
    T = rng.standard_normal((15, 15))
    P = np.linalg.qr(rng.standard_normal((15, 15)) + 1j * rng.standard_normal((15, 15)))[0]
    assert _match(schur(T).eigenvalues, schur(P @ T @ P.conj().T).eigenvalues) <= 1e-8


def test_lyap_closed_forms():
    np.testing.assert_allclose(lyap_dense(-np.eye(2), np.eye(2)), np.eye(2) / 2, atol=1e-14, rtol=0)
    Y = lyap_dense(np.diag([-1.0, -2.0]), np.ones((2, 2)))
    np.testing.assert_allclose(Y, [[1 / 2, 1 / 3], [1 / 3, 1 / 4]], atol=1e-14, rtol=0)


def test_lyap_random_stable(rng):
    T = stable_matrix(rng, 30)
    b = rng.standard_normal((30, 1))
    W = b @ b.T
    Y = lyap_dense(T, W)
    assert _lyap_res(T, Y, W) <= 1e-11
    assert np.array_equal(Y, Y.T)


@given(n=st.integers(1, 50), cplx=st.booleans(), seed=st.integers(0, 2**31))
def test_lyap_property(n, cplx, seed):
    r = np.random.default_rng(seed)
    T = stable_matrix(r, n, cplx)
    B = r.standard_normal((n, 2))
    W = B @ B.T
    Y = lyap_dense(T, W)
    assert _lyap_res(T, Y, W) <= 1e-11
    np.testing.assert_array_equal(Y, Y.conj().T)


def test_lyap_splitting_violation():
    T = np.diag([1.0, -1.0])
    with pytest.raises(SpectrumSplittingError, match="splitting"):
        lyap_dense(T, np.eye(2))


def test_spectral_norm_small():
    assert spectral_norm_small(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-12)
    u, v = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0])
    assert spectral_norm_small(np.outer(u, v)) == pytest.approx(15.0, rel=1e-12)


def test_spectral_norm_random(rng):
    X = rng.standard_normal((20, 7))
    ref = np.sqrt(np.linalg.eigvalsh(X.T @ X)[-1])
    assert abs(spectral_norm_small(X) - ref) <= 1e-10 * ref
