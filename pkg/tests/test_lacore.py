import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from inexact_lyap.lacore import (OrthoBasis, RankDeficientError, as_csr, check_csr, gram_schmidt_extend,
                                 matrix_fingerprint, orth, spmv, thin_qr)


def test_spmv_identity():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(spmv(sp.identity(3, format="csr"), x), x)


def test_spmv_tridiag():
    T = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(3, 3), format="csr")
    np.testing.assert_array_equal(spmv(T, np.ones(3)), [1.0, 0.0, 1.0])


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        spmv(sp.identity(3, format="csr"), np.ones(4))


@given(n=st.integers(1, 100), density=st.floats(0.01, 0.5), seed=st.integers(0, 2**31))
def test_spmv_matches_dense(n, density, seed):
    A = sp.random(n, n, density=density, format="csr", random_state=seed)
    x = np.random.default_rng(seed).standard_normal(n)
    ref = A.toarray() @ x
    err = np.linalg.norm(spmv(A, x) - ref)
    assert err <= 1e-14 * max(np.linalg.norm(np.abs(A.toarray()) @ np.abs(x)), 1e-300)


def test_csr_invariants():
    A = as_csr(sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [2, 0, 1])), shape=(2, 3)))
    check_csr(A)
    assert A.indptr[0] == 0 and A.indptr[-1] == A.nnz
    bad = sp.csr_matrix((np.ones(2), np.array([1, 0]), np.array([0, 2])), shape=(1, 2))
    with pytest.raises(ValueError, match="strictly increasing"):
        check_csr(bad)


def test_fingerprint_changes_with_values():
    A = sp.identity(4, format="csr")
    assert matrix_fingerprint(A) == matrix_fingerprint(A.copy())
    assert matrix_fingerprint(A) != matrix_fingerprint(2 * A)


def test_thin_qr_trivial():
    e1 = np.eye(5)[:, :1]
    Q, b = thin_qr(e1)
    np.testing.assert_allclose(Q, e1)
    np.testing.assert_allclose(b, [[1.0]])
    Q, b = thin_qr(2 * e1)
    np.testing.assert_allclose(Q, e1)
    np.testing.assert_allclose(b, [[2.0]])


def test_thin_qr_random(rng):
    B = rng.standard_normal((30, 4))
    Q, b = thin_qr(B)
    assert np.linalg.norm(Q @ b - B, 2) <= 1e-13 * np.linalg.norm(B, 2)
    assert np.linalg.norm(Q.T @ Q - np.eye(4)) <= 1e-12
    assert np.allclose(b, np.triu(b)) and np.all(np.diag(b) > 0)


def test_thin_qr_reports_rank():
    B = np.ones((6, 2))
    with pytest.raises(RankDeficientError) as exc:
        thin_qr(B)
    assert exc.value.rank == 1


def test_gs_extend_from_empty():
    Q = OrthoBasis.empty(3, 1)
    Qn, h, rd = gram_schmidt_extend(Q, np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(Qn.Q, np.eye(3)[:, :1])
    np.testing.assert_allclose(h, [[1.0]])
    assert not rd


def test_gs_extend_hand_example():
    Qn, h, rd = gram_schmidt_extend(OrthoBasis(np.eye(3)[:, :1], 1), np.array([1.0, 1.0, 0.0]))
    np.testing.assert_allclose(Qn.Q[:, 1], [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(h, [[1.0], [1.0]])
    assert not rd


@pytest.mark.parametrize("cplx", [False, True])
def test_gs_extend_random(rng, cplx):
    Q = orth(rng.standard_normal((40, 5)))
    W = rng.standard_normal((40, 2))
    if cplx:
        W = W + 1j * rng.standard_normal((40, 2))
    Qn, h, rd = gram_schmidt_extend(OrthoBasis(Q, 1), W)
    assert not rd
    assert Qn.orthogonality_error() <= 1e-12
    assert np.linalg.norm(Qn.Q @ h - W, 2) <= 1e-12 * np.linalg.norm(W, 2)
    tail = h[-2:]
    assert abs(tail[1, 0]) == 0.0


def test_gs_extend_breakdown():
    Q = np.eye(4)[:, :2]
    _, _, rd = gram_schmidt_extend(OrthoBasis(Q, 1), Q @ np.array([1.0, 2.0]))
    assert rd


def test_repeated_extension_stays_orthonormal(rng):
    # the basis invariant: ||Q*Q - I||_F <= 1e-10 * columns on a badly scaled sequence
    n = 200
    A = sp.diags(np.linspace(1, 1e4, n)).tocsr()
    basis = OrthoBasis.empty(n, 1)
    w = rng.standard_normal(n)
    for _ in range(60):
        basis, _, rd = gram_schmidt_extend(basis, w)
        w = A @ basis.Q[:, -1]
        assert not rd
    assert basis.orthogonality_error() <= 1e-10 * basis.ncols
