import numpy as np
import pytest
import scipy.sparse as sp

from inexact_lyap.factor import LowRankFactor
from inexact_lyap.inner import InnerConfig, ShiftedSolver
from inexact_lyap.lradi import (adi_gap_update, adi_init, adi_residual_norm, adi_step, adi_T_matrix, dense_sigma,
                                lradi_solve, relax_tolerance_adi)
from inexact_lyap.problems import LyapunovProblem, gen_cd2d, gen_heat3d, gen_msd
from inexact_lyap.relax import AdiRelaxPolicy, adi_theo_tau
from inexact_lyap.shifts import adi_adaptive_shifts
from inexact_lyap.verify import adi_identity_checks, theo_relaxation_check, adi_decay_check, true_residual_norm_dense
from inexact_lyap.verify.adi_checks import cayley_dense
from inexact_lyap.verify.residual import residual_matrix_dense, true_residual_norm


def test_minus_identity_one_step():
    b = np.array([[1.0], [2.0], [-1.0]])
    p = LyapunovProblem(-sp.identity(3, format="csr"), b)
    st = adi_init(p)
    st, res, _ = adi_step(st, -1.0, ShiftedSolver(p.A, p.M, InnerConfig("direct")), 0.0)
    np.testing.assert_allclose(res.X, -b / 2)
    np.testing.assert_allclose(st.w, 0, atol=1e-15)
    np.testing.assert_allclose(st.Z @ st.Z.T, b @ b.T / 2, atol=1e-15)
    r = lradi_solve(p, shift_source=[-1.0])
    assert r.converged and len(r.trace) == 1


def test_step_rejects_unstable_shift():
    p = gen_cd2d(4)
    with pytest.raises(ValueError):
        adi_step(adi_init(p), 0.5, ShiftedSolver(p.A, p.M, InnerConfig("direct")), 0.0)
    with pytest.raises(ValueError):
        lradi_solve(p, shift_source=[-1.0, 2.0])


def test_exact_step_is_cayley_product():
    p = gen_cd2d(8)
    A, M = p.A.toarray(), p.M.toarray()
    st = adi_init(p)
    solver = ShiftedSolver(p.A, p.M, InnerConfig("direct"))
    w = p.B.copy()
    for a in (-3.0, -40.0, -700.0):
        st, _, _ = adi_step(st, a, solver, 0.0)
        w = cayley_dense(A, M, a) @ w
        assert np.linalg.norm(st.w - w) <= 1e-12 * np.linalg.norm(w)


def test_inexact_step_residual_factor_identity():
    p = gen_cd2d(8)
    A, M = p.A.toarray(), p.M.toarray()
    st = adi_init(p)
    solver = ShiftedSolver(p.A, p.M, InnerConfig("forced"))
    w = p.B.copy()
    for a in (-3.0, -40.0):
        st, res, _ = adi_step(st, a, solver, 1e-4)
        C = cayley_dense(A, M, a)
        w = C @ w - (C - np.eye(p.n)) @ res.S
        assert np.linalg.norm(st.w - w) <= 1e-10 * np.linalg.norm(p.B)


def test_residual_norm_examples():
    p = gen_cd2d(5)
    st = adi_init(p)
    assert adi_residual_norm(st) == pytest.approx(np.linalg.norm(p.B) ** 2)
    st.w = np.zeros_like(st.w)
    assert adi_residual_norm(st) == 0.0


@pytest.mark.parametrize("gen", [lambda: gen_cd2d(10), lambda: gen_heat3d(5, r=2), lambda: gen_msd(15, 2)])
def test_computed_equals_true_residual_exact(gen):
    p = gen()
    r = lradi_solve(p, eps_hat=1e-9, j_max=40)
    assert abs(r.trace.steps[-1].res_comp - true_residual_norm_dense(p, r.factor)) <= 1e-10 * p.normB2


def test_gap_accumulator():
    p = gen_cd2d(6)
    exact = lradi_solve(p, eps_hat=1e-10, j_max=10, stop=False)
    # LU rounding only; the accumulator is nondecreasing from u_0 = 0
    assert exact.state.u <= 1e-12 * p.normB2
    st = adi_init(p)
    solver = ShiftedSolver(p.A, p.M, InnerConfig("forced"))
    st, res, Mv = adi_step(st, -5.0, solver, 1e-3)
    assert st.u == pytest.approx(10.0 * np.linalg.norm(Mv) * 1e-3, rel=1e-6)
    before = st.u
    adi_gap_update(st, 1.0, 2.0, 3.0)
    assert st.u == before + 6.0 and st.u_history[-1] == st.u


def test_gap_bound_dense_eta():
    p = gen_cd2d(12)
    pol = AdiRelaxPolicy("fixed", tau=1e-5, relative=False)
    r = lradi_solve(p, pol, inner_cfg=InnerConfig("forced"), eps_hat=1e-9, j_max=20, stop=False)
    assert np.all(np.diff(r.state.u_history) >= 0)
    rep = adi_identity_checks(p, r)
    assert rep.passed, rep.text()


@pytest.mark.parametrize("gen", [lambda: gen_cd2d(10), lambda: gen_msd(10, 1)])
def test_identities_bicgstab(gen):
    p = gen()
    r = lradi_solve(p, AdiRelaxPolicy("prac2"), inner_cfg=InnerConfig("bicgstab", "ilut"), eps_hat=1e-8)
    rep = adi_identity_checks(p, r)
    assert rep.passed, rep.text()


def test_T_matrix_structure():
    T, g, G = adi_T_matrix([-1.0, -2 + 3j, -2 - 3j, -0.5], r=2)
    assert np.linalg.norm(T + T.conj().T + g @ g.conj().T) <= 1e-14 * np.linalg.norm(T)
    assert T.shape == (8, 8) and np.allclose(np.triu(T, 1), 0)
    np.testing.assert_allclose(np.diag(G), np.repeat(np.sqrt([2, 4, 4, 1]), 2))


def test_prac_first_step():
    p = gen_cd2d(6)
    pol = AdiRelaxPolicy("prac1", eps=1e-6, j_max=50, tau_min=1e-300)
    st = adi_init(p)
    t1 = relax_tolerance_adi(pol, st, 1, p.normB2)
    assert t1 == pytest.approx(1e-6 / (4 * 50 * np.linalg.norm(p.B)))
    pol2 = AdiRelaxPolicy("prac2", eps=1e-6, j_max=50, tau_min=1e-300)
    assert relax_tolerance_adi(pol2, st, 1, p.normB2) == pytest.approx(t1)
    st.u = 1.0
    assert relax_tolerance_adi(pol2, st, 1, p.normB2) == pol2.tau_min


def test_theo_tau_root():
    pol = AdiRelaxPolicy("theo1", eps=1e-6, j_max=10, tau_min=1e-300, tau_max=1.0)
    w, sig, g2 = 3.0, 0.7, 4.0
    s = adi_theo_tau(pol, 1, w, sig, g2)
    assert 2 * g2 * sig * (w * s + s * s) == pytest.approx(1e-7, rel=1e-12)


def test_dense_sigma_small_only():
    p = gen_cd2d(5)
    A = p.A.toarray()
    assert dense_sigma(p, -2.0) == pytest.approx(np.linalg.norm(np.linalg.inv(A - 2 * np.eye(25)), 2))
    with pytest.raises(ValueError):
        dense_sigma(gen_cd2d(30), -1.0)
    with pytest.raises(ValueError):
        lradi_solve(gen_cd2d(30), AdiRelaxPolicy("theo1"))


@pytest.mark.parametrize("kind", ["theo1", "theo2"])
def test_theo_relaxation(kind):
    p = gen_cd2d(10)
    rep, _ = theo_relaxation_check(p, kind, j_max=30)
    assert rep.passed, rep.text()


def test_computed_residual_decay_fixed_shifts():
    p = gen_heat3d(5, r=1)
    shifts = adi_adaptive_shifts(p.A, p.M, None, p.B, 1)[:6]
    rep = adi_decay_check(p, shifts, j_max=24)
    assert rep.passed, rep.text()


def test_shifts_real_for_symmetric():
    p = gen_heat3d(6, r=1)
    r = lradi_solve(p, eps_hat=1e-9)
    a = r.shifts.as_array()
    assert np.all(a.imag == 0) and np.all(a.real < 0)


def test_bootstrap_batch_from_B():
    p = gen_cd2d(8, r=2)
    from inexact_lyap.shifts import projection_shifts
    from inexact_lyap.lacore import orth
    assert adi_adaptive_shifts(p.A, p.M, np.zeros((p.n, 0)), p.B, 2) == projection_shifts(p.A, p.M, orth(p.B))


def test_msd_shifts_stable_and_factor_real():
    p = gen_msd(20, 2)
    r = lradi_solve(p, eps_hat=1e-8, j_max=60)
    a = r.shifts.as_array()
    assert np.all(a.real < 0)
    if np.any(a.imag != 0):
        assert not r.factor.is_complex
        assert abs(true_residual_norm_dense(p, r.factor) - r.trace.steps[-1].res_comp) <= 1e-9 * p.normB2


def test_complex_pairs_realified():
    p = gen_cd2d(10)
    pairs = [-20 + 30j, -20 - 30j, -200.0, -5 + 2j, -5 - 2j]
    r = lradi_solve(p, shift_source=pairs, j_max=25, stop=False)
    assert not r.factor.is_complex
    Xc = r.state.Z @ r.state.Z.conj().T
    np.testing.assert_allclose(r.factor.dense(), Xc.real, atol=1e-12 * np.abs(Xc).max())


def test_open_pair_not_accepted():
    p = gen_cd2d(6)
    r = lradi_solve(p, shift_source=[-100 + 300j, -100 - 300j, -400.0], eps_hat=1e-3, j_max=41)
    assert r.converged and r.shifts.closes_pairs()


def test_heat3d_desk_fixed_and_prac2():
    p = gen_heat3d(20)
    fixed = lradi_solve(p, AdiRelaxPolicy("fixed", tau=1e-9), inner_cfg=InnerConfig("minres", "ict"))
    assert true_residual_norm(p, fixed.factor) / p.normB2 <= 2e-8
    prac = lradi_solve(p, AdiRelaxPolicy("prac2"), inner_cfg=InnerConfig("minres", "ict"))
    it_f = sum(fixed.trace.column("inner_iters"))
    it_p = sum(prac.trace.column("inner_iters"))
    assert 1 - it_p / it_f >= 0.15
    gap = abs(prac.trace.steps[-1].res_comp - true_residual_norm(p, prac.factor)) / p.normB2
    assert gap <= 1e-7
