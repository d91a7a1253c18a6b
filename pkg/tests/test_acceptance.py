"""Acceptance suite: one test per criterion, each recorded as a PASS/FAIL line in the summary."""
import csv
import time

import numpy as np
import pytest

from inexact_lyap.bench import default_config_path, load_suite, run_suite
from inexact_lyap.dense_eig import lyap_dense
from inexact_lyap.inner import InnerConfig
from inexact_lyap.lradi import lradi_solve
from inexact_lyap.problems import gen_cd2d, gen_heat3d
from inexact_lyap.relax import AdiRelaxPolicy, RelaxPolicy
from inexact_lyap.rksm import rksm_solve
from inexact_lyap.shifts import adi_adaptive_shifts
from inexact_lyap.verify import (adi_identity_checks, decay_bounds_check, lemma5_check, random_hessenberg,
                                 rksm_decomposition_check, theo_relaxation_check, adi_decay_check, posteriori_tolerance_check)

from conftest import stable_matrix

EPS_HAT = 1e-8


@pytest.fixture(scope="module")
def desk_rows(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    return run_suite(load_suite(default_config_path("desk.ini")), out)


def test_criterion1_projected_solver(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for trial in range(200):
        n = int(rng.integers(1, 51))
        T = stable_matrix(rng, n, complex_=bool(trial % 3 == 0))
        L = rng.standard_normal((n, 2))
        W = L @ L.T
        Y = lyap_dense(T, W)
        err = np.linalg.norm(T @ Y + Y @ T.conj().T + W, 2)
        worst = max(worst, err / (np.linalg.norm(T, 2) * np.linalg.norm(Y, 2) + np.linalg.norm(W, 2)))
    c1 = np.abs(lyap_dense(-np.eye(4), np.eye(4)) - 0.5 * np.eye(4)).max()
    Y2 = lyap_dense(np.diag([-1.0, -2.0]), np.ones((2, 2)))
    c2 = np.abs(Y2 - np.array([[1 / 2, 1 / 3], [1 / 3, 1 / 4]])).max()
    dt = time.perf_counter() - t0
    ok = worst <= 1e-11 and c1 <= 1e-14 and c2 <= 1e-14 and dt < 5
    acceptance(1, ok, f"max rel residual {worst:.1e}, closed forms {c1:.1e}/{c2:.1e}, {dt:.1f}s")


def test_criterion2_null_vector_formulas(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst, done, skipped = 0.0, 0, 0
    while done < 100:
        rep = lemma5_check(random_hessenberg(rng, 12), tol=1e-9, cond_guard=1e12)
        if not rep.applicable:
            skipped += 1
            continue
        done += 1
        worst = max(worst, max(it.value for it in rep.items if it.name != "null_vector"))
        assert rep.items[0].passed
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 2
    acceptance(2, ok, f"max rel error {worst:.1e} over {done} trials ({skipped} guarded), {dt:.1f}s")


def test_criterion3_decompositions(acceptance):
    t0 = time.perf_counter()
    p = gen_cd2d(30)
    reports = []
    for tau in (0.0, 1e-6):
        inner = InnerConfig("direct") if tau == 0 else InnerConfig("forced")
        pol = RelaxPolicy("fixed", tau=tau or 1.0, relative=False)
        r = rksm_solve(p, pol, inner_cfg=inner, eps_hat=EPS_HAT, j_max=30, stop=False)
        reports.append(rksm_decomposition_check(p, r, tol=1e-9))
        apol = AdiRelaxPolicy("fixed", tau=tau or 1.0, relative=False)
        a = lradi_solve(p, apol, inner_cfg=inner, eps_hat=EPS_HAT, j_max=20, stop=False)
        reports.append(adi_identity_checks(p, a, tol=1e-9))
    dt = time.perf_counter() - t0
    bad = [f"{rep.title}:{it.name}" for rep in reports for it in rep.failures]
    exact_items = {it.name for rep in reports[:2] for it in rep.items}
    ok = not bad and all(rep.passed for rep in reports) and dt < 30
    ok = ok and {"exact_decomposition", "exact_residual_factor"} <= exact_items
    acceptance(3, ok, f"{sum(len(r.items) for r in reports)} identities, failures {bad or 'none'}, {dt:.1f}s")


def test_criterion4_gap_soundness(acceptance, desk_rows):
    viol = [r.label for r in desk_rows if r.error or not r.gap_true <= r.gap_bound + r.gap_slack]
    worst = max(r.gap_true / max(r.gap_bound + r.gap_slack, 1e-300) for r in desk_rows if not r.error)
    acceptance(4, not viol, f"{len(desk_rows)} runs, max gap/bound {worst:.2f}, violations {viol or 'none'}")


def test_criterion5_theoretical_strategies(acceptance):
    reports = []
    p = gen_cd2d(15)
    for kind in ("theo1", "theo2"):
        rep, _ = theo_relaxation_check(p, kind, eps_hat=EPS_HAT, j_max=50)
        reports.append(rep)
    h = gen_heat3d(7, r=1)
    reports.append(posteriori_tolerance_check(h, eps_hat=EPS_HAT, j_max=50))
    q = gen_heat3d(6, r=1)
    shifts = adi_adaptive_shifts(q.A, q.M, None, q.B, 1)[:8]
    reports.append(adi_decay_check(q, shifts, eps_hat=EPS_HAT, j_max=32))
    bad = [f"{r.title}:{it.name}" for r in reports for it in r.failures]
    bad += [f"{r.title}: not applicable" for r in reports if not r.applicable]
    ok = all(r.passed for r in reports)
    acceptance(5, ok, f"{len(reports)} reports, failures {bad or 'none'}")


def test_criterion6_end_to_end(acceptance, desk_rows):
    prac = [r for r in desk_rows if r.stop in ("prac1", "prac2")]
    bad = []
    for r in prac:
        if r.error or not (r.converged and r.it_out <= 50 and r.res_true <= 2 * EPS_HAT and r.delta_res <= 1e-7):
            bad.append(f"{r.label}(res_true {r.res_true:.1e}, delta {r.delta_res:.1e}, it {r.it_out})")
    total = sum(r.time for r in desk_rows)
    ok = not bad and len(prac) == 12 and total < 600
    acceptance(6, ok, f"{len(prac)} practical runs, {total:.0f}s, failures {bad or 'none'}")


def test_criterion7_savings(acceptance, desk_rows):
    need = {"cd2d": 10.0, "heat3d": 15.0}
    found, bad = [], []
    for r in desk_rows:
        if r.ex in need and r.stop in ("prac1", "prac2"):
            found.append(f"{r.ex}/{r.outer}/{r.stop} {r.save:.1f}%")
            if r.save is None or r.save < need[r.ex]:
                bad.append(r.label)
    ok = not bad and len(found) == 8
    acceptance(7, ok, "; ".join(found) + (f"; below threshold: {bad}" if bad else ""))


def test_criterion8_decay_bounds(acceptance):
    p = gen_cd2d(31)
    res = rksm_solve(p, eps_hat=EPS_HAT, j_max=50, keep_history=True)
    rep = decay_bounds_check(p, res)
    over = ", ".join(f"{k} min {lo:.1e} median {med:.1e}" for k, (lo, med) in rep.overestimation().items())
    detail = f"applicable={rep.applicable} {rep.reason} checks={rep.n_checks} violations={rep.violations} {over}"
    acceptance(8, rep.passed, detail.strip())


def _strip_timing(path, drop):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    idx = [i for i, h in enumerate(rows[0]) if h not in drop]
    return "\n".join(",".join(row[i] for i in idx) for row in rows).encode()


def test_criterion9_determinism(acceptance, tmp_path):
    cfgs = load_suite(default_config_path("smoke.ini"), seed=7)
    outs = []
    for k in range(2):
        run_suite(cfgs, tmp_path / f"run{k}")
        outs.append(tmp_path / f"run{k}")
    files = ["results.csv"] + [f"traces/{c.label}.csv" for c in cfgs]
    diff = [f for f in files
            if _strip_timing(outs[0] / f, {"time", "wall_ms"}) != _strip_timing(outs[1] / f, {"time", "wall_ms"})]
    acceptance(9, not diff, f"{len(files)} CSV files compared, differing {diff or 'none'}")
