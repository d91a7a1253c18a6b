"""Experiment runner: comparison tables of outer/inner method combinations.

A suite is an INI file with ``[suite]`` defaults, ``[problem.NAME]`` sections
(``kind`` plus generator parameters) and ``[run.LABEL]`` sections naming a
problem and the solver setup.  See ``configs/desk.ini``.
"""
from __future__ import annotations

import configparser
import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .inner import InnerConfig
from .lradi import lradi_solve
from .problems import DEFAULT_DELTA, GENERIC_DELTA, make_problem
from .relax import AdiRelaxPolicy, RelaxPolicy
from .factor import LowRankFactor
from .rksm import computed_residual_factor, rksm_solve
from .trace import fmt_float
from .verify.residual import residual_gap_norm, residual_rounding_allowance, true_residual_norm

RESULT_COLUMNS = ("Ex", "outer", "inner", "stop", "min_tau", "max_tau", "it_out", "dim", "res_comp",
                  "delta_res", "it_in", "save", "time")
EXTRA_COLUMNS = ("label", "converged", "res_true", "gap_bound", "gap_true", "gap_slack")
GRID_KEYS = {"cd2d": "grid_n", "heat3d": "grid_n", "msd": "n1"}


@dataclass
class ExperimentConfig:
    """One row of a results table."""

    label: str
    problem: str  # problem section name
    kind: str  # generator
    params: dict = field(default_factory=dict)
    outer: str = "rksm"
    inner: str = "direct"
    prec: str | None = None
    droptol: float | None = None
    stop: str = "fixed"  # fixed | prac1 | prac2 | theo1 | theo2 (ignored for direct)
    tau: float | None = None
    eps_hat: float = 1e-8
    j_max: int = 50
    delta: float | None = None
    seed: int = 0
    maxit: int = 2000

    def __post_init__(self):
        if self.outer not in ("rksm", "lradi"):
            raise ValueError(f"{self.label}: outer must be rksm or lradi")
        if self.inner not in ("direct", "bicgstab", "minres"):
            raise ValueError(f"{self.label}: inner must be direct, bicgstab or minres")
        if self.inner == "direct":
            self.stop = "--"
        elif self.stop == "fixed" and not self.tau:
            raise ValueError(f"{self.label}: fixed stop needs tau")

    @property
    def problem_key(self) -> tuple:
        return (self.kind, tuple(sorted(self.params.items())), self.seed)

    def scaled(self, factor: float) -> "ExperimentConfig":
        """Copy with the grid parameter multiplied by ``factor``."""
        key = GRID_KEYS.get(self.kind)
        if key is None or key not in self.params or factor == 1:
            return self
        p = dict(self.params)
        p[key] = max(2, int(round(p[key] * factor)))
        return replace(self, params=p)


@dataclass
class ResultRow:
    label: str
    ex: str
    outer: str
    inner: str
    stop: str
    min_tau: float | None
    max_tau: float | None
    it_out: int
    dim: int
    res_comp: float
    delta_res: float
    it_in: int | None
    time: float
    converged: bool
    res_true: float
    gap_bound: float
    gap_true: float = float("nan")  # ||R_true - R_comp|| / ||B||^2
    gap_slack: float = 0.0  # rounding allowance for comparing gap_true with gap_bound
    save: float | None = None
    problem_key: tuple = ()
    error: str | None = None

    def csv_values(self, with_timing: bool = True) -> dict:
        return {
            "Ex": self.ex, "outer": self.outer, "inner": self.inner, "stop": self.stop,
            "min_tau": fmt_float(self.min_tau), "max_tau": fmt_float(self.max_tau),
            "it_out": str(self.it_out), "dim": str(self.dim), "res_comp": fmt_float(self.res_comp),
            "delta_res": fmt_float(self.delta_res), "it_in": "" if self.it_in is None else str(self.it_in),
            "save": "" if self.save is None else f"{self.save:.1f}",
            "time": f"{self.time:.2f}" if with_timing else "",
            "label": self.label, "converged": str(int(self.converged)),
            "res_true": fmt_float(self.res_true), "gap_bound": fmt_float(self.gap_bound),
            "gap_true": fmt_float(self.gap_true), "gap_slack": fmt_float(self.gap_slack),
        }

    def md_values(self, with_timing: bool = True) -> list:
        dash = "--"
        direct = self.inner == "direct"
        def e(v):
            return dash if v is None else f"{v:.1e}"
        return [self.ex, self.outer.upper() if self.outer == "rksm" else "LR-ADI", self.inner, self.stop,
                dash if direct else e(self.min_tau), dash if direct else e(self.max_tau),
                str(self.it_out) + ("" if self.converged else "*"), str(self.dim), f"{self.res_comp:.1e}",
                f"{self.delta_res:.1e}", dash if direct else str(self.it_in),
                dash if direct or self.save is None else f"{self.save:.1f}%",
                f"{self.time:.1f}" if with_timing else ""]


def _delta(cfg: ExperimentConfig, problem) -> float:
    if cfg.delta is not None:
        return cfg.delta
    return DEFAULT_DELTA.get(cfg.kind, GENERIC_DELTA)


def build_problem(cfg: ExperimentConfig):
    return make_problem(cfg.kind, **{**cfg.params, "seed": cfg.seed})


def run_experiment(cfg: ExperimentConfig, problem=None, trace_path=None, with_timing: bool = True) -> ResultRow:
    """Run one configuration and evaluate the true residual with the verify oracles."""
    problem = problem if problem is not None else build_problem(cfg)
    if cfg.inner == "minres" and not problem.symmetric:
        raise ValueError(f"{cfg.label}: MINRES needs a symmetric problem")
    method = cfg.inner
    inner = InnerConfig(method, cfg.prec or "identity", cfg.droptol, maxit=cfg.maxit, seed=12345 + cfg.seed)
    stop = "fixed" if cfg.inner == "direct" else cfg.stop
    tau = cfg.tau if cfg.tau else 1e-10
    t0 = time.perf_counter()
    if cfg.outer == "rksm":
        pol = RelaxPolicy(stop, tau=tau if stop == "fixed" else None, delta=_delta(cfg, problem), j_max=cfg.j_max)
        res = rksm_solve(problem, pol, inner_cfg=inner, eps_hat=cfg.eps_hat, j_max=cfg.j_max)
    else:
        pol = AdiRelaxPolicy(stop, tau=tau if stop == "fixed" else None, j_max=cfg.j_max)
        res = lradi_solve(problem, pol, inner_cfg=inner, eps_hat=cfg.eps_hat, j_max=cfg.j_max)
    elapsed = time.perf_counter() - t0
    tr = res.trace
    nB2 = problem.normB2
    rt = true_residual_norm(problem, res.factor)
    rc = tr.steps[-1].res_comp if tr.steps else nB2
    comp = computed_residual_factor(res.state) if cfg.outer == "rksm" else LowRankFactor(res.state.w)
    gap_true = residual_gap_norm(problem, res.factor, comp)
    slack = residual_rounding_allowance(problem, res.factor)
    if cfg.inner == "direct":
        tmin = tmax = None
        it_in = None
    elif stop == "fixed":
        tmin = tmax = cfg.tau
        it_in = tr.total_inner_iterations
    else:
        rel = [s.tau_k / s.rhs_norm for s in tr.steps]
        tmin, tmax = float(min(rel)), float(max(rel))
        it_in = tr.total_inner_iterations
    # dimension of the approximation space; the realified factor may carry a few extra
    # numerically small directions when inexact solves break conjugate symmetry
    dim = len(tr) * problem.B.shape[1]
    if trace_path is not None:
        tr.to_csv(trace_path, with_timing=with_timing)
    return ResultRow(cfg.label, cfg.problem, cfg.outer, cfg.inner, cfg.stop, tmin, tmax, len(tr),
                     dim, rc / nB2, abs(rc - rt) / nB2, it_in, elapsed, res.converged,
                     rt / nB2, tr.steps[-1].gap_bound / nB2 if tr.steps else 0.0,
                     gap_true=gap_true / nB2, gap_slack=slack / nB2, problem_key=cfg.problem_key)


def fill_savings(rows: list) -> None:
    """``save = 100 (1 - it_in / it_in_baseline)``; baseline = fixed row of the same problem/outer/inner."""
    base = {}
    for r in rows:
        if r.stop == "fixed" and r.it_in is not None:
            base.setdefault((r.problem_key, r.outer, r.inner), r.it_in)
    for r in rows:
        b = base.get((r.problem_key, r.outer, r.inner))
        r.save = None if (b is None or r.it_in is None or b == 0) else 100.0 * (1.0 - r.it_in / b)


def _job(args):
    cfg, trace_path = args
    return run_experiment(cfg, trace_path=trace_path, with_timing=False)


def _failed_row(cfg: ExperimentConfig, err: Exception) -> ResultRow:
    nan = float("nan")
    return ResultRow(cfg.label, cfg.problem, cfg.outer, cfg.inner, cfg.stop, None, None, 0, 0, nan, nan, None,
                     0.0, False, nan, nan, problem_key=cfg.problem_key, error=f"{type(err).__name__}: {err}")


def run_suite(configs: list, out_dir, parallel: bool = False) -> list:
    """Run all rows, write ``results.csv``, ``results.md`` and ``traces/*.csv``."""
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    paths = [out / "traces" / f"{c.label}.csv" for c in configs]
    rows = []
    if parallel and configs:
        with ProcessPoolExecutor() as ex:
            futs = [ex.submit(_job, (c, p)) for c, p in zip(configs, paths)]
            for c, f in zip(configs, futs):
                try:
                    rows.append(f.result())
                except Exception as err:  # per-row isolation
                    rows.append(_failed_row(c, err))
    else:
        cache = {}
        for c, p in zip(configs, paths):
            try:
                if c.problem_key not in cache:
                    cache[c.problem_key] = build_problem(c)
                rows.append(run_experiment(c, cache[c.problem_key], p))
            except Exception as err:
                rows.append(_failed_row(c, err))
    fill_savings(rows)
    write_results(rows, out, with_timing=not parallel)
    return rows


def write_results(rows: list, out_dir, with_timing: bool = True) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = RESULT_COLUMNS + EXTRA_COLUMNS
    with (out / "results.csv").open("w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow(r.csv_values(with_timing))
    head = ["Ex", "outer", "inner", "stop", "min τ", "max τ", "it_out", "dim", "R^comp", "δR", "it_in", "save",
            "time"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in rows:
        lines.append("| " + " | ".join(r.md_values(with_timing)) + " |")
    notes = [f"- {r.label}: {r.error}" for r in rows if r.error]
    if any(not r.converged for r in rows if not r.error):
        notes.append("- `*` marks runs that stopped at j_max without reaching the tolerance.")
    (out / "results.md").write_text("\n".join(lines + ([""] + notes if notes else [])) + "\n")


# ------------------------------------------------------------------ config
def _num(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def load_suite(path, seed: int | None = None, desk_scale: float = 1.0) -> list:
    """Parse a suite INI file into experiment configurations."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        cp.read_file(fh)
    return suite_from_parser(cp, seed, desk_scale)


def suite_from_parser(cp: configparser.ConfigParser, seed: int | None = None, desk_scale: float = 1.0) -> list:
    suite = dict(cp["suite"]) if cp.has_section("suite") else {}
    problems = {}
    for sec in cp.sections():
        if sec.startswith("problem."):
            d = dict(cp[sec])
            kind = d.pop("kind")
            problems[sec.split(".", 1)[1]] = (kind, {k: _num(v) for k, v in d.items()})
    configs = []
    for sec in cp.sections():
        if not sec.startswith("run."):
            continue
        d = {**suite, **dict(cp[sec])}
        pname = d.pop("problem")
        if pname not in problems:
            raise ValueError(f"{sec}: unknown problem '{pname}'")
        kind, params = problems[pname]
        kw = {}
        for key in ("outer", "inner", "prec", "stop"):
            if key in d:
                kw[key] = d[key]
        for key in ("droptol", "tau", "eps_hat", "delta"):
            if key in d:
                kw[key] = float(d[key])
        for key in ("j_max", "seed", "maxit"):
            if key in d:
                kw[key] = int(d[key])
        if seed is not None:
            kw["seed"] = seed
        cfg = ExperimentConfig(label=sec.split(".", 1)[1], problem=pname, kind=kind, params=dict(params), **kw)
        configs.append(cfg.scaled(desk_scale))
    return configs


def default_config_path(name: str = "desk.ini") -> Path:
    return Path(__file__).parent / "configs" / name


def summarize(rows: list) -> str:
    if not rows:
        return "no rows"
    ok = sum(r.converged for r in rows)
    worst = max((r.delta_res for r in rows if np.isfinite(r.delta_res)), default=float("nan"))
    return f"{len(rows)} rows, {ok} converged, max delta_res {worst:.2e}"
