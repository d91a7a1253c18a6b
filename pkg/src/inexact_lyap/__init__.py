"""Inexact low-rank solvers for large Lyapunov equations.

Rational Krylov (RKSM) and low-rank ADI outer iterations with iterative inner
solves, relaxed inner tolerances and residual-gap tracking.
"""
from .factor import LowRankFactor
from .inner import InnerConfig
from .problems import LyapunovProblem, gen_cd2d, gen_heat3d, gen_msd, make_problem
from .relax import AdiRelaxPolicy, RelaxPolicy
from .rksm import rksm_solve

__all__ = [
    "AdiRelaxPolicy",
    "InnerConfig",
    "LowRankFactor",
    "LyapunovProblem",
    "RelaxPolicy",
    "gen_cd2d",
    "gen_heat3d",
    "gen_msd",
    "make_problem",
    "rksm_solve",
]
