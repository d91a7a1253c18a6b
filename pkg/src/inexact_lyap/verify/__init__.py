"""Independent dense/Lanczos oracles and bound checkers."""
from .adi_checks import adi_identity_checks, theo_relaxation_check, adi_decay_check
from .decay import DecayBoundReport, decay_bounds_check, decay_constant
from .nullvec import NullVectorOracle, lemma5_check, random_hessenberg
from .report import CheckItem, CheckReport
from .residual import (LanczosEstimate, residual_rounding_allowance, true_residual_norm,
                       true_residual_norm_dense, true_residual_norm_lanczos)
from .rksm_checks import eta_dense, rksm_decomposition_check, rksm_gap_check, posteriori_tolerance_check

__all__ = [
    "CheckItem", "CheckReport", "DecayBoundReport", "LanczosEstimate", "NullVectorOracle",
    "adi_identity_checks", "decay_bounds_check", "decay_constant", "eta_dense", "lemma5_check",
    "random_hessenberg", "residual_rounding_allowance", "rksm_decomposition_check", "rksm_gap_check",
    "adi_decay_check", "posteriori_tolerance_check", "theo_relaxation_check", "true_residual_norm",
    "true_residual_norm_dense", "true_residual_norm_lanczos",
]
