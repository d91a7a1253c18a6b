"""Inner-solve tolerance policies for the outer iterations.

Every policy yields an *absolute* bound ``tau_k`` on the norm of the true
linear residual ``s_k`` of the k-th shifted solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RKSM_KINDS = ("fixed", "prac1", "prac2", "schedule")
ADI_KINDS = ("fixed", "prac1", "prac2", "theo1", "theo2", "schedule")


@dataclass
class RelaxPolicy:
    """Tolerance policy for RKSM.

    Parameters
    ----------
    kind : {"fixed", "prac1", "prac2", "schedule"}
        ``schedule`` replays the list ``schedule`` (used by a-posteriori checks).
    eps : float
        Absolute outer tolerance ``eps_hat * ||B||^2``.
    res0 : float
        ``||R_0|| = ||B||^2``; stands in for the unknown row norm at the first
        step so that ``tau_1`` does not depend on the scaling of ``B``.
    relative : bool
        For ``fixed``: scale ``tau`` by the right-hand-side norm.
    """

    kind: str = "prac1"
    eps: float = 1e-8
    j_max: int = 50
    delta: float = 0.5
    tau_min: float = 1e-12
    tau_max: float = 0.1
    tau: float | None = None
    relative: bool = True
    schedule: list = field(default_factory=list)
    res0: float = 1.0

    def __post_init__(self):
        if self.kind not in RKSM_KINDS:
            raise ValueError(f"unknown RKSM relaxation kind '{self.kind}'")
        if not 0 < self.tau_min < self.tau_max <= 1:
            raise ValueError("need 0 < tau_min < tau_max <= 1")
        if self.kind == "fixed" and (self.tau is None or self.tau <= 0):
            raise ValueError("fixed policy needs tau > 0")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")

    def clamp(self, tau: float) -> float:
        return float(min(max(tau, self.tau_min), self.tau_max))


@dataclass
class AdiRelaxPolicy:
    """Tolerance policy for LR-ADI (``theo*`` need dense ``||M (A + alpha M)^{-1}||``)."""

    kind: str = "prac1"
    eps: float = 1e-8
    j_max: int = 50
    tau_min: float = 1e-12
    tau_max: float = 0.1
    tau: float | None = None
    relative: bool = True
    sigma_source: str = "dense"
    schedule: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ADI_KINDS:
            raise ValueError(f"unknown ADI relaxation kind '{self.kind}'")
        if not 0 < self.tau_min < self.tau_max <= 1:
            raise ValueError("need 0 < tau_min < tau_max <= 1")
        if self.kind == "fixed" and (self.tau is None or self.tau <= 0):
            raise ValueError("fixed policy needs tau > 0")
        if self.sigma_source not in ("dense", "estimate"):
            raise ValueError("sigma_source must be 'dense' or 'estimate'")

    def clamp(self, tau: float) -> float:
        return float(min(max(tau, self.tau_min), self.tau_max))


def rksm_prac_tau(policy: RelaxPolicy, denom: float | None) -> float:
    """``delta * eps / (j_max * denom)`` clamped; ``denom=None`` means the first step."""
    num = policy.delta * policy.eps / policy.j_max
    if denom is None:
        return policy.clamp(num / policy.res0)
    if denom <= 0 or not np.isfinite(denom):
        return policy.tau_max
    return policy.clamp(num / denom)


def adi_prac1_tau(policy: AdiRelaxPolicy, res_prev: float) -> float:
    if res_prev <= 0:
        return policy.tau_max
    return policy.clamp(policy.eps / (4 * policy.j_max * np.sqrt(res_prev)))


def adi_prac2_tau(policy: AdiRelaxPolicy, k: int, res_prev: float, u_prev: float) -> float:
    num = k * policy.eps / policy.j_max - 2 * u_prev
    if num <= 0:
        return policy.tau_min
    if res_prev <= 0:
        return policy.tau_max
    return policy.clamp(num / (4 * np.sqrt(res_prev)))


def adi_theo_tau(policy: AdiRelaxPolicy, k: int, w_norm: float, sigma: float, gamma2: float, u_prev: float = 0.0) -> float:
    """Positive root of ``2 gamma^2 sigma (||w|| s + s^2) = c``.

    ``c = eps / j_max`` for ``theo1`` and ``k eps / j_max - 2 u_{k-1}`` for
    ``theo2``, where the accumulator ``u_{k-1}`` bounds the previous gap.
    """
    c = policy.eps / policy.j_max if policy.kind == "theo1" else k * policy.eps / policy.j_max - 2 * u_prev
    if c <= 0:
        return policy.tau_min
    disc = w_norm**2 + 2 * c / (sigma * gamma2)
    # 0.5 (sqrt(w^2 + d) - w), written without cancellation
    tau = 0.5 * (2 * c / (sigma * gamma2)) / (np.sqrt(disc) + w_norm)
    return policy.clamp(tau)
