"""Robust stability of a positive core in feedback with unit-gain operators,
and of two positive operators interconnected through their static gains."""

from __future__ import annotations

import numpy as np

from ..linalg import as_matrix, is_metzler, is_nonnegative, spectral_radius_nonneg
from ..model import LftModel
from ..witness import DEFAULT_MARGIN, kyp_spec
from .common import (
    AnalysisError,
    Condition,
    StabilityReport,
    combine,
    hurwitz_margin,
    lp_condition,
    scaling_certificate,
    schur_margin,
    witness_condition,
)


def _check_core(core: LftModel) -> None:
    if core.n and not is_metzler(core.A):
        raise AnalysisError("core matrix A must be Metzler")
    for name in ("E", "C", "F"):
        M = getattr(core, name)
        if M.size and not is_nonnegative(M):
            raise AnalysisError(f"core matrix {name} must be nonnegative")


def steady_matrix(core: LftModel) -> np.ndarray:
    """``[[A, E], [C, F - I]]``: Hurwitz iff ``A`` is Hurwitz and ``rho(C(-A)^-1 E + F) < 1``."""
    q = core.q
    if core.n == 0:
        return core.F - np.eye(q)
    return np.block([[core.A, core.E], [core.C, core.F - np.eye(q)]])


def lft_lp_matrix(core: LftModel, cid: str) -> np.ndarray:
    M = steady_matrix(core)
    if cid == "lp_linf":
        return M
    if cid == "lp_l1":
        return M.T
    raise KeyError(f"no LP condition {cid!r}")


def analyze_lft(core: LftModel, witnesses: bool = True, rel_margin: float = DEFAULT_MARGIN) -> StabilityReport:
    """Small-gain test at zero frequency, its two LP forms and the scaled KYP witness."""
    _check_core(core)
    a = hurwitz_margin(core.A) if core.n else np.inf
    if a <= 0:
        conds = [Condition("small_gain", False, a, "spectral", "A is not Hurwitz")]
        return combine("lft", conds)
    H = np.clip(core.static_gain(), 0.0, None)
    m = min(a, schur_margin(H))
    cert = scaling_certificate("small_gain", H, core.A if core.n else None) if m > 0 else None
    conds = [
        Condition("small_gain", bool(m > 0), float(m), "spectral", "", cert),
        lp_condition("lp_linf", lft_lp_matrix(core, "lp_linf")),
        lp_condition("lp_l1", lft_lp_matrix(core, "lp_l1")),
    ]
    if witnesses:
        conds.append(witness_condition("kyp_witness", kyp_spec(core), rel_margin))
    return combine("lft", conds, ("structured operators with unit L_p gain",), {"rho_static": float(1.0 - schur_margin(H))})


def ilc_matrix(G1, G2) -> np.ndarray:
    """``[[-I, G1], [G2, -I]]``; a vector ``pi > 0`` with ``matrix @ pi < 0`` separates the two operators."""
    G1 = as_matrix(G1, "G1")
    G2 = as_matrix(G2, "G2")
    if G1.shape[::-1] != G2.shape:
        raise AnalysisError(f"G1 is {G1.shape} but G2 is {G2.shape}; expected transposed shapes")
    m, k = G1.shape
    return np.block([[-np.eye(m), G1], [G2, -np.eye(k)]])


def analyze_ilc(G1, G2) -> StabilityReport:
    """Interconnection of two stable positive operators given their static gains."""
    T = ilc_matrix(G1, G2)
    m = np.asarray(G1).shape[0]
    G1, G2 = T[:m, m:], T[m:, :m]
    if not (is_nonnegative(G1) and is_nonnegative(G2)):
        raise AnalysisError("static gains of positive operators must be nonnegative")
    loop = G1 @ G2
    margin = schur_margin(loop)
    cert = scaling_certificate("loop_spectral", loop, None) if margin > 0 else None
    conds = [
        Condition("loop_spectral", bool(margin > 0), float(margin), "spectral", "", cert),
        lp_condition("ilc_linf", T),
        lp_condition("ilc_l1", T.T),
    ]
    rho = spectral_radius_nonneg(loop)
    return combine("ilc", conds, ("both operators stable and positive",), {"rho_loop": float(rho)})
