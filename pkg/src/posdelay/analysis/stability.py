"""Stability analyzers: every equivalent condition of a class, evaluated independently.

Each class also exposes the matrices behind its checkable conditions
(``lp_matrix``, ``stability_spec``, ``scaling_parts``) so a certificate can be
re-verified from the model alone.
"""

from __future__ import annotations

import math

import numpy as np

from ..linalg import SingularMatrixError, solve_linear, spectral_radius_nonneg
from ..model import (
    CoupledSystem,
    DifferenceSystem,
    DiscreteDelaySystem,
    DistributedSystem,
    LtiSystem,
    NeutralSystem,
    SystemModel,
    as_discrete,
    lift_to_lft,
)
from ..witness import DEFAULT_MARGIN, LmiSpec, difference_lmi_spec, kyp_spec, riccati_spec
from .common import (
    MARGINAL_BAND,
    AnalysisError,
    Condition,
    StabilityReport,
    combine,
    hurwitz_margin,
    lp_condition,
    not_evaluable,
    ratio_condition,
    scaling_certificate,
    schur_margin,
    spectral_condition,
    witness_condition,
)

DELAY_INDEPENDENT = "valid for all delays h_i >= 0"
TV_NOTE = "time-varying delays: same verdict whenever t - h_i(t) -> inf"


def _sum(mats, shape) -> np.ndarray:
    return sum(mats, np.zeros(shape))


def _right_inv_neg(A0: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``M (-A0)^-1``."""
    return solve_linear(-A0.T, M.T).T


def _has_tv(model) -> bool:
    return any(d.time_varying for d in model.delays())


# ---------------------------------------------------------------- discrete / lti


def _discrete(sys: DiscreteDelaySystem):
    n = sys.n
    return sys.A0, _sum([t.A for t in sys.terms], (n, n))


def analyze_discrete(sys: DiscreteDelaySystem, witnesses: bool = True, rel_margin: float = DEFAULT_MARGIN) -> StabilityReport:
    A0, As = _discrete(sys)
    M = A0 + As
    conds = [
        spectral_condition("sum_hurwitz", hurwitz_margin(M)),
        lp_condition("lp_left", M.T),
        ratio_condition("ratio_schur", A0, lambda: _right_inv_neg(A0, As)),
    ]
    if witnesses:
        conds.append(witness_condition("riccati_witness", riccati_spec(A0, [t.A for t in sys.terms]), rel_margin))
    notes = [DELAY_INDEPENDENT] + ([TV_NOTE] if _has_tv(sys) else [])
    return combine(sys.kind, conds, notes)


def analyze_lti(sys: LtiSystem, witnesses: bool = True, rel_margin: float = DEFAULT_MARGIN) -> StabilityReport:
    rep = analyze_discrete(as_discrete(sys), witnesses, rel_margin)
    return StabilityReport("lti", rep.verdict, rep.conditions, rep.agree, (), rep.flags)


# ---------------------------------------------------------------- difference


def _calA(sys: DifferenceSystem) -> np.ndarray:
    N = len(sys.terms)
    return np.kron(np.ones((N, 1)), np.hstack([t.A for t in sys.terms]))


def analyze_difference(sys: DifferenceSystem, witnesses: bool = True, rel_margin: float = DEFAULT_MARGIN) -> StabilityReport:
    n = sys.n
    As = _sum([t.A for t in sys.terms], (n, n))
    rho_m = schur_margin(As)
    calA = _calA(sys)
    rho_cond = spectral_condition("rho_sum", rho_m)
    if rho_m > 0:
        rho_cond = Condition("rho_sum", True, rho_m, "spectral", "", scaling_certificate("rho_sum", As, None))
    conds = [
        rho_cond,
        lp_condition("lp_reduced", (As - np.eye(n)).T),
        lp_condition("lp_lifted", (calA - np.eye(calA.shape[0])).T),
    ]
    if witnesses:
        conds.append(witness_condition("lmi_witness", difference_lmi_spec([t.A for t in sys.terms]), rel_margin))
    notes = ["valid for all delays h_i > 0", "stability here is strong stability: the worst phase is zero"]
    if _has_tv(sys):
        notes.append("time-varying delays are analysed through the same conditions")
    return combine(sys.kind, conds, notes, {"strongly_stable": bool(rho_m > 0)})


# ---------------------------------------------------------------- coupled


def _coupled(sys: CoupledSystem):
    n, n2 = sys.n, sys.n2
    As = _sum([t.A for t in sys.terms], (n, n2))
    Cs = _sum([t.C for t in sys.terms], (n2, n2))
    calM = np.block([[sys.A0, As], [sys.C0, Cs - np.eye(n2)]])
    return As, Cs, calM


def _coupled_schur(sys: CoupledSystem):
    As, Cs, _ = _coupled(sys)
    K = sys.A0 + As @ solve_linear(np.eye(sys.n2) - Cs, sys.C0)
    return Cs, K


def analyze_coupled(sys: CoupledSystem, witnesses: bool = True, rel_margin: float = DEFAULT_MARGIN) -> StabilityReport:
    A0 = sys.A0
    As, Cs, calM = _coupled(sys)
    conds = [
        spectral_condition("block_hurwitz", hurwitz_margin(calM)),
        lp_condition("lp_left", calM.T),
    ]
    inner = schur_margin(Cs)
    if inner <= 0:
        # rho(sum C_i) < 1 is necessary (sum C_i - I is a diagonal block of the
        # Hurwitz matrix), so even the boundary case rules stability out
        conds.append(Condition("schur_complement", False, None, "spectral", "sum C_i is not Schur"))
    else:
        try:
            _, K = _coupled_schur(sys)
            m = min(inner, hurwitz_margin(K))
            cert = scaling_certificate("schur_complement", Cs, K) if m > 0 else None
            conds.append(Condition("schur_complement", bool(m > 0), m, "spectral", "", cert))
        except SingularMatrixError:
            conds.append(not_evaluable("schur_complement", "I - sum C_i is singular"))
    conds.append(ratio_condition("ratio_schur", A0, lambda: sys.C0 @ solve_linear(-A0, As) + Cs))
    if witnesses:
        conds.append(witness_condition("riccati_witness", kyp_spec(lift_to_lft(sys)), rel_margin))
    notes = [DELAY_INDEPENDENT] + ([TV_NOTE] if _has_tv(sys) else [])
    return combine(sys.kind, conds, notes)


# ---------------------------------------------------------------- distributed


def _critical_bound(sys: DistributedSystem) -> tuple[float, float] | None:
    """``(h_bar*, h_bar)`` for one constant kernel; ``h_bar* = 1 / rho(A0^-1 A1)``."""
    if len(sys.terms) != 1:
        return None
    form = sys.terms[0].kernel.constant_form()
    if form is None:
        return None
    A1, h_bar = form
    rho = spectral_radius_nonneg(np.clip(_right_inv_neg(sys.A0, A1), 0.0, None))
    return (math.inf if rho == 0 else 1.0 / rho), h_bar


def analyze_distributed(sys: DistributedSystem, witnesses: bool = True, rel_margin: float = DEFAULT_MARGIN) -> StabilityReport:
    A0 = sys.A0
    Abar, _ = sys.moments()
    As = _sum(Abar, A0.shape)
    M = A0 + As
    conds = [
        spectral_condition("moment_hurwitz", hurwitz_margin(M)),
        lp_condition("lp_left", M.T),
        ratio_condition("ratio_schur", A0, lambda: _right_inv_neg(A0, As)),
    ]
    flags = {}
    if len(sys.terms) == 1 and sys.terms[0].kernel.constant_form() is not None:
        a0 = hurwitz_margin(A0)
        if a0 <= 0:
            conds.append(Condition("critical_bound", False, a0, "spectral", "A0 is not Hurwitz"))
        else:
            try:
                h_star, h_bar = _critical_bound(sys)
                m = 1.0 if math.isinf(h_star) else 1.0 - h_bar / h_star
                conds.append(Condition("critical_bound", bool(m > 0), min(m, a0), "spectral"))
                flags["critical_h_bar"] = h_star
                flags["h_bar"] = h_bar
            except SingularMatrixError:
                conds.append(not_evaluable("critical_bound", "A0 is singular"))
    if witnesses:
        conds.append(witness_condition("riccati_witness", riccati_spec(A0, Abar), rel_margin))
    notes = ["valid for every kernel support", "time-varying windows h_i(t) in [0, h_bar_i]: same verdict"]
    return combine(sys.kind, conds, notes, flags)


# ---------------------------------------------------------------- neutral


def _neutral(sys: NeutralSystem):
    n = sys.n
    An = _sum([t.An for t in sys.terms], (n, n))
    W = _sum([t.An @ sys.A0 + t.Ar for t in sys.terms], (n, n))
    return An, W


def _neutral_reduced(sys: NeutralSystem) -> np.ndarray:
    """``S^-1 (A0 + sum Ar_i) = A0 + S^-1 sum W_i``, Metzler when ``rho(sum An_i) < 1``."""
    An, W = _neutral(sys)
    return sys.A0 + solve_linear(np.eye(sys.n) - An, W)


def _lifted_steady(lft) -> np.ndarray:
    q = lft.F.shape[0]
    if lft.n == 0:
        return lft.F - np.eye(q)
    return np.block([[lft.A, lft.E], [lft.C, lft.F - np.eye(q)]])


def analyze_neutral(sys: NeutralSystem, witnesses: bool = True, rel_margin: float = DEFAULT_MARGIN) -> StabilityReport:
    A0 = sys.A0
    An, W = _neutral(sys)
    strong = schur_margin(An)
    cert = scaling_certificate("strong_stability", An, None) if strong > 0 else None
    conds = [Condition("strong_stability", bool(strong > 0), strong, "necessary", "", cert)]
    if strong <= 0:
        # both remaining spectral statements include rho(sum An_i) < 1
        note = "S = I - sum An_i is singular" if abs(strong) < 1e-15 else "strong stability fails"
        conds.append(Condition("reduced_hurwitz", False, None, "spectral", note))
        conds.append(Condition("ratio_schur", False, None, "spectral", "strong stability fails"))
    else:
        try:
            R = _neutral_reduced(sys)
            m = min(strong, hurwitz_margin(R))
            cert = scaling_certificate("reduced_hurwitz", An, R) if m > 0 else None
            conds.append(Condition("reduced_hurwitz", bool(m > 0), m, "spectral", "", cert))
        except SingularMatrixError:
            conds.append(not_evaluable("reduced_hurwitz", "S = I - sum An_i is singular"))
        conds.append(ratio_condition("ratio_schur", A0, lambda: An + _right_inv_neg(A0, W), extra_margin=strong))
    lft = lift_to_lft(sys)
    conds.append(lp_condition("lp_lifted", _lifted_steady(lft).T))
    if witnesses and strong > 0:
        conds.append(witness_condition("lmi_witness", kyp_spec(lft), rel_margin))
    notes = [DELAY_INDEPENDENT]
    if _has_tv(sys):
        notes.append("time-varying delays are analysed through the same conditions")
    return combine(sys.kind, conds, notes, {"strongly_stable": bool(strong > 0)})


# ---------------------------------------------------------------- dispatch

ANALYZERS = {
    "lti": analyze_lti,
    "discrete": analyze_discrete,
    "difference": analyze_difference,
    "coupled": analyze_coupled,
    "distributed": analyze_distributed,
    "neutral": analyze_neutral,
}


def analyze(
    model: SystemModel, witnesses: bool = True, band: float = MARGINAL_BAND, rel_margin: float = DEFAULT_MARGIN
) -> StabilityReport:
    """Class analyzer with a configurable marginal band and witness margin."""
    try:
        fn = ANALYZERS[model.kind]
    except KeyError:
        raise AnalysisError(f"no analyzer for class {model.kind!r}") from None
    rep = fn(model, witnesses, rel_margin)
    if band == MARGINAL_BAND:
        return rep
    return combine(rep.kind, list(rep.conditions), rep.assumptions, rep.flags, band)


# ---------------------------------------------------------------- certificate data


def lp_matrix(model: SystemModel, cid: str) -> np.ndarray:
    """The matrix ``G`` of a stability LP condition (``G x < 0, x > 0``)."""
    k = model.kind
    if k == "lti":
        model, k = as_discrete(model), "discrete"
    if k == "discrete" and cid == "lp_left":
        A0, As = _discrete(model)
        return (A0 + As).T
    if k == "distributed" and cid == "lp_left":
        Abar, _ = model.moments()
        return (model.A0 + _sum(Abar, model.A0.shape)).T
    if k == "coupled" and cid == "lp_left":
        return _coupled(model)[2].T
    if k == "difference" and cid == "lp_reduced":
        return (_sum([t.A for t in model.terms], (model.n, model.n)) - np.eye(model.n)).T
    if k == "difference" and cid == "lp_lifted":
        calA = _calA(model)
        return (calA - np.eye(calA.shape[0])).T
    if k == "neutral" and cid == "lp_lifted":
        return _lifted_steady(lift_to_lft(model)).T
    raise KeyError(f"{k} has no LP condition {cid!r}")


def stability_spec(model: SystemModel, cid: str) -> LmiSpec:
    k = model.kind
    if k == "lti":
        model, k = as_discrete(model), "discrete"
    if k == "discrete" and cid == "riccati_witness":
        return riccati_spec(model.A0, [t.A for t in model.terms])
    if k == "distributed" and cid == "riccati_witness":
        return riccati_spec(model.A0, model.moments()[0])
    if k == "coupled" and cid == "riccati_witness":
        return kyp_spec(lift_to_lft(model))
    if k == "difference" and cid == "lmi_witness":
        return difference_lmi_spec([t.A for t in model.terms])
    if k == "neutral" and cid == "lmi_witness":
        return kyp_spec(lift_to_lft(model))
    raise KeyError(f"{k} has no witness condition {cid!r}")


def scaling_parts(model: SystemModel, cid: str) -> tuple[np.ndarray, np.ndarray | None]:
    """``(M, H)``: the certificate claims ``rho(M) < 1`` and ``H`` Hurwitz."""
    k = model.kind
    if k == "lti":
        model, k = as_discrete(model), "discrete"
    if cid == "ratio_schur":
        A0 = model.A0
        if k == "discrete":
            return np.clip(_right_inv_neg(A0, _discrete(model)[1]), 0, None), A0
        if k == "distributed":
            return np.clip(_right_inv_neg(A0, _sum(model.moments()[0], A0.shape)), 0, None), A0
        if k == "coupled":
            As, Cs, _ = _coupled(model)
            return np.clip(model.C0 @ solve_linear(-A0, As) + Cs, 0, None), A0
        if k == "neutral":
            An, W = _neutral(model)
            return np.clip(An + _right_inv_neg(A0, W), 0, None), A0
    if k == "difference" and cid == "rho_sum":
        return _sum([t.A for t in model.terms], (model.n, model.n)), None
    if k == "coupled" and cid == "schur_complement":
        return _coupled_schur(model)
    if k == "neutral" and cid == "strong_stability":
        return _neutral(model)[0], None
    if k == "neutral" and cid == "reduced_hurwitz":
        return _neutral(model)[0], _neutral_reduced(model)
    raise KeyError(f"{k} has no scaling condition {cid!r}")
