"""L1, L2 and L-infinity gains: closed form at zero frequency, and bisection on
the LP/LMI performance conditions.

Every class reduces to a steady-state quadruple ``(calA, calE, calC, calF)``
with ``calA`` Metzler and the rest nonnegative: the delay-free equations at
rest, with each delayed channel multiplied by the L_p gain of its delay
operator. The DC gain is ``H = calC (-calA)^-1 calE + calF``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..linalg import LinalgError, SingularMatrixError, induced_norm, solve_linear
from ..lp import verify_lp_certificate
from ..model import ModelError, SystemModel, as_discrete
from ..witness import (
    LmiSpec,
    construct_witness,
    coupled_performance_spec,
    delay_performance_spec,
    difference_performance_spec,
    kernel_performance_spec,
    neutral_lifted_performance,
    neutral_performance_spec,
)
from .common import (
    AnalysisError,
    Certificate,
    GainReport,
    UnsupportedRequest,
    hurwitz_margin,
    p_label,
    parse_p,
    solve_lp,
    witness_certificate,
)

BISECT_REL = 1e-8
BISECT_LP_DELTA = 1e-12
# relative to the Jacobi-equilibrated matrix, whose rounding error is ~ n * 1e-16;
# the certified eigenvalue gap of a bounded-real witness shrinks with gamma - gamma*
GAIN_WITNESS_MARGIN = 1e-11
MAX_DOUBLINGS = 60
ZERO_GAIN_PROBE = 1e-9
# certificates are issued this far above the estimate so their slack is well clear of round-off
CERT_REL = 1e-6
METHODS = ("closed", "bisect", "both")


@dataclass(frozen=True)
class SteadyForm:
    A: np.ndarray
    E: np.ndarray
    C: np.ndarray
    F: np.ndarray

    def dc_gain(self) -> np.ndarray:
        return np.clip(self.C @ solve_linear(-self.A, self.E) + self.F, 0.0, None)

    def structurally_zero(self) -> bool:
        """No input reaches an output through the nonzero pattern.

        For a Hurwitz Metzler ``A`` the inverse of ``-A`` is positive exactly on
        the reachability closure, so this decides ``dc_gain() == 0`` without
        arithmetic; by positivity the whole transfer function then vanishes.
        """
        n = self.A.shape[0]
        reach = (self.A != 0) | np.eye(n, dtype=bool)
        while True:
            nxt = (reach.astype(int) @ reach.astype(int)) > 0
            if np.array_equal(nxt, reach):
                break
            reach = nxt
        path = ((self.C != 0).astype(int) @ reach.astype(int) @ (self.E != 0).astype(int)) > 0
        return not (path.any() or np.any(self.F != 0))


def _channel_gains(model: SystemModel, p: float) -> np.ndarray:
    try:
        return np.array([d.operator_gain(p) for d in model.delays()])
    except ModelError as e:
        raise UnsupportedRequest(e.message) from None


def rates(model: SystemModel) -> list[float]:
    return [float(d.rate_bound) if d.kind == "tv" else 0.0 for d in model.delays()]


def sufficiency(model: SystemModel, p: float) -> str:
    rate_dependent = any(d.kind == "tv" for d in model.delays())
    return "sufficient-only" if rate_dependent and p in (1.0, 2.0) else "exact"


def steady_form(model: SystemModel, p: float) -> SteadyForm:
    k = model.kind
    if k == "lti":
        return SteadyForm(model.A, model.E, model.C, model.F)
    c = _channel_gains(model, p)
    if k == "discrete":
        n, ny = model.n, model.n_y
        A = model.A0 + sum((ci * t.A for ci, t in zip(c, model.terms)), np.zeros((n, n)))
        C = model.C0 + sum((ci * t.C for ci, t in zip(c, model.terms)), np.zeros((ny, n)))
        return SteadyForm(A, model.Eu, C, model.Fu)
    if k == "difference":
        n, ny = model.n, model.n_y
        A = sum((ci * t.A for ci, t in zip(c, model.terms)), np.zeros((n, n))) - np.eye(n)
        C = sum((ci * t.C for ci, t in zip(c, model.terms)), np.zeros((ny, n)))
        return SteadyForm(A, model.Eu, C, model.Fu)
    if k == "coupled":
        n, n2, ny = model.n, model.n2, model.n_y
        As = sum((ci * t.A for ci, t in zip(c, model.terms)), np.zeros((n, n2)))
        Cs = sum((ci * t.C for ci, t in zip(c, model.terms)), np.zeros((n2, n2)))
        Cy = sum((ci * t.Cy for ci, t in zip(c, model.terms)), np.zeros((ny, n2)))
        A = np.block([[model.A0, As], [model.C0, Cs - np.eye(n2)]])
        return SteadyForm(A, np.vstack([model.E1, model.E2]), np.hstack([model.Cy0, Cy]), model.Fu)
    if k == "distributed":
        Abar, Cbar = model.moments()
        n, ny = model.n, model.n_y
        # kernel operators have L_p gain equal to their mass; c only rejects unsupported p
        A = model.A0 + sum(Abar, np.zeros((n, n)))
        C = model.C0 + sum(Cbar, np.zeros((ny, n)))
        return SteadyForm(A, model.Eu, C, model.Fu)
    if k == "neutral":
        # the lifted core is positive even where the reduced matrices are not
        A0, E, C, F = neutral_lifted_performance(model)
        n, N, ny = model.n, len(model.terms), model.n_y
        m = N * (n + ny)
        w = np.concatenate([np.repeat(c, n), np.repeat(c, ny)])
        Ew, Eu, Cz, Fzw, Fzu = E[:, :m], E[:, m:], C[:m], F[:m, :m], F[:m, m:]
        Cy, Fyw, Fu = C[m:], F[m:, :m], F[m:, m:]
        calA = np.block([[A0, Ew * w], [Cz, Fzw * w - np.eye(m)]])
        return SteadyForm(calA, np.vstack([Eu, Fzu]), np.hstack([Cy, Fyw * w]), Fu)
    raise AnalysisError(f"no gain engine for class {k!r}")


def closed_form_gain(model: SystemModel, p) -> float:
    p = parse_p(p)
    sf = steady_form(model, p)
    if hurwitz_margin(sf.A) <= 0:
        raise AnalysisError("the steady-state matrix is not Hurwitz; no finite gain")
    return induced_norm(sf.dc_gain(), p)


# ---------------------------------------------------------------- LP forms


def gain_lp_matrix(model: SystemModel, p, gamma: float) -> np.ndarray:
    """``G`` with ``G x < 0, x > 0`` feasible iff the L_p gain (p = 1 or inf) is below ``gamma``.

    p = inf: ``x = (lambda, t)``, ``calA lambda + calE 1 t < 0``, ``calC lambda + (calF 1 - gamma 1) t < 0``.
    p = 1: the transposed system in ``(mu, t)``.
    """
    p = parse_p(p)
    sf = steady_form(model, p)
    if p == math.inf:
        top = np.hstack([sf.A, sf.E.sum(axis=1, keepdims=True)])
        bottom = np.hstack([sf.C, sf.F.sum(axis=1, keepdims=True) - gamma])
    elif p == 1.0:
        top = np.hstack([sf.A.T, sf.C.T.sum(axis=1, keepdims=True)])
        bottom = np.hstack([sf.E.T, sf.F.T.sum(axis=1, keepdims=True) - gamma])
    else:
        raise AnalysisError("the LP form covers p = 1 and p = inf; use the LMI for p = 2")
    return np.vstack([top, bottom])


def performance_spec(model: SystemModel, gamma: float) -> LmiSpec:
    """Bounded-real LMI whose feasibility certifies an L2 gain below ``gamma``."""
    k = model.kind
    if k == "lti":
        model, k = as_discrete(model), "discrete"
    _channel_gains(model, 2.0)  # rejects unbounded rates
    eta = rates(model)
    if k == "discrete":
        return delay_performance_spec(
            model.A0, [t.A for t in model.terms], model.Eu, model.C0, [t.C for t in model.terms], model.Fu, gamma, eta
        )
    if k == "difference":
        return difference_performance_spec([t.A for t in model.terms], model.Eu, [t.C for t in model.terms], model.Fu, gamma, eta)
    if k == "coupled":
        return coupled_performance_spec(model, gamma, eta)
    if k == "distributed":
        Abar, Cbar = model.moments()
        return kernel_performance_spec(model.A0, Abar, model.Eu, model.C0, Cbar, model.Fu, gamma)
    if k == "neutral":
        return neutral_performance_spec(model, gamma, eta)
    raise AnalysisError(f"no performance LMI for class {k!r}")


def _lp_hint(model, p) -> np.ndarray | None:
    """Steady state driven by the all-ones input (p = inf) or its adjoint (p = 1)."""
    sf = steady_form(model, p)
    try:
        if p == math.inf:
            x = solve_linear(-sf.A, sf.E.sum(axis=1) + 1e-3 * np.abs(sf.E).max(initial=1.0))
        else:
            x = solve_linear(-sf.A.T, sf.C.T.sum(axis=1) + 1e-3 * np.abs(sf.C).max(initial=1.0))
    except SingularMatrixError:
        return None
    if not np.all(x > 0):
        return None
    return np.concatenate([x, [1.0]])


def _lp_feasible(model, p, gamma, hint=None):
    G = gain_lp_matrix(model, p, gamma)
    out = solve_lp(G, BISECT_LP_DELTA, hint)
    if out.status != "feasible" or out.x is None:
        return False, None
    if not verify_lp_certificate(G, out.x, out.delta):
        return False, None
    data = {"p": p_label(p), "gamma": gamma, "x": out.x.tolist(), "delta": out.delta}
    return True, Certificate("lp_vector", "gain", data)


def _lmi_feasible(model, gamma):
    try:
        w = construct_witness(performance_spec(model, gamma), rel_margin=GAIN_WITNESS_MARGIN)
    except (LinalgError, np.linalg.LinAlgError):
        return False, None
    if not w:
        return False, None
    return True, witness_certificate("gain", w, GAIN_WITNESS_MARGIN, {"p": "2", "gamma": gamma})


def _feasibility(model, p):
    if p == 2.0:
        return lambda g: _lmi_feasible(model, g)
    hint = _lp_hint(model, p)
    return lambda g: _lp_feasible(model, p, g, hint)


def bisect_gain(model: SystemModel, p, upper: float | None = None, rel: float = BISECT_REL) -> tuple[float, Certificate]:
    """Smallest certified ``gamma`` up to relative width ``rel``; bracket ``[0, upper]``,
    found by doubling when ``upper`` is not given or not feasible."""
    p = parse_p(p)
    feasible = _feasibility(model, p)
    if steady_form(model, p).structurally_zero():
        # the gain is exactly zero; certify the smallest power-of-two bound that passes
        g = ZERO_GAIN_PROBE
        ok, cert = feasible(g)
        for _ in range(MAX_DOUBLINGS):
            if ok:
                return 0.0, cert
            g *= 2.0
            ok, cert = feasible(g)
        raise AnalysisError("no certified gain bound found; the system may be unstable")
    hi = upper if upper is not None and upper > 0 else 1.0
    ok, cert = feasible(hi)
    for _ in range(MAX_DOUBLINGS):
        if ok:
            break
        hi *= 2.0
        ok, cert = feasible(hi)
    if not ok:
        raise AnalysisError("no certified gain bound found; the system may be unstable")
    lo = 0.0
    floor = 1e-12 * max(1.0, upper or 0.0)
    while hi - lo > rel * hi and hi > floor:
        mid = 0.5 * (lo + hi)
        ok, c = feasible(mid)
        if ok:
            hi, cert = mid, c
        else:
            lo = mid
    return hi, cert


def _cert_gamma(g: float) -> float:
    return g * (1.0 + CERT_REL) + 1e-9


def gain(model: SystemModel, p, method: str = "both", check_stable: bool = True) -> GainReport:
    p = parse_p(p)
    if method not in METHODS:
        raise UnsupportedRequest(f"method must be one of {', '.join(METHODS)}")
    _channel_gains(model, p)
    if check_stable:
        from .stability import analyze

        verdict = analyze(model, witnesses=False).verdict
        if verdict != "stable":
            raise AnalysisError(f"gain undefined: the system is {verdict}")
    closed = closed_form_gain(model, p)
    suff = sufficiency(model, p)
    kind = "lmi-bisection" if p == 2.0 else "lp-bisection"
    feasible = _feasibility(model, p)
    if method == "closed":
        ok, cert = feasible(_cert_gamma(closed))
        return GainReport(p, closed, "closed-form", suff, closed, None, cert if ok else None)
    upper = 2.0 * closed if closed > 0 else None
    value, cert = bisect_gain(model, p, upper)
    ok, c = feasible(_cert_gamma(value))
    if ok:
        cert = c
    if method == "bisect":
        return GainReport(p, value, kind, suff, None, value, cert)
    return GainReport(p, closed, "closed-form", suff, closed, value, cert)
