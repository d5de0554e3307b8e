"""Report types and the condition helpers shared by all class analyzers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..linalg import (
    LinalgError,
    SingularMatrixError,
    induced_norm,
    optimal_scaling,
    solve_linear,
    spectral_abscissa_metzler,
    spectral_radius_nonneg,
)
from ..lp import StrictLP, equilibrate, rowwise_negative, solve_strict_lp
from ..witness import DEFAULT_MARGIN, LmiSpec, RiccatiWitness, construct_witness

MARGINAL_BAND = 1e-7
LP_DELTA = 1e-7
# a scaled norm must clear 1 by this much to count as a certificate
SCALING_GUARD = 1e-12


class AnalysisError(ValueError):
    """Request that cannot be answered for this model (e.g. gain of an unstable system)."""


class UnsupportedRequest(AnalysisError):
    """The model lacks data the request needs (e.g. a rate bound for an L1 gain)."""


@dataclass(frozen=True)
class Certificate:
    """Checkable data attached to a condition.

    ``kind`` is ``lp_vector`` (``x`` with ``G x < 0``), ``witness`` (diagonal
    LMI unknowns) or ``scaling`` (diagonal ``D`` with ``||D M D^-1||_p < 1``
    plus a Hurwitz vector for the part that must be Hurwitz).
    """

    kind: str
    condition: str
    data: dict[str, Any]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "condition": self.condition, **self.data}

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        d = dict(d)
        return cls(d.pop("kind"), d.pop("condition"), d)


@dataclass(frozen=True)
class Condition:
    id: str
    holds: bool | None  # None: not evaluable
    margin: float | None = None
    kind: str = "spectral"  # "spectral" | "lp" | "witness" | "necessary"
    note: str = ""
    certificate: Certificate | None = field(default=None, compare=False)

    @property
    def decisive(self) -> bool:
        # witness construction is heuristic, so only a found witness carries information
        return self.kind in ("spectral", "lp")

    @property
    def vote(self) -> bool | None:
        """Verdict this condition supports on its own, if any."""
        if self.holds is None:
            return None
        if self.decisive:
            return self.holds
        if self.kind == "witness":
            return True if self.holds else None
        return False if not self.holds else None  # necessary only

    @property
    def marginal(self) -> bool:
        return self.is_marginal(MARGINAL_BAND)

    def is_marginal(self, band: float) -> bool:
        if self.kind == "witness" or self.holds is None or self.margin is None:
            return False
        if self.kind == "necessary" and not self.holds:
            # failing a necessary condition at its boundary still rules stability out
            return False
        return abs(self.margin) < band

    def to_dict(self) -> dict:
        d = {"id": self.id, "holds": self.holds, "margin": _num(self.margin), "kind": self.kind}
        if self.note:
            d["note"] = self.note
        return d


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _unnum(x):
    if x == "inf":
        return math.inf
    if x == "-inf":
        return -math.inf
    return x


@dataclass(frozen=True)
class StabilityReport:
    kind: str
    verdict: str  # "stable" | "unstable" | "marginal"
    conditions: tuple[Condition, ...]
    agree: bool
    assumptions: tuple[str, ...] = ()
    flags: dict[str, Any] = field(default_factory=dict)

    @property
    def certificates(self) -> list[Certificate]:
        return [c.certificate for c in self.conditions if c.certificate is not None]

    def condition(self, cid: str) -> Condition:
        for c in self.conditions:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def to_dict(self) -> dict:
        return {
            "class": self.kind,
            "verdict": self.verdict,
            "agree": self.agree,
            "conditions": [c.to_dict() for c in self.conditions],
            "assumptions": list(self.assumptions),
            "flags": {k: _num(v) if isinstance(v, float) else v for k, v in self.flags.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityReport":
        conds = tuple(
            Condition(c["id"], c["holds"], _unnum(c.get("margin")), c.get("kind", "spectral"), c.get("note", ""))
            for c in d["conditions"]
        )
        flags = {k: _unnum(v) for k, v in d.get("flags", {}).items()}
        return cls(d["class"], d["verdict"], conds, d["agree"], tuple(d.get("assumptions", ())), flags)


@dataclass(frozen=True)
class GainReport:
    p: float
    gain: float
    method: str  # "closed-form" | "lp-bisection" | "lmi-bisection"
    sufficiency: str  # "exact" | "sufficient-only"
    closed_form: float | None = None
    bisection: float | None = None
    witness: Certificate | None = field(default=None, compare=False)

    def agreement(self, rel: float = 1e-6, floor: float = 1e-12) -> bool | None:
        if self.closed_form is None or self.bisection is None:
            return None
        a, b = self.closed_form, self.bisection
        return abs(a - b) <= rel * max(abs(a), abs(b)) + floor

    def to_dict(self) -> dict:
        d = {
            "p": p_label(self.p),
            "gain": self.gain,
            "method": self.method,
            "sufficiency": self.sufficiency,
            "closed_form": self.closed_form,
            "bisection": self.bisection,
        }
        if self.witness is not None:
            d["witness"] = self.witness.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GainReport":
        w = Certificate.from_dict(d["witness"]) if "witness" in d else None
        return cls(parse_p(d["p"]), d["gain"], d["method"], d["sufficiency"], d.get("closed_form"), d.get("bisection"), w)


def p_label(p: float) -> str:
    return "inf" if math.isinf(p) else str(int(p))


def parse_p(p) -> float:
    if isinstance(p, str):
        p = p.strip().lower()
        if p in ("inf", "infinity", "∞"):
            return math.inf
    try:
        v = float(p)
    except (TypeError, ValueError):
        raise AnalysisError(f"p must be one of 1, 2, inf; got {p!r}") from None
    if v not in (1.0, 2.0, math.inf):
        raise AnalysisError(f"p must be one of 1, 2, inf; got {p!r}")
    return v


# ---------------------------------------------------------------- verdicts


def combine(kind: str, conditions: list[Condition], assumptions=(), flags=None, band: float = MARGINAL_BAND) -> StabilityReport:
    """Verdict from the decisive conditions; any margin inside the band makes it marginal.

    A verified witness votes "stable" and a failed necessary condition votes
    "unstable"; otherwise those two kinds do not vote.
    """
    decisive = [c for c in conditions if c.decisive and c.holds is not None]
    votes = {c.vote for c in conditions} - {None}
    agree = len(votes) <= 1
    if not decisive or any(c.is_marginal(band) for c in conditions):
        verdict = "marginal"
    elif agree:
        verdict = "stable" if votes == {True} else "unstable"
    else:
        verdict = "stable" if decisive[0].holds else "unstable"
    return StabilityReport(kind, verdict, tuple(conditions), agree, tuple(assumptions), dict(flags or {}))


# ---------------------------------------------------------------- condition helpers


def _scale(M: np.ndarray) -> float:
    s = float(np.max(np.abs(M))) if M.size else 0.0
    return s if s > 0 else 1.0


def hurwitz_margin(M: np.ndarray) -> float:
    """``-alpha(M) / max|M_ij|`` for Metzler ``M``; positive iff Hurwitz."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return math.inf
    return -spectral_abscissa_metzler(M) / _scale(M)


def schur_margin(M: np.ndarray) -> float:
    """``1 - rho(M)`` for nonnegative ``M`` (round-off negatives clipped)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 1.0
    return 1.0 - spectral_radius_nonneg(np.clip(M, 0.0, None))


def spectral_condition(cid: str, margin: float, note: str = "") -> Condition:
    return Condition(cid, bool(margin > 0), float(margin), "spectral", note)


def not_evaluable(cid: str, note: str, kind: str = "spectral") -> Condition:
    return Condition(cid, None, None, kind, note)


@dataclass(frozen=True)
class LpOutcome:
    status: str
    margin: float
    x: np.ndarray | None  # original coordinates, max entry 1
    delta: float  # certified slack of x in original coordinates


def solve_lp(G: np.ndarray, delta: float = LP_DELTA, hint: np.ndarray | None = None) -> LpOutcome:
    """Strict LP ``G x < 0, x > 0`` on the Ruiz-scaled matrix.

    ``hint`` (positive, optional) is an expected solution; the columns are
    rescaled by it first so that the solver works near ``x = 1``.
    ``margin`` is the slack of the scaled problem; ``delta`` is what the
    returned vector achieves on the original ``G`` (the value a checker uses).
    """
    G = np.asarray(G, dtype=float)
    pre = np.ones(G.shape[1]) if hint is None else np.asarray(hint, dtype=float)
    Ge, col = equilibrate(G * pre)
    res = solve_strict_lp(StrictLP(Ge), delta)
    if not res.feasible:
        return LpOutcome(res.status, res.slack, None, 0.0)
    x = res.x * col * pre
    x = x / np.max(x)
    gs = float(np.max(np.abs(G).sum(axis=1))) or 1.0
    achieved = min(float(np.min(x)), -float(np.max(G @ x)) / gs)
    if not (achieved > 0 and rowwise_negative(G, x)):
        return LpOutcome("marginal", res.slack, None, 0.0)
    return LpOutcome(res.status, res.slack, x, 0.5 * achieved)


def lp_condition(cid: str, G: np.ndarray, delta: float = LP_DELTA, extra: dict | None = None) -> Condition:
    out = solve_lp(G, delta)
    cert = None
    if out.x is not None:
        cert = Certificate("lp_vector", cid, {"x": out.x.tolist(), "delta": out.delta, **(extra or {})})
    if out.status == "infeasible":
        # the best slack of an infeasible box LP scales with the box floor, not
        # with the distance to feasibility, so it is not reported as a margin
        return Condition(cid, False, None, "lp", f"infeasible (best slack {out.margin:.3g})")
    note = "slack below LP tolerance" if out.status == "marginal" else ""
    return Condition(cid, True, out.margin, "lp", note, cert)


def witness_condition(cid: str, spec: LmiSpec, rel_margin: float = DEFAULT_MARGIN, extra: dict | None = None) -> Condition:
    try:
        w = construct_witness(spec, rel_margin=rel_margin)
    except (LinalgError, np.linalg.LinAlgError) as e:
        return Condition(cid, False, None, "witness", f"no witness found: {e}")
    if not w:
        return Condition(cid, False, None, "witness", f"no witness found: {w.reason}")
    return Condition(cid, True, w.margin, "witness", "", witness_certificate(cid, w, rel_margin, extra))


def witness_certificate(cid: str, w: RiccatiWitness, rel_margin: float, extra: dict | None = None) -> Certificate:
    return Certificate("witness", cid, {"witness": w.to_dict(), "rel_margin": rel_margin, **(extra or {})})


def ratio_condition(cid: str, A0: np.ndarray, M_of_inv, extra_margin: float | None = None, p=math.inf) -> Condition:
    """``A0`` Hurwitz and ``rho(M) < 1`` where ``M = M_of_inv(solve)`` is built
    from solves against ``-A0`` (e.g. ``(sum A_i)(-A0)^-1``).

    The certificate pairs a Stoer scaling of ``M`` with a vector ``v > 0``,
    ``A0 v < 0``.
    """
    a0 = hurwitz_margin(A0)
    if a0 <= 0:
        m = a0 if extra_margin is None else min(a0, extra_margin)
        return Condition(cid, False, m, "spectral", "A0 is not Hurwitz")
    try:
        M = np.clip(M_of_inv(), 0.0, None)
    except SingularMatrixError:
        return not_evaluable(cid, "A0 is singular")
    m = min(a0, schur_margin(M))
    if extra_margin is not None:
        m = min(m, extra_margin)
    cert = None
    if m > 0:
        cert = scaling_certificate(cid, M, A0, p)
    return Condition(cid, bool(m > 0), m, "spectral", "", cert)


def scaling_certificate(cid: str, M: np.ndarray, A0: np.ndarray | None, p=math.inf) -> Certificate | None:
    # a positive perturbation keeps the Perron vectors finite for reducible M
    rho = spectral_radius_nonneg(M) if M.size else 0.0
    eps = max(1.0 - rho, 0.0) / (4.0 * max(M.shape[0], 1))
    sc = optimal_scaling(M + eps, p)
    d = np.asarray(sc.diag, dtype=float)
    if not (np.all(d > 0) and np.all(np.isfinite(d))):
        return None
    bound = induced_norm(d[:, None] * M / d[None, :], p)
    if not bound < 1.0 - SCALING_GUARD:
        return None
    data: dict[str, Any] = {"p": p_label(p), "diag": d.tolist(), "bound": bound}
    if A0 is not None and A0.size:
        v = solve_linear(-A0, np.ones(A0.shape[0]))
        if not (np.all(v > 0) and rowwise_negative(A0, v)):
            return None
        data["hurwitz_vector"] = (v / np.max(v)).tolist()
    return Certificate("scaling", cid, data)
