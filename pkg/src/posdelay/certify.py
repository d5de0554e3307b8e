"""Re-verification of report certificates by substitution alone.

Each certificate names the condition it supports; the matrix or LMI behind
that condition is rebuilt from the model stored in the report, and the
certificate data is substituted into it. Nothing is solved or searched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis.common import SCALING_GUARD, Certificate, parse_p
from .analysis.gains import gain_lp_matrix, performance_spec
from .analysis.stability import lp_matrix, scaling_parts, stability_spec
from .linalg import induced_norm
from .lp import rowwise_negative, verify_lp_certificate
from .model import ModelError, model_from_dict
from .report import model_digest
from .witness import RiccatiWitness, WitnessError, verify_witness

# below this, an eigenvalue bound on a unit-diagonal matrix is not distinguishable from round-off
MIN_REL_MARGIN = 1e-12


@dataclass(frozen=True)
class CertCheck:
    index: int
    kind: str
    condition: str
    ok: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"index": self.index, "kind": self.kind, "condition": self.condition, "ok": self.ok, "detail": self.detail}


@dataclass(frozen=True)
class CheckSummary:
    digest_ok: bool
    checks: tuple[CertCheck, ...]
    problems: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.digest_ok and not self.problems and all(c.ok for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "digest_ok": self.digest_ok,
            "certificates": len(self.checks),
            "failed": [c.to_dict() for c in self.checks if not c.ok],
            "problems": list(self.problems),
        }


def _lp(model, cert: Certificate) -> tuple[bool, str]:
    d = cert.data
    x = np.asarray(d["x"], dtype=float)
    delta = float(d["delta"])
    if not delta > 0:
        return False, "delta must be positive"
    if cert.condition == "gain":
        G = gain_lp_matrix(model, d["p"], float(d["gamma"]))
    else:
        G = lp_matrix(model, cert.condition)
    if not verify_lp_certificate(G, x, delta):
        return False, "G x <= -delta ||G|| or x >= delta fails"
    if not rowwise_negative(G, x):
        return False, "a row of G x is within rounding error of zero"
    return True, ""


def _witness(model, cert: Certificate) -> tuple[bool, str]:
    d = cert.data
    rel = float(d["rel_margin"])
    if not rel >= MIN_REL_MARGIN:
        return False, f"stored margin {rel:g} is below {MIN_REL_MARGIN:g}"
    spec = performance_spec(model, float(d["gamma"])) if cert.condition == "gain" else stability_spec(model, cert.condition)
    w = RiccatiWitness.from_dict(d["witness"])
    chk = verify_witness(spec, w, rel_margin=rel)
    if not chk.ok:
        return False, f"assembled matrix not negative definite with margin {rel:g} (max eigenvalue {chk.max_eig:.3g})"
    return True, ""


def _scaling(model, cert: Certificate) -> tuple[bool, str]:
    d = cert.data
    M, H = scaling_parts(model, cert.condition)
    diag = np.asarray(d["diag"], dtype=float)
    if diag.shape != (M.shape[0],) or not (np.all(np.isfinite(diag)) and np.all(diag > 0)):
        return False, "scaling must be a positive vector of matching size"
    bound = induced_norm(diag[:, None] * M / diag[None, :], parse_p(d["p"]))
    if not bound < 1.0 - SCALING_GUARD:
        return False, f"scaled norm {bound:.12g} is not below 1"
    if H is not None:
        if "hurwitz_vector" not in d:
            return False, "missing Hurwitz vector"
        v = np.asarray(d["hurwitz_vector"], dtype=float)
        if v.shape != (H.shape[0],) or not np.all(v > 0):
            return False, "Hurwitz vector must be positive and of matching size"
        if not rowwise_negative(H, v):
            return False, "H v < 0 fails"
    return True, ""


CHECKERS = {"lp_vector": _lp, "witness": _witness, "scaling": _scaling}


def check_certificate(model, cert: Certificate, index: int = 0) -> CertCheck:
    fn = CHECKERS.get(cert.kind)
    if fn is None:
        return CertCheck(index, cert.kind, cert.condition, False, f"unknown certificate kind {cert.kind!r}")
    try:
        ok, detail = fn(model, cert)
    except (KeyError, ValueError, TypeError, WitnessError) as e:
        ok, detail = False, f"malformed certificate: {e}"
    return CertCheck(index, cert.kind, cert.condition, ok, detail)


def check_report(report: dict) -> CheckSummary:
    """Verify every certificate of a serialized report against its own model."""
    try:
        model = model_from_dict(report["model"])
    except ModelError as e:
        return CheckSummary(False, (), (f"model: {e}",))
    digest_ok = model_digest(model) == report.get("digest")
    certs = [Certificate.from_dict(c) for c in report.get("certificates", [])]
    checks = tuple(check_certificate(model, c, i) for i, c in enumerate(certs))
    return CheckSummary(digest_ok, checks, tuple(_claims(report, certs)))


def _claims(report: dict, certs: list[Certificate]) -> list[str]:
    """Each certificate must back a claim the report actually makes."""
    out = []
    stab = report.get("stability") or {}
    holds = {c["id"]: c["holds"] for c in stab.get("conditions", [])}
    for i, c in enumerate(certs):
        if c.condition == "gain":
            continue
        if holds.get(c.condition) is not True:
            out.append(f"certificate {i} supports {c.condition!r}, which the report does not claim")
    for g in report.get("gains", []):
        idx = g.get("certificate")
        if idx is None:
            continue
        if not (isinstance(idx, int) and 0 <= idx < len(certs)) or certs[idx].condition != "gain":
            out.append(f"gain p={g.get('p')} points at a missing certificate")
            continue
        data = certs[idx].data
        gamma = float(data["gamma"])
        if str(data.get("p")) != str(g.get("p")):
            out.append(f"gain p={g.get('p')} is backed by a certificate for p={data.get('p')}")
        value = g.get("gain")
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value <= gamma):
            out.append(f"gain p={g.get('p')}: reported {value} exceeds the certified bound {gamma}")
    return out
