"""Self-contained JSON reports: model, verdicts, gains and every certificate."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from . import __version__
from .analysis import MARGINAL_BAND, Certificate, GainReport, StabilityReport, analyze, gain
from .analysis.common import LP_DELTA
from .model import SystemModel, model_to_dict, save_model, validate_positivity
from .witness import DEFAULT_MARGIN

FORMAT = "posdelay-report/1"


def model_digest(model: SystemModel) -> str:
    return "sha256:" + hashlib.sha256(save_model(model)).hexdigest()


@dataclass(frozen=True)
class Settings:
    tol: float = MARGINAL_BAND
    margin: float = DEFAULT_MARGIN
    lp_delta: float = LP_DELTA

    def to_dict(self) -> dict:
        return {"tol": self.tol, "margin": self.margin, "lp_delta": self.lp_delta}

    @classmethod
    def from_dict(cls, d: dict) -> "Settings":
        return cls(float(d["tol"]), float(d["margin"]), float(d["lp_delta"]))


@dataclass(frozen=True, eq=False)
class Report:
    model: dict
    digest: str
    positivity: dict
    stability: StabilityReport | None
    gains: tuple[GainReport, ...] = ()
    certificates: tuple[Certificate, ...] = ()
    simulation: dict | None = None
    settings: Settings = field(default_factory=Settings)
    version: str = __version__

    def to_dict(self) -> dict:
        gains = []
        for g in self.gains:
            d = g.to_dict()
            d.pop("witness", None)
            if g.witness is not None:
                d["certificate"] = _index(self.certificates, g.witness)
            gains.append(d)
        out: dict[str, Any] = {
            "format": FORMAT,
            "tool": {"name": "posdelay", "version": self.version},
            "settings": self.settings.to_dict(),
            "model": self.model,
            "digest": self.digest,
            "positivity": self.positivity,
            "stability": self.stability.to_dict() if self.stability is not None else None,
            "gains": gains,
            "certificates": [c.to_dict() for c in self.certificates],
        }
        if self.simulation is not None:
            out["simulation"] = self.simulation
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        if d.get("format") != FORMAT:
            raise ValueError(f"not a report (format {d.get('format')!r}, expected {FORMAT!r})")
        certs = tuple(Certificate.from_dict(c) for c in d["certificates"])
        gains = []
        for g in d.get("gains", []):
            g = dict(g)
            idx = g.pop("certificate", None)
            rep = GainReport.from_dict(g)
            if idx is not None:
                rep = GainReport(rep.p, rep.gain, rep.method, rep.sufficiency, rep.closed_form, rep.bisection, certs[idx])
            gains.append(rep)
        stab = StabilityReport.from_dict(d["stability"]) if d.get("stability") is not None else None
        return cls(
            d["model"],
            d["digest"],
            d["positivity"],
            stab,
            tuple(gains),
            certs,
            d.get("simulation"),
            Settings.from_dict(d["settings"]),
            d["tool"]["version"],
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, Report) and self.to_dict() == other.to_dict()

    def emit(self) -> bytes:
        return (json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n").encode()

    @classmethod
    def load(cls, text: bytes | str) -> "Report":
        return cls.from_dict(json.loads(text))


def _index(certs: tuple[Certificate, ...], c: Certificate) -> int:
    for i, x in enumerate(certs):
        if x is c:
            return i
    raise ValueError("gain certificate missing from the report")


def build_report(
    model: SystemModel,
    gains: list[tuple[Any, str]] = (),
    settings: Settings = Settings(),
    witnesses: bool = True,
) -> Report:
    """Positivity, stability and the requested ``(p, method)`` gains of ``model``.

    Gains are computed only when the verdict is stable; callers decide how to
    report the other cases.
    """
    pos = validate_positivity(model)
    stab = analyze(model, witnesses=witnesses, band=settings.tol, rel_margin=settings.margin)
    certs = list(stab.certificates)
    reports = []
    if stab.verdict == "stable":
        for p, method in gains:
            g = gain(model, p, method, check_stable=False)
            if g.witness is not None:
                certs.append(g.witness)
            reports.append(g)
    return Report(
        model_to_dict(model),
        model_digest(model),
        pos.to_dict(),
        stab,
        tuple(reports),
        tuple(certs),
        None,
        settings,
    )
