"""Cross-validation campaigns: every equivalent condition on seeded random
instances, optionally confirmed by simulation."""

from __future__ import annotations

import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import MARGINAL_BAND, analyze
from .model import SystemModel
from .sampling import SAMPLER_VERSION, instance_rng, random_system
from .simulate import SimConfig, SimulationError, decay_rate, default_step, simulate
from .witness import DEFAULT_MARGIN

SIM_DECAY_FACTOR = 30.0  # horizon = factor / |dominant root|
SIM_MAX_STEPS = 200_000
DECAY_RATIO = 1e-6
GROWTH_RATIO = 10.0


@dataclass(frozen=True)
class SimCheck:
    ran: bool
    consistent: bool | None = None
    ratio: float | None = None
    min_entry: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"ran": self.ran, "consistent": self.consistent, "ratio": self.ratio, "min_entry": self.min_entry}
        if self.note:
            d["note"] = self.note
        return d


@dataclass(frozen=True)
class InstanceResult:
    index: int
    verdict: str
    agree: bool
    disagreeing: tuple[str, ...]
    witness: bool | None
    sim: SimCheck | None = None

    @property
    def failed(self) -> bool:
        return (not self.agree and self.verdict != "marginal") or (self.sim is not None and self.sim.consistent is False)

    def to_dict(self) -> dict:
        d = {
            "index": self.index,
            "verdict": self.verdict,
            "agree": self.agree,
            "disagreeing": list(self.disagreeing),
            "witness": self.witness,
        }
        if self.sim is not None:
            d["simulation"] = self.sim.to_dict()
        return d


@dataclass(frozen=True)
class CampaignSummary:
    source: str
    results: tuple[InstanceResult, ...]
    elapsed: float
    settings: dict = field(default_factory=dict)

    @property
    def verdicts(self) -> dict[str, int]:
        return dict(Counter(r.verdict for r in self.results))

    @property
    def failures(self) -> list[InstanceResult]:
        return [r for r in self.results if r.failed]

    def to_dict(self) -> dict:
        stable = [r for r in self.results if r.verdict == "stable" and r.witness is not None]
        sims = [r.sim for r in self.results if r.sim is not None and r.sim.ran]
        return {
            "source": self.source,
            "count": len(self.results),
            "verdicts": self.verdicts,
            "disagreements": len(self.failures),
            "failures": [r.to_dict() for r in self.failures],
            "witness_success": {"found": sum(bool(r.witness) for r in stable), "stable": len(stable)},
            "simulated": {"count": len(sims), "consistent": sum(bool(s.consistent) for s in sims)},
            "elapsed_s": round(self.elapsed, 3),
            "settings": self.settings,
        }


def sim_check(model: SystemModel, verdict: str) -> SimCheck:
    """Decay (stable) or growth (unstable) over ``SIM_DECAY_FACTOR`` time constants of the dominant root."""
    if verdict == "marginal":
        return SimCheck(False, note="marginal verdict")
    rate = decay_rate(model)
    if rate is None or rate == 0 or not math.isfinite(rate):
        return SimCheck(False, note="no real dominant root")
    step = default_step(model)
    horizon = SIM_DECAY_FACTOR / abs(rate)
    if horizon / step > SIM_MAX_STEPS:
        return SimCheck(False, note=f"horizon {horizon:.3g} needs more than {SIM_MAX_STEPS} steps")
    size = model.n + (model.n2 if model.kind == "coupled" else 0)
    try:
        tr = simulate(model, SimConfig(step, horizon, np.ones(size), record_every=max(1, int(horizon / step) // 100)))
    except SimulationError as e:
        return SimCheck(False, note=str(e))
    r = tr.terminal_norm_ratio
    ok = r < DECAY_RATIO if verdict == "stable" else r > GROWTH_RATIO
    ok = ok and tr.min_entry >= -1e-9 * max(tr.peak, 1.0)
    return SimCheck(True, bool(ok), float(r), float(tr.min_entry))


def check_instance(model: SystemModel, index: int = 0, witnesses: bool = True, simulate_it: bool = False,
                   band: float = MARGINAL_BAND, rel_margin: float = DEFAULT_MARGIN) -> InstanceResult:
    rep = analyze(model, witnesses=witnesses, band=band, rel_margin=rel_margin)
    majority = rep.verdict == "stable"
    disagreeing = tuple(c.id for c in rep.conditions if c.vote is not None and c.vote != majority) if not rep.agree else ()
    wit = [c for c in rep.conditions if c.kind == "witness"]
    witness = (wit[0].holds if wit else None) if rep.verdict == "stable" else None
    sim = sim_check(model, rep.verdict) if simulate_it else None
    return InstanceResult(index, rep.verdict, rep.agree, disagreeing, witness, sim)


def _random_job(args) -> InstanceResult:
    kind, seed, index, witnesses, sim, band, rel = args
    model = random_system(kind, instance_rng(seed, index))
    return check_instance(model, index, witnesses, sim, band, rel)


def run_campaign(
    kind: str,
    seed: int,
    count: int,
    witnesses: bool = True,
    simulate_first: int = 0,
    workers: int = 1,
    band: float = MARGINAL_BAND,
    rel_margin: float = DEFAULT_MARGIN,
) -> CampaignSummary:
    """``count`` seeded instances of ``kind``; the first ``simulate_first`` are also simulated.

    Results are ordered by instance index whatever the worker count.
    """
    t0 = time.perf_counter()
    jobs = [(kind, seed, i, witnesses, i < simulate_first, band, rel_margin) for i in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_random_job, jobs, chunksize=max(1, count // (4 * workers))))
    else:
        results = [_random_job(j) for j in jobs]
    settings = {"class": kind, "seed": seed, "sampler_version": SAMPLER_VERSION, "tol": band, "margin": rel_margin}
    return CampaignSummary(f"random:{kind}", tuple(results), time.perf_counter() - t0, settings)


def run_model(model: SystemModel, simulate_it: bool = True, band: float = MARGINAL_BAND,
              rel_margin: float = DEFAULT_MARGIN, source: str = "model") -> CampaignSummary:
    t0 = time.perf_counter()
    res = check_instance(model, 0, True, simulate_it, band, rel_margin)
    return CampaignSummary(source, (res,), time.perf_counter() - t0, {"tol": band, "margin": rel_margin})
