"""Acceptance criteria 1-8, each at its stated tolerance.

Every criterion reports one PASS/FAIL line (see the ``acceptance`` fixture);
the lines are repeated in the pytest terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import FIXTURES
from oracles import kernel_entry_integral
from posdelay.analysis import analyze, closed_form_gain, gain
from posdelay.analysis.stability import stability_spec
from posdelay.cli import main
from posdelay.crossval import run_campaign
from posdelay.kernels import kernel_moment
from posdelay.linalg import induced_norm, is_irreducible, optimal_scaling, spectral_radius_nonneg
from posdelay.model import DelaySpec, DelayTerm, DiscreteDelaySystem, DistributedSystem, DistributedTerm, read_model
from posdelay.kernels import DelayKernel
from posdelay.report import build_report
from posdelay.sampling import instance_rng, random_kernel, random_neutral, random_system
from posdelay.simulate import SimConfig, decay_rate, default_step, empirical_gain_lower_bound, simulate
from posdelay.witness import verify_witness

SEED = 20240601
CLASSES = ["discrete", "difference", "coupled", "distributed", "neutral"]
MAX_STEPS = 200_000


def _stable(kind, seed, count, **kw):
    """The first ``count`` analyzer-stable instances of a seeded stream."""
    out, i = [], 0
    while len(out) < count:
        m = random_system(kind, instance_rng(seed, i), **kw)
        if analyze(m, witnesses=False).verdict == "stable":
            out.append(m)
        i += 1
        assert i < 50 * count, "sampler produced too few stable instances"
    return out


def _horizon(model, factor=30.0):
    rate = decay_rate(model)
    if rate is None or rate == 0:
        return None
    return factor / abs(rate)


# ---- 1. equivalence suites


@pytest.mark.parametrize("kind", CLASSES)
def test_1_equivalence_suites(acceptance, kind):
    t0 = time.perf_counter()
    s = run_campaign(kind, SEED, 200)
    elapsed = time.perf_counter() - t0
    d = s.to_dict()
    ok = d["disagreements"] == 0 and elapsed <= 60.0 and len(s.results) == 200
    w = d["witness_success"]
    detail = (f"{kind}: 200 instances, verdicts {d['verdicts']}, disagreements {d['disagreements']}, "
              f"witnesses {w['found']}/{w['stable']}, {elapsed:.1f}s")
    assert acceptance(f"1 {kind}", ok, detail), d["failures"]


# ---- 2. delay independence


def _retimed(sys: DiscreteDelaySystem, spec_of) -> DiscreteDelaySystem:
    terms = tuple(DelayTerm(t.A, t.C, spec_of(t.delay)) for t in sys.terms)
    return DiscreteDelaySystem(sys.A0, terms, sys.Eu, sys.C0, sys.Fu)


def test_2_delay_independence(acceptance):
    systems = _stable("discrete", SEED + 2, 50)
    flips = 0
    for sys in systems:
        variants = [_retimed(sys, lambda d, h=h: DelaySpec.const(h)) for h in (0.01, 1.0, 100.0)]
        variants.append(_retimed(sys, lambda d: DelaySpec("tv_unbounded_rate", h_bar=d.upper)))
        flips += sum(analyze(v, witnesses=False).verdict != "stable" for v in variants)
    simulated, decayed = 0, 0
    for sys in systems:
        if simulated == 20:
            break
        horizon, step = _horizon(sys), default_step(sys)
        if horizon is None or horizon / step > MAX_STEPS:
            continue
        simulated += 1
        x0 = np.ones(sys.n)
        const = simulate(sys, SimConfig(step, horizon, x0, record_every=100))
        saw = simulate(sys, SimConfig(step, horizon, x0, delays="sawtooth", sawtooth_period=1.7, record_every=100))
        decayed += const.terminal_norm_ratio < 1e-6 and saw.terminal_norm_ratio < 1e-6
    ok = flips == 0 and simulated == 20 and decayed == 20
    detail = f"50 stable instances x 4 delay variants, verdict flips {flips}; decay {decayed}/{simulated} simulated"
    assert acceptance("2", ok, detail)


# ---- 3. gain consistency


@pytest.mark.parametrize("kind", ["lti"] + CLASSES)
def test_3_gain_consistency(acceptance, kind):
    systems = _stable(kind, SEED + 3, 100)
    worst, bad = 0.0, []
    t0 = time.perf_counter()
    for i, sys in enumerate(systems):
        for p in (1.0, 2.0, math.inf):
            g = gain(sys, p, "both", check_stable=False)
            a, b = g.closed_form, g.bisection
            rel = abs(a - b) / max(abs(a), 1e-300) if a else abs(b)
            worst = max(worst, rel)
            if not g.agreement(1e-6):
                bad.append((i, p, a, b))
    detail = f"{kind}: 100 stable x p in {{1,2,inf}}, worst relative gap {worst:.2e}, {time.perf_counter() - t0:.1f}s"
    assert acceptance(f"3 {kind} gains", not bad, detail), bad[:5]


def test_3_simulated_lower_bound(acceptance):
    rows = []
    for kind in CLASSES:
        taken = 0
        for sys in _stable(kind, SEED + 33, 20, n=3):
            horizon, step = _horizon(sys, 50.0), default_step(sys)
            if horizon is None or horizon / step > 40_000:
                continue
            g = closed_form_gain(sys, math.inf)
            lb = empirical_gain_lower_bound(sys, math.inf, SimConfig(step, horizon))
            rows.append((kind, g, lb, abs(lb - g) / g))
            taken += 1
            if taken == 4:
                break
    worst = max(r[3] for r in rows)
    ok = len(rows) == 20 and worst <= 0.01 and all(lb <= g * (1 + 1e-6) for _, g, lb, _ in rows)
    assert acceptance("3 simulated lower bound", ok, f"{len(rows)} instances, worst relative gap {worst:.2e}"), rows


# ---- 4. Stoer scaling


def test_4_stoer_scaling(acceptance):
    rng = np.random.default_rng(SEED + 4)
    mats = []
    while len(mats) < 100:
        n = int(rng.integers(1, 9))
        M = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < rng.uniform(0.2, 0.9))
        if is_irreducible(M) and M.any():
            mats.append(M)
    worst_scale, worst_rho = 0.0, 0.0
    for M in mats:
        rho_ref = float(np.max(np.abs(np.linalg.eigvals(M))))
        rho = spectral_radius_nonneg(M)
        worst_rho = max(worst_rho, abs(rho - rho_ref) / rho_ref)
        for p in (1, 2, math.inf):
            s = optimal_scaling(M, p)
            scaled = induced_norm(s.diag[:, None] * M / s.diag[None, :], p)
            worst_scale = max(worst_scale, scaled / rho_ref - 1.0)
    ok = worst_scale <= 1e-6 and worst_rho <= 1e-9
    detail = f"100 irreducible n<=8: max ||DMD^-1||_p/rho - 1 = {worst_scale:.2e}, max rho error {worst_rho:.2e}"
    assert acceptance("4", ok, detail)


# ---- 5. distributed critical bound


def test_5_distributed_critical_bound(acceptance):
    sys = read_model(FIXTURES / "distributed_critical.json")
    h_star = analyze(sys).flags["critical_h_bar"]
    ratios = {}
    for h_bar in (1.8, 2.2):
        moved = DistributedSystem(sys.A0, (DistributedTerm(DelayKernel.constant(0.5 * np.eye(2), h_bar)),),
                                  sys.Eu, sys.C0, sys.Fu)
        horizon = _horizon(moved)
        tr = simulate(moved, SimConfig(default_step(moved), horizon, np.ones(2), record_every=50))
        ratios[h_bar] = tr.terminal_norm_ratio
    ok = abs(h_star - 2.0) <= 1e-9 and ratios[1.8] < 1e-6 and ratios[2.2] > 10.0
    detail = f"h_bar* = {h_star!r}; terminal ratio {ratios[1.8]:.2e} at 1.8, {ratios[2.2]:.2e} at 2.2"
    assert acceptance("5", ok, detail)


# ---- 6. neutral strong stability


def test_6_neutral_strong_stability(acceptance):
    verdicts = []
    for i in range(50):
        rng = instance_rng(SEED + 6, i)
        rho_n = float(rng.uniform(1.0, 2.0))
        rho_n = min(max(rho_n, 1.0 + 1e-3), 2.0 - 1e-3)
        sys = random_neutral(rng, rho_n=rho_n, kappa=float(rng.uniform(0.6, 20.0)))
        An = sum(t.An for t in sys.terms)
        assert 1.0 < spectral_radius_nonneg(An) < 2.0
        verdicts.append(analyze(sys).verdict)
    fixture = read_model(FIXTURES / "neutral_scalar.json")
    fv = analyze(fixture).verdict
    tr = simulate(fixture, SimConfig(default_step(fixture), _horizon(fixture), np.ones(1)))
    ok = verdicts.count("unstable") == 50 and fv == "stable" and tr.terminal_norm_ratio < 1e-6
    detail = (f"{verdicts.count('unstable')}/50 unstable with rho(sum An) in (1,2); "
              f"fixture {fv}, terminal ratio {tr.terminal_norm_ratio:.2e}")
    assert acceptance("6", ok, detail)


# ---- 7. kernel moments


def test_7_kernel_moments(acceptance):
    worst = 0.0
    for i in range(50):
        rng = instance_rng(SEED + 7, i)
        K = random_kernel(rng, 2, 2, flat=False)
        M = kernel_moment(K)
        for a in range(2):
            for b in range(2):
                worst = max(worst, abs(M[a, b] - kernel_entry_integral(K, a, b)))
    assert acceptance("7", worst <= 1e-10, f"50 exponential-polynomial kernels, max |moment - Simpson| = {worst:.2e}")


# ---- 8. certificate soundness


def test_8_certificate_soundness(acceptance, tmp_path, capsys):
    paths = []
    for f in sorted(FIXTURES.glob("*.json")):
        paths.append(f)
    for kind in ["lti"] + CLASSES:
        for i in range(6):
            m = random_system(kind, instance_rng(SEED + 8, i))
            rep = build_report(m, gains=[(1, "both"), (2, "both"), (math.inf, "both")])
            p = tmp_path / f"{kind}_{i}.report.json"
            p.write_bytes(rep.emit())
            paths.append(p)
    checked = certs = failures = 0
    kinds = set()
    for path in paths:
        if path.suffixes[-2:] != [".report", ".json"]:
            out = tmp_path / (path.stem + ".report.json")
            code = main(["gain", str(path), "--p", "inf", "--out", str(out)])
            capsys.readouterr()
            if code == 64:
                continue  # the non-positive fixture has no report
            if code != 0:
                main(["analyze", str(path), "--out", str(out)])
                capsys.readouterr()
            path = out
        code = main(["certify", "--check", str(path)])
        summary = json.loads(capsys.readouterr().out)
        checked += 1
        certs += summary["certificates"]
        failures += code != 0
        kinds |= {c["kind"] for c in json.loads(path.read_text())["certificates"]}

    rng = np.random.default_rng(SEED + 80)
    failing, found = 0, 0
    for kind in CLASSES:
        i = 0
        while True:
            m = random_system(kind, instance_rng(SEED + 81, i), n=int(instance_rng(SEED + 82, i).integers(1, 4)))
            i += 1
            rep = analyze(m, witnesses=False)
            if rep.verdict == "unstable":
                break
        cid = "lmi_witness" if kind in ("difference", "neutral") else "riccati_witness"
        spec = stability_spec(m, cid)
        failing += 1
        for _ in range(10_000):
            cand = {b.name: np.exp(rng.uniform(-8, 8, b.size)) for b in spec.blocks}
            found += verify_witness(spec, cand, margin=0.0).ok
    ok = failures == 0 and checked > 0 and found == 0 and kinds == {"lp_vector", "witness", "scaling"}
    detail = (f"{checked} reports, {certs} certificates ({', '.join(sorted(kinds))}), {failures} failed re-checks; "
              f"{failing} spectrally failing instances x 1e4 candidates, {found} witnesses")
    assert acceptance("8", ok, detail)
