import csv
import io
import math

import numpy as np
import pytest

from conftest import discrete
from posdelay.analysis import analyze, closed_form_gain
from posdelay.model import LtiSystem
from posdelay.sampling import instance_rng, random_system
from posdelay.simulate import (
    SimConfig,
    SimulationError,
    decay_rate,
    default_step,
    empirical_gain_lower_bound,
    simulate,
)


def lti(a, e=1.0, c=1.0):
    return LtiSystem(np.array([[a]]), np.array([[e]]), np.array([[c]]), np.zeros((1, 1)))


def test_exponential_decay_ratio():
    tr = simulate(lti(-1.0), SimConfig(0.01, 10.0, np.ones(1)))
    assert tr.terminal_norm_ratio == pytest.approx(math.exp(-10), rel=1e-6)
    assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(10.0)
    assert np.all(np.diff(tr.times) > 0)
    assert np.allclose(np.diff(tr.times), 0.01)


def test_stable_delay_equation_decays():
    sys = discrete([[-2.0]], [[[1.0]]])
    tr = simulate(sys, SimConfig(0.05, 40.0, np.ones(1)))
    assert tr.terminal_norm_ratio < 1e-6
    assert tr.min_entry >= 0.0


def test_unstable_delay_equation_grows():
    sys = discrete([[-1.0]], [[[2.0]]])
    tr = simulate(sys, SimConfig(0.05, 20.0, np.ones(1)))
    assert tr.terminal_norm_ratio > 10.0


def test_settled_values():
    assert empirical_gain_lower_bound(lti(-2.0), math.inf) == pytest.approx(0.5, rel=1e-6)
    sys = discrete([[-2.0]], [[[1.0]]], Eu=[[1.0]], C0=[[1.0]])
    assert empirical_gain_lower_bound(sys, math.inf) == pytest.approx(1.0, rel=1e-4)


@pytest.mark.parametrize("kind", ["discrete", "coupled", "distributed", "neutral", "difference"])
def test_lower_bound_matches_gain(kind):
    hits = 0
    for i in range(30):
        sys = random_system(kind, instance_rng(5, i), n=3)
        if analyze(sys, witnesses=False).verdict != "stable":
            continue
        rate = decay_rate(sys)
        if rate is None or 50.0 / abs(rate) / default_step(sys) > 40_000:
            continue
        g = closed_form_gain(sys, math.inf)
        lb = empirical_gain_lower_bound(sys, math.inf)
        assert lb == pytest.approx(g, rel=1e-2)
        hits += 1
        if hits == 2:
            break
    assert hits >= 1


def test_step_halving_is_fourth_order():
    sys = discrete([[-2.0, 0.5], [0.3, -1.5]], [[[0.5, 0.1], [0.2, 0.4]]], h=1.0)
    hist = lambda t: np.array([1.0 + 0.5 * np.sin(t), 1.0 + 0.5 * np.cos(t)])
    ref = simulate(sys, SimConfig(1 / 320, 4.0, hist)).states[-1]
    err = [np.max(np.abs(simulate(sys, SimConfig(dt, 4.0, hist)).states[-1] - ref)) for dt in (1 / 20, 1 / 40)]
    assert err[0] / err[1] > 8.0


@pytest.mark.parametrize("kind", ["lti", "discrete", "difference", "coupled", "distributed", "neutral"])
def test_positivity_preserved(kind):
    for i in range(6):
        sys = random_system(kind, instance_rng(17, i))
        size = sys.n + (sys.n2 if kind == "coupled" else 0)
        step = default_step(sys)
        u = np.ones(sys.n_u) if i % 2 else None
        tr = simulate(sys, SimConfig(step, min(30.0, 400 * step), np.ones(size), u))
        assert tr.min_entry >= -1e-9 * max(tr.peak, 1.0)


def test_sawtooth_delays_still_decay(load_fixture):
    sys = load_fixture("discrete_tv_unbounded")
    for period in (0.3, 1.0, 7.0):
        tr = simulate(sys, SimConfig(0.05, 60.0, np.ones(2), delays="sawtooth", sawtooth_period=period))
        assert tr.terminal_norm_ratio < 1e-6


def test_neutral_fixture_decays(load_fixture):
    sys = load_fixture("neutral_scalar")
    tr = simulate(sys, SimConfig(0.05, 60.0, np.ones(1)))
    assert tr.terminal_norm_ratio < 1e-6
    assert tr.min_entry >= 0.0


def test_step_must_resolve_delays():
    sys = discrete([[-2.0]], [[[1.0]]], h=1.0)
    with pytest.raises(SimulationError):
        simulate(sys, SimConfig(0.5, 10.0, np.ones(1)))
    with pytest.raises(SimulationError):
        SimConfig(-1.0, 1.0)


def test_csv_export():
    tr = simulate(lti(-1.0), SimConfig(0.1, 1.0, np.ones(1), record_every=2))
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["t", "x1", "y1"]
    assert len(rows) == len(tr.times) + 1
    assert float(rows[-1][1]) == tr.states[-1, 0]


def test_schedule_input():
    # input switched off at t = 5; the output then decays from 0.5
    tr = simulate(lti(-2.0), SimConfig(0.01, 10.0, np.zeros(1), [(0.0, [1.0]), (5.0, [0.0])]))
    k = int(round(4.99 / 0.01))
    assert tr.outputs[k, 0] == pytest.approx(0.5, rel=1e-3)
    assert tr.outputs[-1, 0] == pytest.approx(0.5 * math.exp(-10), rel=1e-2)


def test_neutral_decay_rate(load_fixture):
    # reduced root -2 lies left of the neutral chain 0.25 exp(-s) = 1
    assert decay_rate(load_fixture("neutral_scalar")) == pytest.approx(math.log(0.25), abs=1e-8)
    assert decay_rate(load_fixture("neutral_strongfail")) is None
    for i in range(10):
        sys = random_system("neutral", instance_rng(8, i))
        rate = decay_rate(sys)
        verdict = analyze(sys, witnesses=False).verdict
        if verdict == "stable":
            assert rate < 0
        elif verdict == "unstable" and rate is not None:
            assert rate > 0
