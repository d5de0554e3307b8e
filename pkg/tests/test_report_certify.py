import copy
import json
import math

import numpy as np
import pytest

from posdelay.certify import check_report
from posdelay.report import Report, Settings, build_report, model_digest
from posdelay.sampling import instance_rng, random_system

FIXTURES = ["discrete_stable", "difference_stable", "coupled_scalar", "distributed_critical", "neutral_scalar", "lti"]


@pytest.fixture(scope="module")
def reports():
    from conftest import FIXTURES as DIR
    from posdelay.model import read_model

    out = {}
    for name in FIXTURES:
        model = read_model(DIR / f"{name}.json")
        out[name] = build_report(model, gains=[(1, "both"), (2, "both"), (math.inf, "both")])
    return out


@pytest.mark.parametrize("name", FIXTURES)
def test_round_trip(reports, name):
    rep = reports[name]
    text = rep.emit()
    back = Report.load(text)
    assert back == rep
    assert back.emit() == text


@pytest.mark.parametrize("name", FIXTURES)
def test_every_certificate_verifies(reports, name):
    data = json.loads(reports[name].emit())
    kinds = {c["kind"] for c in data["certificates"]}
    assert "lp_vector" in kinds
    summary = check_report(data)
    assert summary.ok, summary.to_dict()
    assert summary.digest_ok
    assert len(summary.checks) == len(data["certificates"])


def test_report_is_self_contained(reports):
    data = json.loads(reports["discrete_stable"].emit())
    assert data["digest"].startswith("sha256:")
    assert {"tol", "margin", "lp_delta"} <= set(data["settings"])
    assert data["tool"]["name"] == "posdelay"
    assert [g["p"] for g in data["gains"]] == ["1", "2", "inf"]
    for g in data["gains"]:
        assert data["certificates"][g["certificate"]]["condition"] == "gain"


def _tamper(data, fn):
    d = copy.deepcopy(data)
    fn(d)
    return check_report(d)


def test_tampering_is_detected(reports):
    data = json.loads(reports["discrete_stable"].emit())
    lp = next(i for i, c in enumerate(data["certificates"]) if c["kind"] == "lp_vector" and c["condition"] != "gain")
    wit = next(i for i, c in enumerate(data["certificates"]) if c["kind"] == "witness")

    def flip_x(d):
        d["certificates"][lp]["x"] = [-v for v in d["certificates"][lp]["x"]]

    def shrink_witness(d):
        blocks = d["certificates"][wit]["witness"]["blocks"]
        key = next(k for k in blocks if k != "P")
        blocks[key] = [1e-9 * v for v in blocks[key]]

    def change_model(d):
        d["model"]["terms"][0]["A"][0][0] = 5.0

    def inflate_gain(d):
        d["gains"][2]["gain"] = 10.0 * d["gains"][2]["gain"]

    def orphan(d):
        d["stability"]["conditions"] = [c for c in d["stability"]["conditions"] if c["id"] != "lp_left"]

    for fn in (flip_x, shrink_witness, change_model, inflate_gain, orphan):
        assert not _tamper(data, fn).ok, fn.__name__


def test_digest_survives_key_order(reports):
    rep = reports["neutral_scalar"]
    from posdelay.model import model_from_dict

    shuffled = dict(reversed(list(rep.model.items())))
    assert model_digest(model_from_dict(shuffled)) == rep.digest


def test_unstable_report_has_no_gains():
    from conftest import discrete

    rep = build_report(discrete([[-1.0]], [[[2.0]]]), gains=[(math.inf, "both")])
    assert rep.stability.verdict == "unstable"
    assert rep.gains == ()
    assert check_report(json.loads(rep.emit())).ok


@pytest.mark.parametrize("kind", ["discrete", "difference", "coupled", "distributed", "neutral"])
def test_random_reports_certify(kind):
    for i in range(8):
        model = random_system(kind, instance_rng(31, i))
        rep = build_report(model, gains=[(math.inf, "closed"), (1, "closed"), (2, "closed")],
                           settings=Settings())
        assert check_report(json.loads(rep.emit())).ok
