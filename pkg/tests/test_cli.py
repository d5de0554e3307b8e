import json
import subprocess
import sys

import pytest

from posdelay.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "name, code",
    [
        ("discrete_stable", 0),
        ("discrete_unstable", 1),
        ("discrete_tv_unbounded", 0),
        ("lti", 0),
        ("difference_stable", 0),
        ("difference_marginal", 2),
        ("coupled_scalar", 0),
        ("distributed_critical", 0),
        ("neutral_scalar", 0),
        ("neutral_strongfail", 1),
        ("not_positive", 64),
    ],
)
def test_analyze_exit_codes(capsys, fixture_path, name, code):
    assert run(capsys, "analyze", fixture_path(name))[0] == code


def test_analyze_report_content(capsys, fixture_path):
    code, out, _ = run(capsys, "analyze", fixture_path("discrete_stable"))
    rep = json.loads(out)
    assert code == 0
    assert rep["stability"]["verdict"] == "stable"
    assert all(c["holds"] for c in rep["stability"]["conditions"])


def test_strong_stability_flag(capsys, fixture_path):
    code, out, _ = run(capsys, "analyze", fixture_path("neutral_strongfail"))
    assert code == 1
    assert json.loads(out)["stability"]["flags"]["strongly_stable"] is False


def test_input_errors(capsys, tmp_path, fixture_path):
    assert run(capsys, "analyze", tmp_path / "missing.json")[0] == 64
    bad = tmp_path / "bad.json"
    bad.write_text('{"class": "discrete", "n": 1, "A0": [[-1, 0]], "terms": []}')
    code, _, err = run(capsys, "analyze", bad)
    assert code == 64 and "/A0" in err
    assert run(capsys, "analyze")[0] == 64
    assert run(capsys, "frobnicate")[0] == 64
    code, _, err = run(capsys, "analyze", fixture_path("not_positive"))
    assert "not positive" in err


def test_gain_commands(capsys, fixture_path):
    code, out, _ = run(capsys, "gain", fixture_path("discrete_stable"), "--p", "inf", "--method", "both")
    g = json.loads(out)["gains"][0]
    assert code == 0
    assert abs(g["closed_form"] - g["bisection"]) <= 1e-6 * g["closed_form"]
    code, out, _ = run(capsys, "gain", fixture_path("lti"), "--p", "2")
    assert code == 0 and json.loads(out)["gains"][0]["gain"] == pytest.approx(0.5)
    code, _, err = run(capsys, "gain", fixture_path("discrete_tv_unbounded"), "--p", "1")
    assert code == 64 and "rate bound required for p=1" in err
    code, _, err = run(capsys, "gain", fixture_path("discrete_unstable"), "--p", "inf")
    assert code == 1 and "unstable" in err


def test_certify_round_trip(capsys, tmp_path, fixture_path):
    out = tmp_path / "report.json"
    assert run(capsys, "gain", fixture_path("neutral_scalar"), "--p", "1", "--out", out)[0] == 0
    code, text, _ = run(capsys, "certify", "--check", out)
    assert code == 0 and json.loads(text)["ok"]
    data = json.loads(out.read_text())
    lp = next(c for c in data["certificates"] if c["kind"] == "lp_vector")
    lp["delta"] = -1.0
    out.write_text(json.dumps(data))
    assert run(capsys, "certify", "--check", out)[0] == 1
    out.write_text("not json")
    assert run(capsys, "certify", "--check", out)[0] == 64
    assert run(capsys, "certify")[0] == 64


def test_simulate_settles_at_gain_column(capsys, tmp_path, fixture_path):
    csv_path = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", fixture_path("discrete_stable"), "--input", "const:1", "--csv", csv_path)
    s = json.loads(out)
    assert code == 0
    assert s["steady_output_rel_error"] < 1e-6
    assert s["final_output"] == pytest.approx(s["expected_steady_output"], rel=1e-6)
    assert csv_path.read_text().splitlines()[0] == "t,x1,x2,y1,y2"
    assert run(capsys, "simulate", fixture_path("lti"), "--input", "bogus")[0] == 64


def test_crossval(capsys, fixture_path):
    code, out, _ = run(capsys, "crossval", fixture_path("difference_marginal"))
    assert code == 2 and json.loads(out)["verdicts"] == {"marginal": 1}
    code, out, _ = run(capsys, "crossval", fixture_path("neutral_scalar"))
    s = json.loads(out)
    assert code == 0 and s["simulated"] == {"count": 1, "consistent": 1}
    code, out, _ = run(capsys, "crossval", "--random", "discrete", "--seed", "7", "--count", "40")
    s = json.loads(out)
    assert code == 0 and s["disagreements"] == 0 and s["count"] == 40


def test_crossval_is_deterministic(capsys):
    a = json.loads(run(capsys, "crossval", "--random", "coupled", "--seed", "3", "--count", "15")[1])
    b = json.loads(run(capsys, "crossval", "--random", "coupled", "--seed", "3", "--count", "15")[1])
    a.pop("elapsed_s"), b.pop("elapsed_s")
    assert a == b


def test_tolerance_flag_and_environment(capsys, monkeypatch, fixture_path):
    path = fixture_path("discrete_stable")
    assert run(capsys, "analyze", path, "--no-witness")[0] == 0
    assert run(capsys, "analyze", path, "--no-witness", "--tol", "10")[0] == 2
    monkeypatch.setenv("POSDELAY_TOL", "10")
    code, out, _ = run(capsys, "analyze", path, "--no-witness")
    assert code == 2 and json.loads(out)["settings"]["tol"] == 10.0
    monkeypatch.setenv("POSDELAY_TOL", "abc")
    assert run(capsys, "analyze", path)[0] == 64


def test_module_entry_point(fixture_path):
    res = subprocess.run([sys.executable, "-m", "posdelay", "analyze", str(fixture_path("discrete_unstable"))],
                         capture_output=True, text=True)
    assert res.returncode == 1
    assert json.loads(res.stdout)["stability"]["verdict"] == "unstable"
