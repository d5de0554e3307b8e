from pathlib import Path

import numpy as np
import pytest

from posdelay.model import model_from_dict, read_model

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / f"{name}.json"


@pytest.fixture
def load_fixture():
    return lambda name: read_model(FIXTURES / f"{name}.json")


def discrete(A0, As, h=1.0, Eu=None, C0=None):
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    d = {"class": "discrete", "n": A0.shape[0], "A0": A0.tolist(),
         "terms": [{"A": np.atleast_2d(A).tolist(), "delay": {"type": "const", "h": h}} for A in As]}
    if Eu is not None:
        d["Eu"] = np.atleast_2d(Eu).tolist()
    if C0 is not None:
        d["C0"] = np.atleast_2d(C0).tolist()
    return model_from_dict(d)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """``report(criterion, ok, detail)`` prints one PASS/FAIL line and keeps it for the summary."""

    def report(criterion: str, ok: bool, detail: str = "") -> bool:
        line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        print(line)
        _ACCEPTANCE.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
