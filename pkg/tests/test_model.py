import json
import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from oracles import adaptive_simpson, kernel_entry_integral
from posdelay.kernels import DelayKernel, KernelError, KernelPiece, KernelTerm, exp_poly_integral, kernel_moment
from posdelay.model import (
    CLASSES,
    RATE_BOUND_MESSAGE,
    ModelError,
    lift_to_lft,
    load_model,
    model_from_dict,
    normalize,
    save_model,
    validate_positivity,
)
from posdelay.sampling import random_system
from conftest import FIXTURES


def neutral(a0, ar, an):
    return model_from_dict({"class": "neutral", "n": 1, "A0": [[a0]],
                            "terms": [{"Ar": [[ar]], "An": [[an]], "delay": {"type": "const", "h": 1}}]})


def scalar_kernel(alpha, k, a=-1.0, b=0.0, c=1.0):
    return DelayKernel((KernelPiece(a, b, (KernelTerm(np.array([[c]]), alpha, k),)),))


# ---- positivity


def test_neutral_positivity_examples():
    assert validate_positivity(neutral(-2, 0.5, 0.25)).ok
    rep = validate_positivity(neutral(-2, 0.3, 0.25))
    assert not rep.ok
    assert rep.violations[0].value == pytest.approx(-0.2)


def test_discrete_violation_coordinates():
    m = model_from_dict({"class": "discrete", "n": 2, "A0": [[-1, 0], [0, -1]],
                         "terms": [{"A": [[0, 0], [-0.1, 0]], "delay": {"type": "const", "h": 1}}]})
    rep = validate_positivity(m)
    assert not rep.ok
    v = rep.violations[0]
    assert (v.block, v.row, v.col) == ("/terms/0/A", 1, 0)


def test_metzler_diagonal_is_free():
    m = model_from_dict({"class": "lti", "n": 2, "A": [[-5, 1], [0, -1]]})
    assert validate_positivity(m).ok


def test_negative_kernel_is_reported():
    m = model_from_dict({"class": "distributed", "n": 1, "A0": [[-1]], "terms": [{"kernel": {"pieces": [
        {"interval": [-1, 0], "terms": [{"coeff": [[1.0]], "power": 1}]}]}}]})
    rep = validate_positivity(m)
    assert not rep.ok  # theta^1 is negative on [-1, 0)


# ---- kernels


def test_kernel_moment_examples():
    assert kernel_moment(scalar_kernel(2.0, 0))[0, 0] == pytest.approx((1 - math.exp(-2)) / 2, abs=1e-15)
    assert kernel_moment(scalar_kernel(2.0, 0))[0, 0] == pytest.approx(0.4323324, abs=1e-7)
    A = np.array([[0.5, 0.1], [0.0, 0.3]])
    np.testing.assert_allclose(kernel_moment(DelayKernel.constant(A, 2.5)), 2.5 * A, atol=1e-15)
    exact = kernel_moment(scalar_kernel(-1.0, 2))[0, 0]
    assert exact == pytest.approx(adaptive_simpson(lambda t: t * t * math.exp(-t), -1.0, 0.0), abs=1e-10)
    assert exact == pytest.approx(math.e - 2, abs=1e-14)  # int_{-1}^0 t^2 e^-t dt = e - 2


@settings(max_examples=80, deadline=None)
@given(st.floats(-4, 4), st.integers(0, 4), st.floats(-3, -0.01))
@example(-4.0, 3, -3.0)
def test_exp_poly_integral_matches_quadrature(alpha, k, a):
    ref = adaptive_simpson(lambda t: math.exp(alpha * t) * t**k, a, 0.0)
    assert exp_poly_integral(alpha, k, a, 0.0) == pytest.approx(ref, rel=1e-13, abs=1e-10)  # large alpha, k reach 1e6; abs alone is sub-ulp


def test_infinite_support():
    K = DelayKernel((KernelPiece(-math.inf, 0.0, (KernelTerm(np.array([[2.0]]), 1.0, 0),)),))
    assert kernel_moment(K)[0, 0] == pytest.approx(2.0)
    short, tail = K.truncated(1e-8)
    assert tail <= 1e-8
    assert kernel_moment(short)[0, 0] == pytest.approx(2.0, abs=1e-8)
    with pytest.raises(KernelError):
        DelayKernel((KernelPiece(-math.inf, 0.0, (KernelTerm(np.array([[1.0]]), 0.0, 0),)),))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(-2, 2), st.integers(0, 3))
def test_moment_linear_and_additive(c1, c2, alpha, k):
    K1 = scalar_kernel(alpha, k, c=c1)
    K2 = scalar_kernel(alpha, k, c=c2)
    both = DelayKernel((KernelPiece(-1.0, 0.0, K1.pieces[0].terms + K2.pieces[0].terms),))
    assert kernel_moment(both)[0, 0] == pytest.approx(kernel_moment(K1)[0, 0] + kernel_moment(K2)[0, 0], rel=1e-12)
    split = DelayKernel((KernelPiece(-1.0, -0.4, K1.pieces[0].terms), KernelPiece(-0.4, 0.0, K1.pieces[0].terms)))
    assert kernel_moment(split)[0, 0] == pytest.approx(kernel_moment(K1)[0, 0], rel=1e-12, abs=1e-15)


def test_random_kernel_moments_against_simpson():
    from posdelay.sampling import random_kernel

    rng = np.random.default_rng(5)
    for _ in range(10):
        K = random_kernel(rng, 2, 2)
        M = kernel_moment(K)
        for i in range(2):
            for j in range(2):
                assert M[i, j] == pytest.approx(kernel_entry_integral(K, i, j), abs=1e-10)


# ---- lifting


def test_lift_discrete_shapes():
    rng = np.random.default_rng(0)
    m = random_system("discrete", rng, n=3, N=2)
    lft = lift_to_lft(m)
    np.testing.assert_array_equal(lft.E, np.hstack([m.terms[0].A, m.terms[1].A]))
    np.testing.assert_array_equal(lft.C, np.kron(np.ones((2, 1)), np.eye(3)))
    assert lft.E.shape == (3, 6) and lft.C.shape == (6, 3)
    assert not lft.F.any()


def test_lift_scalar_neutral():
    lft = lift_to_lft(neutral(-2, 0.5, 0.25))
    assert lft.C[0, 0] == pytest.approx(0.0)
    assert lft.F[0, 0] == pytest.approx(0.25)
    assert lft.E[0, 0] == 1.0


def test_lift_coupled():
    rng = np.random.default_rng(1)
    m = random_system("coupled", rng, N=2)
    lft = lift_to_lft(m)
    np.testing.assert_array_equal(lft.C, np.kron(np.ones((2, 1)), m.C0))
    np.testing.assert_array_equal(lft.F, np.kron(np.ones((2, 1)), np.hstack([t.C for t in m.terms])))


def test_lift_difference_has_empty_core():
    lft = lift_to_lft(model_from_dict({"class": "difference", "n": 1, "terms": [{"A": [[0.5]], "delay": {"type": "const", "h": 1}}]}))
    assert lft.n == 0 and lft.F[0, 0] == 0.5


@pytest.mark.parametrize("kind", [k for k in CLASSES])
def test_lift_preserves_positivity(kind):
    rng = np.random.default_rng(7)
    for _ in range(10):
        m = random_system(kind, rng)
        assert validate_positivity(m).ok
        lft = lift_to_lft(m)
        off = lft.A - np.diag(np.diag(lft.A))
        assert np.all(off >= 0)
        assert np.all(lft.E >= -1e-12) and np.all(lft.C >= -1e-12) and np.all(lft.F >= -1e-12)


# ---- JSON


@pytest.mark.parametrize("path", sorted(FIXTURES.glob("*.json")), ids=lambda p: p.stem)
def test_fixture_round_trip(path):
    raw = path.read_bytes()
    assert save_model(load_model(raw)) == normalize(raw)
    assert save_model(load_model(save_model(load_model(raw)))) == save_model(load_model(raw))


@pytest.mark.parametrize("kind", [k for k in CLASSES])
def test_random_round_trip(kind):
    rng = np.random.default_rng(3)
    for _ in range(5):
        m = random_system(kind, rng)
        again = load_model(save_model(m))
        assert save_model(again) == save_model(m)


def test_rate_bound_schema_rule():
    doc = {"class": "discrete", "n": 1, "A0": [[-1]],
           "terms": [{"A": [[0.5]], "delay": {"type": "tv", "h_bar": 1.0, "rate_bound": 1.2}}]}
    with pytest.raises(ModelError) as e:
        model_from_dict(doc)
    assert e.value.message == RATE_BOUND_MESSAGE
    assert "rate bound must be < 1 for L1/L2 analyses; use type 'tv_unbounded_rate'" in str(e.value)


def test_missing_fu_defaults_to_zero():
    m = model_from_dict({"class": "discrete", "n": 2, "A0": [[-1, 0], [0, -1]], "terms": [],
                         "Eu": [[1], [0]], "C0": [[1, 1]]})
    assert m.Fu.shape == (1, 1) and not m.Fu.any()


@pytest.mark.parametrize(
    "doc, pointer",
    [
        ({"class": "nope", "n": 1}, "/class"),
        ({"class": "lti", "n": 0, "A": [[1]]}, "/n"),
        ({"class": "lti", "n": 2, "A": [[1, 0]]}, "/A"),
        ({"class": "discrete", "n": 1, "A0": [[-1]], "terms": [{"A": [[1]], "delay": {"type": "const"}}]}, "/terms/0/delay"),
        ({"class": "discrete", "n": 1, "A0": [["x"]]}, "/A0"),
    ],
)
def test_schema_errors_carry_pointer(doc, pointer):
    with pytest.raises(ModelError) as e:
        model_from_dict(doc)
    assert e.value.path.startswith(pointer)


def test_non_finite_rejected():
    with pytest.raises(ModelError):
        load_model('{"class": "lti", "n": 1, "A": [[NaN]]}')
    with pytest.raises(ModelError):
        load_model("{not json")
