import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from posdelay.lp import StrictLP, rowwise_negative, solve_strict_lp, verify_lp_certificate


def random_metzler(rng, n, shift):
    M = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.6)
    np.fill_diagonal(M, 0.0)
    return M - shift * np.eye(n)


def test_trivial_feasible_and_infeasible():
    r = solve_strict_lp(StrictLP([[-1.0]]))
    assert r.feasible and r.x[0] == pytest.approx(1.0)
    r = solve_strict_lp(StrictLP([[1.0]]))
    assert r.status == "infeasible" and r.x is None and r.slack < 0


def test_sum_matrix_instance():
    S = np.array([[-2.0, 1.0], [0.5, -1.5]])
    r = solve_strict_lp(StrictLP(S.T))
    assert r.feasible
    assert np.all(r.x > 0) and np.all(r.x @ S < 0)
    assert verify_lp_certificate(S.T, r.x, r.delta)


def test_verify_examples():
    assert verify_lp_certificate([[-1.0]], [1.0], 0.5)
    assert not verify_lp_certificate([[-1.0]], [0.1], 0.5)
    with pytest.raises(ValueError):
        verify_lp_certificate([[-1.0, 0.0]], [1.0], 0.5)


def test_marginal_boundary():
    # v > 0 with v' [[-1, 1], [1, -1]] < 0 is impossible but the best slack is exactly 0
    r = solve_strict_lp(StrictLP([[-1.0, 1.0], [1.0, -1.0]]))
    assert r.status == "marginal" and r.slack == pytest.approx(0.0, abs=1e-12)


def test_partial_positivity():
    # x1 free, x2 > 0: x1 - x2 < 0 and -x2 < 0 is solvable with x1 negative
    r = solve_strict_lp(StrictLP([[1.0, -1.0], [0.0, -1.0]], positive=(1,)))
    assert r.feasible
    assert verify_lp_certificate([[1.0, -1.0], [0.0, -1.0]], r.x, r.delta, positive=(1,))


def test_rowwise_negative():
    assert rowwise_negative([[-1.0, 0.5]], [1.0, 1.0])
    assert not rowwise_negative([[-1.0, 1.0]], [1.0, 1.0])
    # a row that is zero up to rounding is rejected
    assert not rowwise_negative([[1.0, -1.0 / 3.0 * 3.0]], [1.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-5, 5)), st.floats(1e-3, 1e3))
def test_soundness_and_scale_invariance(G, c):
    r = solve_strict_lp(StrictLP(G))
    if r.feasible:
        assert verify_lp_certificate(G, r.x, r.delta)
    assert solve_strict_lp(StrictLP(c * G)).status == r.status


def test_completeness_against_spectral_abscissa():
    rng = np.random.default_rng(11)
    seen = {True: 0, False: 0}
    for _ in range(200):
        n = int(rng.integers(1, 9))
        M = random_metzler(rng, n, rng.uniform(0.2, 3.0))
        alpha = max(np.linalg.eigvals(M).real)
        if abs(alpha) < 1e-6:
            continue
        r = solve_strict_lp(StrictLP(M))
        seen[alpha < 0] += 1
        if alpha < 0:
            assert r.feasible
            assert np.all(M @ r.x < 0)
        else:
            assert r.status == "infeasible"
    assert seen[True] > 20 and seen[False] > 20
