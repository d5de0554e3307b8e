import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from posdelay.linalg import (
    LinalgError,
    SingularMatrixError,
    induced_norm,
    is_irreducible,
    is_metzler,
    is_nonnegative,
    optimal_scaling,
    perron_vectors,
    solve_linear,
    spectral_abscissa_metzler,
    spectral_radius_nonneg,
    symmetric_negdef_check,
)


def eig_rho(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def nonneg_matrices(max_n=8):
    return st.integers(1, max_n).flatmap(
        lambda n: arrays(np.float64, (n, n), elements=st.floats(0, 10, allow_subnormal=False))
    )


# ---- predicates


def test_is_nonnegative_examples():
    assert is_nonnegative([[0, 1], [2, 0]], 0)
    assert is_nonnegative([[0, -1e-12], [0, 0]], 1e-9)
    assert not is_nonnegative([[0, -0.1], [0, 0]], 0)


def test_is_metzler_examples():
    assert is_metzler([[-2, 1], [0.5, -3]])
    assert not is_metzler([[-2, -0.1], [0, -1]])
    assert is_metzler([[-5]])
    with pytest.raises(LinalgError):
        is_metzler([[1, 2, 3]])


@given(arrays(np.float64, (3, 3), elements=st.floats(-1, 1)), st.floats(0, 1), st.floats(0, 1))
def test_predicates_tolerance_monotone(M, t1, t2):
    lo, hi = sorted((t1, t2))
    if is_nonnegative(M, lo):
        assert is_nonnegative(M, hi)
    if is_metzler(M, lo):
        assert is_metzler(M, hi)
    assert is_metzler(M, lo) == is_metzler(M, lo)


# ---- Perron


def test_spectral_radius_examples():
    assert spectral_radius_nonneg([[0, 2], [0.5, 0]]) == pytest.approx(1.0, abs=1e-12)
    assert spectral_radius_nonneg(np.eye(4)) == pytest.approx(1.0, abs=1e-12)


def test_spectral_radius_rejects_negative():
    with pytest.raises(LinalgError):
        spectral_radius_nonneg([[0, -1], [1, 0]])


def test_spectral_radius_random_5x5():
    rng = np.random.default_rng(0)
    for _ in range(20):
        M = rng.uniform(0, 1, (5, 5))
        assert abs(spectral_radius_nonneg(M) - eig_rho(M)) < 1e-9


@settings(max_examples=150, deadline=None)
@given(nonneg_matrices())
def test_spectral_radius_matches_eigensolver(M):
    assert abs(spectral_radius_nonneg(M) - eig_rho(M)) <= 1e-9 * max(1.0, eig_rho(M))


def test_perron_vectors_examples():
    pair = perron_vectors([[0, 2], [0.5, 0]])
    np.testing.assert_allclose(pair.right, [2 / 3, 1 / 3], atol=1e-12)
    np.testing.assert_allclose(pair.left, [1 / 3, 2 / 3], atol=1e-12)
    assert pair.eta == 0.0
    ident = perron_vectors(np.eye(3))
    np.testing.assert_allclose(ident.right, np.full(3, 1 / 3), atol=1e-12)
    assert ident.eta > 0  # identity is reducible


def test_perron_residual_random_irreducible():
    rng = np.random.default_rng(1)
    for _ in range(20):
        M = rng.uniform(0.01, 1, (4, 4))
        pair = perron_vectors(M)
        assert np.all(pair.right > 0) and np.all(pair.left > 0)
        assert pair.right.sum() == pytest.approx(1) and pair.left.sum() == pytest.approx(1)
        assert np.max(np.abs(M @ pair.right - pair.rho * pair.right)) < 1e-9
        assert np.max(np.abs(pair.left @ M - pair.rho * pair.left)) < 1e-9


def test_spectral_abscissa_metzler():
    M = np.array([[-2.0, 1.0], [0.5, -1.5]])
    assert spectral_abscissa_metzler(M) == pytest.approx(max(np.linalg.eigvals(M).real), abs=1e-12)


def test_irreducibility():
    assert is_irreducible([[0, 1], [1, 0]])
    assert not is_irreducible([[1, 1], [0, 1]])


# ---- norms and scaling


def test_induced_norm_examples():
    M = [[1, 2], [3, 4]]
    assert induced_norm(M, "inf") == 7
    assert induced_norm(M, 1) == 6
    assert induced_norm([[3, 0], [0, 4]], 2) == pytest.approx(4, abs=1e-12)
    with pytest.raises(ValueError):
        induced_norm(M, 3)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-5, 5)))
def test_two_norm_of_signed_matrix(M):
    assert induced_norm(M, 2) == pytest.approx(np.linalg.norm(M, 2), rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(nonneg_matrices(6))
def test_norm_dominates_spectral_radius(M):
    rho = spectral_radius_nonneg(M)
    for p in (1, 2, np.inf):
        assert induced_norm(M, p) >= rho * (1 - 1e-9) - 1e-12


def test_optimal_scaling_examples():
    s = optimal_scaling([[0, 2], [0.5, 0]], np.inf)
    assert s.diag[1] / s.diag[0] == pytest.approx(2.0, rel=1e-9)
    assert s.achieved == pytest.approx(1.0, rel=1e-9)
    for p in (1, 2, np.inf):
        s = optimal_scaling(np.eye(3), p)
        np.testing.assert_allclose(s.diag, s.diag[0], rtol=1e-9)
        assert s.achieved == pytest.approx(1.0, rel=1e-9)


def test_optimal_scaling_random_6x6_p2():
    rng = np.random.default_rng(2)
    for _ in range(20):
        M = rng.uniform(0, 1, (6, 6))
        s = optimal_scaling(M, 2)
        assert np.all(s.diag > 0)
        assert s.achieved <= spectral_radius_nonneg(M) * (1 + 1e-6)


# ---- solves and definiteness


def test_solve_linear_examples():
    X = solve_linear([[-2, 0], [1, -1]], np.eye(2))
    np.testing.assert_allclose(X, [[-0.5, 0], [-0.5, -1]], atol=1e-15)
    B = np.arange(6.0).reshape(2, 3)
    np.testing.assert_allclose(solve_linear(np.eye(2), B), B)
    with pytest.raises(SingularMatrixError):
        solve_linear([[1, 2], [2, 4]], np.eye(2))


def test_solve_linear_residual():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(8, 8)) + 8 * np.eye(8)
    B = rng.normal(size=(8, 2))
    X, res = solve_linear(A, B, return_residual=True)
    assert res < 1e-10
    assert np.max(np.abs(A @ X - B)) < 1e-10


def test_negdef_examples():
    assert symmetric_negdef_check([[-1, 0], [0, -2]], 0)
    assert not symmetric_negdef_check([[-1, 2], [2, -1]], 0)
    assert not symmetric_negdef_check([[0, 0], [0, -1]], 0)
    assert not symmetric_negdef_check([[-1, 0], [0, -2]], 1.5)


def test_nearly_repeated_perron_root():
    # reducible input whose optimally scaled Gram matrix has two top eigenvalues 2e-10 apart
    M = np.array([[0.0, 0.0, 4.0, 0.0, 1.1778942523648575, 10.0], [0.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 6.706773463600525, 4.0, 1.2342180124495397, 0.0, 0.0], [1.7621158762636948, 9.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]])
    rho = float(np.max(np.abs(np.linalg.eigvals(M))))
    s = optimal_scaling(M, 2)
    assert s.achieved <= rho * (1 + 1e-6)
    S = s.diag[:, None] * M / s.diag[None, :]
    G = S.T @ S
    assert spectral_radius_nonneg(G) == pytest.approx(np.linalg.eigvalsh(G)[-1], rel=1e-12)
