"""Dense linear algebra specialised to nonnegative and Metzler matrices.

Spectral radii are computed per strongly connected component with a shifted
inverse (Noda) iteration. Every iterate carries a Collatz-Wielandt bracket
``min (Mv)/v <= rho <= max (Mv)/v``, and the bracket width is the stopping
rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.linalg import matrix_balance

MAX_ITER = 10_000
REG_FACTOR = 1e-12
_EPS = np.finfo(float).eps


class LinalgError(ValueError):
    """Invalid input to a matrix routine."""


class SingularMatrixError(LinalgError):
    """Raised when a linear solve meets a pivot below working precision."""


class ConvergenceError(RuntimeError):
    """Raised when an iteration exhausts its cap without meeting its bracket."""


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float array."""
    A = np.array(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise LinalgError(f"{name}: expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinalgError(f"{name}: non-finite entry")
    return A


def _square(M, name: str = "matrix") -> np.ndarray:
    A = as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise LinalgError(f"{name}: expected a square matrix, got shape {A.shape}")
    return A


def is_nonnegative(M, tol: float = 0.0) -> bool:
    A = as_matrix(M)
    return bool(np.all(A >= -tol))


def is_metzler(M, tol: float = 0.0) -> bool:
    A = _square(M)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    return bool(np.all(off >= -tol))


def _check_nonneg(M, tol: float | None) -> np.ndarray:
    A = _square(M)
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    bound = tol if tol is not None else 1e-12 * max(scale, 1.0)
    if np.any(A < -bound):
        i, j = np.unravel_index(int(np.argmin(A)), A.shape)
        raise LinalgError(f"matrix has a negative entry {A[i, j]:.3g} at ({i}, {j})")
    return np.clip(A, 0.0, None)


def strong_components(M: np.ndarray) -> list[np.ndarray]:
    """Index sets of the strongly connected components of the graph of ``M``."""
    n = M.shape[0]
    count, labels = connected_components(M > 0, directed=True, connection="strong")
    return [np.flatnonzero(labels == k) for k in range(count)] if n else []


def is_irreducible(M) -> bool:
    A = _square(M)
    if A.shape[0] == 1:
        return True
    return len(strong_components(np.abs(A))) == 1


@dataclass(frozen=True)
class PerronResult:
    rho: float
    vector: np.ndarray
    lower: float
    upper: float
    iterations: int


def _noda(M: np.ndarray, tol: float, max_iter: int = MAX_ITER) -> PerronResult:
    """Perron root and vector of an irreducible nonnegative matrix."""
    n = M.shape[0]
    if n == 1:
        return PerronResult(float(M[0, 0]), np.ones(1), float(M[0, 0]), float(M[0, 0]), 0)
    # a diagonal similarity keeps the spectrum and the Collatz-Wielandt ratios,
    # and stops the Perron vector of badly scaled matrices from underflowing
    c = float(np.max(M.sum(axis=1)))
    with warnings.catch_warnings():
        # scipy casts the unused permutation output and may warn about it
        warnings.simplefilter("ignore", RuntimeWarning)
        B, (d, _) = matrix_balance(M / c, permute=False, separate=True)
    r = _noda_balanced(B, tol / c, max_iter)
    x = d * r.vector
    return PerronResult(c * r.rho, x / x.sum(), c * r.lower, c * r.upper, r.iterations)


def _noda_balanced(M: np.ndarray, tol: float, max_iter: int) -> PerronResult:
    n = M.shape[0]
    scale = float(np.max(M.sum(axis=1)))
    floor = 64 * n * _EPS * scale
    x = np.full(n, 1.0 / n)
    eye = np.eye(n)
    # every positive x brackets rho, so the running intersection is a bracket too;
    # it converges even when rounding makes single iterates oscillate
    lo_best, hi_best, x_best, w_best = -np.inf, np.inf, x, np.inf
    best = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        y = M @ x
        ratios = y / x
        lo, hi = float(ratios.min()), float(ratios.max())
        if hi - lo < w_best:
            x_best, w_best = x, hi - lo
        lo_best, hi_best = max(lo_best, lo), min(hi_best, hi)
        width = max(hi_best - lo_best, 0.0)
        if width <= max(tol, 0.0) or width <= floor:
            mid = 0.5 * (lo_best + hi_best)
            return PerronResult(mid, x_best, min(lo_best, mid), max(hi_best, mid), it)
        if width < 0.5 * best:
            best, stall = width, 0
        else:
            stall += 1
            if stall > 50:
                return _settle(M, x_best, lo_best, hi_best, it)
        z = None
        # (sigma I - M)^-1 >= 0 for sigma > rho; nudge sigma when hi itself is singular
        for sigma in (hi, hi + 1e-3 * width + floor):
            try:
                z = np.linalg.solve(sigma * eye - M, x)
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(z)) and np.all(z > 0):
                break
            z = None
        if z is None:
            z = y + x  # shifted power step keeps positivity
        x = _polish_small(M, z / z.sum())
    return _settle(M, x_best, lo_best, hi_best, max_iter)


def _settle(M: np.ndarray, x: np.ndarray, lo: float, hi: float, it: int) -> PerronResult:
    """Stalled iteration (nearly repeated Perron root): take the dense
    eigensolver's estimate, clipped into the rigorous bracket."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConvergenceError(f"Perron iteration failed after {it} steps")
    ev = np.linalg.eigvals(M)
    est = float(np.max(ev.real)) if np.all(np.isfinite(ev)) else 0.5 * (lo + hi)
    return PerronResult(min(max(est, lo), hi), x, lo, hi, it)


def _polish_small(M: np.ndarray, x: np.ndarray, rel: float = 1e-6) -> np.ndarray:
    """Recompute components below ``rel * max(x)`` as
    ``sum_{j != i} M_ij x_j / (sigma - M_ii)``, sigma the largest ratio of the others.

    A dense solve gets such components only to normwise accuracy, which wrecks
    their Collatz-Wielandt ratios; this update is subtraction-free.
    """
    small = x < rel * np.max(x)
    if not np.any(small):
        return x
    ratios = (M @ x) / x
    sigma = float(np.max(ratios[~small]))
    x = x.copy()
    for i in np.flatnonzero(small):
        gap = sigma - M[i, i]
        s = np.delete(M[i], i) @ np.delete(x, i)
        if gap > 0 and s > 0:
            x[i] = s / gap
    return x / x.sum()


def _flush_negligible(A: np.ndarray, budget: float) -> np.ndarray:
    """Zero the entries that cannot move rho by more than ``budget``.

    Elsner's bound |d lambda| <= (||A|| + ||A + E||)^(1 - 1/n) ||E||^(1/n) with
    ||E||_2 <= n * delta gives the admissible entry size delta. Such entries
    would otherwise push Perron vectors below the floating-point range.
    """
    n = A.shape[0]
    S = float(np.linalg.norm(A))  # Frobenius, bounds the 2-norm
    if n == 1 or S == 0.0 or budget <= 0.0:
        return A
    log_delta = n * math.log(budget) - (n - 1) * math.log(2.0 * S) - math.log(n)
    if log_delta < -700.0:
        return A
    delta = math.exp(log_delta)
    return np.where(A <= delta, 0.0, A)


def spectral_radius_nonneg(M, tol: float | None = None) -> float:
    """Spectral radius of a nonnegative square matrix.

    ``tol`` is the absolute bracket width; by default ``1e-13 * ||M||_inf``.
    Reducible matrices are split into strongly connected components, so the
    answer is exact up to the bracket rather than perturbed by regularisation.
    """
    A = _check_nonneg(M, None)
    if not A.size or not np.any(A):
        return 0.0
    if tol is None:
        tol = 1e-13 * float(np.max(A.sum(axis=1)))
    A = _flush_negligible(A, 0.1 * tol)
    rho = 0.0
    for comp in strong_components(A):
        sub = A[np.ix_(comp, comp)]
        if comp.size == 1:
            rho = max(rho, float(sub[0, 0]))
        elif np.any(sub):
            rho = max(rho, _noda(sub, tol).rho)
    return rho


@dataclass(frozen=True)
class PerronPair:
    rho: float
    right: np.ndarray
    left: np.ndarray
    eta: float  # regularisation added to every entry (0 when irreducible)


def perron_vectors(M) -> PerronPair:
    """Right and left Perron vectors, strictly positive and 1-normalised.

    A reducible ``M`` is replaced by ``M + eta * ones`` with
    ``eta = 1e-12 * max entry`` (or ``1e-12`` for the zero matrix).
    """
    A = _check_nonneg(M, None)
    n = A.shape[0]
    eta = 0.0
    if A.any():
        A = _flush_negligible(A, 1e-14 * float(np.max(A.sum(axis=1))))
    if not is_irreducible(A):
        peak = float(A.max())
        eta = REG_FACTOR * (peak if peak > 0 else 1.0)
        A = A + eta
    tol = 1e-14 * float(np.max(A.sum(axis=1)))
    r = _noda(A, tol)
    l = _noda(A.T.copy(), tol)
    v = r.vector / r.vector.sum()
    u = l.vector / l.vector.sum()
    if n == 1:
        v = u = np.ones(1)
    return PerronPair(r.rho, v, u, eta)


def spectral_abscissa_metzler(M) -> float:
    """Largest real part of the spectrum of a Metzler matrix, as rho(M + cI) - c."""
    A = _square(M)
    if not is_metzler(A, tol=1e-12 * max(1.0, float(np.max(np.abs(A))))):
        raise LinalgError("matrix is not Metzler")
    n = A.shape[0]
    c = 1.0 + max(0.0, -float(np.min(np.diag(A))))
    shifted = A + c * np.eye(n)
    off = ~np.eye(n, dtype=bool)
    shifted[off] = np.clip(shifted[off], 0.0, None)
    return spectral_radius_nonneg(shifted) - c


def metzler_perron_vectors(M) -> PerronPair:
    """Perron vectors of a Metzler matrix (via the nonnegative shift); rho is the abscissa."""
    A = _square(M)
    n = A.shape[0]
    c = 1.0 + max(0.0, -float(np.min(np.diag(A))))
    shifted = np.clip(A + c * np.eye(n), 0.0, None)
    pair = perron_vectors(shifted)
    return PerronPair(pair.rho - c, pair.right, pair.left, pair.eta)


def _parse_p(p) -> float:
    if isinstance(p, str):
        key = p.strip().lower()
        table = {"1": 1.0, "2": 2.0, "inf": np.inf, "infinity": np.inf, "∞": np.inf}
        if key not in table:
            raise LinalgError(f"unsupported norm index {p!r}")
        return table[key]
    value = float(p)
    if value not in (1.0, 2.0, np.inf):
        raise LinalgError(f"unsupported norm index {p!r}")
    return value


def norm_index(p) -> float:
    """Canonical float form (1.0, 2.0 or inf) of a norm index."""
    return _parse_p(p)


def induced_norm(M, p) -> float:
    A = as_matrix(M)
    pv = _parse_p(p)
    if pv == 1.0:
        return float(np.max(np.abs(A).sum(axis=0)))
    if pv == np.inf:
        return float(np.max(np.abs(A).sum(axis=1)))
    if not np.any(A):
        return 0.0
    # LAPACK SVD: backward stable, so accurate to eps * ||A||_2 whatever the sign pattern
    return float(np.linalg.norm(A, 2))


@dataclass(frozen=True)
class DiagScaling:
    diag: np.ndarray
    achieved: float
    eta: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)


def optimal_scaling(M, p) -> DiagScaling:
    """Diagonal D minimising ||D M D^-1||_p, built from the Perron pair."""
    A = _check_nonneg(M, None)
    pv = _parse_p(p)
    pair = perron_vectors(A)
    v, u = pair.right, pair.left
    if pv == np.inf:
        d = 1.0 / v
    elif pv == 1.0:
        d = u.copy()
    else:
        d = np.sqrt(u / v)
    d = d / np.max(d)
    scaled = (d[:, None] * A) / d[None, :]
    return DiagScaling(d, induced_norm(scaled, pv), pair.eta)


def solve_linear(A, B, return_residual: bool = False):
    """Solve ``A X = B`` by partially pivoted LU.

    Raises ``SingularMatrixError`` when a pivot falls below
    ``n * eps * max|A|``.
    """
    from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

    A = _square(A, "A")
    Bm = np.asarray(B, dtype=float)
    vector = Bm.ndim == 1
    Bm = Bm.reshape(A.shape[0], -1) if vector else as_matrix(Bm, "B")
    if Bm.shape[0] != A.shape[0]:
        raise LinalgError(f"dimension mismatch: A is {A.shape}, B is {Bm.shape}")
    n = A.shape[0]
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("matrix is zero")
    with warnings.catch_warnings():
        # an exactly zero pivot is reported below as SingularMatrixError
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) <= n * _EPS * scale:
        raise SingularMatrixError(f"pivot {np.min(pivots):.3g} below working precision")
    X = lu_solve((lu, piv), Bm, check_finite=False)
    if vector:
        X = X.ravel()
    if return_residual:
        R = A @ X - (Bm.ravel() if vector else Bm)
        return X, float(np.max(np.abs(R))) if R.size else 0.0
    return X


def symmetrize(S) -> np.ndarray:
    A = _square(S)
    return 0.5 * (A + A.T)


def symmetric_negdef_check(S, margin: float = 0.0) -> bool:
    """True iff ``lambda_max(S) < -margin``, decided by a Cholesky factorisation."""
    A = symmetrize(S)
    n = A.shape[0]
    try:
        np.linalg.cholesky(-(A + margin * np.eye(n)))
    except np.linalg.LinAlgError:
        return False
    return True


def max_eigenvalue_sym(S) -> float:
    return float(np.linalg.eigvalsh(symmetrize(S))[-1])
