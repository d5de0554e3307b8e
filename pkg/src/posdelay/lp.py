"""Feasibility of strict homogeneous linear inequalities ``G x < 0``.

The strict system is compactified to the box ``delta <= x_i <= 1`` for
sign-constrained variables (``-1 <= x_i <= 1`` for free ones) and solved as
"maximise s subject to G x + s <= 0" with a dense bounded-tableau simplex.
Slack is measured relative to ``||G||_inf`` so verdicts are invariant under
positive rescaling of ``G``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

DEFAULT_DELTA = 1e-7
_PIVOT_TOL = 1e-12
_PIVOT_REL = 1e-9
_FEAS_TOL = 1e-11
_REFACTOR = 25
_MAX_PIVOTS = 50_000


class LPError(RuntimeError):
    """Internal failure of the simplex routine."""


@dataclass(frozen=True)
class StrictLP:
    """Find ``x`` with ``G x < 0`` and ``x_i > 0`` for ``i`` in ``positive``.

    ``positive=None`` constrains every variable.
    """

    G: np.ndarray
    positive: tuple[int, ...] | None = None

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.ndim != 2 or G.shape[1] < 1:
            raise ValueError(f"G must be a 2-D matrix with at least one column, got {G.shape}")
        if not np.all(np.isfinite(G)):
            raise ValueError("G has non-finite entries")
        object.__setattr__(self, "G", G)
        if self.positive is not None:
            idx = tuple(sorted(set(int(i) for i in self.positive)))
            if idx and (idx[0] < 0 or idx[-1] >= G.shape[1]):
                raise ValueError("positivity index out of range")
            object.__setattr__(self, "positive", idx)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.G.shape[1], dtype=bool)
        if self.positive is None:
            m[:] = True
        else:
            m[list(self.positive)] = True
        return m


@dataclass(frozen=True)
class LpResult:
    status: str  # "feasible", "marginal" or "infeasible"
    x: np.ndarray | None
    slack: float  # maximal attained -max(Gx) / ||G||_inf
    delta: float
    pivots: int = 0
    best_x: np.ndarray | None = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _g_scale(G: np.ndarray) -> float:
    s = float(np.max(np.abs(G).sum(axis=1))) if G.size else 0.0
    return s if s > 0 else 1.0


def _simplex_max(A: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, int]:
    """Maximise ``c z`` s.t. ``A z <= b``, ``z >= 0`` with ``b >= 0``.

    Dense tableau with Dantzig pricing, a Harris two-pass ratio test and a
    refactorisation from the original data every ``_REFACTOR`` pivots (and
    before accepting optimality), so rounding cannot accumulate into an
    infeasible basis. Switches to Bland's rule after a run of degenerate pivots.
    """
    m, k = A.shape
    full = np.hstack([A, np.eye(m)])
    cost = np.concatenate([c, np.zeros(m)])
    basis = np.arange(k, k + m)

    def rebuild() -> np.ndarray:
        lu = lu_factor(full[:, basis], check_finite=False)
        T = np.empty((m + 1, k + m + 1))
        T[:m, :-1] = lu_solve(lu, full, check_finite=False)
        T[:m, -1] = np.clip(lu_solve(lu, b, check_finite=False), 0.0, None)
        y = lu_solve(lu, cost[basis], trans=1, check_finite=False)
        T[m, :-1] = y @ full - cost
        T[m, -1] = y @ b
        return T

    T = rebuild()
    bland = False
    degenerate = 0
    since = 0
    for pivots in range(_MAX_PIVOTS):
        reduced = T[m, :-1]
        if bland:
            cand = np.flatnonzero(reduced < -_PIVOT_TOL)
            j = int(cand[0]) if cand.size else -1
        else:
            j = int(np.argmin(reduced))
            if reduced[j] >= -_PIVOT_TOL:
                j = -1
        if j < 0:
            if since == 0:
                break
            T, since = rebuild(), 0  # confirm optimality on fresh data
            continue
        col = T[:m, j]
        tol = _PIVOT_REL * max(1.0, float(np.max(np.abs(col))))
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            raise LPError("phase-1 problem unbounded; box constraints violated")
        rhs = T[rows, -1]
        # Harris: relax the bound slightly, then take the largest pivot inside it
        limit = float(np.min((rhs + _FEAS_TOL) / col[rows]))
        ok = rows[rhs / col[rows] <= limit]
        r = int(ok[np.argmax(col[ok])]) if not bland else int(ok[np.argmin(basis[ok])])
        step = max(T[r, -1], 0.0) / T[r, j]
        if step <= 1e-14:
            degenerate += 1
            if degenerate > 30:
                bland = True
        else:
            degenerate = 0
        T[r] /= T[r, j]
        colj = T[:, j].copy()
        colj[r] = 0.0
        T -= np.outer(colj, T[r])
        T[:m, -1] = np.clip(T[:m, -1], 0.0, None)
        basis[r] = j
        since += 1
        if since >= _REFACTOR:
            T, since = rebuild(), 0
    else:
        raise LPError("simplex pivot cap exceeded")
    z = np.zeros(k + m)
    z[basis] = T[:m, -1]
    return z[:k], pivots


def solve_strict_lp(lp: StrictLP, delta: float = DEFAULT_DELTA) -> LpResult:
    """Maximise the uniform slack of ``G x < 0`` over the box.

    ``feasible`` when the relative slack reaches ``delta``; ``marginal`` for a
    slack in ``[0, delta)``; ``infeasible`` otherwise. The maximiser is kept in
    ``best_x`` in every case.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    G = lp.G / _g_scale(lp.G)
    m, n = G.shape
    mask = lp.mask
    lo = np.where(mask, delta, -1.0)
    hi = np.ones(n)
    width = hi - lo
    if np.any(width < 0):
        raise ValueError("delta must not exceed the box bound 1")
    g_lo = G @ lo
    shift = max(0.0, float(np.max(g_lo))) if m else 0.0
    # z = (y, s') with x = lo + y, s = s' - shift
    A = np.vstack(
        [
            np.hstack([G, np.ones((m, 1))]),
            np.hstack([np.eye(n), np.zeros((n, 1))]),
        ]
    )
    b = np.concatenate([shift - g_lo, width])
    b = np.clip(b, 0.0, None)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    z, pivots = _simplex_max(A, b, c)
    x = lo + np.clip(z[:n], 0.0, width)
    slack = -float(np.max(G @ x)) if m else np.inf
    if slack >= delta:
        status = "feasible"
    elif slack >= 0.0:
        status = "marginal"
    else:
        status = "infeasible"
    return LpResult(status, x if status == "feasible" else None, slack, delta, pivots, x)


def equilibrate(G: np.ndarray, sweeps: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Ruiz scaling ``R G C`` with positive diagonal ``R``, ``C`` (returned: the
    scaled matrix and ``diag C``). ``G x < 0, x > 0`` iff ``R G C y < 0, y > 0``
    with ``x = C y``, so the scaled problem decides the same question with
    entries of comparable size.
    """
    G = np.array(G, dtype=float)
    col = np.ones(G.shape[1])
    if not G.size:
        return G, col
    for _ in range(sweeps):
        r = np.max(np.abs(G), axis=1)
        G = G / np.sqrt(np.where(r > 0, r, 1.0))[:, None]
        c = np.sqrt(np.max(np.abs(G), axis=0))
        c = np.where(c > 0, c, 1.0)
        G = G / c
        col = col / c
    return G, col


def verify_lp_certificate(G, x, delta: float, positive=None) -> bool:
    """Pure re-substitution: ``x_i >= delta`` on constrained indices and
    ``G x <= -delta * ||G||_inf`` row by row."""
    G = np.array(G, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if G.ndim != 2 or G.shape[1] != x.size:
        raise ValueError(f"dimension mismatch: G is {G.shape}, x has {x.size} entries")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(x))):
        return False
    mask = StrictLP(G, positive).mask
    if np.any(x[mask] < delta):
        return False
    return bool(np.all(G @ x <= -delta * _g_scale(G)))


def rowwise_negative(G, x) -> bool:
    """``(G x)_i < 0`` for every row, robust to the rounding of the product itself:
    each row must beat ``4 k eps (|G| |x|)_i``, a bound on its floating-point error."""
    G = np.asarray(G, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if G.shape[1] != x.size:
        raise ValueError(f"dimension mismatch: G is {G.shape}, x has {x.size} entries")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(x))):
        return False
    err = 4.0 * max(G.shape[1], 1) * np.finfo(float).eps * (np.abs(G) @ np.abs(x))
    return bool(np.all(G @ x < -err))
