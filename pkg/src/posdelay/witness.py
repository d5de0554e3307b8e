"""Diagonal Lyapunov/Riccati witnesses: assembly, verification, construction.

Every matrix inequality handled here is affine in positive diagonal unknowns
and, for positive data, its matrix is symmetric Metzler. For such an ``L``,
``L < 0`` holds iff ``L v < 0`` for some ``v > 0``. Construction exploits
this: pick ``v`` from the steady-state signals of the system at the critical
input, then the unknowns solve a strict LP. Verification never relies on that
argument; it is a Cholesky factorisation of the assembled matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import block_diag

from .linalg import (
    metzler_perron_vectors,
    perron_vectors,
    solve_linear,
    spectral_abscissa_metzler,
    spectral_radius_nonneg,
    symmetric_negdef_check,
    symmetrize,
    SingularMatrixError,
)
from .lp import LpResult, StrictLP, solve_strict_lp
from .lp import equilibrate as equilibrate_lp

DEFAULT_MARGIN = 1e-9
_V_FLOOR = 1e-15


class WitnessError(ValueError):
    pass


@dataclass(frozen=True)
class VarBlock:
    """A diagonal unknown: ``size`` free entries, each repeated ``repeat`` times."""

    name: str
    size: int
    repeat: int = 1

    @property
    def dim(self) -> int:
        return self.size * self.repeat


@dataclass(eq=False)
class LmiSpec:
    name: str
    blocks: tuple[VarBlock, ...]
    builder: Callable[[dict[str, np.ndarray]], np.ndarray]
    guess: Callable[[], np.ndarray | None] | None = None
    precheck: Callable[[], str | None] | None = None  # returns a failure reason
    params: dict = field(default_factory=dict)

    @property
    def nvars(self) -> int:
        return sum(b.size for b in self.blocks)

    def split(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        out, k = {}, 0
        for b in self.blocks:
            out[b.name] = np.asarray(theta[k : k + b.size], dtype=float)
            k += b.size
        return out

    def expand(self, values: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        return {b.name: np.repeat(np.asarray(values[b.name], dtype=float), b.repeat) for b in self.blocks}

    def assemble(self, values: dict[str, np.ndarray] | np.ndarray) -> np.ndarray:
        if not isinstance(values, dict):
            values = self.split(np.asarray(values, dtype=float))
        return symmetrize(self.builder(self.expand(values)))


@dataclass(frozen=True, eq=False)
class RiccatiWitness:
    """Positive diagonal unknowns keyed by block name (``P``, ``Q1``, ``R1``, ``D1`` ...)."""

    spec: str
    values: dict[str, np.ndarray]
    margin: float = 0.0

    @property
    def P(self) -> np.ndarray | None:
        return self.values.get("P")

    def _family(self, prefix: str) -> list[np.ndarray]:
        keys = sorted((k for k in self.values if k[0] == prefix and k[1:].isdigit()), key=lambda k: int(k[1:]))
        return [self.values[k] for k in keys]

    @property
    def Q(self) -> list[np.ndarray]:
        return self._family("Q") or self._family("D")

    @property
    def R(self) -> list[np.ndarray]:
        return self._family("R")

    def scaled(self, alpha: float) -> "RiccatiWitness":
        return RiccatiWitness(self.spec, {k: alpha * v for k, v in self.values.items()}, self.margin)

    def to_dict(self) -> dict:
        return {"spec": self.spec, "blocks": {k: v.tolist() for k, v in self.values.items()}, "margin": self.margin}

    @classmethod
    def from_dict(cls, d: dict) -> "RiccatiWitness":
        return cls(d["spec"], {k: np.asarray(v, dtype=float) for k, v in d["blocks"].items()}, float(d.get("margin", 0.0)))


@dataclass(frozen=True)
class NotFound:
    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class WitnessCheck:
    ok: bool
    max_eig: float
    margin: float

    def __bool__(self) -> bool:
        return self.ok


def _as_diag_vector(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 2:
        if a.shape[0] != a.shape[1] or np.any(a - np.diag(np.diag(a))):
            raise WitnessError(f"{name}: witness blocks must be diagonal")
        a = np.diag(a)
    return a.ravel()


def equilibrate(L: np.ndarray) -> np.ndarray | None:
    """``D L D`` with ``D = diag(|L_ii|^-1/2)``, or ``None`` if some ``L_ii >= 0``.

    A congruence, so definiteness is unchanged; a margin on the result is a
    margin relative to each row's own scale.
    """
    d = np.diag(L)
    if np.any(d >= 0):
        return None
    r = 1.0 / np.sqrt(-d)
    return symmetrize(L * np.outer(r, r))


def verify_witness(
    spec: LmiSpec, w: RiccatiWitness | dict, margin: float | None = None, rel_margin: float = DEFAULT_MARGIN
) -> WitnessCheck:
    """Assemble the block matrix and test negative definiteness by Cholesky.

    With an absolute ``margin`` the test is ``lambda_max(L) < -margin``.
    Otherwise it is ``lambda_max(D L D) < -rel_margin`` on the Jacobi
    equilibrated matrix, and ``max_eig`` reports on that matrix too.
    """
    values = w.values if isinstance(w, RiccatiWitness) else w
    vals = {}
    for b in spec.blocks:
        if b.name not in values:
            raise WitnessError(f"witness lacks block {b.name!r}")
        v = _as_diag_vector(values[b.name], b.name)
        if v.size != b.size:
            raise WitnessError(f"block {b.name!r}: expected {b.size} entries, got {v.size}")
        vals[b.name] = v
    extra = set(values) - {b.name for b in spec.blocks}
    if extra:
        raise WitnessError(f"unexpected witness blocks {sorted(extra)}")
    if any(np.any(~np.isfinite(v)) or np.any(v <= 0) for v in vals.values()):
        return WitnessCheck(False, np.nan, 0.0)
    L = spec.assemble(vals)
    if margin is not None:
        m = float(margin)
        top = float(np.linalg.eigvalsh(L)[-1]) if L.size else -np.inf
        return WitnessCheck(symmetric_negdef_check(L, m), top, m)
    S = equilibrate(L)
    if S is None:
        return WitnessCheck(False, float(np.max(np.diag(L))), rel_margin)
    top = float(np.linalg.eigvalsh(S)[-1]) if S.size else -np.inf
    return WitnessCheck(symmetric_negdef_check(S, rel_margin), top, rel_margin)


def _positive(v: np.ndarray, floor: float = _V_FLOOR) -> np.ndarray:
    v = np.abs(np.asarray(v, dtype=float))
    top = float(np.max(v)) if v.size else 0.0
    if top <= 0 or not np.isfinite(top):
        return np.ones_like(v)
    v = v / top
    return np.maximum(v, floor)


def _theta_lp(spec: LmiSpec, v: np.ndarray, delta: float):
    """Columns ``L_k v`` of the affine family; solve for (t, theta) > 0."""
    K = spec.nvars
    zero = spec.assemble(np.zeros(K))
    cols = [zero @ v]
    eye = np.eye(K)
    for k in range(K):
        cols.append(spec.assemble(eye[k]) @ v - cols[0])
    G = np.column_stack(cols) / v[:, None]
    # unknowns that only ever enter with a negative sign can be made as large
    # as needed afterwards; leaving them out keeps the LP well scaled
    damp = np.zeros(K + 1, dtype=bool)
    damp[1:] = np.all(G[:, 1:] <= 0, axis=0) & np.any(G[:, 1:] < 0, axis=0)
    rows = ~np.any(G[:, damp] < 0, axis=1)
    core = ~damp
    x = np.zeros(K + 1)
    if rows.any():
        Gc, col = equilibrate_lp(G[rows][:, core])
        res = solve_strict_lp(StrictLP(Gc), delta)
        x[core] = res.best_x * col
    else:
        res = LpResult("feasible", np.ones(int(core.sum())), np.inf, delta, 0, np.ones(int(core.sum())))
        x[core] = 1.0
    if damp.any():
        a = G[~rows][:, core] @ x[core]
        b = -G[~rows][:, damp].sum(axis=1)
        size = np.abs(G[~rows][:, core]).sum(axis=1) * np.max(np.abs(x[core]))
        x[damp] = max(float(np.max((2.0 * np.maximum(a, 0.0) + size) / b)), float(np.max(np.abs(x[core]))))
    theta = x[1:] / x[0]
    return res, theta


def construct_witness(
    spec: LmiSpec,
    rounds: int = 6,
    delta: float = 1e-10,
    margin: float | None = None,
    rel_margin: float = DEFAULT_MARGIN,
) -> RiccatiWitness | NotFound:
    """Best-effort search; every returned witness has passed ``verify_witness``."""
    if spec.precheck is not None:
        reason = spec.precheck()
        if reason:
            return NotFound(reason)
    v = spec.guess() if spec.guess is not None else None
    dim = spec.assemble(np.ones(spec.nvars)).shape[0]
    if v is None or v.size != dim:
        v = np.ones(dim)
    v = _positive(v)
    best_reason = "construction failed"
    for _ in range(max(1, rounds)):
        res, theta = _theta_lp(spec, v, delta)
        if np.all(np.isfinite(theta)) and np.all(theta > 0):
            values = spec.split(theta)
            if res.best_x[0] > 0 and not np.any(spec.assemble(np.zeros(spec.nvars))):
                # homogeneous family: normalise the witness scale
                peak = max(float(np.max(x)) for x in values.values())
                values = {k: x / peak for k, x in values.items()}
            check = verify_witness(spec, values, margin, rel_margin)
            if check.ok:
                return RiccatiWitness(spec.name, values, -check.max_eig)
            best_reason = f"candidate failed verification (max eigenvalue {check.max_eig:.3g})"
            L = spec.assemble(values)
        else:
            best_reason = "LP for the diagonal unknowns infeasible"
            L = spec.assemble(np.where(theta > 0, theta, 1e-12))
        if res.status == "infeasible" and res.slack < -0.5:
            break
        _, vecs = np.linalg.eigh(L)
        v = _positive(0.5 * _positive(vecs[:, -1]) + 0.5 * v)
    return NotFound(best_reason)


# ---------------------------------------------------------------- helpers


def _row(mats) -> np.ndarray:
    return np.hstack(list(mats))


def _col(mats) -> np.ndarray:
    return np.vstack(list(mats))


def _hurwitz_reason(M: np.ndarray, label: str) -> str | None:
    if M.size == 0:
        return None
    if spectral_abscissa_metzler(M) >= 0:
        return f"spectral condition fails: {label} is not Hurwitz"
    return None


def _schur_reason(M: np.ndarray, label: str) -> str | None:
    if M.size and spectral_radius_nonneg(np.clip(M, 0, None)) >= 1:
        return f"spectral condition fails: rho({label}) >= 1"
    return None


def _gap(sigma: float, gamma: float) -> float:
    return max(gamma / sigma - 1.0, 0.0) if sigma > 0 else 1.0


def _dc_signals(solve: Callable[[np.ndarray], np.ndarray], B: np.ndarray, C: np.ndarray, D: np.ndarray, gamma: float):
    """Strictly positive steady-state signals ``(u, x, y)`` at level ``gamma``.

    ``solve(r)`` returns the steady state driven by ``r``. With ``H`` the DC
    gain, ``(y, u)`` is the Perron vector of ``[[0, H], [H', 0]] + eps J``,
    which gives ``H u < gamma y`` and ``H' y < gamma u`` with a slack of
    ``eps * sum`` in every row. ``x`` is driven by ``B u`` plus a uniform
    push small enough to stay inside that slack.
    """
    ny, nu = D.shape
    H = np.clip(C @ solve(B) + D, 0.0, None)
    sigma = float(np.sqrt(spectral_radius_nonneg(H.T @ H))) if H.size and np.any(H) else 0.0
    if sigma > 0:
        eps = 0.1 * min(_gap(sigma, gamma), 1.0) * sigma / (nu + ny)
        eps = max(eps, 1e-14 * sigma)
        K = np.block([[np.zeros((ny, ny)), H], [H.T, np.zeros((nu, nu))]]) + eps
        w = perron_vectors(K).right
        w = w / np.max(w)
        y, u = w[:ny], w[ny:]
        room = eps * float(np.sum(w))
    else:
        u, y = np.ones(nu), np.ones(ny)
        room = gamma
    bump = C @ solve(np.ones(B.shape[0])) if C.size else np.zeros(0)
    peak = float(np.max(bump, initial=0.0))
    beta = 0.5 * room / peak if peak > 0 else max(float(np.max(B @ u, initial=0.0)), 1.0)
    x = solve(B @ u + beta)
    return u, x, y, min(beta, room)


# ---------------------------------------------------------------- stability specs


def riccati_spec(A0, A_list, name: str = "diagonal_riccati") -> LmiSpec:
    """``[[A0'P + P A0 + sum Q_i, P A_1 ... P A_N], [*, -diag(Q_i)]] < 0``.

    Schur-equivalent to ``A0'P + P A0 + sum(Q_i + P A_i Q_i^-1 A_i' P) < 0``.
    """
    A0 = np.asarray(A0, dtype=float)
    A_list = [np.asarray(A, dtype=float) for A in A_list]
    n, N = A0.shape[0], len(A_list)
    blocks = (VarBlock("P", n),) + tuple(VarBlock(f"Q{i + 1}", n) for i in range(N))

    def build(vals):
        P = np.diag(vals["P"])
        Qs = [np.diag(vals[f"Q{i + 1}"]) for i in range(N)]
        top = A0.T @ P + P @ A0 + sum(Qs, np.zeros((n, n)))
        if not N:
            return top
        first = np.hstack([top] + [P @ A for A in A_list])
        rest = np.hstack([_col([A.T @ P for A in A_list]), block_diag(*[-Q for Q in Qs])])
        return np.vstack([first, rest])

    Acl = A0 + sum(A_list, np.zeros((n, n)))

    def guess():
        # any x > 0 with Acl x < 0 will do; this one is well scaled
        x = solve_linear(-Acl, np.ones(n))
        return np.tile(x, N + 1)

    return LmiSpec(name, blocks, build, guess, lambda: _hurwitz_reason(Acl, "A0 + sum A_i"))


def riccati_residual(A0, A_list, P, Q_list) -> np.ndarray:
    """The non-block form ``A0'P + P A0 + sum(Q_i + P A_i Q_i^-1 A_i' P)``."""
    A0 = np.asarray(A0, dtype=float)
    P = np.diag(np.asarray(P, dtype=float))
    out = A0.T @ P + P @ A0
    for A, q in zip(A_list, Q_list):
        q = np.asarray(q, dtype=float)
        out = out + np.diag(q) + P @ A @ np.diag(1.0 / q) @ A.T @ P
    return out


def difference_lmi_spec(A_list, name: str = "difference_lmi") -> LmiSpec:
    """``[[-Q, calA' Q], [Q calA, -Q]] < 0`` with ``calA = (1_N kron I) [A_1 ... A_N]``."""
    A_list = [np.asarray(A, dtype=float) for A in A_list]
    n, N = A_list[0].shape[0], len(A_list)
    calA = np.kron(np.ones((N, 1)), _row(A_list))
    blocks = tuple(VarBlock(f"Q{i + 1}", n) for i in range(N))

    def build(vals):
        Q = np.diag(np.concatenate([vals[f"Q{i + 1}"] for i in range(N)]))
        return np.block([[-Q, calA.T @ Q], [Q @ calA, -Q]])

    def guess():
        r = solve_linear(np.eye(calA.shape[0]) - calA, np.ones(calA.shape[0]))
        return np.concatenate([r, r])

    return LmiSpec(name, blocks, build, guess, lambda: _schur_reason(sum(A_list), "sum A_i"))


def kyp_spec(lft, name: str = "scaled_kyp") -> LmiSpec:
    """Scaled positive KYP inequality for ``(A, E, C, F)`` with block-diagonal scaling ``D``:
    ``[[A'P + PA, PE, C'D], [E'P, -D, F'D], [DC, DF, -D]] < 0``."""
    A, E, C, F = lft.A, lft.E, lft.C, lft.F
    n, q = A.shape[0], F.shape[0]
    blocks: list[VarBlock] = [VarBlock("P", n)] if n else []
    for i, b in enumerate(lft.blocks):
        blocks.append(VarBlock(f"D{i + 1}", b.size) if b.diagonal else VarBlock(f"D{i + 1}", 1, b.size))
    nb = len(lft.blocks)

    def build(vals):
        D = np.diag(np.concatenate([vals[f"D{i + 1}"] for i in range(nb)]))
        if n == 0:
            return np.block([[-D, F.T @ D], [D @ F, -D]])
        P = np.diag(vals["P"])
        return np.block(
            [
                [A.T @ P + P @ A, P @ E, C.T @ D],
                [E.T @ P, -D, F.T @ D],
                [D @ C, D @ F, -D],
            ]
        )

    def static():
        return lft.static_gain()

    def precheck():
        r = _hurwitz_reason(A, "A")
        if r:
            return r
        return _schur_reason(static(), "static gain")

    def guess():
        # w: Perron vector of M + eps J, so M w < w with room eps * sum(w) per row
        M = np.clip(static(), 0.0, None)
        q_ = M.shape[0]
        rho = spectral_radius_nonneg(M) if np.any(M) else 0.0
        eps = 0.1 * max(1.0 - rho, 1e-12) / q_
        w = perron_vectors(M + eps).right
        w = w / np.max(w)
        if n == 0:
            return np.concatenate([w, w])
        room = eps * float(np.sum(w))
        peak = float(np.max(C @ solve_linear(-A, np.ones(n)), initial=0.0))
        beta = 0.5 * room / peak if peak > 0 else 1.0
        x = solve_linear(-A, E @ w + beta)
        return np.concatenate([x, w, w])

    return LmiSpec(name, tuple(blocks), build, guess, precheck)


# ---------------------------------------------------------------- performance specs


def delay_performance_spec(A0, A_list, Eu, C0, C_list, Fu, gamma, rates=None, name="delay_bounded_real") -> LmiSpec:
    """Bounded-real inequality for ``x' = A0 x + sum A_i x(t-h_i) + Eu u``:

    ``[[A0'P+PA0+sum Q_i, P A_i, P Eu, C0'], [*, -diag((1-eta_i) Q_i), 0, C_i'],
    [*, *, -gamma I, Fu'], [*, *, *, -gamma I]] < 0``.
    """
    A0, Eu, C0, Fu = (np.asarray(M, dtype=float) for M in (A0, Eu, C0, Fu))
    A_list = [np.asarray(A, dtype=float) for A in A_list]
    C_list = [np.asarray(C, dtype=float) for C in C_list]
    n, N, nu, ny = A0.shape[0], len(A_list), Eu.shape[1], C0.shape[0]
    s = np.ones(N) if rates is None else 1.0 - np.asarray(rates, dtype=float)
    gamma = float(gamma)
    blocks = (VarBlock("P", n),) + tuple(VarBlock(f"Q{i + 1}", n) for i in range(N))

    def build(vals):
        P = np.diag(vals["P"])
        Qs = [np.diag(vals[f"Q{i + 1}"]) for i in range(N)]
        Z = np.zeros
        r1 = [A0.T @ P + P @ A0 + sum(Qs, Z((n, n)))] + [P @ A for A in A_list] + [P @ Eu, C0.T]
        rows = [np.hstack(r1)]
        for i in range(N):
            r = [A_list[i].T @ P]
            r += [-s[i] * Qs[i] if j == i else Z((n, n)) for j in range(N)]
            r += [Z((n, nu)), C_list[i].T]
            rows.append(np.hstack(r))
        rows.append(np.hstack([Eu.T @ P] + [Z((nu, n))] * N + [-gamma * np.eye(nu), Fu.T]))
        rows.append(np.hstack([C0] + C_list + [Fu, -gamma * np.eye(ny)]))
        return np.vstack(rows)

    c = 1.0 / np.sqrt(s)
    Acl = A0 + sum((ci * A for ci, A in zip(c, A_list)), np.zeros((n, n)))
    Ccl = C0 + sum((ci * C for ci, C in zip(c, C_list)), np.zeros((ny, n)))

    def guess():
        u, x, y, _ = _dc_signals(lambda r: solve_linear(-Acl, r), Eu, Ccl, Fu, gamma)
        return np.concatenate([x] + [ci * x for ci in c] + [u, y])

    return LmiSpec(name, blocks, build, guess, lambda: _hurwitz_reason(Acl, "closed-loop matrix"), {"gamma": gamma})


def difference_performance_spec(A_list, Eu, C_list, Fu, gamma, rates=None, name="difference_bounded_real") -> LmiSpec:
    """``[[-Q_s, 0, calA'Q, calC'], [0, -gamma I, calE'Q, Fu'], [Q calA, Q calE, -Q, 0], [calC, Fu, 0, -gamma I]] < 0``
    with ``calE = 1_N kron Eu``, ``calC = [C_1 ... C_N]`` and ``Q_s = diag((1-eta_i) Q_i)``."""
    A_list = [np.asarray(A, dtype=float) for A in A_list]
    C_list = [np.asarray(C, dtype=float) for C in C_list]
    Eu, Fu = np.asarray(Eu, dtype=float), np.asarray(Fu, dtype=float)
    n, N, nu, ny = A_list[0].shape[0], len(A_list), Eu.shape[1], Fu.shape[0]
    s = np.ones(N) if rates is None else 1.0 - np.asarray(rates, dtype=float)
    gamma = float(gamma)
    calA = np.kron(np.ones((N, 1)), _row(A_list))
    calE = np.kron(np.ones((N, 1)), Eu)
    calC = _row(C_list)
    blocks = tuple(VarBlock(f"Q{i + 1}", n) for i in range(N))

    def build(vals):
        q = np.concatenate([vals[f"Q{i + 1}"] for i in range(N)])
        Q = np.diag(q)
        Qs = np.diag(q * np.repeat(s, n))
        Z = np.zeros
        return np.block(
            [
                [-Qs, Z((N * n, nu)), calA.T @ Q, calC.T],
                [Z((nu, N * n)), -gamma * np.eye(nu), calE.T @ Q, Fu.T],
                [Q @ calA, Q @ calE, -Q, Z((N * n, ny))],
                [calC, Fu, Z((ny, N * n)), -gamma * np.eye(ny)],
            ]
        )

    c = 1.0 / np.sqrt(s)
    calA_c = np.kron(np.ones((N, 1)), _row([ci * A for ci, A in zip(c, A_list)]))
    calC_c = _row([ci * C for ci, C in zip(c, C_list)])

    def guess():
        I = np.eye(N * n)
        u, b, y, _ = _dc_signals(lambda r: solve_linear(I - calA_c, r), calE, calC_c, Fu, gamma)
        a = b * np.repeat(c, n)
        return np.concatenate([a, u, b, y])

    def precheck():
        return _schur_reason(sum(ci * A for ci, A in zip(c, A_list)), "sum A_i")

    return LmiSpec(name, blocks, build, guess, precheck, {"gamma": gamma})


def channel_performance_spec(A, Ew, Eu, Cz, Fzw, Fzu, Cy, Fyw, Fu, groups, gamma, precheck=None, name="channel_bounded_real") -> LmiSpec:
    """Bounded-real inequality for a positive core ``x' = A x + Ew w + Eu u``,
    ``z = Cz x + Fzw w + Fzu u``, ``y = Cy x + Fyw w + Fu u`` closed by delays ``w = z(t - h)``:

    ``[[A'P+PA, P Ew, P Eu, Cz'D, Cy'], [*, -S D, 0, Fzw'D, Fyw'], [*, *, -gamma I, Fzu'D, Fu'],
       [*, *, *, -D, 0], [*, *, *, *, -gamma I]] < 0``.

    ``groups`` lists ``(name, size, s)`` in channel order; each group gets a
    diagonal block ``name`` and the factor ``s = 1 - eta`` (1 for constant
    delays). Channels whose ``z`` row vanishes identically carry no signal
    and are dropped, together with their entries of ``D``; the inequality
    holds with them iff it holds as those entries grow without bound.
    ``params["support"]`` records the retained channel indices per group.
    """
    A, Ew, Eu, Cz, Fzw, Fzu, Cy, Fyw, Fu = (np.asarray(M, dtype=float) for M in (A, Ew, Eu, Cz, Fzw, Fzu, Cy, Fyw, Fu))
    n, nu, ny = A.shape[0], Eu.shape[1], Fu.shape[0]
    gamma = float(gamma)
    keep = np.ones(Cz.shape[0], dtype=bool)
    while True:
        live = keep & (np.any(Cz != 0, axis=1) | np.any(Fzw[:, keep] != 0, axis=1) | np.any(Fzu != 0, axis=1))
        if np.array_equal(live, keep):
            break
        keep = live
    blocks, support, scale, k0 = [], {}, [], 0
    for gname, size, sg in groups:
        idx = np.flatnonzero(keep[k0 : k0 + size])
        support[gname] = idx.tolist()
        if idx.size:
            blocks.append(VarBlock(gname, idx.size))
            scale.append(np.full(idx.size, float(sg)))
        k0 += size
    Ew, Cz, Fzw, Fzu, Fyw = Ew[:, keep], Cz[keep], Fzw[keep][:, keep], Fzu[keep], Fyw[:, keep]
    m = int(keep.sum())
    sw = np.concatenate(scale) if scale else np.zeros(0)
    blocks = ((VarBlock("P", n),) if n else ()) + tuple(blocks)
    names = [b.name for b in blocks if b.name != "P"]

    def build(vals):
        d = np.concatenate([vals[k] for k in names] or [np.zeros(0)])
        D, Dw = np.diag(d), np.diag(d * sw)
        P = np.diag(vals["P"]) if n else np.zeros((0, 0))
        Z = np.zeros
        return np.block(
            [
                [A.T @ P + P @ A, P @ Ew, P @ Eu, Cz.T @ D, Cy.T],
                [Ew.T @ P, -Dw, Z((m, nu)), Fzw.T @ D, Fyw.T],
                [Eu.T @ P, Z((nu, m)), -gamma * np.eye(nu), Fzu.T @ D, Fu.T],
                [D @ Cz, D @ Fzw, D @ Fzu, -D, Z((m, ny))],
                [Cy, Fyw, Fu, Z((ny, m)), -gamma * np.eye(ny)],
            ]
        )

    c = 1.0 / np.sqrt(sw)
    # steady state of (x, z) with w = c z
    Msum = np.block([[A, Ew * c], [Cz, Fzw * c - np.eye(m)]])

    def guess():
        u, xz, y, _ = _dc_signals(lambda r: solve_linear(-Msum, r), _col([Eu, Fzu]), _row([Cy, Fyw * c]), Fu, gamma)
        x, z = xz[:n], xz[n:]
        return np.concatenate([x, c * z, u, z, y])

    if precheck is None:
        precheck = lambda: _hurwitz_reason(Msum, "lifted steady-state matrix")  # noqa: E731
    return LmiSpec(name, blocks, build, guess, precheck, {"gamma": gamma, "support": support})


def coupled_performance_spec(sys, gamma, rates=None, name="coupled_bounded_real") -> LmiSpec:
    """Bounded-real inequality for the coupled differential-difference class with
    storage ``x1'P x1 + sum int x2' Q_i x2``; channel ``i`` carries ``x2`` delayed by ``h_i``."""
    N, n2 = len(sys.terms), sys.n2
    s = np.ones(N) if rates is None else 1.0 - np.asarray(rates, dtype=float)
    ones = np.ones((N, 1))
    groups = [(f"Q{i + 1}", n2, s[i]) for i in range(N)]
    return channel_performance_spec(
        sys.A0,
        _row(t.A for t in sys.terms),
        sys.E1,
        np.kron(ones, sys.C0),
        np.kron(ones, _row(t.C for t in sys.terms)),
        np.kron(ones, sys.E2),
        sys.Cy0,
        _row(t.Cy for t in sys.terms),
        sys.Fu,
        groups,
        gamma,
        name=name,
    )


def kernel_performance_spec(A0, Abar, Eu, C0, Cbar, Fu, gamma, name="kernel_bounded_real") -> LmiSpec:
    """Bounded-real inequality for distributed kernels with masses ``Abar_i``, ``Cbar_i``:

    ``[[A0'P+PA0+sum Abar_i'Q_i Abar_i+sum Cbar_i'R_i Cbar_i, 1'kron P, 0, P Eu, C0'],
       [*, -diag Q_i, 0, 0, 0], [*, *, -diag R_i, 0, 1 kron I],
       [*, *, *, -gamma I, Fu'], [*, *, *, *, -gamma I]] < 0``.

    Entries of ``Q_i`` (``R_i``) facing a zero row of ``Abar_i`` (``Cbar_i``)
    are dropped: their channel carries no signal and the inequality holds
    with them iff it holds in the limit where they grow without bound.
    ``params["support"]`` records the retained rows.
    """
    A0, Eu, C0, Fu = (np.asarray(M, dtype=float) for M in (A0, Eu, C0, Fu))
    Abar = [np.asarray(A, dtype=float) for A in Abar]
    Cbar = [np.asarray(C, dtype=float) for C in Cbar]
    n, N, nu, ny = A0.shape[0], len(Abar), Eu.shape[1], C0.shape[0]
    gamma = float(gamma)
    q_rows = [np.flatnonzero(np.any(A != 0, axis=1)) for A in Abar]
    r_rows = [np.flatnonzero(np.any(C != 0, axis=1)) for C in Cbar]
    blocks = (
        (VarBlock("P", n),)
        + tuple(VarBlock(f"Q{i + 1}", len(q_rows[i])) for i in range(N) if len(q_rows[i]))
        + tuple(VarBlock(f"R{i + 1}", len(r_rows[i])) for i in range(N) if len(r_rows[i]))
    )
    chans = [("Q", i, q_rows[i]) for i in range(N) if len(q_rows[i])]
    outs = [("R", i, r_rows[i]) for i in range(N) if len(r_rows[i])]
    mq = sum(len(c[2]) for c in chans)
    mr = sum(len(c[2]) for c in outs)
    Iy = np.eye(ny)
    to_y = np.hstack([Iy[:, rows] for _, _, rows in outs]) if outs else np.zeros((ny, 0))

    def build(vals):
        P = np.diag(vals["P"])
        Z = np.zeros
        top = A0.T @ P + P @ A0
        for _, i, rows in chans:
            top = top + Abar[i][rows].T @ np.diag(vals[f"Q{i + 1}"]) @ Abar[i][rows]
        for _, i, rows in outs:
            top = top + Cbar[i][rows].T @ np.diag(vals[f"R{i + 1}"]) @ Cbar[i][rows]
        rowP = np.hstack([P[:, rows] for _, _, rows in chans]) if chans else Z((n, 0))
        Qd = np.diag(np.concatenate([vals[f"Q{i + 1}"] for _, i, _ in chans] or [Z(0)]))
        Rd = np.diag(np.concatenate([vals[f"R{i + 1}"] for _, i, _ in outs] or [Z(0)]))
        return np.block(
            [
                [top, rowP, Z((n, mr)), P @ Eu, C0.T],
                [rowP.T, -Qd, Z((mq, mr)), Z((mq, nu)), Z((mq, ny))],
                [Z((mr, n)), Z((mr, mq)), -Rd, Z((mr, nu)), to_y.T],
                [Eu.T @ P, Z((nu, mq)), Z((nu, mr)), -gamma * np.eye(nu), Fu.T],
                [C0, Z((ny, mq)), to_y, Fu, -gamma * np.eye(ny)],
            ]
        )

    Acl = A0 + sum(Abar, np.zeros((n, n)))
    Ccl = C0 + sum(Cbar, np.zeros((ny, n)))

    def guess():
        u, x, y, _ = _dc_signals(lambda r: solve_linear(-Acl, r), Eu, Ccl, Fu, gamma)
        w = [Abar[i][rows] @ x for _, i, rows in chans] + [Cbar[i][rows] @ x for _, i, rows in outs]
        return np.concatenate([x] + w + [u, y])

    params = {"gamma": gamma, "support": {"Q": [r.tolist() for r in q_rows], "R": [r.tolist() for r in r_rows]}}
    return LmiSpec(name, blocks, build, guess, lambda: _hurwitz_reason(Acl, "A0 + sum Abar_i"), params)


def neutral_lifted_performance(sys) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Delay-free core of a neutral system with input/output channels.

    Channels ``w = (w1, w2, u)`` and ``z = (z1, z2, y)`` where ``z1_i = Ar_i x + An_i x'``
    and ``z2_i = Cr_i x + Cn_i x'`` are delayed by ``h_i`` to give ``w1_i``, ``w2_i``.
    """
    A0, Eu, C0, Fu = sys.A0, sys.Eu, sys.C0, sys.Fu
    n, N, nu, ny = sys.n, len(sys.terms), sys.n_u, sys.n_y
    Z = np.zeros
    E = np.hstack([np.kron(np.ones((1, N)), np.eye(n)), Z((n, N * ny)), Eu])
    C = np.vstack(
        [np.vstack([t.An @ A0 + t.Ar for t in sys.terms]), np.vstack([t.Cn @ A0 + t.Cr for t in sys.terms]), C0]
    )
    F = np.vstack(
        [
            np.hstack([np.vstack([np.kron(np.ones((1, N)), t.An) for t in sys.terms]), Z((N * n, N * ny)), np.vstack([t.An @ Eu for t in sys.terms])]),
            np.hstack([np.vstack([np.kron(np.ones((1, N)), t.Cn) for t in sys.terms]), Z((N * ny, N * ny)), np.vstack([t.Cn @ Eu for t in sys.terms])]),
            np.hstack([Z((ny, N * n)), np.kron(np.ones((1, N)), np.eye(ny)), Fu]),
        ]
    )
    return A0, E, C, F


def neutral_performance_spec(sys, gamma, rates=None, name="neutral_bounded_real") -> LmiSpec:
    """Bounded-real inequality on the lifted core of :func:`neutral_lifted_performance`,
    with blocks ``Q_i`` on the ``z1_i`` channels and ``R_i`` on the ``z2_i`` channels."""
    A, E, C, F = neutral_lifted_performance(sys)
    n, N, nu, ny = sys.n, len(sys.terms), sys.n_u, sys.n_y
    m = N * (n + ny)
    s = np.ones(N) if rates is None else 1.0 - np.asarray(rates, dtype=float)
    groups = [(f"Q{i + 1}", n, s[i]) for i in range(N)] + [(f"R{i + 1}", ny, s[i]) for i in range(N)]
    An_sum = sum((t.An for t in sys.terms), np.zeros((n, n)))
    As = sys.A0 + sum((t.Ar for t in sys.terms), np.zeros((n, n)))

    def precheck():
        r = _schur_reason(An_sum, "sum An_i")
        if r:
            return r
        try:
            return _hurwitz_reason(solve_linear(np.eye(n) - An_sum, As), "S^-1 (A0 + sum Ar_i)")
        except SingularMatrixError:
            return "spectral condition fails: S singular"

    return channel_performance_spec(
        A, E[:, :m], E[:, m:], C[:m], F[:m, :m], F[:m, m:], C[m:], F[m:, :m], F[m:, m:], groups, gamma, precheck, name
    )
