"""System classes, positivity validation, LFT lifting and the JSON model format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .kernels import DelayKernel, KernelError, KernelPiece, KernelTerm

RATE_BOUND_MESSAGE = "rate bound must be < 1 for L1/L2 analyses; use type 'tv_unbounded_rate'"
CLASSES = ("lti", "discrete", "difference", "coupled", "distributed", "neutral")


class ModelError(ValueError):
    """Invalid model; ``path`` is a JSON pointer to the offending element."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


# ---------------------------------------------------------------- delays


@dataclass(frozen=True)
class DelaySpec:
    kind: str = "const"  # "const" | "tv" | "tv_unbounded_rate"
    h: float = 0.0
    h_bar: float = 0.0
    rate_bound: float | None = None

    def __post_init__(self):
        if self.kind not in ("const", "tv", "tv_unbounded_rate"):
            raise ModelError(f"unknown delay type {self.kind!r}", "/type")
        if self.kind == "const" and not (math.isfinite(self.h) and self.h >= 0):
            raise ModelError("delay h must be finite and >= 0", "/h")
        if self.kind != "const" and not (math.isfinite(self.h_bar) and self.h_bar >= 0):
            raise ModelError("h_bar must be finite and >= 0", "/h_bar")
        if self.kind == "tv":
            if self.rate_bound is None:
                raise ModelError("rate bound required for type 'tv'", "/rate_bound")
            if not (0 <= self.rate_bound < 1):
                raise ModelError(RATE_BOUND_MESSAGE, "/rate_bound")

    @classmethod
    def const(cls, h: float) -> "DelaySpec":
        return cls("const", h=float(h))

    @property
    def upper(self) -> float:
        return self.h if self.kind == "const" else self.h_bar

    @property
    def time_varying(self) -> bool:
        return self.kind != "const"

    def operator_gain(self, p: float) -> float:
        """L_p gain of the delay operator: 1 for constant delays or p = inf,
        ``(1 - eta)^(-1/p)`` for rate-bounded time-varying delays."""
        if self.kind == "const" or p == math.inf:
            return 1.0
        if self.kind == "tv_unbounded_rate":
            raise ModelError(f"rate bound required for p={int(p)}")
        return (1.0 - float(self.rate_bound)) ** (-1.0 / p)

    def to_dict(self) -> dict:
        if self.kind == "const":
            return {"type": "const", "h": self.h}
        if self.kind == "tv":
            return {"type": "tv", "h_bar": self.h_bar, "rate_bound": self.rate_bound}
        return {"type": "tv_unbounded_rate", "h_bar": self.h_bar}


# ---------------------------------------------------------------- helpers


def _mat(M, path: str) -> np.ndarray:
    A = np.array(M, dtype=float) if not isinstance(M, np.ndarray) else M.astype(float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ModelError(f"expected a nonempty matrix, got shape {A.shape}", path)
    if not np.all(np.isfinite(A)):
        raise ModelError("non-finite number", path)
    A.setflags(write=False)
    return A


def _shape(M: np.ndarray, rows: int | None, cols: int | None, path: str) -> None:
    if rows is not None and M.shape[0] != rows:
        raise ModelError(f"expected {rows} rows, got {M.shape[0]}", path)
    if cols is not None and M.shape[1] != cols:
        raise ModelError(f"expected {cols} columns, got {M.shape[1]}", path)


def _set(obj, name: str, value) -> None:
    object.__setattr__(obj, name, value)


# ---------------------------------------------------------------- classes


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """``x' = A x + E u``, ``y = C x + F u``."""

    A: np.ndarray
    E: np.ndarray
    C: np.ndarray
    F: np.ndarray
    kind = "lti"

    def __post_init__(self):
        for name in "AECF":
            _set(self, name, _mat(getattr(self, name), "/" + name))
        n = self.A.shape[0]
        _shape(self.A, n, n, "/A")
        _shape(self.E, n, None, "/E")
        _shape(self.C, None, n, "/C")
        _shape(self.F, self.C.shape[0], self.E.shape[1], "/F")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.E.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    def delays(self) -> list[DelaySpec]:
        return []


@dataclass(frozen=True, eq=False)
class DelayTerm:
    A: np.ndarray
    C: np.ndarray
    delay: DelaySpec


@dataclass(frozen=True, eq=False)
class DiscreteDelaySystem:
    """``x' = A0 x + sum A_i x(t - h_i) + Eu u``, ``y = C0 x + sum C_i x(t - h_i) + Fu u``."""

    A0: np.ndarray
    terms: tuple[DelayTerm, ...]
    Eu: np.ndarray
    C0: np.ndarray
    Fu: np.ndarray
    kind = "discrete"

    def __post_init__(self):
        _set(self, "A0", _mat(self.A0, "/A0"))
        n = self.A0.shape[0]
        _shape(self.A0, n, n, "/A0")
        _set(self, "Eu", _mat(self.Eu, "/Eu"))
        _shape(self.Eu, n, None, "/Eu")
        _set(self, "C0", _mat(self.C0, "/C0"))
        _shape(self.C0, None, n, "/C0")
        _set(self, "Fu", _mat(self.Fu, "/Fu"))
        _shape(self.Fu, self.n_y, self.n_u, "/Fu")
        terms = []
        for i, t in enumerate(self.terms):
            A = _mat(t.A, f"/terms/{i}/A")
            _shape(A, n, n, f"/terms/{i}/A")
            C = _mat(t.C, f"/terms/{i}/C")
            _shape(C, self.n_y, n, f"/terms/{i}/C")
            terms.append(DelayTerm(A, C, t.delay))
        _set(self, "terms", tuple(terms))

    n = property(lambda self: self.A0.shape[0])
    n_u = property(lambda self: self.Eu.shape[1])
    n_y = property(lambda self: self.C0.shape[0])

    def delays(self) -> list[DelaySpec]:
        return [t.delay for t in self.terms]


@dataclass(frozen=True, eq=False)
class DifferenceSystem:
    """``x(t) = sum A_i x(t - h_i) + Eu u``, ``y = sum C_i x(t - h_i) + Fu u``."""

    terms: tuple[DelayTerm, ...]
    Eu: np.ndarray
    Fu: np.ndarray
    kind = "difference"

    def __post_init__(self):
        if not self.terms:
            raise ModelError("a difference equation needs at least one term", "/terms")
        n = np.asarray(self.terms[0].A).shape[0]
        _set(self, "Eu", _mat(self.Eu, "/Eu"))
        _shape(self.Eu, n, None, "/Eu")
        _set(self, "Fu", _mat(self.Fu, "/Fu"))
        terms = []
        n_y = None
        for i, t in enumerate(self.terms):
            A = _mat(t.A, f"/terms/{i}/A")
            _shape(A, n, n, f"/terms/{i}/A")
            C = _mat(t.C, f"/terms/{i}/C")
            n_y = C.shape[0] if n_y is None else n_y
            _shape(C, n_y, n, f"/terms/{i}/C")
            if not t.delay.upper > 0:
                raise ModelError("difference equations need delays > 0", f"/terms/{i}/delay")
            terms.append(DelayTerm(A, C, t.delay))
        _shape(self.Fu, n_y, self.Eu.shape[1], "/Fu")
        _set(self, "terms", tuple(terms))

    n = property(lambda self: self.terms[0].A.shape[0])
    n_u = property(lambda self: self.Eu.shape[1])
    n_y = property(lambda self: self.Fu.shape[0])

    def delays(self) -> list[DelaySpec]:
        return [t.delay for t in self.terms]


@dataclass(frozen=True, eq=False)
class CoupledTerm:
    A: np.ndarray  # n x n2
    C: np.ndarray  # n2 x n2
    Cy: np.ndarray  # n_y x n2
    delay: DelaySpec


@dataclass(frozen=True, eq=False)
class CoupledSystem:
    """``x1' = A0 x1 + sum A_i x2(t-h_i) + E1 u``,
    ``x2 = C0 x1 + sum C_i x2(t-h_i) + E2 u``,
    ``y = Cy0 x1 + sum Cy_i x2(t-h_i) + Fu u``."""

    A0: np.ndarray
    C0: np.ndarray
    terms: tuple[CoupledTerm, ...]
    E1: np.ndarray
    E2: np.ndarray
    Cy0: np.ndarray
    Fu: np.ndarray
    kind = "coupled"

    def __post_init__(self):
        _set(self, "A0", _mat(self.A0, "/A0"))
        n = self.A0.shape[0]
        _shape(self.A0, n, n, "/A0")
        _set(self, "C0", _mat(self.C0, "/C0"))
        _shape(self.C0, None, n, "/C0")
        n2 = self.C0.shape[0]
        _set(self, "E1", _mat(self.E1, "/E1"))
        _shape(self.E1, n, None, "/E1")
        _set(self, "E2", _mat(self.E2, "/E2"))
        _shape(self.E2, n2, self.E1.shape[1], "/E2")
        _set(self, "Cy0", _mat(self.Cy0, "/Cy0"))
        _shape(self.Cy0, None, n, "/Cy0")
        _set(self, "Fu", _mat(self.Fu, "/Fu"))
        _shape(self.Fu, self.Cy0.shape[0], self.E1.shape[1], "/Fu")
        if not self.terms:
            raise ModelError("a coupled system needs at least one delayed term", "/terms")
        terms = []
        for i, t in enumerate(self.terms):
            A = _mat(t.A, f"/terms/{i}/A")
            _shape(A, n, n2, f"/terms/{i}/A")
            C = _mat(t.C, f"/terms/{i}/C")
            _shape(C, n2, n2, f"/terms/{i}/C")
            Cy = _mat(t.Cy, f"/terms/{i}/Cy")
            _shape(Cy, self.Cy0.shape[0], n2, f"/terms/{i}/Cy")
            if not t.delay.upper > 0:
                raise ModelError("coupled systems need delays > 0", f"/terms/{i}/delay")
            terms.append(CoupledTerm(A, C, Cy, t.delay))
        _set(self, "terms", tuple(terms))

    n = property(lambda self: self.A0.shape[0])
    n2 = property(lambda self: self.C0.shape[0])
    n_u = property(lambda self: self.E1.shape[1])
    n_y = property(lambda self: self.Cy0.shape[0])

    def delays(self) -> list[DelaySpec]:
        return [t.delay for t in self.terms]


@dataclass(frozen=True, eq=False)
class DistributedTerm:
    kernel: DelayKernel
    output_kernel: DelayKernel | None = None
    time_varying: bool = False  # window h(t) in [0, h_bar] rather than fixed


@dataclass(frozen=True, eq=False)
class DistributedSystem:
    """``x' = A0 x + sum int A_i(th) x(t+th) dth + Eu u``, ``y = C0 x + sum int C_i(th) x(t+th) dth + Fu u``."""

    A0: np.ndarray
    terms: tuple[DistributedTerm, ...]
    Eu: np.ndarray
    C0: np.ndarray
    Fu: np.ndarray
    kind = "distributed"

    def __post_init__(self):
        _set(self, "A0", _mat(self.A0, "/A0"))
        n = self.A0.shape[0]
        _shape(self.A0, n, n, "/A0")
        _set(self, "Eu", _mat(self.Eu, "/Eu"))
        _shape(self.Eu, n, None, "/Eu")
        _set(self, "C0", _mat(self.C0, "/C0"))
        _shape(self.C0, None, n, "/C0")
        _set(self, "Fu", _mat(self.Fu, "/Fu"))
        _shape(self.Fu, self.n_y, self.n_u, "/Fu")
        for i, t in enumerate(self.terms):
            if t.kernel.shape != (n, n):
                raise ModelError(f"kernel shape {t.kernel.shape} != ({n}, {n})", f"/terms/{i}/kernel")
            if t.output_kernel is not None and t.output_kernel.shape != (self.n_y, n):
                raise ModelError(
                    f"output kernel shape {t.output_kernel.shape} != ({self.n_y}, {n})",
                    f"/terms/{i}/output_kernel",
                )

    n = property(lambda self: self.A0.shape[0])
    n_u = property(lambda self: self.Eu.shape[1])
    n_y = property(lambda self: self.C0.shape[0])

    def moments(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Kernel masses ``(Abar_i, Cbar_i)``."""
        Abar = [t.kernel.moment() for t in self.terms]
        Cbar = [
            t.output_kernel.moment() if t.output_kernel is not None else np.zeros((self.n_y, self.n))
            for t in self.terms
        ]
        return Abar, Cbar

    def delays(self) -> list[DelaySpec]:
        out = []
        for t in self.terms:
            h = t.kernel.h_bar
            if t.output_kernel is not None:
                h = max(h, t.output_kernel.h_bar)
            out.append(DelaySpec("tv_unbounded_rate", h_bar=h) if t.time_varying else DelaySpec("const", h=h if math.isfinite(h) else 0.0))
        return out


@dataclass(frozen=True, eq=False)
class NeutralTerm:
    Ar: np.ndarray
    An: np.ndarray
    Cr: np.ndarray
    Cn: np.ndarray
    delay: DelaySpec


@dataclass(frozen=True, eq=False)
class NeutralSystem:
    """``x' = A0 x + sum Ar_i x(t-h_i) + sum An_i x'(t-h_i) + Eu u``, output analogous."""

    A0: np.ndarray
    terms: tuple[NeutralTerm, ...]
    Eu: np.ndarray
    C0: np.ndarray
    Fu: np.ndarray
    kind = "neutral"

    def __post_init__(self):
        _set(self, "A0", _mat(self.A0, "/A0"))
        n = self.A0.shape[0]
        _shape(self.A0, n, n, "/A0")
        _set(self, "Eu", _mat(self.Eu, "/Eu"))
        _shape(self.Eu, n, None, "/Eu")
        _set(self, "C0", _mat(self.C0, "/C0"))
        _shape(self.C0, None, n, "/C0")
        _set(self, "Fu", _mat(self.Fu, "/Fu"))
        _shape(self.Fu, self.n_y, self.n_u, "/Fu")
        terms = []
        for i, t in enumerate(self.terms):
            mats = {}
            for name, rows in (("Ar", n), ("An", n), ("Cr", self.n_y), ("Cn", self.n_y)):
                M = _mat(getattr(t, name), f"/terms/{i}/{name}")
                _shape(M, rows, n, f"/terms/{i}/{name}")
                mats[name] = M
            if not t.delay.upper > 0 and np.any(mats["An"]):
                raise ModelError("neutral terms need delays > 0", f"/terms/{i}/delay")
            terms.append(NeutralTerm(delay=t.delay, **mats))
        _set(self, "terms", tuple(terms))

    n = property(lambda self: self.A0.shape[0])
    n_u = property(lambda self: self.Eu.shape[1])
    n_y = property(lambda self: self.C0.shape[0])

    def delays(self) -> list[DelaySpec]:
        return [t.delay for t in self.terms]


SystemModel = Union[LtiSystem, DiscreteDelaySystem, DifferenceSystem, CoupledSystem, DistributedSystem, NeutralSystem]


def as_discrete(sys: LtiSystem) -> DiscreteDelaySystem:
    """An LTI system viewed as a delay system with no delayed terms."""
    return DiscreteDelaySystem(sys.A, (), sys.E, sys.C, sys.F)


# ---------------------------------------------------------------- positivity


@dataclass(frozen=True)
class Violation:
    block: str
    row: int
    col: int
    value: float

    def __str__(self) -> str:
        return f"{self.block}[{self.row},{self.col}] = {self.value:.6g}"


@dataclass(frozen=True)
class PositivityReport:
    ok: bool
    violations: tuple[Violation, ...] = ()

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"block": v.block, "row": v.row, "col": v.col, "value": v.value} for v in self.violations
            ],
        }


def _neg_entries(M: np.ndarray, block: str, tol: float, offdiag_only: bool = False) -> list[Violation]:
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    bad = M < -tol * scale
    if offdiag_only:
        bad &= ~np.eye(M.shape[0], dtype=bool)
    return [Violation(block, int(i), int(j), float(M[i, j])) for i, j in zip(*np.nonzero(bad))]


def validate_positivity(model: SystemModel, tol: float = 1e-12) -> PositivityReport:
    """Entrywise positivity test of every block the class requires.

    Neutral systems are tested on the composite matrices ``An_i A0 + Ar_i``
    and ``Cn_i A0 + Cr_i``, not on ``Ar_i`` alone.
    """
    v: list[Violation] = []
    k = model.kind
    if k == "lti":
        v += _neg_entries(model.A, "/A", tol, offdiag_only=True)
        for name in "ECF":
            v += _neg_entries(getattr(model, name), "/" + name, tol)
    elif k == "discrete":
        v += _neg_entries(model.A0, "/A0", tol, offdiag_only=True)
        for i, t in enumerate(model.terms):
            v += _neg_entries(t.A, f"/terms/{i}/A", tol)
            v += _neg_entries(t.C, f"/terms/{i}/C", tol)
        for name in ("Eu", "C0", "Fu"):
            v += _neg_entries(getattr(model, name), "/" + name, tol)
    elif k == "difference":
        for i, t in enumerate(model.terms):
            v += _neg_entries(t.A, f"/terms/{i}/A", tol)
            v += _neg_entries(t.C, f"/terms/{i}/C", tol)
        for name in ("Eu", "Fu"):
            v += _neg_entries(getattr(model, name), "/" + name, tol)
    elif k == "coupled":
        v += _neg_entries(model.A0, "/A0", tol, offdiag_only=True)
        for i, t in enumerate(model.terms):
            for name in ("A", "C", "Cy"):
                v += _neg_entries(getattr(t, name), f"/terms/{i}/{name}", tol)
        for name in ("C0", "E1", "E2", "Cy0", "Fu"):
            v += _neg_entries(getattr(model, name), "/" + name, tol)
    elif k == "distributed":
        v += _neg_entries(model.A0, "/A0", tol, offdiag_only=True)
        for i, t in enumerate(model.terms):
            for name, ker in (("kernel", t.kernel), ("output_kernel", t.output_kernel)):
                if ker is None:
                    continue
                worst, where = ker.min_entry()
                if worst < -tol:
                    v.append(Violation(f"/terms/{i}/{name}(theta={where:.6g})", -1, -1, worst))
        for name in ("Eu", "C0", "Fu"):
            v += _neg_entries(getattr(model, name), "/" + name, tol)
    elif k == "neutral":
        v += _neg_entries(model.A0, "/A0", tol, offdiag_only=True)
        for i, t in enumerate(model.terms):
            v += _neg_entries(t.An @ model.A0 + t.Ar, f"/terms/{i}/An*A0+Ar", tol)
            v += _neg_entries(t.An, f"/terms/{i}/An", tol)
            v += _neg_entries(t.Cn @ model.A0 + t.Cr, f"/terms/{i}/Cn*A0+Cr", tol)
            v += _neg_entries(t.Cn, f"/terms/{i}/Cn", tol)
        for name in ("Eu", "C0", "Fu"):
            v += _neg_entries(getattr(model, name), "/" + name, tol)
    else:  # pragma: no cover
        raise ModelError(f"unknown class {k!r}")
    return PositivityReport(not v, tuple(v))


# ---------------------------------------------------------------- lifting


@dataclass(frozen=True)
class UncertaintyBlock:
    size: int
    kind: str  # "const_delay" | "tv_delay" | "distributed" | "full"

    @property
    def diagonal(self) -> bool:
        return self.kind != "full"


@dataclass(frozen=True, eq=False)
class LftModel:
    """``x' = A x + E w``, ``z = C x + F w``, ``w = Delta z`` with block-diagonal ``Delta``."""

    A: np.ndarray
    E: np.ndarray
    C: np.ndarray
    F: np.ndarray
    blocks: tuple[UncertaintyBlock, ...] = field(default=())

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        n = A.shape[0] if A.size else 0
        q = int(np.asarray(self.F).shape[1])
        _set(self, "A", A.reshape(n, n))
        _set(self, "E", np.asarray(self.E, dtype=float).reshape(n, q))
        _set(self, "C", np.asarray(self.C, dtype=float).reshape(np.asarray(self.F).shape[0], n))
        _set(self, "F", np.asarray(self.F, dtype=float))
        if not self.blocks:
            _set(self, "blocks", tuple(UncertaintyBlock(1, "const_delay") for _ in range(q)))
        if sum(b.size for b in self.blocks) != q or self.C.shape[0] != q:
            raise ModelError("uncertainty block sizes do not match the lifted channels")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.F.shape[0]

    def static_gain(self) -> np.ndarray:
        """``C (-A)^{-1} E + F``."""
        from .linalg import solve_linear

        if self.n == 0:
            return self.F.copy()
        return self.C @ solve_linear(-self.A, self.E) + self.F


def _block_kind(d: DelaySpec) -> str:
    return "tv_delay" if d.time_varying else "const_delay"


def lift_to_lft(model: SystemModel) -> LftModel:
    """Interconnection of a delay-free positive core with unit-gain operators."""
    k = model.kind
    if k == "lti":
        n = model.n
        return LftModel(model.A, np.zeros((n, 0)), np.zeros((0, n)), np.zeros((0, 0)), ())
    if k == "discrete":
        n, N = model.n, len(model.terms)
        E = np.hstack([t.A for t in model.terms]) if N else np.zeros((n, 0))
        C = np.kron(np.ones((N, 1)), np.eye(n))
        blocks = tuple(UncertaintyBlock(n, _block_kind(t.delay)) for t in model.terms)
        return LftModel(model.A0, E, C, np.zeros((N * n, N * n)), blocks)
    if k == "difference":
        n, N = model.n, len(model.terms)
        F = np.kron(np.ones((N, 1)), np.hstack([t.A for t in model.terms]))
        blocks = tuple(UncertaintyBlock(n, _block_kind(t.delay)) for t in model.terms)
        return LftModel(np.zeros((0, 0)), np.zeros((0, N * n)), np.zeros((N * n, 0)), F, blocks)
    if k == "coupled":
        N, n2 = len(model.terms), model.n2
        E = np.hstack([t.A for t in model.terms])
        C = np.kron(np.ones((N, 1)), model.C0)
        F = np.kron(np.ones((N, 1)), np.hstack([t.C for t in model.terms]))
        blocks = tuple(UncertaintyBlock(n2, _block_kind(t.delay)) for t in model.terms)
        return LftModel(model.A0, E, C, F, blocks)
    if k == "distributed":
        # unit-DC-gain averaging operators; the kernel masses sit in E
        n, N = model.n, len(model.terms)
        Abar, _ = model.moments()
        E = np.hstack(Abar) if N else np.zeros((n, 0))
        C = np.kron(np.ones((N, 1)), np.eye(n))
        blocks = tuple(UncertaintyBlock(n, "distributed") for _ in model.terms)
        return LftModel(model.A0, E, C, np.zeros((N * n, N * n)), blocks)
    if k == "neutral":
        n, N = model.n, len(model.terms)
        E = np.kron(np.ones((1, N)), np.eye(n))
        C = np.vstack([t.An @ model.A0 + t.Ar for t in model.terms])
        F = np.vstack([np.kron(np.ones((1, N)), t.An) for t in model.terms])
        blocks = tuple(UncertaintyBlock(n, _block_kind(t.delay)) for t in model.terms)
        return LftModel(model.A0, E, C, F, blocks)
    raise ModelError(f"class {k!r} cannot be lifted")  # pragma: no cover


# ---------------------------------------------------------------- JSON


def _get(d: dict, key: str, path: str, default: Any = ...) -> Any:
    if key in d:
        return d[key]
    if default is ...:
        raise ModelError("required field missing", f"{path}/{key}")
    return default


def _num(x, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ModelError("expected a number", path)
    if not math.isfinite(x):
        raise ModelError("non-finite number", path)
    return float(x)


def _matrix_json(x, path: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise ModelError("expected a matrix (array of arrays)", path)
    width = len(x[0])
    out = np.empty((len(x), width))
    for i, row in enumerate(x):
        if len(row) != width:
            raise ModelError(f"ragged matrix: row {i} has {len(row)} entries, expected {width}", path)
        for j, v in enumerate(row):
            out[i, j] = _num(v, f"{path}/{i}/{j}")
    if width == 0:
        raise ModelError("empty matrix row", path)
    _shape(out, rows, cols, path)
    return out


def _delay_json(d, path: str) -> DelaySpec:
    if not isinstance(d, dict):
        raise ModelError("expected a delay object", path)
    kind = _get(d, "type", path)
    try:
        if kind == "const":
            return DelaySpec("const", h=_num(_get(d, "h", path), path + "/h"))
        if kind == "tv":
            rate = _get(d, "rate_bound", path, None)
            return DelaySpec(
                "tv",
                h_bar=_num(_get(d, "h_bar", path), path + "/h_bar"),
                rate_bound=None if rate is None else _num(rate, path + "/rate_bound"),
            )
        if kind == "tv_unbounded_rate":
            return DelaySpec("tv_unbounded_rate", h_bar=_num(_get(d, "h_bar", path), path + "/h_bar"))
    except ModelError as e:
        if e.path.startswith(path):
            raise
        raise ModelError(e.message, path + e.path) from None
    raise ModelError(f"unknown delay type {kind!r}", path + "/type")


def _bound(x, path: str) -> float:
    if x in ("-inf", "-Infinity") or x is None:
        return -math.inf
    return _num(x, path)


def _kernel_json(d, path: str, shape: tuple[int, int]) -> DelayKernel:
    if not isinstance(d, dict) or not isinstance(d.get("pieces"), list):
        raise ModelError("expected a kernel object with a 'pieces' array", path)
    pieces = []
    for i, p in enumerate(d["pieces"]):
        pp = f"{path}/pieces/{i}"
        iv = _get(p, "interval", pp)
        if not isinstance(iv, list) or len(iv) != 2:
            raise ModelError("interval must be [a, b]", pp + "/interval")
        a, b = _bound(iv[0], pp + "/interval/0"), _num(iv[1], pp + "/interval/1")
        terms = []
        raw_terms = _get(p, "terms", pp)
        if not isinstance(raw_terms, list) or not raw_terms:
            raise ModelError("expected a nonempty array of terms", pp + "/terms")
        for j, t in enumerate(raw_terms):
            tp = f"{pp}/terms/{j}"
            coeff = _matrix_json(_get(t, "coeff", tp), tp + "/coeff", *shape)
            power = _get(t, "power", tp, 0)
            if isinstance(power, bool) or not isinstance(power, int) or power < 0:
                raise ModelError("power must be a nonnegative integer", tp + "/power")
            terms.append(KernelTerm(coeff, _num(_get(t, "alpha", tp, 0.0), tp + "/alpha"), power))
        pieces.append(KernelPiece(a, b, tuple(terms)))
    try:
        return DelayKernel(tuple(pieces))
    except KernelError as e:
        raise ModelError(str(e), path) from None


def model_from_dict(d: dict) -> SystemModel:
    if not isinstance(d, dict):
        raise ModelError("top level must be an object", "")
    kind = _get(d, "class", "")
    if kind not in CLASSES:
        raise ModelError(f"unknown class {kind!r}; expected one of {', '.join(CLASSES)}", "/class")
    n = _get(d, "n", "")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ModelError("n must be a positive integer", "/n")
    terms_raw = d.get("terms", [])
    if not isinstance(terms_raw, list):
        raise ModelError("expected an array", "/terms")

    def opt(key, rows, cols, default):
        return _matrix_json(d[key], "/" + key, rows, cols) if key in d else default

    if kind == "lti":
        A = _matrix_json(_get(d, "A", ""), "/A", n, n)
        E = opt("E", n, None, np.zeros((n, 1)))
        C = opt("C", None, n, np.eye(n))
        F = opt("F", C.shape[0], E.shape[1], np.zeros((C.shape[0], E.shape[1])))
        return LtiSystem(A, E, C, F)

    if kind in ("discrete", "neutral", "distributed"):
        A0 = _matrix_json(_get(d, "A0", ""), "/A0", n, n)
        Eu = opt("Eu", n, None, np.zeros((n, 1)))
        C0 = opt("C0", None, n, None)
        if C0 is None:
            key = {"discrete": "C", "neutral": "Cr", "distributed": "C"}[kind]
            rows = next((len(t[key]) for t in terms_raw if isinstance(t, dict) and isinstance(t.get(key), list)), None)
            C0 = np.eye(n) if rows is None else np.zeros((rows, n))
        n_y, n_u = C0.shape[0], Eu.shape[1]
        Fu = opt("Fu", n_y, n_u, np.zeros((n_y, n_u)))
        terms = []
        for i, t in enumerate(terms_raw):
            tp = f"/terms/{i}"
            if not isinstance(t, dict):
                raise ModelError("expected an object", tp)
            if kind == "discrete":
                A = _matrix_json(_get(t, "A", tp), tp + "/A", n, n)
                C = _matrix_json(t["C"], tp + "/C", n_y, n) if "C" in t else np.zeros((n_y, n))
                terms.append(DelayTerm(A, C, _delay_json(_get(t, "delay", tp), tp + "/delay")))
            elif kind == "neutral":
                mats = {}
                for name, rows in (("Ar", n), ("An", n), ("Cr", n_y), ("Cn", n_y)):
                    mats[name] = _matrix_json(t[name], f"{tp}/{name}", rows, n) if name in t else np.zeros((rows, n))
                terms.append(NeutralTerm(delay=_delay_json(_get(t, "delay", tp), tp + "/delay"), **mats))
            else:
                if "kernel" in t:
                    ker = _kernel_json(t["kernel"], tp + "/kernel", (n, n))
                    h_bar = ker.h_bar
                else:
                    h_bar = _num(_get(t, "h_bar", tp), tp + "/h_bar")
                    if h_bar < 0:
                        raise ModelError("h_bar must be >= 0", tp + "/h_bar")
                    ker = DelayKernel.constant(_matrix_json(_get(t, "A", tp), tp + "/A", n, n), h_bar)
                out = None
                if "output_kernel" in t:
                    out = _kernel_json(t["output_kernel"], tp + "/output_kernel", (n_y, n))
                elif "C" in t:
                    if not math.isfinite(h_bar):
                        raise ModelError("constant output matrix needs a finite window", tp + "/C")
                    out = DelayKernel.constant(_matrix_json(t["C"], tp + "/C", n_y, n), h_bar)
                tv = t.get("time_varying", False)
                if not isinstance(tv, bool):
                    raise ModelError("expected a boolean", tp + "/time_varying")
                terms.append(DistributedTerm(ker, out, tv))
        cls = {"discrete": DiscreteDelaySystem, "neutral": NeutralSystem, "distributed": DistributedSystem}[kind]
        return cls(A0, tuple(terms), Eu, C0, Fu)

    if kind == "difference":
        Eu = opt("Eu", n, None, np.zeros((n, 1)))
        rows = next((len(t["C"]) for t in terms_raw if isinstance(t, dict) and isinstance(t.get("C"), list)), n)
        if "Fu" in d:
            Fu = _matrix_json(d["Fu"], "/Fu", None, Eu.shape[1])
            rows = Fu.shape[0]
        else:
            Fu = np.zeros((rows, Eu.shape[1]))
        terms = []
        for i, t in enumerate(terms_raw):
            tp = f"/terms/{i}"
            A = _matrix_json(_get(t, "A", tp), tp + "/A", n, n)
            C = _matrix_json(t["C"], tp + "/C", rows, n) if "C" in t else np.zeros((rows, n))
            terms.append(DelayTerm(A, C, _delay_json(_get(t, "delay", tp), tp + "/delay")))
        if not terms:
            raise ModelError("a difference equation needs at least one term", "/terms")
        return DifferenceSystem(tuple(terms), Eu, Fu)

    # coupled
    n2 = _get(d, "n2", "")
    if isinstance(n2, bool) or not isinstance(n2, int) or n2 < 1:
        raise ModelError("n2 must be a positive integer", "/n2")
    A0 = _matrix_json(_get(d, "A0", ""), "/A0", n, n)
    C0 = _matrix_json(_get(d, "C0", ""), "/C0", n2, n)
    E1 = opt("E1", n, None, None)
    n_u = E1.shape[1] if E1 is not None else (len(d["E2"][0]) if isinstance(d.get("E2"), list) and d["E2"] and isinstance(d["E2"][0], list) else 1)
    if E1 is None:
        E1 = np.zeros((n, n_u))
    E2 = opt("E2", n2, n_u, np.zeros((n2, n_u)))
    Cy0 = opt("Cy0", None, n, np.eye(n))
    n_y = Cy0.shape[0]
    Fu = opt("Fu", n_y, n_u, np.zeros((n_y, n_u)))
    terms = []
    for i, t in enumerate(terms_raw):
        tp = f"/terms/{i}"
        A = _matrix_json(_get(t, "A", tp), tp + "/A", n, n2)
        C = _matrix_json(t["C"], tp + "/C", n2, n2) if "C" in t else np.zeros((n2, n2))
        Cy = _matrix_json(t["Cy"], tp + "/Cy", n_y, n2) if "Cy" in t else np.zeros((n_y, n2))
        terms.append(CoupledTerm(A, C, Cy, _delay_json(_get(t, "delay", tp), tp + "/delay")))
    return CoupledSystem(A0, C0, tuple(terms), E1, E2, Cy0, Fu)


def model_to_dict(model: SystemModel) -> dict:
    k = model.kind
    L = lambda M: np.asarray(M).tolist()  # noqa: E731
    if k == "lti":
        return {"class": k, "n": model.n, "A": L(model.A), "E": L(model.E), "C": L(model.C), "F": L(model.F)}
    if k == "discrete":
        terms = [{"A": L(t.A), "C": L(t.C), "delay": t.delay.to_dict()} for t in model.terms]
        return {"class": k, "n": model.n, "A0": L(model.A0), "terms": terms, "Eu": L(model.Eu), "C0": L(model.C0), "Fu": L(model.Fu)}
    if k == "difference":
        terms = [{"A": L(t.A), "C": L(t.C), "delay": t.delay.to_dict()} for t in model.terms]
        return {"class": k, "n": model.n, "terms": terms, "Eu": L(model.Eu), "Fu": L(model.Fu)}
    if k == "coupled":
        terms = [{"A": L(t.A), "C": L(t.C), "Cy": L(t.Cy), "delay": t.delay.to_dict()} for t in model.terms]
        return {
            "class": k, "n": model.n, "n2": model.n2, "A0": L(model.A0), "C0": L(model.C0), "terms": terms,
            "E1": L(model.E1), "E2": L(model.E2), "Cy0": L(model.Cy0), "Fu": L(model.Fu),
        }
    if k == "distributed":
        terms = []
        for t in model.terms:
            entry: dict = {"kernel": t.kernel.to_dict(), "time_varying": t.time_varying}
            if t.output_kernel is not None:
                entry["output_kernel"] = t.output_kernel.to_dict()
            terms.append(entry)
        return {"class": k, "n": model.n, "A0": L(model.A0), "terms": terms, "Eu": L(model.Eu), "C0": L(model.C0), "Fu": L(model.Fu)}
    if k == "neutral":
        terms = [
            {"Ar": L(t.Ar), "An": L(t.An), "Cr": L(t.Cr), "Cn": L(t.Cn), "delay": t.delay.to_dict()}
            for t in model.terms
        ]
        return {"class": k, "n": model.n, "A0": L(model.A0), "terms": terms, "Eu": L(model.Eu), "C0": L(model.C0), "Fu": L(model.Fu)}
    raise ModelError(f"unknown class {k!r}")  # pragma: no cover


def load_model(text: bytes | str) -> SystemModel:
    """Parse a JSON model. Errors carry a JSON-pointer path."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"invalid JSON: {e.msg} at line {e.lineno} column {e.colno}") from None
    return model_from_dict(data)


def save_model(model: SystemModel) -> bytes:
    return (json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n").encode()


def normalize(text: bytes | str) -> bytes:
    """Canonical form of a model file: defaults filled in, keys sorted."""
    return save_model(load_model(text))


def read_model(path) -> SystemModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())
