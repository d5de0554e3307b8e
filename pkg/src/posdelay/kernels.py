"""Exponential-polynomial delay kernels ``B(theta) = sum_k B_k exp(alpha_k theta) theta^p_k``.

Kernels live on a union of intervals inside ``(-inf, 0]``. Integrals are
evaluated in closed form, so moments and Laplace transforms at real points
are exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SAMPLES_PER_PIECE = 64


class KernelError(ValueError):
    pass


def exp_poly_integral(alpha: float, k: int, a: float, b: float) -> float:
    """``int_a^b exp(alpha t) t^k dt`` for ``a <= b <= 0``; ``a`` may be ``-inf``."""
    if a == b:
        return 0.0
    if math.isinf(a):
        if alpha <= 0:
            raise KernelError("infinite support needs a decaying factor (alpha > 0)")
        # repeated integration by parts; the boundary term at -inf vanishes
        total = 0.0
        coef = 1.0 / alpha
        for j in range(k, -1, -1):
            total += coef * math.exp(alpha * b) * b**j
            coef *= -j / alpha
        return total
    span = max(abs(a), abs(b))
    if abs(alpha) * span <= 0.5:
        # power series in alpha; converges fast in this regime
        total = 0.0
        term_coef = 1.0
        for m in range(200):
            piece = term_coef * (b ** (k + m + 1) - a ** (k + m + 1)) / (k + m + 1)
            total += piece
            if m > 2 and abs(piece) <= 1e-18 * max(abs(total), 1e-300):
                break
            term_coef *= alpha / (m + 1)
        return total
    # closed-form antiderivative exp(alpha t) sum_j c_j t^j
    def antiderivative(t: float) -> float:
        s = 0.0
        coef = 1.0 / alpha
        for j in range(k, -1, -1):
            s += coef * t**j
            coef *= -j / alpha
        return math.exp(alpha * t) * s

    return antiderivative(b) - antiderivative(a)


@dataclass(frozen=True)
class KernelTerm:
    coeff: np.ndarray
    alpha: float = 0.0
    power: int = 0


@dataclass(frozen=True)
class KernelPiece:
    a: float
    b: float
    terms: tuple[KernelTerm, ...]


@dataclass(frozen=True, eq=False)
class DelayKernel:
    pieces: tuple[KernelPiece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise KernelError("kernel needs at least one piece")
        shapes = {t.coeff.shape for p in self.pieces for t in p.terms}
        if len(shapes) != 1:
            raise KernelError(f"kernel coefficient shapes disagree: {sorted(shapes)}")
        for p in self.pieces:
            if not (p.a <= p.b <= 0):
                raise KernelError(f"piece interval [{p.a}, {p.b}] must lie in (-inf, 0] with a <= b")
            for t in p.terms:
                if t.power < 0:
                    raise KernelError("powers must be nonnegative integers")
                if math.isinf(p.a) and t.alpha <= 0:
                    raise KernelError("infinite pieces need alpha > 0 in every term")

    @classmethod
    def constant(cls, A, h_bar: float) -> "DelayKernel":
        A = np.array(A, dtype=float)
        return cls((KernelPiece(-float(h_bar), 0.0, (KernelTerm(A, 0.0, 0),)),))

    @property
    def shape(self) -> tuple[int, int]:
        return self.pieces[0].terms[0].coeff.shape

    @property
    def h_bar(self) -> float:
        return -min(p.a for p in self.pieces)

    def constant_form(self) -> tuple[np.ndarray, float] | None:
        """``(A, h_bar)`` when the kernel is a single flat piece on ``[-h_bar, 0]``."""
        if len(self.pieces) != 1:
            return None
        p = self.pieces[0]
        if p.b != 0 or math.isinf(p.a) or any(t.alpha != 0 or t.power != 0 for t in p.terms):
            return None
        return sum(t.coeff for t in p.terms), -p.a

    def laplace(self, s: float) -> np.ndarray:
        """``int B(theta) exp(s theta) dtheta`` for real ``s``."""
        out = np.zeros(self.shape)
        for p in self.pieces:
            for t in p.terms:
                out += t.coeff * exp_poly_integral(t.alpha + s, t.power, p.a, p.b)
        return out

    def moment(self) -> np.ndarray:
        return self.laplace(0.0)

    def evaluate(self, theta: float) -> np.ndarray:
        out = np.zeros(self.shape)
        for p in self.pieces:
            if p.a <= theta <= p.b:
                for t in p.terms:
                    out += t.coeff * math.exp(t.alpha * theta) * theta**t.power
        return out

    def scaled(self, c: float) -> "DelayKernel":
        return DelayKernel(
            tuple(
                KernelPiece(p.a, p.b, tuple(KernelTerm(c * t.coeff, t.alpha, t.power) for t in p.terms))
                for p in self.pieces
            )
        )

    def tail_bound(self, cut: float) -> float:
        """Upper bound on ``sum_k ||B_k||_1 int_{-inf}^{cut} |exp(alpha t) t^k| dt`` over infinite pieces."""
        total = 0.0
        for p in self.pieces:
            if not math.isinf(p.a):
                continue
            top = min(cut, p.b)
            for t in p.terms:
                mag = abs(exp_poly_integral(t.alpha, t.power, -math.inf, top))
                total += float(np.max(np.abs(t.coeff).sum(axis=0))) * mag
        return total

    def truncated(self, tol: float) -> tuple["DelayKernel", float]:
        """Finite-support copy whose discarded tail has bound ``<= tol``."""
        if not any(math.isinf(p.a) for p in self.pieces):
            return self, 0.0
        finite_lo = min((p.a for p in self.pieces if not math.isinf(p.a)), default=0.0)
        cut = min(finite_lo, max(p.b for p in self.pieces if math.isinf(p.a)))
        cut = min(cut, -1.0)
        while self.tail_bound(cut) > tol:
            cut *= 2.0
            if cut < -1e8:
                raise KernelError("kernel tail does not decay fast enough to truncate")
        pieces = []
        for p in self.pieces:
            if math.isinf(p.a):
                if p.b > cut:
                    pieces.append(KernelPiece(cut, p.b, p.terms))
            else:
                pieces.append(p)
        return DelayKernel(tuple(pieces)), self.tail_bound(cut)

    def min_entry(self) -> tuple[float, float | None]:
        """Smallest entry over the domain and where it occurs (``None`` when
        sign analysis alone proves nonnegativity)."""
        worst, where = 0.0, None
        for p in self.pieces:
            # theta <= 0 so theta^k has sign (-1)^k; exp is positive
            if all(np.all((-1) ** t.power * t.coeff >= 0) for t in p.terms):
                continue
            lo = p.a if not math.isinf(p.a) else min(p.b - 1.0, -50.0 / min(t.alpha for t in p.terms))
            grid = np.linspace(lo, p.b, SAMPLES_PER_PIECE)
            for th in grid:
                val = float(np.min(self._piece_value(p, th)))
                if val < worst:
                    worst, where = val, float(th)
        return worst, where

    @staticmethod
    def _piece_value(p: KernelPiece, theta: float) -> np.ndarray:
        return sum(t.coeff * math.exp(t.alpha * theta) * theta**t.power for t in p.terms)

    def to_dict(self) -> dict:
        return {
            "pieces": [
                {
                    "interval": ["-inf" if math.isinf(p.a) else p.a, p.b],
                    "terms": [
                        {"coeff": t.coeff.tolist(), "alpha": t.alpha, "power": t.power} for t in p.terms
                    ],
                }
                for p in self.pieces
            ]
        }


def kernel_moment(K: DelayKernel) -> np.ndarray:
    """Exact ``int B(theta) dtheta`` over the kernel's domain."""
    return K.moment()
