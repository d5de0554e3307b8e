"""Seeded random positive instances for cross-validation campaigns.

Every Metzler part is a sparse random nonnegative matrix whose diagonal is
set to ``-kappa`` times a row-sum bound with ``kappa ~ U(0.6, 1.4)``. Since
``kappa > 1`` forces diagonal dominance of the relevant aggregate matrix and
``kappa < 1`` usually breaks it, campaigns see both verdicts in roughly equal
numbers. Nonnegative parts are uniform on ``[0, 1)`` with random sparsity.

The parameters below are part of the campaign definition: changing them
changes every seeded instance, so bump ``SAMPLER_VERSION`` when you do.
"""

from __future__ import annotations

import numpy as np

from .kernels import DelayKernel, KernelPiece, KernelTerm
from .linalg import solve_linear, spectral_radius_nonneg
from .model import (
    CoupledSystem,
    CoupledTerm,
    DelaySpec,
    DelayTerm,
    DifferenceSystem,
    DiscreteDelaySystem,
    DistributedSystem,
    DistributedTerm,
    LtiSystem,
    NeutralSystem,
    NeutralTerm,
    SystemModel,
)

SAMPLER_VERSION = 1
DENSITY = 0.65
KAPPA_RANGE = (0.6, 1.4)
DIAG_FLOOR = 0.05
MAX_N = 6
MAX_TERMS = 3
MAX_CHANNELS = 3


def nonneg(rng: np.random.Generator, rows: int, cols: int, density: float = DENSITY) -> np.ndarray:
    M = rng.uniform(0.0, 1.0, (rows, cols))
    return M * (rng.uniform(size=(rows, cols)) < density)


def _metzler_offdiag(rng: np.random.Generator, n: int) -> np.ndarray:
    M = nonneg(rng, n, n)
    np.fill_diagonal(M, 0.0)
    return M


def _set_diagonal(off: np.ndarray, load: np.ndarray, kappa: float) -> np.ndarray:
    """``off`` with diagonal ``-kappa * (row sums of load + DIAG_FLOOR)``."""
    A = off.copy()
    np.fill_diagonal(A, -kappa * (load.sum(axis=1) + DIAG_FLOOR))
    return A


def _kappa(rng: np.random.Generator, kappa: float | None) -> float:
    return float(rng.uniform(*KAPPA_RANGE)) if kappa is None else float(kappa)


def _delay(rng: np.random.Generator, time_varying: bool = False) -> DelaySpec:
    if time_varying:
        return DelaySpec("tv_unbounded_rate", h_bar=float(rng.uniform(0.1, 2.0)))
    return DelaySpec.const(float(rng.uniform(0.1, 2.0)))


def _dims(rng, n, N, n_u, n_y):
    n = int(rng.integers(1, MAX_N + 1)) if n is None else n
    N = int(rng.integers(1, MAX_TERMS + 1)) if N is None else N
    n_u = int(rng.integers(1, MAX_CHANNELS + 1)) if n_u is None else n_u
    n_y = int(rng.integers(1, MAX_CHANNELS + 1)) if n_y is None else n_y
    return n, N, n_u, n_y


def _maybe_zero(rng, M: np.ndarray, p: float = 0.3) -> np.ndarray:
    return M * 0.0 if rng.uniform() < p else M


def random_lti(rng, n=None, n_u=None, n_y=None, kappa=None) -> LtiSystem:
    n, _, n_u, n_y = _dims(rng, n, 0, n_u, n_y)
    off = _metzler_offdiag(rng, n)
    A = _set_diagonal(off, off, _kappa(rng, kappa))
    return LtiSystem(A, nonneg(rng, n, n_u), nonneg(rng, n_y, n), _maybe_zero(rng, nonneg(rng, n_y, n_u)))


def random_discrete(rng, n=None, N=None, n_u=None, n_y=None, kappa=None, time_varying=False) -> DiscreteDelaySystem:
    n, N, n_u, n_y = _dims(rng, n, N, n_u, n_y)
    off = _metzler_offdiag(rng, n)
    As = [nonneg(rng, n, n) for _ in range(N)]
    A0 = _set_diagonal(off, off + sum(As), _kappa(rng, kappa))
    terms = tuple(DelayTerm(A, _maybe_zero(rng, nonneg(rng, n_y, n)), _delay(rng, time_varying)) for A in As)
    return DiscreteDelaySystem(A0, terms, nonneg(rng, n, n_u), nonneg(rng, n_y, n), _maybe_zero(rng, nonneg(rng, n_y, n_u)))


def random_difference(rng, n=None, N=None, n_u=None, n_y=None, rho=None) -> DifferenceSystem:
    """``rho`` is the target spectral radius of ``sum A_i`` (default ``U(0.6, 1.4)``)."""
    n, N, n_u, n_y = _dims(rng, n, N, n_u, n_y)
    As = [nonneg(rng, n, n) for _ in range(N)]
    As[0] = As[0] + np.diag(rng.uniform(0.0, 0.2, n))  # keep the sum away from nilpotent
    r = spectral_radius_nonneg(sum(As))
    target = _kappa(rng, rho)
    As = [A * (target / r) for A in As]
    terms = tuple(DelayTerm(A, nonneg(rng, n_y, n), _delay(rng)) for A in As)
    return DifferenceSystem(terms, nonneg(rng, n, n_u), _maybe_zero(rng, nonneg(rng, n_y, n_u)))


def random_coupled(rng, n=None, n2=None, N=None, n_u=None, n_y=None, kappa=None, rho_c=None) -> CoupledSystem:
    n, N, n_u, n_y = _dims(rng, n, N, n_u, n_y)
    n2 = int(rng.integers(1, 4)) if n2 is None else n2
    Cs = [nonneg(rng, n2, n2) for _ in range(N)]
    Cs[0] = Cs[0] + np.diag(rng.uniform(0.0, 0.2, n2))
    r = spectral_radius_nonneg(sum(Cs))
    target = float(rng.uniform(0.1, 0.9)) if rho_c is None else float(rho_c)
    Cs = [C * (target / r) for C in Cs]
    As = [nonneg(rng, n, n2) for _ in range(N)]
    C0 = nonneg(rng, n2, n)
    off = _metzler_offdiag(rng, n)
    if target < 1:
        # the x2 loop closed at zero frequency adds A (I - C)^-1 C0 to A0
        load = off + sum(As) @ solve_linear(np.eye(n2) - sum(Cs), C0)
    else:
        load = off + sum(As) @ C0
    A0 = _set_diagonal(off, load, _kappa(rng, kappa))
    terms = tuple(CoupledTerm(A, C, _maybe_zero(rng, nonneg(rng, n_y, n2)), _delay(rng)) for A, C in zip(As, Cs))
    return CoupledSystem(
        A0, C0, terms, nonneg(rng, n, n_u), _maybe_zero(rng, nonneg(rng, n2, n_u)), nonneg(rng, n_y, n), _maybe_zero(rng, nonneg(rng, n_y, n_u))
    )


def random_kernel(rng, rows: int, cols: int, flat: bool | None = None) -> DelayKernel:
    """Constant kernel, or one or two exponential-polynomial pieces that are nonnegative by sign analysis."""
    if flat is None:
        flat = bool(rng.uniform() < 0.4)
    h_bar = float(rng.uniform(0.2, 2.0))
    if flat:
        return DelayKernel.constant(nonneg(rng, rows, cols), h_bar)
    cuts = sorted([-h_bar, 0.0] + ([float(rng.uniform(-h_bar, 0.0))] if rng.uniform() < 0.5 else []))
    pieces = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        terms = []
        for _ in range(int(rng.integers(1, 3))):
            k = int(rng.integers(0, 3))
            # theta <= 0, so theta^k has sign (-1)^k
            terms.append(KernelTerm((-1.0) ** k * nonneg(rng, rows, cols), float(rng.uniform(-1.0, 1.0)), k))
        pieces.append(KernelPiece(a, b, tuple(terms)))
    return DelayKernel(tuple(pieces))


def random_distributed(rng, n=None, N=None, n_u=None, n_y=None, kappa=None, flat=None) -> DistributedSystem:
    n, N, n_u, n_y = _dims(rng, n, N, n_u, n_y)
    kernels = [random_kernel(rng, n, n, flat) for _ in range(N)]
    outs = [random_kernel(rng, n_y, n, flat) if rng.uniform() < 0.5 else None for _ in range(N)]
    off = _metzler_offdiag(rng, n)
    masses = sum(K.moment() for K in kernels)
    A0 = _set_diagonal(off, off + masses, _kappa(rng, kappa))
    terms = tuple(DistributedTerm(K, C) for K, C in zip(kernels, outs))
    return DistributedSystem(A0, terms, nonneg(rng, n, n_u), nonneg(rng, n_y, n), _maybe_zero(rng, nonneg(rng, n_y, n_u)))


def random_neutral(rng, n=None, N=None, n_u=None, n_y=None, kappa=None, rho_n=None) -> NeutralSystem:
    """``Ar_i = W_i - An_i A0`` so the composite ``An_i A0 + Ar_i = W_i`` is nonnegative by construction."""
    n, N, n_u, n_y = _dims(rng, n, N, n_u, n_y)
    Ans = [nonneg(rng, n, n) for _ in range(N)]
    Ans[0] = Ans[0] + np.diag(rng.uniform(0.0, 0.2, n))
    r = spectral_radius_nonneg(sum(Ans))
    target = float(rng.uniform(0.1, 0.9)) if rho_n is None else float(rho_n)
    Ans = [A * (target / r) for A in Ans]
    Ws = [nonneg(rng, n, n) for _ in range(N)]
    off = _metzler_offdiag(rng, n)
    if target < 1:
        # S^-1 (A0 + sum Ar) = A0 + S^-1 sum W
        load = off + solve_linear(np.eye(n) - sum(Ans), sum(Ws))
    else:
        load = off + sum(Ws)
    A0 = _set_diagonal(off, load, _kappa(rng, kappa))
    terms = []
    for An, W in zip(Ans, Ws):
        Cn = _maybe_zero(rng, nonneg(rng, n_y, n))
        Cr = nonneg(rng, n_y, n) - Cn @ A0
        terms.append(NeutralTerm(W - An @ A0, An, Cr, Cn, _delay(rng)))
    return NeutralSystem(A0, tuple(terms), nonneg(rng, n, n_u), nonneg(rng, n_y, n), _maybe_zero(rng, nonneg(rng, n_y, n_u)))


GENERATORS = {
    "lti": random_lti,
    "discrete": random_discrete,
    "difference": random_difference,
    "coupled": random_coupled,
    "distributed": random_distributed,
    "neutral": random_neutral,
}


def random_system(kind: str, rng: np.random.Generator, **kw) -> SystemModel:
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown system class {kind!r}; choose from {sorted(GENERATORS)}") from None
    return gen(rng, **kw)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per campaign instance, so results do not depend on worker order."""
    return np.random.default_rng([int(seed), int(index), SAMPLER_VERSION])
