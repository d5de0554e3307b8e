"""Fixed-step time-domain simulation of every model class.

Retarded and neutral equations use classical RK4 with cubic Hermite
interpolation of the stored state (and of the stored derivative for neutral
terms). Difference equations and the algebraic part of coupled systems are
iterated on the grid with linear interpolation between lattice points.
Kernel terms use hat-function weights integrated exactly against the kernel,
so the discrete operator reproduces the kernel mass.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linalg import induced_norm, solve_linear, spectral_abscissa_metzler, spectral_radius_nonneg
from .model import SystemModel, as_discrete

STEPS_PER_DELAY = 20
KERNEL_TAIL = 1e-10
SETTLE_DRIFT = 1e-3
_GAUSS = np.polynomial.legendre.leggauss(8)


class SimulationError(ValueError):
    pass


class NotSettledError(RuntimeError):
    def __init__(self, drift: float, value: float):
        super().__init__(f"output not settled: relative drift {drift:.3g} over the last fifth of the horizon")
        self.drift = drift
        self.value = value


History = np.ndarray | Callable[[float], np.ndarray]
Schedule = Sequence[tuple[float, Sequence[float]]]


@dataclass(frozen=True)
class SimConfig:
    """``history`` is a constant vector or a function of ``t <= 0``; ``input``
    is ``None`` (zero), a constant vector or a schedule of ``(t_start, value)``.

    ``delays``: ``"model"`` keeps constant specs constant and runs time-varying
    ones as sawtooths; ``"sawtooth"`` runs every delay as a sawtooth with its
    upper bound; ``"max"`` holds every delay at its upper bound.
    """

    step: float
    horizon: float
    history: History | None = None
    input: np.ndarray | Schedule | None = None
    delays: str = "model"
    sawtooth_period: float = 1.0
    record_every: int = 1

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise SimulationError("step must be positive")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise SimulationError("horizon must be positive")
        if self.delays not in ("model", "sawtooth", "max"):
            raise SimulationError(f"unknown delay profile {self.delays!r}")
        if not self.sawtooth_period > 0:
            raise SimulationError("sawtooth period must be positive")
        if self.record_every < 1:
            raise SimulationError("record_every must be >= 1")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    min_entry: float
    terminal_norm_ratio: float
    peak: float = field(default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        nx, ny = self.states.shape[1], self.outputs.shape[1]
        w.writerow(["t"] + [f"x{i + 1}" for i in range(nx)] + [f"y{i + 1}" for i in range(ny)])
        for t, x, y in zip(self.times, self.states, self.outputs):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in y])
        return buf.getvalue()


# ---------------------------------------------------------------- signals


def _input_fn(cfg: SimConfig, n_u: int) -> Callable[[float], np.ndarray]:
    u = cfg.input
    if u is None:
        zero = np.zeros(n_u)
        return lambda t: zero
    if isinstance(u, np.ndarray) or (isinstance(u, (list, tuple)) and u and np.isscalar(u[0])):
        vec = np.broadcast_to(np.asarray(u, dtype=float), (n_u,)).copy()
        return lambda t: vec
    starts = np.array([float(s) for s, _ in u])
    if np.any(np.diff(starts) <= 0):
        raise SimulationError("input schedule times must increase")
    vals = [np.broadcast_to(np.asarray(v, dtype=float), (n_u,)).copy() for _, v in u]
    zero = np.zeros(n_u)

    def fn(t: float) -> np.ndarray:
        k = int(np.searchsorted(starts, t, side="right")) - 1
        return vals[k] if k >= 0 else zero

    return fn


def _history_fn(cfg: SimConfig, size: int, delayed: bool) -> tuple[Callable[[float], np.ndarray], Callable[[float], np.ndarray]]:
    """``(phi, phi')`` on ``t <= 0``."""
    h = cfg.history
    if h is None:
        if delayed:
            raise SimulationError("history missing for a delayed class")
        h = np.zeros(size)
    if callable(h):
        f = h

        def phi(t):
            v = np.asarray(f(t), dtype=float).ravel()
            if v.size != size:
                raise SimulationError(f"history returns {v.size} entries, expected {size}")
            return v

        def dphi(t, eps=1e-6):
            return (phi(t) - phi(t - eps)) / eps

        return phi, dphi
    vec = np.broadcast_to(np.asarray(h, dtype=float), (size,)).copy()
    zero = np.zeros(size)
    return (lambda t: vec), (lambda t: zero)


def _delay_fns(model: SystemModel, cfg: SimConfig, floor: float) -> list[Callable[[float], float]]:
    """``h_i(t)``; sawtooths ramp from ``floor * h_bar`` to ``h_bar`` and respect rate bounds."""
    out = []
    for d in model.delays():
        top = d.upper
        saw = cfg.delays == "sawtooth" or (cfg.delays == "model" and d.time_varying)
        if cfg.delays == "max" or not saw or top == 0:
            out.append(lambda t, h=top: h)
            continue
        period = cfg.sawtooth_period
        if d.kind == "tv" and d.rate_bound is not None:
            if d.rate_bound == 0:
                out.append(lambda t, h=top: h)
                continue
            period = max(period, top * (1 - floor) / d.rate_bound)
        out.append(lambda t, h=top, P=period: h * (floor + (1 - floor) * ((t / P) % 1.0)))
    return out


def _check_step(model: SystemModel, cfg: SimConfig, extra: Sequence[float] = ()) -> None:
    hs = [d.upper for d in model.delays() if d.upper > 0] + [h for h in extra if h > 0]
    if hs and cfg.step > min(hs) / STEPS_PER_DELAY * (1 + 1e-12):
        raise SimulationError(
            f"step {cfg.step:g} exceeds min delay / {STEPS_PER_DELAY} = {min(hs) / STEPS_PER_DELAY:g}"
        )


# ---------------------------------------------------------------- storage


class _Store:
    """State samples on the uniform grid ``t_k = k dt`` plus derivative samples."""

    def __init__(self, steps: int, size: int, dt: float, phi, dphi):
        self.X = np.zeros((steps + 1, size))
        self.D = np.zeros((steps + 1, size))
        self.dt = dt
        self.n = 0
        self.phi, self.dphi = phi, dphi

    def hermite(self, s: float, stage_t: float | None = None, stage_x: np.ndarray | None = None) -> np.ndarray:
        if s < 0:
            return self.phi(s)
        u = s / self.dt
        k = int(u)
        if k >= self.n:
            # ahead of the stored grid (short delays): blend toward the stage value
            last, xn = self.n * self.dt, self.X[self.n]
            if stage_x is None or stage_t is None or stage_t <= last:
                return xn
            w = min(max((s - last) / (stage_t - last), 0.0), 1.0)
            return xn + w * (stage_x - xn)
        tau = u - k
        t2, t3 = tau * tau, tau * tau * tau
        X, D, dt = self.X, self.D, self.dt
        return (
            (2 * t3 - 3 * t2 + 1) * X[k]
            + (t3 - 2 * t2 + tau) * dt * D[k]
            + (3 * t2 - 2 * t3) * X[k + 1]
            + (t3 - t2) * dt * D[k + 1]
        )

    def hermite_many(self, s: np.ndarray) -> np.ndarray:
        """Vectorised ``hermite`` for times inside ``[0, t_n]`` or in the history."""
        out = np.empty((s.size, self.X.shape[1]))
        neg = s < 0
        for j in np.flatnonzero(neg):
            out[j] = self.phi(float(s[j]))
        pos = ~neg
        if np.any(pos):
            u = s[pos] / self.dt
            k = np.minimum(u.astype(int), self.n)
            tau = (u - k)[:, None]
            k1 = np.minimum(k + 1, self.n)
            t2, t3 = tau * tau, tau**3
            X, D, dt = self.X, self.D, self.dt
            out[pos] = (
                (2 * t3 - 3 * t2 + 1) * X[k]
                + (t3 - 2 * t2 + tau) * dt * D[k]
                + (3 * t2 - 2 * t3) * X[k1]
                + (t3 - t2) * dt * D[k1]
            )
        return out

    def linear(self, s: float, M: np.ndarray | None = None, phi=None) -> np.ndarray:
        M = self.X if M is None else M
        if s < 0:
            return (phi or self.phi)(s)
        u = s / self.dt
        k = int(u)
        if k >= self.n:
            return M[self.n]
        tau = u - k
        return (1 - tau) * M[k] + tau * M[k + 1]

    def dlinear(self, s: float) -> np.ndarray:
        return self.linear(s, self.D, self.dphi)


# ---------------------------------------------------------------- kernel weights


def _piece_values(piece, theta: np.ndarray) -> np.ndarray:
    out = 0.0
    for t in piece.terms:
        out = out + t.coeff[None] * (np.exp(t.alpha * theta) * theta**t.power)[:, None, None]
    return out


def _kernel_integral(kernel, f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> np.ndarray:
    """``int_a^b K(theta) f(theta) dtheta`` by Gauss-Legendre on each smooth piece."""
    total = np.zeros(kernel.shape)
    xg, wg = _GAUSS
    for p in kernel.pieces:
        lo, hi = max(a, p.a), min(b, p.b)
        if hi <= lo:
            continue
        th = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        vals = _piece_values(p, th) * (wg * f(th))[:, None, None]
        total += 0.5 * (hi - lo) * vals.sum(axis=0)
    return total


def kernel_weights(kernel, dt: float) -> np.ndarray:
    """``W_j`` with ``int K(th) x(t+th) dth ~ sum_j W_j x(t - j dt)``: the kernel
    integrated against the hat function of node ``-j dt`` (exact for piecewise-linear ``x``)."""
    kernel, _ = kernel.truncated(KERNEL_TAIL)
    J = max(1, int(math.ceil(kernel.h_bar / dt - 1e-9)))
    W = np.zeros((J + 1,) + kernel.shape)
    for j in range(J + 1):
        c = -j * dt
        W[j] = _kernel_integral(kernel, lambda th, c=c: 1 - (c - th) / dt, c - dt, c)
        if j > 0:
            W[j] += _kernel_integral(kernel, lambda th, c=c: 1 - (th - c) / dt, c, c + dt)
    return W


# ---------------------------------------------------------------- integrators


def _rk4(store: _Store, f, steps: int, u_fn, record, x0: np.ndarray):
    dt = store.dt
    X, D = store.X, store.D
    X[0] = x0
    D[0] = f(0.0, x0)
    record(0)
    for n in range(steps):
        t = n * dt
        x = X[n]
        k1 = D[n]
        k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = f(t + dt, x + dt * k3)
        X[n + 1] = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        store.n = n + 1
        D[n + 1] = f(t + dt, X[n + 1])
        record(n + 1)


def _finish(times, states, outputs, x_init, mins, peak) -> Trajectory:
    states = np.asarray(states)
    init = float(np.max(np.abs(x_init))) if x_init.size else 0.0
    term = float(np.max(np.abs(states[-1]))) if states.size else 0.0
    ratio = term / init if init > 0 else (math.nan if term == 0 else math.inf)
    return Trajectory(np.asarray(times), states, np.asarray(outputs), float(mins), ratio, float(peak))


def simulate(model: SystemModel, cfg: SimConfig) -> Trajectory:
    if model.kind == "lti":
        model = as_discrete(model)
    sim = {
        "discrete": _sim_discrete,
        "difference": _sim_difference,
        "coupled": _sim_coupled,
        "distributed": _sim_distributed,
        "neutral": _sim_neutral,
    }[model.kind]
    return sim(model, cfg)


def _grid(cfg: SimConfig) -> tuple[int, float]:
    steps = int(math.ceil(cfg.horizon / cfg.step - 1e-9))
    return steps, cfg.horizon / steps


class _Recorder:
    def __init__(self, cfg: SimConfig, dt: float):
        self.every = cfg.record_every
        self.dt = dt
        self.times: list[float] = []
        self.states: list[np.ndarray] = []
        self.outputs: list[np.ndarray] = []
        self.min = math.inf
        self.peak = 0.0

    def observe(self, x: np.ndarray) -> None:
        if x.size:
            self.min = min(self.min, float(np.min(x)))
            self.peak = max(self.peak, float(np.max(np.abs(x))))

    def keep(self, k: int, steps: int) -> bool:
        return k % self.every == 0 or k == steps

    def add(self, k: int, x: np.ndarray, y: np.ndarray) -> None:
        self.times.append(k * self.dt)
        self.states.append(np.array(x))
        self.outputs.append(np.array(y))


def _sim_discrete(model, cfg: SimConfig) -> Trajectory:
    _check_step(model, cfg)
    steps, dt = _grid(cfg)
    n = model.n
    phi, dphi = _history_fn(cfg, n, bool(model.terms))
    u = _input_fn(cfg, model.n_u)
    hs = _delay_fns(model, cfg, 0.0)
    store = _Store(steps, n, dt, phi, dphi)
    A0, Eu, C0, Fu = model.A0, model.Eu, model.C0, model.Fu
    terms = [(t.A, t.C, h) for t, h in zip(model.terms, hs)]

    def f(t, x):
        acc = A0 @ x + Eu @ u(t)
        for A, _, h in terms:
            acc = acc + A @ store.hermite(t - h(t), t, x)
        return acc

    rec = _Recorder(cfg, dt)

    def record(k):
        x = store.X[k]
        rec.observe(x)
        if rec.keep(k, steps):
            t = k * dt
            y = C0 @ x + Fu @ u(t)
            for _, C, h in terms:
                if np.any(C):
                    y = y + C @ store.hermite(t - h(t), t, x)
            rec.add(k, x, y)

    x0 = phi(0.0)
    _rk4(store, f, steps, u, record, x0)
    return _finish(rec.times, rec.states, rec.outputs, x0, rec.min, rec.peak)


def _sim_distributed(model, cfg: SimConfig) -> Trajectory:
    supports = [t.kernel.truncated(KERNEL_TAIL)[0].h_bar for t in model.terms]
    _check_step(model, cfg, supports)
    steps, dt = _grid(cfg)
    n = model.n
    phi, dphi = _history_fn(cfg, n, bool(model.terms))
    u = _input_fn(cfg, model.n_u)
    hs = _delay_fns(model, cfg, 0.0)
    store = _Store(steps, n, dt, phi, dphi)
    A0, Eu, C0, Fu = model.A0, model.Eu, model.C0, model.Fu
    ops = []  # (weights, output weights, window function or None)
    for term, h in zip(model.terms, hs):
        W = kernel_weights(term.kernel, dt)
        Wc = kernel_weights(term.output_kernel, dt) if term.output_kernel is not None else None
        windowed = term.time_varying or cfg.delays == "sawtooth"
        ops.append((W, Wc, h if windowed else None))

    def apply(W, t, x, window):
        J = W.shape[0] - 1
        s = t - dt * np.arange(1, J + 1)
        vals = store.hermite_many(s)
        if window is not None:
            keep = np.arange(1, J + 1) * dt <= window(t) + 1e-12
            vals = vals * keep[:, None]
        return W[0] @ x + np.einsum("jab,jb->a", W[1:], vals)

    def f(t, x):
        acc = A0 @ x + Eu @ u(t)
        for W, _, win in ops:
            acc = acc + apply(W, t, x, win)
        return acc

    rec = _Recorder(cfg, dt)

    def record(k):
        x = store.X[k]
        rec.observe(x)
        if rec.keep(k, steps):
            t = k * dt
            y = C0 @ x + Fu @ u(t)
            for _, Wc, win in ops:
                if Wc is not None:
                    y = y + apply(Wc, t, x, win)
            rec.add(k, x, y)

    x0 = phi(0.0)
    _rk4(store, f, steps, u, record, x0)
    return _finish(rec.times, rec.states, rec.outputs, x0, rec.min, rec.peak)


def _sim_neutral(model, cfg: SimConfig) -> Trajectory:
    _check_step(model, cfg)
    steps, dt = _grid(cfg)
    n = model.n
    phi, dphi = _history_fn(cfg, n, bool(model.terms))
    u = _input_fn(cfg, model.n_u)
    # neutral delays stay bounded away from zero so the derivative memory is explicit
    hs = _delay_fns(model, cfg, 0.5)
    store = _Store(steps, n, dt, phi, dphi)
    A0, Eu, C0, Fu = model.A0, model.Eu, model.C0, model.Fu
    terms = [(t.Ar, t.An, t.Cr, t.Cn, h) for t, h in zip(model.terms, hs)]

    def f(t, x):
        acc = A0 @ x + Eu @ u(t)
        for Ar, An, _, _, h in terms:
            s = t - h(t)
            acc = acc + Ar @ store.hermite(s, t, x) + An @ store.dlinear(s)
        return acc

    rec = _Recorder(cfg, dt)

    def record(k):
        x = store.X[k]
        rec.observe(x)
        if rec.keep(k, steps):
            t = k * dt
            y = C0 @ x + Fu @ u(t)
            for _, _, Cr, Cn, h in terms:
                s = t - h(t)
                y = y + Cr @ store.hermite(s, t, x) + Cn @ store.dlinear(s)
            rec.add(k, x, y)

    x0 = phi(0.0)
    _rk4(store, f, steps, u, record, x0)
    return _finish(rec.times, rec.states, rec.outputs, x0, rec.min, rec.peak)


def _sim_difference(model, cfg: SimConfig) -> Trajectory:
    _check_step(model, cfg)
    steps, dt = _grid(cfg)
    n = model.n
    phi, dphi = _history_fn(cfg, n, True)
    u = _input_fn(cfg, model.n_u)
    hs = _delay_fns(model, cfg, 0.5)
    store = _Store(steps, n, dt, phi, dphi)
    rec = _Recorder(cfg, dt)
    Eu, Fu = model.Eu, model.Fu
    for k in range(steps + 1):
        t = k * dt
        past = [store.linear(t - h(t)) for h in hs]
        x = Eu @ u(t) + sum(tm.A @ v for tm, v in zip(model.terms, past))
        store.X[k] = x
        store.n = k
        rec.observe(x)
        if rec.keep(k, steps):
            y = Fu @ u(t) + sum(tm.C @ v for tm, v in zip(model.terms, past))
            rec.add(k, x, y)
    return _finish(rec.times, rec.states, rec.outputs, phi(0.0), rec.min, rec.peak)


def _sim_coupled(model, cfg: SimConfig) -> Trajectory:
    _check_step(model, cfg)
    steps, dt = _grid(cfg)
    n, n2 = model.n, model.n2
    phi_all, _ = _history_fn(cfg, n + n2, True)
    u = _input_fn(cfg, model.n_u)
    hs = _delay_fns(model, cfg, 0.5)
    zero1 = np.zeros(n)
    store = _Store(steps, n, dt, lambda t: phi_all(t)[:n], lambda t: zero1)
    Z = np.zeros((steps + 1, n2))
    phi2 = lambda t: phi_all(t)[n:]  # noqa: E731

    def x2_past(s):
        return store.linear(s, Z, phi2)

    A0, C0, E1, E2, Cy0, Fu = model.A0, model.C0, model.E1, model.E2, model.Cy0, model.Fu

    def algebraic(k, x1):
        t = k * dt
        past = [x2_past(t - h(t)) for h in hs]
        x2 = C0 @ x1 + E2 @ u(t) + sum(tm.C @ v for tm, v in zip(model.terms, past))
        return x2, past

    def f(t, x):
        acc = A0 @ x + E1 @ u(t)
        for tm, h in zip(model.terms, hs):
            acc = acc + tm.A @ x2_past(t - h(t))
        return acc

    rec = _Recorder(cfg, dt)

    def record(k):
        x1 = store.X[k]
        x2, past = algebraic(k, x1)
        Z[k] = x2
        x = np.concatenate([x1, x2])
        rec.observe(x)
        if rec.keep(k, steps):
            y = Cy0 @ x1 + Fu @ u(k * dt) + sum(tm.Cy @ v for tm, v in zip(model.terms, past))
            rec.add(k, x, y)

    x0 = phi_all(0.0)
    _rk4(store, f, steps, u, record, x0[:n])
    return _finish(rec.times, rec.states, rec.outputs, x0, rec.min, rec.peak)


# ---------------------------------------------------------------- decay and gains


def _shifted(model: SystemModel, s: float) -> float:
    """Decreasing function of real ``s`` whose root is the dominant real characteristic root."""
    k = model.kind
    if k == "lti":
        return spectral_abscissa_metzler(model.A) - s
    if k == "discrete":
        M = model.A0 + sum((t.A * math.exp(-s * t.delay.upper) for t in model.terms), np.zeros((model.n, model.n)))
        return spectral_abscissa_metzler(M) - s
    if k == "distributed":
        M = model.A0 + sum((t.kernel.laplace(s) for t in model.terms), np.zeros((model.n, model.n)))
        return spectral_abscissa_metzler(M) - s
    if k == "difference":
        M = sum((t.A * math.exp(-s * t.delay.upper) for t in model.terms), np.zeros((model.n, model.n)))
        return spectral_radius_nonneg(M) - 1.0
    if k == "coupled":
        n2 = model.n2
        As = sum((t.A * math.exp(-s * t.delay.upper) for t in model.terms), np.zeros((model.n, n2)))
        Cs = sum((t.C * math.exp(-s * t.delay.upper) for t in model.terms), np.zeros((n2, n2)))
        M = np.block([[model.A0 - s * np.eye(model.n), As], [model.C0, Cs - np.eye(n2)]])
        return spectral_abscissa_metzler(M)
    if k == "neutral":
        n = model.n
        w = [math.exp(-s * t.delay.upper) for t in model.terms]
        An = sum((c * t.An for c, t in zip(w, model.terms)), np.zeros((n, n)))
        if spectral_radius_nonneg(An) >= 1.0:
            return math.inf
        W = sum((c * (t.An @ model.A0 + t.Ar) for c, t in zip(w, model.terms)), np.zeros((n, n)))
        return spectral_abscissa_metzler(model.A0 + solve_linear(np.eye(n) - An, W)) - s
    raise SimulationError(f"no real decay-rate characterisation for class {k!r}")


def _neutral_chain(model, tol: float) -> float:
    """Real abscissa of the neutral root chain: ``rho(sum An_i exp(-s h_i)) = 1``."""
    n = model.n
    g = lambda s: spectral_radius_nonneg(  # noqa: E731
        sum((t.An * math.exp(-s * t.delay.upper) for t in model.terms), np.zeros((n, n)))) - 1.0
    if not any(np.any(t.An) for t in model.terms):
        return -math.inf
    lo, hi = -1.0, 1.0
    while g(lo) < 0 and lo > -1e6:
        lo *= 2.0
    while g(hi) > 0 and hi < 1e6:
        hi *= 2.0
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if g(mid) > 0 else (lo, mid)
    return hi


def decay_rate(model: SystemModel, tol: float = 1e-10) -> float | None:
    """Dominant real root of the characteristic equation at the nominal delays
    (the exponential decay rate of a positive system).

    For neutral systems the answer is the larger of that root and the abscissa
    of the neutral root chain; ``None`` when the chain is not strongly stable.
    """
    g = lambda s: _shifted(model, s)  # noqa: E731
    lo, hi = -1.0, 1.0
    if model.kind == "neutral":
        chain = _neutral_chain(model, tol)
        if chain >= 0:
            return None
        if math.isfinite(chain):
            # the reduced matrix is Metzler only to the right of the chain
            lo = chain + tol * max(1.0, abs(chain))
            if g(lo) <= 0:
                return chain
            while g(hi) > 0:
                hi *= 2.0
            while hi - lo > tol * max(1.0, abs(lo)):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if g(mid) > 0 else (lo, mid)
            return 0.5 * (lo + hi)
    for _ in range(200):
        try:
            if g(lo) > 0:
                break
        except OverflowError:
            break
        lo *= 2.0
    while g(hi) > 0:
        hi *= 2.0
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        try:
            positive = g(mid) > 0
        except OverflowError:
            positive = True
        lo, hi = (mid, hi) if positive else (lo, mid)
    return 0.5 * (lo + hi)


def default_step(model: SystemModel) -> float:
    hs = [d.upper for d in model.delays() if d.upper > 0]
    if model.kind == "distributed":
        hs += [t.kernel.truncated(KERNEL_TAIL)[0].h_bar for t in model.terms]
    if hs:
        return min(hs) / STEPS_PER_DELAY
    A = model.A if model.kind == "lti" else getattr(model, "A0", None)
    scale = float(np.max(np.abs(A))) if A is not None and A.size else 1.0
    return 0.1 / max(scale, 1e-12)


def _settled_output(model: SystemModel, u: np.ndarray, cfg: SimConfig) -> np.ndarray:
    size = model.n + (model.n2 if model.kind == "coupled" else 0)
    run = SimConfig(cfg.step, cfg.horizon, np.zeros(size), u, cfg.delays, cfg.sawtooth_period, record_every=1)
    tr = simulate(model, run)
    y = tr.outputs
    last = y[-1]
    earlier = y[int(0.8 * (len(y) - 1))]
    scale = max(float(np.max(np.abs(last))), 1e-300)
    drift = float(np.max(np.abs(last - earlier))) / scale if last.size else 0.0
    if drift > SETTLE_DRIFT:
        raise NotSettledError(drift, float(np.max(np.abs(last))))
    return last


def empirical_gain_lower_bound(model: SystemModel, p, cfg: SimConfig | None = None) -> float:
    """Static gain read off settled step responses: ``||y(T)||_inf`` under the
    all-ones input for p = inf, otherwise the p-norm of ``H(0)`` recovered one
    input channel at a time."""
    from .analysis.common import parse_p

    p = parse_p(p)
    if cfg is None:
        rate = decay_rate(model)
        horizon = 50.0 / abs(rate) if rate is not None and rate < 0 else 200.0
        cfg = SimConfig(default_step(model), horizon)
    n_u = model.n_u
    if p == math.inf:
        return float(np.max(np.abs(_settled_output(model, np.ones(n_u), cfg))))
    H = np.column_stack([_settled_output(model, np.eye(n_u)[j], cfg) for j in range(n_u)])
    return induced_norm(np.clip(H, 0.0, None), p)
