"""Command-line front end.

Exit codes: 0 stable / success, 1 unstable (or a failed certificate check),
2 marginal, 3 disagreement between equivalent conditions, 64 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import MARGINAL_BAND, AnalysisError, UnsupportedRequest, analyze, parse_p
from .analysis.gains import steady_form
from .certify import check_report
from .crossval import run_campaign, run_model
from .model import CLASSES, ModelError, read_model, validate_positivity
from .report import Report, Settings, build_report
from .simulate import NotSettledError, SimConfig, SimulationError, decay_rate, default_step, simulate
from .witness import DEFAULT_MARGIN

EXIT_OK, EXIT_UNSTABLE, EXIT_MARGINAL, EXIT_DISAGREE, EXIT_INPUT = 0, 1, 2, 3, 64
TOL_ENV = "POSDELAY_TOL"


class InputError(Exception):
    pass


def verdict_code(verdict: str, agree: bool = True) -> int:
    if verdict == "marginal":
        return EXIT_MARGINAL
    if not agree:
        return EXIT_DISAGREE
    return EXIT_OK if verdict == "stable" else EXIT_UNSTABLE


def _default_tol() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return MARGINAL_BAND
    try:
        v = float(raw)
    except ValueError:
        raise InputError(f"{TOL_ENV}={raw!r} is not a number") from None
    return v


def _positive(name: str, v: float) -> float:
    if not (v > 0 and math.isfinite(v)):
        raise InputError(f"{name} must be a positive number, got {v}")
    return v


def _settings(args) -> Settings:
    tol = args.tol if args.tol is not None else _default_tol()
    return Settings(tol=_positive("--tol", tol), margin=_positive("--margin", args.margin))


def _load(path: str):
    try:
        model = read_model(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except OSError as e:
        raise InputError(f"{path}: {e.strerror}") from None
    except ModelError as e:
        raise InputError(f"{path}: {e.path or '/'}: {e.message}") from None
    pos = validate_positivity(model)
    if not pos.ok:
        lines = "; ".join(str(v) for v in pos.violations[:10])
        raise InputError(f"{path}: model is not positive: {lines}")
    return model


def _write(args, payload: bytes | str) -> None:
    data = payload.encode() if isinstance(payload, str) else payload
    if getattr(args, "out", None):
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.write(data.decode())


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- commands


def cmd_analyze(args) -> int:
    model = _load(args.model)
    rep = build_report(model, settings=_settings(args), witnesses=not args.no_witness)
    _write(args, rep.emit())
    return verdict_code(rep.stability.verdict, rep.stability.agree)


def cmd_gain(args) -> int:
    model = _load(args.model)
    settings = _settings(args)
    p = parse_p(args.p)
    # surface missing rate bounds before any stability work
    for d in model.delays():
        try:
            d.operator_gain(p)
        except ModelError as e:
            raise InputError(e.message) from None
    try:
        rep = build_report(model, gains=[(p, args.method)], settings=settings, witnesses=not args.no_witness)
    except UnsupportedRequest as e:
        raise InputError(str(e)) from None
    stab = rep.stability
    if stab.verdict != "stable":
        _write(args, rep.emit())
        print(f"gain undefined: the system is {stab.verdict}", file=sys.stderr)
        return verdict_code(stab.verdict, stab.agree)
    _write(args, rep.emit())
    g = rep.gains[0]
    if args.method == "both" and not g.agreement():
        print(f"closed form {g.closed_form!r} and bisection {g.bisection!r} disagree", file=sys.stderr)
        return EXIT_DISAGREE
    return verdict_code(stab.verdict, stab.agree)


def cmd_certify(args) -> int:
    if not args.check:
        raise InputError("certify needs --check REPORT")
    try:
        data = json.loads(Path(args.check).read_bytes())
        Report.from_dict(data)
    except FileNotFoundError:
        raise InputError(f"{args.check}: no such file") from None
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InputError(f"{args.check}: not a readable report ({e})") from None
    summary = check_report(data)
    _write(args, _json(summary.to_dict()))
    return EXIT_OK if summary.ok else EXIT_UNSTABLE


def _vector_arg(spec: str, size: int, name: str) -> np.ndarray:
    """``zero``, ``const:V`` or ``const:V1,V2,...``."""
    if spec == "zero":
        return np.zeros(size)
    if not spec.startswith("const:"):
        raise InputError(f"{name} must be 'zero' or 'const:V[,V...]', got {spec!r}")
    try:
        vals = [float(v) for v in spec[6:].split(",")]
    except ValueError:
        raise InputError(f"{name}: bad number in {spec!r}") from None
    if len(vals) == 1:
        return np.full(size, vals[0])
    if len(vals) != size:
        raise InputError(f"{name}: expected 1 or {size} values, got {len(vals)}")
    return np.array(vals)


def cmd_simulate(args) -> int:
    model = _load(args.model)
    size = model.n + (model.n2 if model.kind == "coupled" else 0)
    u = _vector_arg(args.input, model.n_u, "--input")
    hist_spec = args.history or ("const:0" if np.any(u) else "const:1")
    hist = _vector_arg(hist_spec, size, "--history")
    step = args.step or default_step(model)
    horizon = args.horizon
    if horizon is None:
        rate = decay_rate(model)
        horizon = 30.0 / abs(rate) if rate else 50.0
        horizon = min(horizon, 2e5 * step)
    try:
        cfg = SimConfig(step, horizon, hist, u, args.delays, args.period, record_every=args.every)
        tr = simulate(model, cfg)
    except SimulationError as e:
        raise InputError(str(e)) from None
    if args.csv:
        Path(args.csv).write_text(tr.to_csv())
    summary = {
        "class": model.kind,
        "step": step,
        "horizon": horizon,
        "samples": len(tr.times),
        "min_entry": tr.min_entry,
        "peak": tr.peak,
        "terminal_norm_ratio": tr.terminal_norm_ratio if math.isfinite(tr.terminal_norm_ratio) else None,
        "final_state": tr.states[-1].tolist(),
        "final_output": tr.outputs[-1].tolist(),
    }
    if np.any(u) and analyze(model, witnesses=False).verdict == "stable":
        try:
            expected = steady_form(model, math.inf).dc_gain() @ u
            summary["expected_steady_output"] = expected.tolist()
            scale = max(float(np.max(np.abs(expected))), 1e-300)
            summary["steady_output_rel_error"] = float(np.max(np.abs(tr.outputs[-1] - expected))) / scale
        except (AnalysisError, ValueError):
            pass
    _write(args, _json(summary))
    return EXIT_OK


def cmd_crossval(args) -> int:
    tol = _settings(args).tol
    margin = args.margin
    if args.random:
        if args.model:
            raise InputError("give either a model file or --random, not both")
        if args.count < 1:
            raise InputError("--count must be >= 1")
        s = run_campaign(args.random, args.seed, args.count, simulate_first=args.simulate, workers=args.workers,
                         band=tol, rel_margin=margin)
        _write(args, _json(s.to_dict()))
        return EXIT_DISAGREE if s.failures else EXIT_OK
    if not args.model:
        raise InputError("crossval needs a model file or --random CLASS")
    model = _load(args.model)
    s = run_model(model, simulate_it=True, band=tol, rel_margin=margin, source=args.model)
    _write(args, _json(s.to_dict()))
    r = s.results[0]
    if r.failed:
        return EXIT_DISAGREE
    return verdict_code(r.verdict, r.agree)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON result here instead of stdout")
    common.add_argument("--tol", type=float, default=None,
                        help=f"marginal band on condition margins (default {MARGINAL_BAND:g}, or ${TOL_ENV})")
    common.add_argument("--margin", type=float, default=DEFAULT_MARGIN,
                        help="relative negative-definiteness margin required of LMI witnesses")
    common.add_argument("--seed", type=int, default=0, help="seed for random campaigns")

    ap = argparse.ArgumentParser(prog="posdelay", description="Stability and gains of positive time-delay systems.")
    ap.add_argument("--version", action="version", version=f"posdelay {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="stability verdict with all equivalent conditions")
    a.add_argument("model")
    a.add_argument("--no-witness", action="store_true", help="skip LMI witness construction")
    a.set_defaults(fn=cmd_analyze)

    g = sub.add_parser("gain", parents=[common], help="L1, L2 or L-infinity gain with a certificate")
    g.add_argument("model")
    g.add_argument("--p", required=True, choices=["1", "2", "inf"])
    g.add_argument("--method", choices=["closed", "bisect", "both"], default="both")
    g.add_argument("--no-witness", action="store_true", help="skip stability witnesses")
    g.set_defaults(fn=cmd_gain)

    c = sub.add_parser("certify", parents=[common], help="re-verify every certificate of a report")
    c.add_argument("--check", metavar="REPORT", help="report produced by analyze or gain")
    c.set_defaults(fn=cmd_certify)

    s = sub.add_parser("simulate", parents=[common], help="fixed-step simulation; summary as JSON, trajectory as CSV")
    s.add_argument("model")
    s.add_argument("--input", default="zero", help="'zero' or 'const:V[,V...]' (default zero)")
    s.add_argument("--history", help="'zero' or 'const:V[,V...]' (default const:1, or const:0 when an input is given)")
    s.add_argument("--step", type=float, help="time step (default: min delay / 20)")
    s.add_argument("--horizon", type=float, help="final time (default: 30 time constants of the dominant root)")
    s.add_argument("--delays", choices=["model", "sawtooth", "max"], default="model")
    s.add_argument("--period", type=float, default=1.0, help="sawtooth period")
    s.add_argument("--every", type=int, default=1, help="record every k-th step")
    s.add_argument("--csv", help="write the trajectory (t, x..., y...) here")
    s.set_defaults(fn=cmd_simulate)

    x = sub.add_parser("crossval", parents=[common], help="cross-validate equivalent conditions and the simulator")
    x.add_argument("model", nargs="?")
    x.add_argument("--random", choices=[k for k in CLASSES], help="sample random instances of this class")
    x.add_argument("--count", type=int, default=200)
    x.add_argument("--simulate", type=int, default=0, metavar="K", help="also simulate the first K random instances")
    x.add_argument("--workers", type=int, default=1)
    x.set_defaults(fn=cmd_crossval)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors, which would read as "marginal"
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        return args.fn(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (UnsupportedRequest, ModelError, NotSettledError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except AnalysisError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    raise SystemExit(main())
