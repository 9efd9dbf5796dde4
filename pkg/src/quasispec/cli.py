"""Command-line front end: ``quasispec <command> [options]``.

Commands write plain CSV (and JSON where noted) so any plotting tool can
render the results.  Exit status is 0 on success, 1 on a computation error
and 2 on a usage error.  ``QUASISPEC_THREADS`` caps internal parallelism.

Grids are given as ``lo:hi:step``; the points are ``lo + k*step`` up to and
including ``hi`` when it lies on the grid (within half a step).  A bare
number is a one-point grid.  Frequencies and contrasts also accept simple
expressions such as ``3*pi/2`` or ``7/3``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _expr
from . import discretize, edgemode, robustness, spectrum, tiling


class UsageError(ValueError):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


# ------------------------------------------------------------------ parsing helpers


def parse_grid(text: str, flag: str = "--grid") -> np.ndarray:
    parts = text.split(":")
    try:
        vals = [_expr.to_float(p) for p in parts]
    except ValueError as exc:
        raise UsageError(flag, f"cannot parse grid {text!r}") from exc
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) != 3:
        raise UsageError(flag, f"expected lo:hi:step, got {text!r}")
    lo, hi, step = vals
    if not step > 0 or hi < lo:
        raise UsageError(flag, f"need step > 0 and hi >= lo in {text!r}")
    n = int(math.floor((hi - lo) / step + 0.5)) + 1
    return np.round(lo + step * np.arange(n), 12)


def _num(text: str, flag: str) -> float:
    try:
        return _expr.to_float(text)
    except ValueError as exc:
        raise UsageError(flag, f"cannot parse {text!r}") from exc


def _positive(value: float, flag: str) -> float:
    if not value > 0:
        raise UsageError(flag, f"must be positive, got {value}")
    return value


def _rule(text: str):
    try:
        return tiling.parse_rule(text)
    except (tiling.RuleError, OSError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError("--rule", str(exc)) from exc


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _level_for_cells(rule, cells: int) -> int:
    level = 1
    while tiling.level_length(rule, level) < cells:
        level += 1
        if level > 200:
            raise UsageError("--cells", "rule does not grow")
    return level


def _profile(args) -> tiling.MaterialProfile:
    if args.profile:
        text = Path(args.profile).read_text(encoding="utf-8")
        try:
            if args.profile.endswith(".json"):
                return tiling.MaterialProfile.from_json(text)
            return tiling.MaterialProfile.from_csv(text)
        except (ValueError, KeyError) as exc:
            raise UsageError("--profile", str(exc)) from exc
    rule = _rule(args.rule)
    r = _positive(_num(args.r, "--r"), "--r")
    if args.cells < 1:
        raise UsageError("--cells", "must be >= 1")
    level = _level_for_cells(rule, args.cells)
    return tiling.reflected_profile(rule, level, r, n_cells=args.cells)


# ------------------------------------------------------------------ commands


def cmd_gap_map(args) -> int:
    rule = _rule(args.rule)
    omegas = parse_grid(args.omega, "--omega")
    rs = parse_grid(args.r, "--r")
    if np.any(rs <= 0):
        raise UsageError("--r", "contrast values must be positive")
    if args.max_iter < 3:
        raise UsageError("--max-iter", "must be >= 3")
    if isinstance(rule, tiling.Fibonacci):
        gm = spectrum.gap_map(omegas, rs, args.max_iter)
    else:
        status = np.zeros((len(rs), len(omegas)), dtype=np.int8)
        for i, r in enumerate(rs):
            for j, w in enumerate(omegas):
                status[i, j] = 1 if edgemode.certify_gap(float(w), rule, float(r)) else 0
        gm = spectrum.GapMap(omegas, rs, status, np.full(status.shape, -1), args.max_iter)
    _write(args.out, gm.to_csv())
    if args.json:
        _write(args.json, gm.to_json())
    return 0


def cmd_edge_scan(args) -> int:
    rule = _rule(args.rule)
    r = _positive(_num(args.r, "--r"), "--r")
    lo, hi = _num(args.omega_lo, "--omega-lo"), _num(args.omega_hi, "--omega-hi")
    if not hi > lo:
        raise UsageError("--omega-hi", "must exceed --omega-lo")
    _positive(args.step, "--step")
    hits = edgemode.scan_edge_modes(lo, hi, r, rule, level=args.level, grid_step=args.step)
    _write(args.out, edgemode.hits_to_csv(hits))
    if args.indicator_at is not None:
        w = _num(args.indicator_at, "--indicator-at")
        ind = edgemode.edge_indicator(w, rule, r, args.level or edgemode.default_level(rule))
        _write(args.indicator_out, ind.to_csv())
    return 0


def cmd_modes(args) -> int:
    profile = _profile(args)
    _positive(args.h, "--h")
    _positive(args.omega_max, "--omega-max")
    try:
        op = discretize.assemble(profile, args.h)
    except discretize.IncommensurateStep as exc:
        raise UsageError("--h", str(exc)) from exc
    modes = discretize.eigensolve(op, args.omega_max, window=args.window, threshold=args.threshold)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "spectrum.csv").write_text(discretize.spectrum_to_csv(modes), encoding="utf-8")
    (out / "profile.json").write_text(profile.to_json(), encoding="utf-8")
    for k, m in enumerate(modes):
        if m.is_localized or args.all_modes:
            (out / f"mode_{k:04d}_{m.omega:.4f}.csv").write_text(discretize.mode_to_csv(m), encoding="utf-8")
    return 0


def cmd_robustness(args) -> int:
    profile = _profile(args)
    if args.steps < 1:
        raise UsageError("--steps", "must be >= 1")
    if args.trials < 1:
        raise UsageError("--trials", "must be >= 1")
    if args.sigma_max < 0:
        raise UsageError("--sigma-max", "must be nonnegative")
    sweep = robustness.robustness_sweep(
        profile, args.sigma_max, args.steps, args.trials, _positive(args.omega_max, "--omega-max"),
        args.seed, h=args.h, clamp_epsilon=_positive(args.epsilon, "--epsilon"),
    )
    _write(args.out, sweep.to_csv())
    if args.track is not None:
        table = robustness.track_mode(sweep, _positive(_num(args.track, "--track"), "--track"), args.track_tol)
        _write(args.track_out, table.to_csv())
    return 0


def cmd_trace(args) -> int:
    omega, r = args.omega, args.r
    _num(omega, "--omega")
    _positive(_num(r, "--r"), "--r")
    if args.n < 0:
        raise UsageError("--n", "must be nonnegative")
    seq = spectrum.trace_sequence(omega, r, args.n, dps=args.dps)
    _write(args.out, seq.to_csv())
    msg = f"status={seq.status.value}"
    if seq.terminated_at is not None:
        msg += f" terminated_at_level={seq.terminated_at} iterations={seq.iterations}"
    print(msg, file=sys.stderr)
    return 0


def cmd_envelope(args) -> int:
    rule = _rule(args.rule)
    omega = _num(args.omega, "--omega")
    r = _positive(_num(args.r, "--r"), "--r")
    level = args.level or (1 if isinstance(rule, tiling.Periodic) else 10)
    kappa = edgemode.decay_envelope(omega, rule, r, level)
    doc = {"omega": omega, "r": r, "level": level, "kappa": kappa}
    if level >= 5:
        doc["lyapunov"] = edgemode.lyapunov_estimate(rule, omega, r, level)
    if args.xmax is not None:
        xs = parse_grid(f"{-args.xmax}:{args.xmax}:{args.dx}", "--xmax")
        lines = ["x,envelope"] + [f"{x:.10g},{math.exp(-kappa * abs(x))!r}" for x in xs]
        _write(args.out, "\n".join(lines) + "\n")
    print(json.dumps(doc), file=sys.stderr if args.xmax is not None and args.out in (None, "-") else sys.stdout)
    return 0


# ------------------------------------------------------------------ parser


def _add_medium(p, profile: bool = False) -> None:
    p.add_argument("--rule", default="fibonacci", help="fibonacci | periodic:<AB..> | custom:<file.json>")
    p.add_argument("--r", default="2", help="contrast r (B wavenumber multiplier; B speed is 1/r)")
    p.add_argument("--cells", type=int, default=55, help="cells on each side of the interface")
    p.add_argument("--h", type=float, default=discretize.DEFAULT_H, help="finite-difference step")
    if profile:
        p.add_argument("--profile", help="read the profile from a JSON or CSV file instead")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasispec", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gap-map", help="gap test over an (r, omega) grid")
    p.add_argument("--rule", default="fibonacci")
    p.add_argument("--omega", required=True, help="omega grid lo:hi:step")
    p.add_argument("--r", required=True, help="r grid lo:hi:step")
    p.add_argument("--max-iter", type=int, default=spectrum.DEFAULT_MAX_ITER)
    p.add_argument("--out", default="-", help="CSV output path ('-' for stdout)")
    p.add_argument("--json", help="optional JSON output path")
    p.set_defaults(func=cmd_gap_map)

    p = sub.add_parser("edge-scan", help="locate edge-mode frequencies by eigenvector root finding")
    p.add_argument("--rule", default="fibonacci")
    p.add_argument("--r", default="2")
    p.add_argument("--omega-lo", required=True)
    p.add_argument("--omega-hi", required=True)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--level", type=int, default=None, help="default 12 (8 for periodic rules)")
    p.add_argument("--out", default="-")
    p.add_argument("--indicator-at", default=None, help="also export the level-by-level indicator at this omega")
    p.add_argument("--indicator-out", default="indicator.csv")
    p.set_defaults(func=cmd_edge_scan)

    p = sub.add_parser("modes", help="finite-difference modes of the reflected medium")
    _add_medium(p, profile=True)
    p.add_argument("--omega-max", type=float, default=5.0)
    p.add_argument("--window", type=float, default=discretize.LOCAL_WINDOW)
    p.add_argument("--threshold", type=float, default=discretize.LOCAL_THRESHOLD)
    p.add_argument("--all-modes", action="store_true", help="write every mode, not just localized ones")
    p.add_argument("--out-dir", default="modes")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("robustness", help="random speed perturbation sweep")
    _add_medium(p, profile=True)
    p.add_argument("--sigma-max", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--omega-max", type=float, default=5.0)
    p.add_argument("--epsilon", type=float, default=robustness.DEFAULT_EPSILON)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--track", default=None, help="reference frequency to track")
    p.add_argument("--track-tol", type=float, default=0.1)
    p.add_argument("--track-out", default="track.csv")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("trace", help="Fibonacci trace-map sequence")
    p.add_argument("--omega", required=True)
    p.add_argument("--r", required=True)
    p.add_argument("--n", type=int, default=100, help="steps after the three seeds")
    p.add_argument("--dps", type=int, default=None, help="decimal digits for mpmath (default: float64)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("envelope", help="decay rate of the edge-mode envelope")
    p.add_argument("--rule", default="fibonacci")
    p.add_argument("--omega", required=True)
    p.add_argument("--r", default="2")
    p.add_argument("--level", type=int, default=None, help="default 10 (1 for periodic rules)")
    p.add_argument("--xmax", type=float, default=None, help="write exp(-kappa|x|) on [-xmax, xmax]")
    p.add_argument("--dx", type=float, default=0.1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_envelope)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"quasispec {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"quasispec {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
