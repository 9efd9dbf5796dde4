"""Spectral-gap detection through the Fibonacci trace map.

Traces ``x_N = tr T_{F_N}`` obey ``x_{N+1} = x_N x_{N-1} - x_{N-2}``.  The
sequence is stored from level 0 with ``x_0 = tr T_B`` (taking ``F_0 = B``
keeps ``T_{F_2} = T_{F_0} T_{F_1}``, so the recursion already holds at
``N = 2``).  A frequency is certified to lie in a gap once three consecutive
terms satisfy ``|a| > 2``, ``|b| > 2|a|``, ``|c| > 2|b|``: after that the
traces grow at least geometrically forever.

All closed-form seeds are free of ``1/omega``; they are finite at ``omega = 0``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import _expr
from .tiling import LabelSequence
from .transfer import DomainError, homogeneous_transfer

__all__ = [
    "DEFAULT_MAX_ITER",
    "OVERFLOW_GUARD",
    "GapMap",
    "GapStatus",
    "PeriodicStatus",
    "SquareMapStatus",
    "TraceSequence",
    "doubling_holds",
    "gap_map",
    "gap_test",
    "initial_traces",
    "periodic_gap_test",
    "periodic_trace",
    "seed_traces",
    "square_trace_map",
    "trace_sequence",
    "trace_step",
]

DEFAULT_MAX_ITER = 200
OVERFLOW_GUARD = 1e150


class GapStatus(enum.Enum):
    DOUBLING_ATTAINED = "DoublingAttained"
    BOUNDED_TO_HORIZON = "BoundedToHorizon"
    OVERFLOWED = "Overflowed"

    @property
    def in_gap(self) -> bool:
        return self is not GapStatus.BOUNDED_TO_HORIZON


class PeriodicStatus(enum.Enum):
    IN_GAP = "InGap"
    IN_BAND = "InBand"


class SquareMapStatus(enum.Enum):
    BOUNDED = "Bounded"
    DIVERGED = "Diverged"


# ------------------------------------------------------------------ seeds


def _check_r(r) -> None:
    if not r > 0:
        raise DomainError(f"contrast r must be positive, got {r!r}")


def _seeds_float(omega: float, r: float) -> tuple[float, float, float]:
    ca, sa = math.cos(omega), math.sin(omega)
    cb, sb = math.cos(r * omega), math.sin(r * omega)
    x0 = 2.0 * cb
    x1 = 2.0 * ca
    x2 = 2.0 * ca * cb - (r + 1.0 / r) * sa * sb
    return x0, x1, x2


def _seeds_mp(omega, r):
    ca, sa = mpmath.cos(omega), mpmath.sin(omega)
    cb, sb = mpmath.cos(r * omega), mpmath.sin(r * omega)
    return 2 * cb, 2 * ca, 2 * ca * cb - (r + 1 / r) * sa * sb


def seed_traces(omega, contrast_r) -> tuple[float, float, float]:
    """``(tr T_B, tr T_A, tr T_B T_A)``, the level-0..2 traces."""
    omega, contrast_r = _expr.to_float(omega), _expr.to_float(contrast_r)
    _check_r(contrast_r)
    return _seeds_float(omega, contrast_r)


def initial_traces(omega, contrast_r) -> tuple[float, float, float]:
    """Traces of ``T_{F_1}``, ``T_{F_2}``, ``T_{F_3}`` in closed form.

    ``x1 = 2 cos w``,
    ``x2 = 2 cos w cos rw - (r + 1/r) sin w sin rw``,
    ``x3 = 2 cos rw cos 2w - (r + 1/r) sin rw sin 2w`` (trace of ``A B A``).
    """
    omega, contrast_r = _expr.to_float(omega), _expr.to_float(contrast_r)
    _check_r(contrast_r)
    if omega == 0:
        raise DomainError("omega must be nonzero")
    _, x1, x2 = _seeds_float(omega, contrast_r)
    cb, sb = math.cos(contrast_r * omega), math.sin(contrast_r * omega)
    x3 = 2.0 * cb * math.cos(2.0 * omega) - (contrast_r + 1.0 / contrast_r) * sb * math.sin(2.0 * omega)
    return x1, x2, x3


def trace_step(x_prev2, x_prev1, x_prev0):
    """One step of the trace map: ``x_{N+1} = x_N x_{N-1} - x_{N-2}``.

    Arguments are ``(x_{N-2}, x_{N-1}, x_N)``.
    """
    return x_prev0 * x_prev1 - x_prev2


def doubling_holds(a, b, c) -> bool:
    """Three-term growth certificate on consecutive traces ``a, b, c``."""
    a, b, c = abs(a), abs(b), abs(c)
    return a > 2 and b > 2 * a and c > 2 * b


# ------------------------------------------------------------------ sequences


@dataclass
class TraceSequence:
    """Trace-map orbit from level 0.

    Attributes
    ----------
    values : list
        ``values[k]`` is the level-``k`` trace, ``values[0] = tr T_B``.
        Floats, or ``mpmath.mpf`` when run in extended precision.
    status : GapStatus
    terminated_at : int or None
        Level of the term completing the doubling triple (or of the first
        term past the overflow guard).
    dps : int or None
        Decimal digits used, ``None`` for float64.
    """

    values: list
    status: GapStatus
    terminated_at: int | None = None
    dps: int | None = None

    @property
    def iterations(self) -> int | None:
        """Trace-map steps taken after the three seeds, up to termination."""
        return None if self.terminated_at is None else self.terminated_at - 2

    @property
    def in_gap(self) -> bool:
        return self.status.in_gap

    def x(self, level: int):
        return self.values[level]

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "x"])
        for k, v in enumerate(self.values):
            w.writerow([k, mpmath.nstr(v, 17) if self.dps else repr(float(v))])
        return buf.getvalue()


def _parse_pair(omega, contrast_r, dps):
    if dps is None:
        return _expr.to_float(omega), _expr.to_float(contrast_r)

    def conv(v):
        if isinstance(v, str):
            return _expr.evaluate(v, num=mpmath.mpf, pi=+mpmath.pi)
        return mpmath.mpf(v)

    return conv(omega), conv(contrast_r)


def _run(omega, contrast_r, n_steps: int, dps: int | None, stop_on_doubling: bool) -> TraceSequence:
    with mpmath.workdps(dps or 15):
        omega, contrast_r = _parse_pair(omega, contrast_r, dps)
        _check_r(contrast_r)
        x = list(_seeds_float(omega, contrast_r) if dps is None else _seeds_mp(omega, contrast_r))
        status, term = GapStatus.BOUNDED_TO_HORIZON, None
        n = 2
        while True:
            if term is None:
                if doubling_holds(x[n - 2], x[n - 1], x[n]):
                    status, term = GapStatus.DOUBLING_ATTAINED, n
                    if stop_on_doubling:
                        break
                elif not abs(x[n]) <= OVERFLOW_GUARD:  # also catches NaN
                    status, term = GapStatus.OVERFLOWED, n
                    break
            if n - 2 >= n_steps:
                break
            if dps is None and not abs(x[n]) <= OVERFLOW_GUARD:
                break  # continuing past the guard would only produce inf/NaN
            x.append(trace_step(x[n - 2], x[n - 1], x[n]))
            n += 1
    return TraceSequence(x, status, term, dps)


def gap_test(omega, contrast_r, max_iter: int = DEFAULT_MAX_ITER, dps: int | None = None) -> TraceSequence:
    """Gap certificate for the reflected Fibonacci medium at one frequency.

    Iterates the trace map at most ``max_iter`` steps past the seeds and stops
    at the first doubling triple.

    Parameters
    ----------
    omega, contrast_r : float or str
        Strings such as ``"3*pi/2"`` are evaluated exactly (useful with ``dps``).
    max_iter : int
        Horizon; must be at least 3.
    dps : int, optional
        Run in mpmath with this many decimal digits.  Float64 is used by
        default; marginal orbits (for example exactly periodic ones) are
        unstable under float rounding and need extended precision.
    """
    if max_iter < 3:
        raise ValueError("max_iter must be at least 3")
    if _expr.to_float(omega) == 0:
        raise DomainError("omega must be nonzero")
    return _run(omega, contrast_r, max_iter, dps, stop_on_doubling=True)


def trace_sequence(omega, contrast_r, n_steps: int, dps: int | None = None) -> TraceSequence:
    """Full orbit of ``n_steps`` steps past the seeds (no early stop).

    The status still reports the first doubling triple, if any.  In float64
    the orbit is cut once it passes the overflow guard.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    return _run(omega, contrast_r, n_steps, dps, stop_on_doubling=False)


# ------------------------------------------------------------------ gap maps


_STATUS_CODE = {GapStatus.BOUNDED_TO_HORIZON: 0, GapStatus.DOUBLING_ATTAINED: 1, GapStatus.OVERFLOWED: 2}
_CODE_STATUS = {v: k for k, v in _STATUS_CODE.items()}


@dataclass
class GapMap:
    """Gap-test outcomes on an ``r`` x ``omega`` grid.

    ``status`` holds codes 0 (bounded), 1 (doubling) and 2 (overflowed);
    ``doubling_iteration`` is -1 where no certificate was reached.
    """

    omega_axis: np.ndarray
    r_axis: np.ndarray
    status: np.ndarray
    doubling_iteration: np.ndarray
    max_iter: int = DEFAULT_MAX_ITER

    @property
    def in_gap(self) -> np.ndarray:
        return self.status != 0

    @property
    def overflowed(self) -> np.ndarray:
        return self.status == 2

    def cell(self, i_r: int, i_omega: int) -> tuple[GapStatus, int | None]:
        it = int(self.doubling_iteration[i_r, i_omega])
        return _CODE_STATUS[int(self.status[i_r, i_omega])], (it if it >= 0 else None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "omega", "in_gap", "doubling_iteration"])
        gap = self.in_gap
        for i, r in enumerate(self.r_axis):
            for j, om in enumerate(self.omega_axis):
                it = int(self.doubling_iteration[i, j])
                w.writerow([repr(float(r)), repr(float(om)), "true" if gap[i, j] else "false", it if it >= 0 else ""])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "omega_axis": self.omega_axis.tolist(),
                "r_axis": self.r_axis.tolist(),
                "max_iter": self.max_iter,
                "in_gap": self.in_gap.tolist(),
                "overflowed": self.overflowed.tolist(),
                "doubling_iteration": [[v if v >= 0 else None for v in row] for row in self.doubling_iteration.tolist()],
            }
        )


def _gap_rows(omega_axis: np.ndarray, r_rows: np.ndarray, max_iter: int):
    nr, nw = len(r_rows), len(omega_axis)
    x0 = np.empty((nr, nw))
    x1 = np.empty((nr, nw))
    x2 = np.empty((nr, nw))
    # Seeds via math.* per cell, so every cell matches the scalar path bit for bit.
    for i, r in enumerate(r_rows):
        for j, om in enumerate(omega_axis):
            x0[i, j], x1[i, j], x2[i, j] = _seeds_float(float(om), float(r))
    status = np.zeros((nr, nw), dtype=np.int8)
    term = np.full((nr, nw), -1, dtype=np.int64)
    active = np.ones((nr, nw), dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(2, max_iter + 3):
            a, b, c = np.abs(x0), np.abs(x1), np.abs(x2)
            dbl = active & (a > 2) & (b > 2 * a) & (c > 2 * b)
            status[dbl] = 1
            term[dbl] = n
            active &= ~dbl
            over = active & ~(c <= OVERFLOW_GUARD)
            status[over] = 2
            term[over] = n
            active &= ~over
            if n - 2 >= max_iter or not active.any():
                break
            x0, x1, x2 = x1, x2, x2 * x1 - x0
    iters = np.where(status == 1, term - 2, -1)
    return status, iters


def _workers(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("QUASISPEC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def gap_map(omega_axis, r_axis, max_iter: int = DEFAULT_MAX_ITER, workers: int | None = None) -> GapMap:
    """Gap test on every ``(r, omega)`` grid cell.

    Cells are independent.  With ``workers > 1`` (or ``QUASISPEC_THREADS``)
    rows are processed in parallel chunks; the result is identical either way.
    An ``omega = 0`` cell is evaluated from the closed-form seeds ``(2, 2, 2)``
    and reported as bounded.
    """
    omega_axis = np.asarray(omega_axis, dtype=float).ravel()
    r_axis = np.asarray(r_axis, dtype=float).ravel()
    if omega_axis.size == 0 or r_axis.size == 0:
        raise ValueError("axes must be nonempty")
    for name, ax in (("omega", omega_axis), ("r", r_axis)):
        if np.any(np.diff(ax) <= 0):
            raise ValueError(f"{name} axis must be strictly increasing")
    if np.any(r_axis <= 0):
        raise DomainError("r axis must be positive")
    if max_iter < 3:
        raise ValueError("max_iter must be at least 3")
    nthreads = min(_workers(workers), len(r_axis))
    if nthreads <= 1:
        status, iters = _gap_rows(omega_axis, r_axis, max_iter)
    else:
        chunks = np.array_split(np.arange(len(r_axis)), nthreads)
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(lambda idx: _gap_rows(omega_axis, r_axis[idx], max_iter), chunks))
        status = np.concatenate([p[0] for p in parts])
        iters = np.concatenate([p[1] for p in parts])
    return GapMap(omega_axis, r_axis, status, iters, max_iter)


# ------------------------------------------------------------------ periodic / square map


def _layer(label: str, omega: float, contrast_r: float) -> np.ndarray:
    return homogeneous_transfer(1.0 if label == "A" else contrast_r, omega)


def periodic_trace(seed, omega, contrast_r) -> float:
    """``tr T_{P_1}`` for the seed word."""
    seed = LabelSequence(seed)
    omega, contrast_r = _expr.to_float(omega), _expr.to_float(contrast_r)
    t = np.eye(2)
    for lab in seed:
        t = _layer(lab, omega, contrast_r) @ t
    return float(t[0, 0] + t[1, 1])


def periodic_gap_test(seed, omega, contrast_r) -> PeriodicStatus:
    """Gap test for the periodic medium ``seed seed seed ...``: ``|tr T_{P_1}| > 2``."""
    tr = periodic_trace(seed, omega, contrast_r)
    return PeriodicStatus.IN_GAP if abs(tr) > 2.0 else PeriodicStatus.IN_BAND


def square_trace_map(y1: float, max_iter: int = 10_000, escape: float = 10.0) -> SquareMapStatus:
    """Iterate ``y <- y^2 - 2`` (traces of a homogeneous medium at doubling lengths).

    Divergence is certified once ``|y| > escape`` (any ``|y| > 2`` escapes,
    ``escape = 10`` just leaves margin).
    """
    y = float(y1)
    for _ in range(max_iter):
        if not abs(y) <= escape:
            return SquareMapStatus.DIVERGED
        y = y * y - 2.0
    return SquareMapStatus.BOUNDED if abs(y) <= escape else SquareMapStatus.DIVERGED
