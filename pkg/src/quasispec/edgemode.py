"""Edge-mode condition for reflected recursive media.

For a frequency in a gap the level products ``T_{M_N}`` become hyperbolic and
their decaying eigenvector ``(v1, v2)`` sets which initial data at the
reflection point produce a decaying solution.  Mirror symmetry leaves two
choices: an even mode (``u'(0) = 0``) needs ``v2 -> 0`` and an odd mode
(``u(0) = 0``) needs ``v1 -> 0``.  Edge-mode frequencies are found as sign
changes of ``v1`` or ``v2`` at a fixed large level, refined by bisection.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from . import spectrum
from .tiling import Custom, Fibonacci, LabelSequence, Periodic, expand, level_length
from .transfer import (
    DomainError,
    ScaledMat,
    homogeneous_transfer,
    scaled_classify,
    scaled_eigen,
    scaled_product,
    Classification,
)

__all__ = [
    "EdgeIndicator",
    "EdgeModeHit",
    "NeverHyperbolic",
    "NotInGap",
    "Symmetry",
    "certify_gap",
    "decay_envelope",
    "default_level",
    "edge_indicator",
    "hits_to_csv",
    "indicator_from_matrices",
    "level_matrices",
    "lyapunov_bound",
    "lyapunov_estimate",
    "scan_edge_modes",
    "shoot",
    "small_eigvec",
]


class NotInGap(ValueError):
    """The frequency is not certified to lie in a spectral gap."""


class NeverHyperbolic(ValueError):
    """No level product was hyperbolic."""


class Symmetry(enum.Enum):
    EVEN = "Even"
    ODD = "Odd"


def default_level(rule) -> int:
    """Scan level used when none is given: 12 for Fibonacci-like rules, 8 for periodic."""
    return 8 if isinstance(rule, Periodic) else 12


# ------------------------------------------------------------------ level products


def _layer(label: str, omega: float, contrast_r: float) -> np.ndarray:
    return homogeneous_transfer(1.0 if label == "A" else contrast_r, omega)


def _word_matrix(word: str, omega: float, contrast_r: float) -> ScaledMat:
    acc = np.eye(2)
    ta, tb = _layer("A", omega, contrast_r), _layer("B", omega, contrast_r)
    for lab in word:
        acc = (ta if lab == "A" else tb) @ acc
    return ScaledMat.from_matrix(acc)


def level_matrices(rule, omega: float, contrast_r: float, max_level: int) -> list[ScaledMat]:
    """``[T_{M_1}, ..., T_{M_max_level}]`` as scaled products.

    Uses the rule's level decomposition, so the cost is linear in
    ``max_level`` rather than in the word length.
    """
    if max_level < 1:
        raise ValueError("max_level must be >= 1")
    mats: list[ScaledMat] = []
    for n in range(1, max_level + 1):
        base = rule.base(n)
        if base is not None:
            mats.append(_word_matrix(base, omega, contrast_r))
            continue
        acc = None
        for k in rule.parts(n):
            m = mats[k - 1]
            acc = m if acc is None else scaled_product(m, acc)
        mats.append(acc)
    return mats


def small_eigvec(m: ScaledMat) -> tuple[float, np.ndarray] | None:
    """``(log_lambda_large, v_small)`` of a hyperbolic product, else ``None``."""
    eig = scaled_eigen(m)
    if eig is None:
        return None
    loglam, vs, _ = eig
    return loglam, vs


# ------------------------------------------------------------------ gap dispatch


def certify_gap(omega: float, rule, contrast_r: float, max_iter: int = spectrum.DEFAULT_MAX_ITER,
                level: int | None = None) -> bool:
    """Whether ``omega`` lies in a spectral gap of the (unreflected) medium.

    Fibonacci uses the trace-map doubling certificate, periodic media the
    exact ``|tr T_{P_1}| > 2`` test.  Custom rules have no trace map, so the
    test is heuristic: the last three level products must be hyperbolic with
    growing ``log lambda_large``.
    """
    if omega == 0:
        return False
    if isinstance(rule, Fibonacci):
        return spectrum.gap_test(omega, contrast_r, max_iter=max_iter).in_gap
    if isinstance(rule, Periodic):
        return spectrum.periodic_gap_test(rule.seed, omega, contrast_r) is spectrum.PeriodicStatus.IN_GAP
    level = level or default_level(rule)
    mats = level_matrices(rule, omega, contrast_r, max(level, 4))[-3:]
    logs = []
    for m in mats:
        e = small_eigvec(m)
        if e is None:
            return False
        logs.append(e[0])
    return logs[0] < logs[1] < logs[2]


# ------------------------------------------------------------------ indicator


@dataclass
class EdgeIndicator:
    """Per-level decaying-eigenvector record.

    Arrays are aligned: ``levels[i]`` has ``log_lambda_large[i]`` and unit
    eigenvector ``(v1[i], v2[i])`` of the smallest eigenvalue.  Only
    hyperbolic levels appear.
    """

    levels: np.ndarray
    log_lambda_large: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    @property
    def final(self) -> tuple[float, float]:
        return float(self.v1[-1]), float(self.v2[-1])

    @property
    def vanishing(self) -> str:
        """Which component is smaller at the final level, ``'v1'`` or ``'v2'``."""
        v1, v2 = self.final
        return "v1" if abs(v1) <= abs(v2) else "v2"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "log_lambda_large", "v1", "v2"])
        for row in zip(self.levels, self.log_lambda_large, self.v1, self.v2):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()


def _align(v: np.ndarray, ref: np.ndarray | None) -> np.ndarray:
    if ref is None:
        # First vector: v1 >= 0, ties broken by v2 >= 0.
        if v[0] < 0 or (v[0] == 0 and v[1] < 0):
            return -v
        return v
    return -v if float(v @ ref) < 0 else v


def indicator_from_matrices(mats, first_level: int = 1) -> EdgeIndicator:
    """Edge indicator of an arbitrary sequence of level matrices.

    ``mats`` may hold plain 2x2 arrays or :class:`ScaledMat`; non-hyperbolic
    entries are skipped.  Signs are fixed by continuity in the level.
    """
    levels, logs, v1s, v2s = [], [], [], []
    prev = None
    for i, m in enumerate(mats):
        sm = m if isinstance(m, ScaledMat) else ScaledMat.from_matrix(np.asarray(m, dtype=float))
        e = small_eigvec(sm)
        if e is None:
            continue
        loglam, v = e
        v = _align(v, prev)
        prev = v
        levels.append(first_level + i)
        logs.append(loglam)
        v1s.append(v[0])
        v2s.append(v[1])
    if not levels:
        raise NeverHyperbolic("no level product is hyperbolic")
    return EdgeIndicator(np.array(levels), np.array(logs), np.array(v1s), np.array(v2s))


def edge_indicator(omega: float, rule, contrast_r: float, max_level: int, check_gap: bool = True) -> EdgeIndicator:
    """Decaying eigenvector of ``T_{M_N}`` for ``N = 1 .. max_level``.

    Raises
    ------
    NotInGap
        If ``check_gap`` is set and ``omega`` is not certified in a gap.
    NeverHyperbolic
        If no level product is hyperbolic.
    """
    if max_level < 3:
        raise ValueError("max_level must be >= 3")
    if check_gap and not certify_gap(omega, rule, contrast_r):
        raise NotInGap(f"omega={omega} is not certified in a gap at r={contrast_r}")
    return indicator_from_matrices(level_matrices(rule, omega, contrast_r, max_level))


# ------------------------------------------------------------------ decay rates


def _kappa(m: ScaledMat, length: int) -> float | None:
    e = scaled_eigen(m)
    if e is None:
        return None
    return e[0] / length


def decay_envelope(omega: float, rule, contrast_r: float, level: int = 10, check_gap: bool = True) -> float:
    """Decay rate ``kappa = log lambda_large(T_{M_level}) / #M_level``.

    Equivalently ``-log(min |eig|) / length`` since the determinant is 1.  The
    mode envelope is ``|u(0)| exp(-kappa |x|)``.
    """
    if check_gap and not certify_gap(omega, rule, contrast_r):
        raise NotInGap(f"omega={omega} is not certified in a gap at r={contrast_r}")
    m = level_matrices(rule, omega, contrast_r, level)[-1]
    k = _kappa(m, level_length(rule, level))
    if k is None or not k > 0:
        raise NotInGap(f"T_M{level} is not hyperbolic at omega={omega}")
    return k


def lyapunov_estimate(rule, omega: float, contrast_r: float, level: int = 20) -> float:
    """Growth rate ``log ||T_{M_level}||_2 / #M_level``."""
    if level < 5:
        raise ValueError("level must be >= 5")
    if omega == 0:
        raise DomainError("omega must be nonzero")
    m = level_matrices(rule, omega, contrast_r, level)[-1]
    return m.log_norm() / level_length(rule, level)


def lyapunov_bound(omega: float, contrast_r: float) -> float:
    """Fibonacci frequency-weighted bound ``phi^-1 log||T_A|| + phi^-2 log||T_B||``."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    na = np.linalg.norm(_layer("A", omega, contrast_r), 2)
    nb = np.linalg.norm(_layer("B", omega, contrast_r), 2)
    return math.log(na) / phi + math.log(nb) / phi**2


# ------------------------------------------------------------------ shooting


def shoot(labels: str, omega: float, contrast_r: float, start=(1.0, 0.0)) -> np.ndarray:
    """``(u, u')`` at each cell boundary ``x = 0, 1, ..., n`` of a label word.

    Returns an ``(n + 1, 2)`` array starting with ``start``.
    """
    labels = LabelSequence(labels)
    ta, tb = _layer("A", omega, contrast_r), _layer("B", omega, contrast_r)
    out = np.empty((len(labels) + 1, 2))
    out[0] = start
    for i, lab in enumerate(labels):
        out[i + 1] = (ta if lab == "A" else tb) @ out[i]
    return out


# ------------------------------------------------------------------ scanning


@dataclass(frozen=True)
class EdgeModeHit:
    omega: float
    symmetry: Symmetry
    kappa: float
    level: int


def hits_to_csv(hits) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega", "symmetry", "kappa", "level"])
    for h in hits:
        w.writerow([f"{h.omega:.7f}", h.symmetry.value, repr(float(h.kappa)), h.level])
    return buf.getvalue()


# Consecutive aligned vectors with a smaller dot product are treated as a
# discontinuity (eigenvector swap or a pole), not a root.
_JUMP_DOT = 0.5


def _vsmall(omega: float, rule, contrast_r: float, level: int) -> np.ndarray | None:
    if omega == 0:
        return None
    e = small_eigvec(level_matrices(rule, omega, contrast_r, level)[-1])
    return None if e is None else e[1]


def _bisect(f_lo: np.ndarray, lo: float, hi: float, comp: int, vec, tol: float) -> float | None:
    # f_lo is the aligned vector at lo; keep alignment relative to it.
    s_lo = math.copysign(1.0, f_lo[comp])
    ref = f_lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v = vec(mid)
        if v is None:
            return None
        v = _align(v, ref)
        if float(v @ ref) < _JUMP_DOT:
            return None
        if math.copysign(1.0, v[comp]) == s_lo:
            lo, ref = mid, v
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scan_edge_modes(omega_lo: float, omega_hi: float, contrast_r: float, rule=None, level: int | None = None,
                    grid_step: float = 1e-3, tol: float = 1e-6, kappa_level: int | None = None) -> list[EdgeModeHit]:
    """Edge-mode frequencies in ``[omega_lo, omega_hi]``.

    Samples the grid, keeps certified-gap samples where ``T_{M_level}`` is
    hyperbolic, aligns eigenvector signs along each gap run, and bisects every
    sign change of ``v1`` (odd mode) or ``v2`` (even mode) to ``tol``.

    Parameters
    ----------
    kappa_level : int, optional
        Level for the reported decay rate; defaults to ``level``.
    """
    rule = rule or Fibonacci()
    level = level or default_level(rule)
    kappa_level = kappa_level or level
    if not omega_hi > omega_lo or not grid_step > 0:
        raise ValueError("need omega_hi > omega_lo and grid_step > 0")
    grid = omega_lo + grid_step * np.arange(int(math.floor((omega_hi - omega_lo) / grid_step + 1e-9)) + 1)

    def vec(w):
        return _vsmall(w, rule, contrast_r, level)

    hits: list[EdgeModeHit] = []
    prev_w, prev_v = None, None
    for w in grid:
        w = float(w)
        v = vec(w) if certify_gap(w, rule, contrast_r) else None
        if v is None:
            prev_w, prev_v = None, None
            continue
        v = _align(v, prev_v)
        if prev_v is not None and float(v @ prev_v) >= _JUMP_DOT:
            for comp, sym in ((1, Symmetry.EVEN), (0, Symmetry.ODD)):
                if prev_v[comp] == 0.0 or np.sign(prev_v[comp]) != np.sign(v[comp]):
                    root = prev_w if prev_v[comp] == 0.0 else _bisect(prev_v, prev_w, w, comp, vec, tol)
                    if root is None:
                        continue
                    try:
                        kappa = decay_envelope(root, rule, contrast_r, kappa_level, check_gap=False)
                    except NotInGap:
                        continue
                    hits.append(EdgeModeHit(root, sym, kappa, level))
        prev_w, prev_v = w, v
    return hits
