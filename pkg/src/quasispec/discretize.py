"""Finite-difference modes of ``u'' + (omega / c(x))^2 u = 0`` with Dirichlet ends.

The eigenproblem ``-c^2 D2 u = omega^2 u`` is not symmetric, so it is solved
in the similar form ``C^{1/2} (-D2) C^{1/2} w = omega^2 w`` with
``C = diag(c^2)`` and ``u = C^{1/2} w``.  The matrix is symmetric tridiagonal
with diagonal ``2 c_i^2 / h^2`` and off-diagonal ``-c_i c_{i+1} / h^2``.
At nodes that sit on a material interface ``c^2`` is the harmonic mean of the
two neighbouring cells.

Mirror-symmetric profiles are split into even and odd blocks, which keeps
nearly degenerate pairs (modes trapped at the two far ends) from mixing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.sparse import diags

from .tiling import MaterialProfile

__all__ = [
    "DEFAULT_H",
    "DiscreteOperator",
    "EigenSolveError",
    "IncommensurateStep",
    "ModeRecord",
    "assemble",
    "eigensolve",
    "envelope_check",
    "interface_amplitude",
    "localization_metric",
    "mode_to_csv",
    "spectrum_to_csv",
]

DEFAULT_H = 0.01
LOCAL_WINDOW = 10.0
LOCAL_THRESHOLD = 0.5


class IncommensurateStep(ValueError):
    """Grid step does not divide the cell boundaries."""


class EigenSolveError(RuntimeError):
    """Tridiagonal eigensolver failure."""


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric tridiagonal FD operator on the interior nodes.

    Attributes
    ----------
    h : float
    x : ndarray
        Interior node positions.
    c : ndarray
        Wave speed at each node (harmonic mean of ``c^2`` on interfaces).
    diag, offdiag : ndarray
        Tridiagonal entries.
    domain : (float, float)
    symmetric_profile : bool
        The profile is mirror symmetric about ``x = 0`` with a node at 0.
    """

    h: float
    x: np.ndarray
    c: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray
    domain: tuple[float, float]
    symmetric_profile: bool = False

    @property
    def size(self) -> int:
        return len(self.diag)

    def to_sparse(self):
        return diags([self.offdiag, self.diag, self.offdiag], [-1, 0, 1], format="csr")

    def apply(self, w: np.ndarray) -> np.ndarray:
        out = self.diag * w
        out[:-1] += self.offdiag * w[1:]
        out[1:] += self.offdiag * w[:-1]
        return out


def _steps(length: float, h: float, what: str) -> int:
    k = length / h
    n = round(k)
    if abs(k - n) > 1e-12 * max(1.0, abs(k)) or n < 1:
        raise IncommensurateStep(f"h={h} does not divide {what} ({length})")
    return int(n)


def assemble(profile: MaterialProfile, h: float = DEFAULT_H) -> DiscreteOperator:
    """Build the FD operator for ``profile`` with step ``h``."""
    if not h > 0:
        raise ValueError("h must be positive")
    a, b = profile.domain
    n = _steps(b - a, h, "the domain length")
    idx = [_steps(p - a, h, f"breakpoint {p}") if p != a else 0 for p in profile.breakpoints]
    if len(set(idx)) != len(idx):
        raise IncommensurateStep(f"h={h} is coarser than some interval")
    x = a + h * np.arange(1, n)
    c2 = np.empty(n - 1)
    sp2 = profile.speeds**2
    for k in range(profile.n_intervals):
        lo, hi = idx[k], idx[k + 1]
        c2[lo : hi - 1] = sp2[k]  # nodes lo+1 .. hi-1, stored at index node-1
    for k in range(1, profile.n_intervals):
        c2[idx[k] - 1] = 2.0 / (1.0 / sp2[k - 1] + 1.0 / sp2[k])
    c = np.sqrt(c2)
    diag_ = 2.0 * c2 / h**2
    off = -c[:-1] * c[1:] / h**2
    sym = profile.is_reflection_symmetric(tol=1e-12) and n % 2 == 0
    return DiscreteOperator(float(h), x, c, diag_, off, (a, b), sym)


@dataclass
class ModeRecord:
    """One FD eigenpair.

    ``u`` is L2-normalised with trapezoid weights (Dirichlet ends are zero).
    ``parity`` is +1 / -1 for even / odd modes of symmetric profiles, 0 otherwise.
    """

    omega: float
    x: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    localization: float = 0.0
    is_localized: bool = False
    parity: int = 0

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    def norm(self) -> float:
        return math.sqrt(self.h * float(np.sum(self.u**2)))


def _solve_block(d, e, lo, hi, label):
    if len(d) == 0:
        return np.empty(0), np.empty((0, 0))
    try:
        if len(d) == 1:
            w = d.copy()
            keep = (w >= lo) & (w <= hi)
            return w[keep], np.ones((1, int(keep.sum())))
        return eigh_tridiagonal(d, e, select="v", select_range=(lo, hi), lapack_driver="stebz")
    except LinAlgError as exc:
        raise EigenSolveError(f"{label} block: {exc}") from exc


def _residual_check(op: DiscreteOperator, lam: np.ndarray, w: np.ndarray, tol: float) -> None:
    scale = max(1.0, float(np.max(np.abs(op.diag))))
    for j in range(w.shape[1]):
        r = np.linalg.norm(op.apply(w[:, j]) - lam[j] * w[:, j])
        if r > tol * scale:
            raise EigenSolveError(f"eigenpair {j} (omega^2={lam[j]:.6g}) residual {r:.3g} too large")


def eigensolve(op: DiscreteOperator, omega_max: float, omega_min: float = 0.0, window: float = LOCAL_WINDOW,
               threshold: float = LOCAL_THRESHOLD, residual_tol: float = 1e-10) -> list[ModeRecord]:
    """All modes with ``omega_min <= omega <= omega_max``, ascending.

    Parameters
    ----------
    residual_tol : float
        Bound on ``||A w - omega^2 w||`` relative to ``max |diag A|``.
    """
    if not omega_max > 0:
        raise ValueError("omega_max must be positive")
    lo, hi = max(omega_min, 0.0) ** 2, omega_max**2
    n = op.size
    if op.symmetric_profile:
        m = n // 2  # centre node index
        s2 = math.sqrt(2.0)
        # Even block, basis e_m, (e_{m+i} + e_{m-i}) / sqrt 2.
        de = op.diag[m:].copy()
        ee = op.offdiag[m:].copy()
        if len(ee):
            ee[0] *= s2
        lam_e, we = _solve_block(de, ee, lo, hi, "even")
        # Odd block, basis (e_{m+i} - e_{m-i}) / sqrt 2; centre value is zero.
        lam_o, wo = _solve_block(op.diag[m + 1 :], op.offdiag[m + 1 :], lo, hi, "odd")
        full_e = np.zeros((n, len(lam_e)))
        full_e[m] = we[0]
        full_e[m + 1 :] = we[1:] / s2
        full_e[:m] = full_e[m + 1 :][::-1]
        full_o = np.zeros((n, len(lam_o)))
        full_o[m + 1 :] = wo / s2
        full_o[:m] = -full_o[m + 1 :][::-1]
        lam = np.concatenate([lam_e, lam_o])
        w = np.hstack([full_e, full_o])
        parity = np.concatenate([np.ones(len(lam_e), int), -np.ones(len(lam_o), int)])
        order = np.argsort(lam, kind="stable")
        lam, w, parity = lam[order], w[:, order], parity[order]
    else:
        lam, w = _solve_block(op.diag, op.offdiag, lo, hi, "full")
        parity = np.zeros(len(lam), int)
    _residual_check(op, lam, w, residual_tol)
    u = w * op.c[:, None]
    u /= np.sqrt(op.h * np.sum(u**2, axis=0))
    modes = []
    for j in range(len(lam)):
        rec = ModeRecord(math.sqrt(max(lam[j], 0.0)), op.x, u[:, j], parity=int(parity[j]))
        rec.localization = localization_metric(rec, window)
        rec.is_localized = rec.localization >= threshold
        modes.append(rec)
    return modes


def localization_metric(mode: ModeRecord, window_halfwidth: float = LOCAL_WINDOW, centre: float = 0.0) -> float:
    """Fraction of the L2 mass within ``window_halfwidth`` of ``centre``."""
    mass = mode.u**2
    total = float(np.sum(mass))
    if total == 0.0:
        return 0.0
    inside = np.abs(mode.x - centre) <= window_halfwidth + 1e-12
    return min(1.0, float(np.sum(mass[inside])) / total)


def interface_amplitude(mode: ModeRecord, halfwidth: float = 1.0) -> float:
    """``max |u|`` over ``|x| <= halfwidth`` (the cells touching the interface)."""
    sel = np.abs(mode.x) <= halfwidth + 1e-12
    if not sel.any():
        sel = np.abs(mode.x) == np.min(np.abs(mode.x))
    return float(np.max(np.abs(mode.u[sel])))


def envelope_check(mode: ModeRecord, kappa: float, slack: float = 1.5, inner: float = 0.9,
                   ref_halfwidth: float = 1.0) -> bool:
    """Whether ``|u(x)| <= slack * u0 * exp(-kappa |x|)`` on ``|x| <= inner * L``.

    ``L`` is the larger distance from 0 to a domain end.  ``u0`` is the
    interface amplitude over ``|x| <= ref_halfwidth``; with
    ``ref_halfwidth = 0`` the node nearest 0 is used.
    """
    if not kappa > 0:
        return False
    half = float(np.max(np.abs(mode.x)))
    sel = np.abs(mode.x) <= inner * half
    u0 = interface_amplitude(mode, ref_halfwidth)
    bound = slack * u0 * np.exp(-kappa * np.abs(mode.x[sel]))
    return bool(np.all(np.abs(mode.u[sel]) <= bound))


def mode_to_csv(mode: ModeRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "u"])
    for xi, ui in zip(mode.x, mode.u):
        w.writerow([f"{xi:.10g}", repr(float(ui))])
    return buf.getvalue()


def spectrum_to_csv(modes) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega", "localization", "is_localized"])
    for m in modes:
        w.writerow([repr(m.omega), repr(m.localization), "true" if m.is_localized else "false"])
    return buf.getvalue()
