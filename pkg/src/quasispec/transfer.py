"""2x2 transfer matrices for unit-length homogeneous layers.

A transfer matrix maps ``(u(0), u'(0))`` to ``(u(1), u'(1))`` for the
Helmholtz equation ``u'' + k^2 u = 0`` on a unit layer.  Layers are
parametrised by their *index* ``n``: the layer wavenumber is ``k = n * omega``,
so a layer of wave speed ``c`` has index ``1 / c``.

Matrices are plain ``(2, 2)`` float64 numpy arrays.  Long products are carried
as :class:`ScaledMat` so that the exponentially growing norm never overflows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CLASSIFY_TOL",
    "Classification",
    "DomainError",
    "EigenPair2",
    "NotHyperbolic",
    "ScaledMat",
    "S",
    "classify",
    "compose",
    "eigen",
    "homogeneous_transfer",
    "identity",
    "scaled_classify",
    "scaled_compose",
    "scaled_eigen",
    "scaled_product",
    "symmetric_inverse",
]

CLASSIFY_TOL = 1e-9

S = np.diag([1.0, -1.0])


class DomainError(ValueError):
    """Raised for parameters outside an operation's domain."""


class NotHyperbolic(ValueError):
    """Real eigenvectors were requested for an elliptic matrix."""


class Classification(enum.Enum):
    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"
    ELLIPTIC = "elliptic"


def identity() -> np.ndarray:
    return np.eye(2)


def homogeneous_transfer(index: float, omega: float) -> np.ndarray:
    """Transfer matrix of a unit-length homogeneous layer.

    Parameters
    ----------
    index : float
        Ratio of the layer wavenumber to ``omega`` (inverse wave speed).
    omega : float
        Frequency; must be nonzero.

    Returns
    -------
    numpy.ndarray
        ``[[cos k, sin k / k], [-k sin k, cos k]]`` with ``k = index * omega``.
    """
    if not index > 0:
        raise DomainError(f"layer index must be positive, got {index!r}")
    if omega == 0 or not math.isfinite(omega):
        raise DomainError(f"omega must be finite and nonzero, got {omega!r}")
    k = index * omega
    c, s = math.cos(k), math.sin(k)
    return np.array([[c, s / k], [-k * s, c]])


def compose(later: np.ndarray, earlier: np.ndarray) -> np.ndarray:
    """Transfer matrix of ``earlier`` followed by ``later``."""
    return later @ earlier


def symmetric_inverse(t: np.ndarray) -> np.ndarray:
    """Inverse of the transfer matrix of a mirror-symmetric unit, ``S t S``.

    Only valid when ``t`` comes from a unit with ``c(x) = c(1 - x)``; the
    caller is responsible for that.
    """
    out = np.array(t, dtype=float, copy=True)
    out[0, 1] = -out[0, 1]
    out[1, 0] = -out[1, 0]
    return out


def _classify_trace(abs_tr: float, tol: float) -> Classification:
    if abs_tr > 2.0 + tol:
        return Classification.HYPERBOLIC
    if abs_tr < 2.0 - tol:
        return Classification.ELLIPTIC
    return Classification.PARABOLIC


def classify(t: np.ndarray, tol: float = CLASSIFY_TOL) -> Classification:
    """Hyperbolic / parabolic / elliptic split of an SL(2, R) matrix by trace."""
    return _classify_trace(abs(t[0, 0] + t[1, 1]), tol)


@dataclass(frozen=True)
class EigenPair2:
    """Eigen-decomposition of a unimodular 2x2 matrix.

    For elliptic input only the (unit) magnitudes are filled in and
    ``elliptic`` is set; the vectors are ``None``.
    """

    lambda_small: float
    lambda_large: float
    v_small: np.ndarray | None
    v_large: np.ndarray | None
    elliptic: bool = False


def _null_vector(a: float, b: float, c: float, d: float) -> np.ndarray:
    # Unit vector annihilated by [[a, b], [c, d]] (assumed singular), taken
    # from whichever row has the larger norm.
    if math.hypot(a, b) >= math.hypot(c, d):
        v = np.array([b, -a])
    else:
        v = np.array([d, -c])
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        # Zero matrix: every vector is an eigenvector.
        return np.array([1.0, 0.0])
    return v / n


def _eigvecs(u: np.ndarray, mu_small: float, mu_large: float):
    a, b, c, d = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    if b == 0.0 and c == 0.0:
        # Diagonal: eigenvectors are the axes.
        if abs(a) <= abs(d):
            return np.array([1.0, 0.0]), np.array([0.0, 1.0])
        return np.array([0.0, 1.0]), np.array([1.0, 0.0])
    vs = _null_vector(a - mu_small, b, c, d - mu_small)
    vl = _null_vector(a - mu_large, b, c, d - mu_large)
    return vs, vl


def _real_roots(tr: float, det: float):
    disc = tr * tr - 4.0 * det
    if disc < 0.0:
        return None
    sign = 1.0 if tr >= 0.0 else -1.0
    large = 0.5 * (tr + sign * math.sqrt(disc))
    small = det / large if large != 0.0 else 0.0
    return small, large


def eigen(t: np.ndarray, vectors: bool = True) -> EigenPair2:
    """Eigenvalues and unit eigenvectors of ``t`` via the closed-form quadratic.

    ``lambda_large = (tr + sign(tr) sqrt(tr^2 - 4)) / 2`` and the small
    eigenvalue is taken as ``det / lambda_large`` to avoid cancellation.

    Raises
    ------
    NotHyperbolic
        If ``t`` is elliptic and ``vectors`` is true.
    """
    tr = float(t[0, 0] + t[1, 1])
    det = float(t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0])
    roots = _real_roots(tr, det)
    if roots is None:
        if vectors:
            raise NotHyperbolic(f"elliptic matrix (trace {tr:.6g}) has no real eigenvectors")
        mag = math.sqrt(abs(det))
        return EigenPair2(mag, mag, None, None, elliptic=True)
    small, large = roots
    vs, vl = _eigvecs(np.asarray(t, dtype=float), small, large)
    return EigenPair2(small, large, vs, vl)


@dataclass(frozen=True)
class ScaledMat:
    """Matrix stored as ``exp(log_scale) * unit`` with ``max|unit| == 1``."""

    unit: np.ndarray
    log_scale: float = 0.0

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "ScaledMat":
        return _renormalise(np.asarray(m, dtype=float), 0.0)

    @classmethod
    def eye(cls) -> "ScaledMat":
        return cls(np.eye(2), 0.0)

    def matrix(self) -> np.ndarray:
        """Reconstructed product (may overflow for long products)."""
        return math.exp(self.log_scale) * self.unit

    def log_trace_abs(self) -> float:
        tr = abs(self.unit[0, 0] + self.unit[1, 1])
        return -math.inf if tr == 0.0 else math.log(tr) + self.log_scale

    def log_norm(self) -> float:
        """Natural log of the spectral norm."""
        return math.log(np.linalg.norm(self.unit, 2)) + self.log_scale


def _renormalise(m: np.ndarray, log_scale: float) -> ScaledMat:
    peak = float(np.max(np.abs(m)))
    if peak == 0.0 or not math.isfinite(peak):
        raise FloatingPointError("cannot renormalise a zero or non-finite matrix")
    return ScaledMat(m / peak, log_scale + math.log(peak))


def scaled_compose(acc: ScaledMat, nxt: np.ndarray) -> ScaledMat:
    """Append ``nxt`` (applied after ``acc``) and renormalise."""
    return _renormalise(nxt @ acc.unit, acc.log_scale)


def scaled_product(later: ScaledMat, earlier: ScaledMat) -> ScaledMat:
    return _renormalise(later.unit @ earlier.unit, later.log_scale + earlier.log_scale)


def scaled_classify(acc: ScaledMat, tol: float = CLASSIFY_TOL) -> Classification:
    lt = acc.log_trace_abs()
    if lt > 700.0:
        return Classification.HYPERBOLIC
    return _classify_trace(math.exp(lt), tol)


def scaled_eigen(acc: ScaledMat):
    """Eigen-data of a scaled product.

    Returns
    -------
    tuple
        ``(log_lambda_large, v_small, v_large)``, or ``None`` when the product
        is not hyperbolic.  Eigenvectors are those of ``unit`` and hence of the
        true product.
    """
    if scaled_classify(acc) is not Classification.HYPERBOLIC:
        return None
    u = acc.unit
    tr = float(u[0, 0] + u[1, 1])
    # det(unit) = exp(-2 log_scale); it underflows harmlessly to 0.
    det_u = math.exp(-2.0 * acc.log_scale) if acc.log_scale < 350.0 else 0.0
    small, large = _real_roots(tr, det_u)
    vs, vl = _eigvecs(u, small, large)
    return math.log(abs(large)) + acc.log_scale, vs, vl
