"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code: layer matrices are
rebuilt from the closed form and products are taken label by label.
"""

import math

import mpmath
import numpy as np


def layer(k):
    """Unit-layer transfer matrix for wavenumber ``k``."""
    c, s = math.cos(k), math.sin(k)
    return np.array([[c, s / k], [-k * s, c]])


def word_product(word, omega, r):
    """Explicit product over a label word, later cells on the left."""
    ta, tb = layer(omega), layer(r * omega)
    m = np.eye(2)
    for lab in word:
        m = (ta if lab == "A" else tb) @ m
    return m


def fibonacci_words(n):
    """F_1 .. F_n by direct concatenation."""
    words = ["A", "AB"]
    while len(words) < n:
        words.append(words[-1] + words[-2])
    return words[:n]


def mp_traces(omega, r, n_levels, dps=60):
    """tr T_{F_N} for N = 0 .. n_levels by exact-ish mpmath matrix products."""
    with mpmath.workdps(dps):
        def lay(k):
            return mpmath.matrix([[mpmath.cos(k), mpmath.sin(k) / k], [-k * mpmath.sin(k), mpmath.cos(k)]])

        ta, tb = lay(omega), lay(r * omega)
        mats = [tb, ta]  # F_0 = B, F_1 = A
        while len(mats) <= n_levels:
            mats.append(mats[-2] * mats[-1])
        return [mats[k][0, 0] + mats[k][1, 1] for k in range(n_levels + 1)]


def dirichlet_omegas(length, speed, k_max):
    """Exact eigenfrequencies of -c^2 u'' on an interval of given length."""
    return speed * math.pi * np.arange(1, k_max + 1) / length


def fd_dirichlet_omegas(length, speed, h, k_max):
    """Exact eigenvalues of the 3-point Dirichlet stencil (homogeneous case)."""
    k = np.arange(1, k_max + 1)
    return speed * (2.0 / h) * np.sin(k * math.pi * h / (2.0 * length))
