"""Disorder sweeps: perturb cell speeds and follow the localized modes.

Each cell speed is scaled by ``1 + X_n`` with ``X_n ~ N(0, sigma^2)``
independent across all cells of the reflected structure (both halves), then
clamped below at ``epsilon``.  Random numbers come from numpy's PCG64 via
``default_rng``; the stream for sweep point ``(step, trial)`` is seeded with
``SeedSequence([base_seed, step, trial])``, so any subset of the sweep can be
recomputed on its own and results do not depend on scheduling.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .discretize import DEFAULT_H, EigenSolveError, assemble, eigensolve
from .tiling import MaterialProfile

__all__ = [
    "DEFAULT_EPSILON",
    "PerturbationSpec",
    "SweepResult",
    "TrackTable",
    "nearest_localized",
    "perturb_profile",
    "robustness_sweep",
    "sigma_grid",
    "track_mode",
]

DEFAULT_EPSILON = 1e-3


@dataclass(frozen=True)
class PerturbationSpec:
    sigma: float
    clamp_epsilon: float = DEFAULT_EPSILON
    rng_seed: int | tuple = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")
        if not self.clamp_epsilon > 0:
            raise ValueError("clamp_epsilon must be positive")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng(np.random.SeedSequence(list(seed)))
    return np.random.default_rng(seed)


def perturb_profile(profile: MaterialProfile, spec: PerturbationSpec) -> MaterialProfile:
    """Multiply every interval speed by ``1 + X_n`` and clamp at ``epsilon``.

    ``sigma = 0`` returns the profile untouched.
    """
    if spec.sigma == 0:
        return profile
    x = _rng(spec.rng_seed).normal(0.0, spec.sigma, size=profile.n_intervals)
    return profile.with_speeds(np.maximum(profile.speeds * (1.0 + x), spec.clamp_epsilon))


def sigma_grid(sigma_max: float, n_steps: int) -> np.ndarray:
    """``n_steps`` evenly spaced values from 0 to ``sigma_max`` inclusive."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if n_steps == 1:
        return np.array([0.0])
    return np.linspace(0.0, sigma_max, n_steps)


@dataclass
class SweepResult:
    """Flat table of modes, one row per (sigma, trial, mode)."""

    sigma: np.ndarray
    step: np.ndarray
    trial: np.ndarray
    omega: np.ndarray
    localization: np.ndarray
    is_localized: np.ndarray
    sigmas: np.ndarray
    trials_per_sigma: int

    def __len__(self) -> int:
        return len(self.omega)

    def block(self, step: int, trial: int) -> np.ndarray:
        """Row indices of one (step, trial) spectrum."""
        return np.flatnonzero((self.step == step) & (self.trial == trial))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "trial", "omega", "localization", "is_localized"])
        for s, t, om, loc, il in zip(self.sigma, self.trial, self.omega, self.localization, self.is_localized):
            w.writerow([repr(float(s)), int(t), repr(float(om)), repr(float(loc)), "true" if il else "false"])
        return buf.getvalue()


def _one(args):
    profile, sigma, eps, seed, h, omega_max = args
    pert = perturb_profile(profile, PerturbationSpec(sigma, eps, seed))
    try:
        modes = eigensolve(assemble(pert, h), omega_max)
    except EigenSolveError as exc:
        raise EigenSolveError(f"sigma={sigma}, seed={seed}: {exc}") from exc
    return (
        np.array([m.omega for m in modes]),
        np.array([m.localization for m in modes]),
        np.array([m.is_localized for m in modes], dtype=bool),
    )


def _workers(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    try:
        return max(1, int(os.environ.get("QUASISPEC_THREADS", "1")))
    except ValueError:
        return 1


def robustness_sweep(profile: MaterialProfile, sigma_max: float = 0.1, n_steps: int = 100,
                     trials_per_sigma: int = 1, omega_max: float = 5.0, base_seed: int = 0,
                     h: float = DEFAULT_H, clamp_epsilon: float = DEFAULT_EPSILON, sigmas=None,
                     workers: int | None = None) -> SweepResult:
    """Perturb-and-solve over a sigma grid.

    Parameters
    ----------
    sigmas : sequence of float, optional
        Explicit sigma values; overrides ``sigma_max`` / ``n_steps``.
    workers : int, optional
        Process count; defaults to ``QUASISPEC_THREADS`` or 1.
    """
    if trials_per_sigma < 1:
        raise ValueError("trials_per_sigma must be >= 1")
    grid = np.asarray(sigmas, dtype=float) if sigmas is not None else sigma_grid(sigma_max, n_steps)
    if np.any(grid < 0):
        raise ValueError("sigma values must be nonnegative")
    jobs, keys = [], []
    for k, s in enumerate(grid):
        for t in range(trials_per_sigma):
            jobs.append((profile, float(s), clamp_epsilon, (int(base_seed), k, t), h, omega_max))
            keys.append((k, t))
    nw = min(_workers(workers), len(jobs))
    if nw > 1:
        with ProcessPoolExecutor(nw) as pool:
            results = list(pool.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]
    cols = {n: [] for n in ("sigma", "step", "trial", "omega", "loc", "isl")}
    for (k, t), (om, loc, isl) in zip(keys, results):
        cols["sigma"].append(np.full(len(om), grid[k]))
        cols["step"].append(np.full(len(om), k))
        cols["trial"].append(np.full(len(om), t))
        cols["omega"].append(om)
        cols["loc"].append(loc)
        cols["isl"].append(isl)
    cat = {n: np.concatenate(v) if v else np.empty(0) for n, v in cols.items()}
    return SweepResult(cat["sigma"], cat["step"].astype(int), cat["trial"].astype(int), cat["omega"],
                       cat["loc"], cat["isl"].astype(bool), grid, trials_per_sigma)


def nearest_localized(omegas, localized, omega_ref: float, tolerance: float) -> float | None:
    """Localized frequency closest to ``omega_ref`` within ``tolerance``."""
    omegas = np.asarray(omegas, dtype=float)
    cand = np.flatnonzero(np.asarray(localized, dtype=bool) & (np.abs(omegas - omega_ref) <= tolerance))
    if cand.size == 0:
        return None
    return float(omegas[cand[np.argmin(np.abs(omegas[cand] - omega_ref))]])


@dataclass
class TrackTable:
    """Per (sigma, trial) nearest localized mode; ``nan`` marks a miss."""

    sigma: np.ndarray
    trial: np.ndarray
    omega_matched: np.ndarray
    omega_ref: float

    @property
    def drift(self) -> np.ndarray:
        return self.omega_matched - self.omega_ref

    @property
    def missed(self) -> np.ndarray:
        return np.isnan(self.omega_matched)

    def at_sigma(self, sigma: float) -> np.ndarray:
        return self.omega_matched[np.isclose(self.sigma, sigma, rtol=0, atol=1e-12)]

    def drift_std(self, sigma: float) -> float:
        """Standard deviation of matched frequencies at one sigma (misses ignored)."""
        v = self.at_sigma(sigma)
        v = v[~np.isnan(v)]
        return float(np.std(v)) if v.size else math.nan

    def misses(self, sigma: float) -> int:
        return int(np.isnan(self.at_sigma(sigma)).sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "trial", "omega_matched", "drift"])
        for s, t, om, d in zip(self.sigma, self.trial, self.omega_matched, self.drift):
            miss = math.isnan(om)
            w.writerow([repr(float(s)), int(t), "" if miss else repr(float(om)), "" if miss else repr(float(d))])
        return buf.getvalue()


def track_mode(sweep: SweepResult, omega_ref: float, tolerance: float = 0.1) -> TrackTable:
    """Follow the localized mode nearest ``omega_ref`` through the sweep."""
    if not omega_ref > 0:
        raise ValueError("omega_ref must be positive")
    sig, tri, om = [], [], []
    for k, s in enumerate(sweep.sigmas):
        for t in range(sweep.trials_per_sigma):
            rows = sweep.block(k, t)
            hit = nearest_localized(sweep.omega[rows], sweep.is_localized[rows], omega_ref, tolerance)
            sig.append(float(s))
            tri.append(t)
            om.append(math.nan if hit is None else hit)
    return TrackTable(np.array(sig), np.array(tri, dtype=int), np.array(om), float(omega_ref))
