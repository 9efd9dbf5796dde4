import math

import numpy as np
import pytest

from quasispec.discretize import assemble, eigensolve
from quasispec.robustness import (
    PerturbationSpec,
    nearest_localized,
    perturb_profile,
    robustness_sweep,
    sigma_grid,
    track_mode,
)
from quasispec.tiling import Fibonacci, MaterialProfile, Periodic, reflected_profile

SMALL = reflected_profile(Fibonacci(), 6, 2.0)


def uniform(n):
    return MaterialProfile(np.arange(n + 1, dtype=float), np.ones(n))


def test_zero_sigma_is_identity():
    assert perturb_profile(SMALL, PerturbationSpec(0.0, rng_seed=3)) is SMALL


def test_perturbation_statistics():
    p = uniform(10_000)
    q = perturb_profile(p, PerturbationSpec(0.05, rng_seed=11))
    x = q.speeds / p.speeds - 1
    assert abs(x.mean()) < 3 * 0.05 / 100
    assert abs(x.std() - 0.05) < 0.05 * 0.05
    assert np.array_equal(q.breakpoints, p.breakpoints)


def test_clamp():
    p = uniform(5_000)
    q = perturb_profile(p, PerturbationSpec(2.0, clamp_epsilon=1e-3, rng_seed=1))
    assert q.speeds.min() == 1e-3 and np.sum(q.speeds == 1e-3) > 1000
    # A speed drawn below epsilon is raised to it.
    tiny = MaterialProfile(np.array([0.0, 1.0]), np.array([0.0005]))
    assert perturb_profile(tiny, PerturbationSpec(1e-9, rng_seed=0)).speeds[0] == 1e-3


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(-0.1)
    with pytest.raises(ValueError):
        PerturbationSpec(0.1, clamp_epsilon=0)


def test_sigma_grid():
    g = sigma_grid(0.1, 100)
    assert len(g) == 100 and g[0] == 0 and g[-1] == 0.1
    assert np.array_equal(sigma_grid(0.3, 1), [0.0])


def test_sweep_deterministic_and_zero_row():
    a = robustness_sweep(SMALL, 0.1, 3, trials_per_sigma=2, omega_max=3.0, base_seed=5)
    b = robustness_sweep(SMALL, 0.1, 3, trials_per_sigma=2, omega_max=3.0, base_seed=5)
    assert np.array_equal(a.omega, b.omega) and np.array_equal(a.is_localized, b.is_localized)
    ref = eigensolve(assemble(SMALL), 3.0)
    for t in range(2):
        rows = a.block(0, t)
        assert np.array_equal(a.omega[rows], [m.omega for m in ref])
    # Trials at one sigma differ, other seeds differ.
    assert not np.array_equal(a.omega[a.block(2, 0)], a.omega[a.block(2, 1)])
    c = robustness_sweep(SMALL, 0.1, 3, trials_per_sigma=2, omega_max=3.0, base_seed=6)
    assert not np.array_equal(a.omega[a.block(2, 0)], c.omega[c.block(2, 0)])


def test_sweep_workers_identical():
    a = robustness_sweep(SMALL, 0.1, 4, omega_max=3.0, workers=1)
    b = robustness_sweep(SMALL, 0.1, 4, omega_max=3.0, workers=2)
    assert np.array_equal(a.omega, b.omega)


def test_sweep_csv():
    sw = robustness_sweep(SMALL, 0.1, 2, omega_max=2.0)
    lines = sw.to_csv().splitlines()
    assert lines[0] == "sigma,trial,omega,localization,is_localized" and len(lines) == len(sw) + 1


def test_nearest_localized():
    om = [1.0, 1.2, 1.5]
    loc = [True, False, True]
    assert nearest_localized(om, loc, 1.3, 0.25) == 1.5
    assert nearest_localized(om, loc, 1.3, 0.1) is None


def test_track_exact_at_zero_sigma():
    prof = reflected_profile(Fibonacci(), 9, 2.0)
    sw = robustness_sweep(prof, sigmas=[0.0], omega_max=2.3)
    loc = [m.omega for m in eigensolve(assemble(prof), 2.3) if m.is_localized]
    ref = min(loc, key=lambda w: abs(w - 1.416))
    tt = track_mode(sw, ref, 0.1)
    assert tt.omega_matched[0] == ref and tt.drift[0] == 0
    assert tt.to_csv().splitlines()[0] == "sigma,trial,omega_matched,drift"
    with pytest.raises(ValueError):
        track_mode(sw, 0.0)


def test_track_reports_misses():
    sw = robustness_sweep(SMALL, sigmas=[0.0], omega_max=2.0)
    tt = track_mode(sw, 1.999, 1e-6)
    assert tt.misses(0.0) == 1 and math.isnan(tt.drift_std(0.0))
    assert tt.to_csv().splitlines()[1] == "0.0,0,,"


@pytest.mark.xfail(strict=True, reason="the interface mode drops below the localization threshold once sigma > 0.035")
def test_fibonacci_mode_present_at_every_sigma():
    prof = reflected_profile(Fibonacci(), 9, 2.0)
    sw = robustness_sweep(prof, sigmas=sigma_grid(0.1, 100)[::10], omega_max=2.3)
    tt = track_mode(sw, 1.416, 0.1)
    assert tt.missed.sum() == 0 and np.nanmax(np.abs(tt.omega_matched - 1.416)) < 0.05


def test_periodic_misses_at_large_sigma():
    prof = reflected_profile(Periodic("AB"), 28, 2.0, n_cells=55)
    sw = robustness_sweep(prof, sigmas=sigma_grid(0.1, 100)[::10], omega_max=2.3)
    tt = track_mode(sw, 1.916, 0.05)
    # The unperturbed mode sits at 1.9913, outside the window, so sigma = 0 misses too.
    assert tt.misses(0.0) == 1
    assert tt.missed[tt.sigma >= 0.05].sum() > 0


def test_fibonacci_mode_lost_more_often_at_large_sigma():
    # With 10 trials the std at sigma = 0.1 rests on 1-3 survivors and its
    # ordering against sigma = 0.02 depends on the seed; the miss count does not.
    prof = reflected_profile(Fibonacci(), 9, 2.0)
    ref = min((m.omega for m in eigensolve(assemble(prof), 2.3) if m.is_localized), key=lambda w: abs(w - 1.416))
    sw = robustness_sweep(prof, sigmas=[0.02, 0.1], trials_per_sigma=10, omega_max=2.3)
    tt = track_mode(sw, ref, 0.1)
    assert tt.misses(0.02) <= 1 and tt.misses(0.1) >= 5
    assert tt.drift_std(0.02) > 0
