import numpy as np
import pytest

from _helpers import naive_dft2
from blindptych.field import ScanGeometry
from blindptych.metrics import r_factor
from blindptych.model import exit_waves, objective
from blindptych.projections import project_object
from blindptych.simulate import (
    SimulationParams,
    add_poisson_noise,
    disk_mask,
    forward_measurements,
    make_probe_disk,
    make_scan_grid,
    make_truth_object,
    random_object_init,
    simulate_problem,
)
from blindptych.model import ObjectConstraint


def test_scan_grid_enumeration():
    assert make_scan_grid(64, 1, 8).shifts == ((0, 0),)
    geom = make_scan_grid(64, 3, 8)
    assert set(geom.shifts) == {(r, c) for r in (0, 8, 16) for c in (0, 8, 16)}
    assert make_scan_grid(10, 2, 7).shifts[-1] == (7, 7)
    with pytest.raises(ValueError):
        make_scan_grid(8, 0, 1)


def test_neighbouring_supports_overlap_when_stride_below_diameter():
    n, radius = 32, 5
    disk = disk_mask(n, radius)
    for stride, overlap in ((6, True), (11, False)):
        geom = make_scan_grid(n, 2, stride)
        a = np.roll(disk, geom.shifts[0], (0, 1))
        b = np.roll(disk, geom.shifts[1], (0, 1))
        assert bool(np.any(a & b)) is overlap


def test_probe_disk():
    probe, c = make_probe_disk(9, 0, 2.0)
    assert np.count_nonzero(probe) == 1 and probe[4, 4] == 2.0
    probe, c = make_probe_disk(32, 6, 1.0)
    assert c.contains(probe)
    # over-restrictive pupil makes the truth infeasible
    probe, c = make_probe_disk(32, 6, 1.0, support_radius=4)
    assert not c.contains(probe)


def test_forward_measurements_match_naive_dft(rng):
    x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    y = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    geom = ScanGeometry([(0, 0), (1, 3)], 4)
    meas = forward_measurements(x, y, geom)
    for j, (r, c) in enumerate(geom.shifts):
        np.testing.assert_allclose(meas.mags[j], np.abs(naive_dft2(np.roll(x, (r, c), (0, 1)) * y)), atol=1e-12)


def test_zero_probe_gives_zero_measurements():
    geom = make_scan_grid(8, 2, 3)
    meas = forward_measurements(np.zeros((8, 8)), np.ones((8, 8)), geom)
    assert not meas.mags.any()


def test_truth_is_a_zero_of_the_objective():
    problem, truth = simulate_problem(SimulationParams(N=32, grid=3, stride=8, probe_radius=8, support_radius=9))
    from blindptych.projections import project_modulus

    z = project_modulus(exit_waves(truth["probe"], truth["object"], problem.geometry), problem.meas.mags)
    assert objective(truth["probe"], truth["object"], z, problem.geometry) < 1e-20
    assert r_factor(truth["probe"], truth["object"], problem.geometry, problem.meas) < 1e-12
    assert problem.probe_c.contains(truth["probe"])
    assert problem.object_c.contains(truth["object"])


def test_truth_object_is_deterministic_and_in_range():
    a = make_truth_object(32, seed=4)
    assert np.array_equal(a, make_truth_object(32, seed=4))
    assert not np.array_equal(a, make_truth_object(32, seed=5))
    assert np.all(np.abs(a) >= 0.55 - 1e-12) and np.all(np.abs(a) <= 0.95 + 1e-12)
    bare = make_truth_object(16, n_features=0)
    assert np.abs(bare[8, 8]) > np.abs(bare[0, 0])


def test_poisson_noise_zero_pixels_and_determinism():
    geom = make_scan_grid(8, 2, 3)
    mags = np.abs(np.random.default_rng(0).standard_normal((4, 8, 8)))
    mags[:, 0, 0] = 0
    from blindptych.model import MeasurementSet

    meas = MeasurementSet(mags, geom)
    a = add_poisson_noise(meas, 3.0, seed=7)
    b = add_poisson_noise(meas, 3.0, seed=7)
    c = add_poisson_noise(meas, 3.0, seed=8)
    assert np.array_equal(a.mags, b.mags)
    assert not np.array_equal(a.mags, c.mags)
    assert np.all(a.mags[:, 0, 0] == 0)
    with pytest.raises(ValueError):
        add_poisson_noise(meas, 0.0, seed=1)
    with pytest.raises(ValueError):
        add_poisson_noise(meas, -1.0, seed=1)


def test_poisson_noise_counts_mean_within_three_sigma():
    from blindptych.model import MeasurementSet

    geom = ScanGeometry([(0, 0)], 100)
    intensity = 0.8
    meas = MeasurementSet(np.full((1, 100, 100), np.sqrt(intensity)), geom)
    lam = 2.5
    counts = add_poisson_noise(meas, lam, seed=11).mags ** 2 * lam
    rate = lam * intensity
    assert abs(counts.mean() - rate) <= 3 * np.sqrt(rate / counts.size)
    assert abs(counts.var() - rate) <= 0.1 * rate


def test_poisson_noise_vanishes_for_large_rate():
    from blindptych.model import MeasurementSet

    geom = make_scan_grid(16, 2, 5)
    mags = np.random.default_rng(2).uniform(0.5, 1.5, (4, 16, 16))
    meas = MeasurementSet(mags, geom)
    noisy = add_poisson_noise(meas, 1e8, seed=0)
    assert np.max(np.abs(noisy.mags - mags) / mags) < 1e-2


def test_random_object_init_is_feasible_and_seeded():
    support = disk_mask(16, 6)
    c = ObjectConstraint(support, 0.5, 1.0)
    y = random_object_init(16, c, seed=3)
    assert c.contains(y)
    np.testing.assert_array_equal(project_object(y, c), y)
    assert np.array_equal(y, random_object_init(16, c, seed=3))
    assert not np.array_equal(y, random_object_init(16, c, seed=4))
    flat = random_object_init(16, ObjectConstraint(support, 0.7, 0.7), seed=0)
    np.testing.assert_allclose(np.abs(flat[support]), 0.7)
    with pytest.raises(ValueError):
        random_object_init(8, c, seed=0)
