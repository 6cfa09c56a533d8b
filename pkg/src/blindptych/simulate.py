"""Synthetic probes, objects, scan grids and diffraction data."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive
from .field import ScanGeometry, fft2
from .model import MeasurementSet, ObjectConstraint, ProbeConstraint, ProblemInstance, exit_waves


def make_scan_grid(N, grid, stride, origin=(0, 0)):
    """Regular ``grid x grid`` raster of offsets ``origin + stride * (a, b)``, mod ``N``."""
    if grid < 1:
        raise ValueError(f"grid must be >= 1, got {grid}")
    steps = np.arange(grid) * int(stride)
    shifts = [(origin[0] + r, origin[1] + c) for r in steps for c in steps]
    return ScanGeometry(shifts, N)


def disk_mask(N, radius, center=None):
    """Pixels within ``radius`` of ``center`` (default: the middle pixel)."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    cr, cc = (N // 2, N // 2) if center is None else center
    rows, cols = np.ogrid[:N, :N]
    return (rows - cr) ** 2 + (cols - cc) ** 2 <= radius**2


def make_probe_disk(N, radius, amplitude, support_radius=None):
    """Flat disk probe and the matching probe constraint.

    The constraint support is a disk of ``support_radius`` (defaults to
    ``radius``) with magnitude cap ``amplitude``. A support smaller than the
    probe makes the probe infeasible, which is deliberate for robustness runs.
    """
    amplitude = check_positive(amplitude, "amplitude")
    probe = disk_mask(N, radius).astype(complex) * amplitude
    support = disk_mask(N, radius if support_radius is None else support_radius)
    return probe, ProbeConstraint(support, amplitude)


def make_truth_object(N, amp_range=(0.55, 0.95), ramp=(0.5, -0.3), n_features=6, seed=0):
    """Smooth test specimen.

    Amplitude falls off radially from the centre across ``amp_range``; the
    phase is a linear ramp of ``ramp`` cycles per field of view (rows, cols).
    ``n_features`` Gaussian bumps (amplitude dips and phase bumps) are added
    so the object is not translation-invariant; ``n_features=0`` gives the
    bare gradient and ramp.
    """
    lo, hi = amp_range
    rows, cols = np.mgrid[:N, :N].astype(float)
    c = (N - 1) / 2.0
    rad = np.hypot(rows - c, cols - c) / np.hypot(c, c) if N > 1 else np.zeros((N, N))
    amp = hi - (hi - lo) * rad
    phase = 2 * np.pi * (ramp[0] * rows + ramp[1] * cols) / N

    rng = np.random.default_rng(seed)
    for _ in range(n_features):
        r0, c0 = rng.uniform(0, N, size=2)
        width = rng.uniform(0.04, 0.12) * N
        # periodic distance so bumps wrap cleanly
        dr = np.minimum(np.abs(rows - r0), N - np.abs(rows - r0))
        dc = np.minimum(np.abs(cols - c0), N - np.abs(cols - c0))
        bump = np.exp(-(dr**2 + dc**2) / (2 * width**2))
        amp -= rng.uniform(0.1, 0.3) * (hi - lo) * bump
        phase += rng.uniform(-1.2, 1.2) * bump
    amp = np.clip(amp, lo, hi)
    return amp * np.exp(1j * phase)


def forward_measurements(x, y, geom):
    """Noiseless far-field magnitudes ``|F(S_j(x) * y)|``."""
    return MeasurementSet(np.abs(fft2(exit_waves(x, y, geom))), geom)


def add_poisson_noise(meas, lam_scale, seed):
    """Poisson photon counts on ``lam_scale * b**2``, returned as magnitudes.

    Each frame draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on the order in which frames are generated.
    """
    lam_scale = float(lam_scale)
    if not lam_scale > 0:
        raise ValueError(f"lam_scale must be > 0, got {lam_scale}")
    children = np.random.SeedSequence(seed).spawn(meas.m)
    noisy = np.empty(meas.mags.shape)
    for j, child in enumerate(children):
        counts = np.random.default_rng(child).poisson(lam_scale * meas.mags[j] ** 2)
        noisy[j] = np.sqrt(counts / lam_scale)
    return MeasurementSet(noisy, meas.geometry)


def random_object_init(N, constraint, seed):
    """Random feasible object: uniform magnitude in the annulus, uniform phase."""
    if constraint.support.shape != (N, N):
        raise ValueError(f"constraint side {constraint.support.shape[0]} != {N}")
    rng = np.random.default_rng(seed)
    mag = rng.uniform(constraint.amp_lo, constraint.amp_hi, size=(N, N))
    phase = rng.uniform(0.0, 2 * np.pi, size=(N, N))
    out = mag * np.exp(1j * phase)
    out[~constraint.support] = 0
    return out


def full_support_object_constraint(N, amp_lo, amp_hi):
    return ObjectConstraint(np.ones((N, N), dtype=bool), amp_lo, amp_hi)


@dataclass(frozen=True)
class SimulationParams:
    """Everything needed to regenerate a synthetic instance.

    ``support_radius`` is the probe-constraint radius handed to the solver;
    set it below ``probe_radius`` for an over-restrictive pupil.
    """

    N: int = 64
    grid: int = 5
    stride: int = 13
    probe_radius: float = 16
    probe_amplitude: float = 1.0
    support_radius: float = 17
    amp_lo: float = 0.5
    amp_hi: float = 1.0
    truth_amp_range: tuple = (0.55, 0.95)
    truth_ramp: tuple = (0.5, -0.3)
    n_features: int = 6
    truth_seed: int = 0
    noise_lambda: float = None
    noise_seed: int = 0
    eta_x: float = 1e-12
    eta_y: float = 1e-12


def simulate_problem(params=SimulationParams()):
    """Build ``(problem, truth)`` where ``truth = {"probe": x, "object": y}``."""
    p = params
    geom = make_scan_grid(p.N, p.grid, p.stride)
    probe, _ = make_probe_disk(p.N, p.probe_radius, p.probe_amplitude)
    _, probe_c = make_probe_disk(p.N, p.support_radius, p.probe_amplitude)
    obj = make_truth_object(p.N, tuple(p.truth_amp_range), tuple(p.truth_ramp), p.n_features, p.truth_seed)
    meas = forward_measurements(probe, obj, geom)
    if p.noise_lambda is not None:
        meas = add_poisson_noise(meas, p.noise_lambda, p.noise_seed)
    object_c = full_support_object_constraint(p.N, p.amp_lo, p.amp_hi)
    problem = ProblemInstance(probe_c, object_c, meas, p.eta_x, p.eta_y)
    return problem, {"probe": probe, "object": obj}
