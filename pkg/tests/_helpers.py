"""Random instances and brute-force oracles shared by the test modules."""

import numpy as np

from blindptych.field import ScanGeometry
from blindptych.model import ObjectConstraint, ProbeConstraint, ProblemInstance
from blindptych.simulate import disk_mask, forward_measurements


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_geometry(rng, N, m):
    return ScanGeometry([tuple(int(v) for v in rng.integers(0, N, size=2)) for _ in range(m)], N)


def random_triple(rng, N=8, m=4):
    geom = random_geometry(rng, N, m)
    return crandn(rng, N, N), crandn(rng, N, N), crandn(rng, m, N, N), geom


def small_problem(rng, N=8, grid=2, stride=3, probe_radius=2.5, support_radius=3, noiseless=True):
    """Disk probe, random annulus object, regular grid; noiseless magnitudes."""
    from blindptych.simulate import make_scan_grid

    geom = make_scan_grid(N, grid, stride)
    probe = disk_mask(N, probe_radius).astype(complex)
    obj = rng.uniform(0.55, 0.95, (N, N)) * np.exp(1j * rng.uniform(-np.pi, np.pi, (N, N)))
    meas = forward_measurements(probe, obj, geom)
    problem = ProblemInstance(
        ProbeConstraint(disk_mask(N, support_radius), 1.0),
        ObjectConstraint(np.ones((N, N), dtype=bool), 0.5, 1.0),
        meas,
    )
    return problem, {"probe": probe, "object": obj}


def naive_dft2(img):
    """Unitary 2-D DFT by explicit double summation."""
    n = img.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for u in range(n):
        for v in range(n):
            acc = 0j
            for r in range(n):
                for c in range(n):
                    acc += img[r, c] * np.exp(-2j * np.pi * (u * r + v * c) / n)
            out[u, v] = acc / n
    return out


def loop_objective(x, y, z, geom):
    """F by explicit pixel loops and index arithmetic (no np.roll)."""
    n = geom.side
    total = 0.0
    for j, (dr, dc) in enumerate(geom.shifts):
        for r in range(n):
            for c in range(n):
                sx = x[(r - dr) % n, (c - dc) % n]
                total += abs(sx * y[r, c] - z[j, r, c]) ** 2
    return total


def fd_gradient(f, a, h=1e-6):
    """Central differences in the real and imaginary part of every pixel."""
    g = np.zeros(a.shape, dtype=complex)
    for idx in np.ndindex(a.shape):
        for unit, part in ((1.0, 1.0), (1j, 1j)):
            ap = a.copy()
            am = a.copy()
            ap[idx] += h * unit
            am[idx] -= h * unit
            g[idx] += part * (f(ap) - f(am)) / (2 * h)
    return g


def sample_disk(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    return r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def sample_annulus(rng, n, lo, hi):
    r = np.sqrt(rng.uniform(lo**2, hi**2, n))
    return r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
