"""Projectors onto the probe, object and Fourier-magnitude sets.

Where the true projector is set-valued (zero input to an annulus, zero
Fourier coefficient) the selection uses phase 0, so every function here is
single-valued and deterministic.
"""

import numpy as np

from .field import fft2, ifft2, shift_all


def _unit_phase(v):
    mag = np.abs(v)
    out = np.ones_like(v, dtype=complex)
    nz = mag > 0
    out[nz] = v[nz] / mag[nz]
    return out, mag


def project_probe(v, c):
    """Clip magnitudes to the cap on the support, zero elsewhere."""
    v = np.asarray(v, dtype=complex)
    phase, mag = _unit_phase(v)
    out = np.where(mag > c.amplitude_cap, c.amplitude_cap * phase, v)
    out[~c.support] = 0
    return out


def project_object(v, c):
    """Clamp magnitudes into ``[amp_lo, amp_hi]`` on the support, zero elsewhere."""
    v = np.asarray(v, dtype=complex)
    phase, mag = _unit_phase(v)
    inside = (mag >= c.amp_lo) & (mag <= c.amp_hi)
    out = np.where(inside, v, np.clip(mag, c.amp_lo, c.amp_hi) * phase)
    out[~c.support] = 0
    return out


def project_modulus(v, b):
    """Replace Fourier magnitudes of ``v`` by ``b`` keeping the phases.

    Works on a single image or an ``(m, N, N)`` stack with matching ``b``.
    """
    v = np.asarray(v, dtype=complex)
    b = np.asarray(b, dtype=float)
    if v.shape != b.shape:
        raise ValueError(f"size mismatch: {v.shape} vs {b.shape}")
    phase, _ = _unit_phase(fft2(v))
    return ifft2(b * phase)


def z_update(x, y, z_prev, geom, meas, gamma):
    """Proximal exit-wave step: project ``(2 S_j(x) y + gamma z_j) / (2 + gamma)``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    target = (2.0 / (2.0 + gamma)) * (shift_all(x, geom) * y) + (gamma / (2.0 + gamma)) * np.asarray(z_prev)
    return project_modulus(target, meas.mags)
