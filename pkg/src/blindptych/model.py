"""Coupled least-squares objective, its partial gradients and Lipschitz moduli.

The objective couples probe ``x``, object ``y`` and exit waves ``z``::

    F(x, y, z) = sum_j || S_j(x) * y - z_j ||^2

Gradients are taken with respect to the real and imaginary parts of each
pixel and are returned as complex arrays (real part = d/dRe, imaginary part =
d/dIm).
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_mask, check_positive, check_stack
from .field import ScanGeometry, adjoint_sum, forward_sum, shift_all


@dataclass(frozen=True)
class ProbeConstraint:
    """Probe support with a magnitude cap ``|x_i| <= amplitude_cap`` on it."""

    support: np.ndarray
    amplitude_cap: float

    def __post_init__(self):
        support = np.asarray(self.support, dtype=bool)
        if support.ndim != 2 or support.shape[0] != support.shape[1]:
            raise ValueError("probe support must be a square boolean mask")
        if not support.any():
            raise ValueError("probe support is empty")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "amplitude_cap", check_positive(self.amplitude_cap, "amplitude_cap"))

    def contains(self, x, atol=0.0):
        x = np.asarray(x)
        return bool(
            np.all(x[~self.support] == 0)
            and np.all(np.abs(x[self.support]) <= self.amplitude_cap + atol)
        )


@dataclass(frozen=True)
class ObjectConstraint:
    """Object support with an amplitude annulus ``amp_lo <= |y_i| <= amp_hi``."""

    support: np.ndarray
    amp_lo: float
    amp_hi: float

    def __post_init__(self):
        support = np.asarray(self.support, dtype=bool)
        if support.ndim != 2 or support.shape[0] != support.shape[1]:
            raise ValueError("object support must be a square boolean mask")
        if not support.any():
            raise ValueError("object support is empty")
        lo = check_positive(self.amp_lo, "amp_lo", strict=False)
        hi = check_positive(self.amp_hi, "amp_hi", strict=False)
        if lo > hi:
            raise ValueError(f"amp_lo={lo} exceeds amp_hi={hi}")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "amp_lo", lo)
        object.__setattr__(self, "amp_hi", hi)

    def contains(self, y, atol=0.0):
        y = np.asarray(y)
        mag = np.abs(y[self.support])
        return bool(
            np.all(y[~self.support] == 0)
            and np.all(mag >= self.amp_lo - atol)
            and np.all(mag <= self.amp_hi + atol)
        )


@dataclass(frozen=True)
class MeasurementSet:
    """Fourier magnitudes ``b_j`` (one image per scan position)."""

    mags: np.ndarray
    geometry: ScanGeometry

    def __post_init__(self):
        mags = check_stack(self.mags, "mags", dtype=float, side=self.geometry.side)
        if mags.shape[0] != self.geometry.m:
            raise ValueError(f"{mags.shape[0]} magnitude frames for {self.geometry.m} scan positions")
        if np.any(mags < 0):
            raise ValueError("measured magnitudes must be nonnegative")
        mags.setflags(write=False)
        object.__setattr__(self, "mags", mags)

    @property
    def side(self):
        return self.geometry.side

    @property
    def m(self):
        return self.geometry.m


@dataclass(frozen=True)
class ProblemInstance:
    probe_c: ProbeConstraint
    object_c: ObjectConstraint
    meas: MeasurementSet
    eta_x: float = 1e-12
    eta_y: float = 1e-12
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.meas.side
        for name, c in (("probe", self.probe_c), ("object", self.object_c)):
            if c.support.shape != (n, n):
                raise ValueError(f"{name} constraint side {c.support.shape[0]} != measurement side {n}")
        object.__setattr__(self, "eta_x", check_positive(self.eta_x, "eta_x"))
        object.__setattr__(self, "eta_y", check_positive(self.eta_y, "eta_y"))

    @property
    def geometry(self):
        return self.meas.geometry


def _check_triple(x, y, z, geom):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = geom.side
    if x.shape != (n, n) or y.shape != (n, n):
        raise ValueError(f"size mismatch: x {x.shape}, y {y.shape}, scan side {n}")
    if z is not None:
        z = np.asarray(z, dtype=complex)
        if z.shape != (geom.m, n, n):
            raise ValueError(f"z has shape {z.shape}, expected {(geom.m, n, n)}")
    return x, y, z


def exit_waves(x, y, geom):
    """``S_j(x) * y`` for every frame."""
    return shift_all(x, geom) * y


def objective(x, y, z, geom):
    x, y, z = _check_triple(x, y, z, geom)
    r = exit_waves(x, y, geom) - z
    return float(np.sum(r.real**2 + r.imag**2))


def grad_x(x, y, z, geom):
    x, y, z = _check_triple(x, y, z, geom)
    weight = adjoint_sum(np.broadcast_to(np.abs(y) ** 2, z.shape), geom)
    return 2.0 * (weight * x - adjoint_sum(np.conj(y) * z, geom))


def grad_y(x, y, z, geom):
    x, y, z = _check_triple(x, y, z, geom)
    weight = forward_sum(np.abs(x) ** 2, geom)
    return 2.0 * (weight * y - np.sum(np.conj(shift_all(x, geom)) * z, axis=0))


def lipschitz_x_pixel(y, geom):
    """Per-pixel modulus ``2 (sum_j S_j^*(|y|^2))_i`` of the x-gradient."""
    y = np.asarray(y, dtype=complex)
    if y.shape != (geom.side, geom.side):
        raise ValueError(f"size mismatch: y {y.shape}, scan side {geom.side}")
    intensity = np.abs(y) ** 2
    return 2.0 * adjoint_sum(np.broadcast_to(intensity, (geom.m,) + intensity.shape), geom)


def lipschitz_y_pixel(x, geom):
    """Per-pixel modulus ``2 (sum_j S_j(|x|^2))_i`` of the y-gradient."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (geom.side, geom.side):
        raise ValueError(f"size mismatch: x {x.shape}, scan side {geom.side}")
    return 2.0 * forward_sum(np.abs(x) ** 2, geom)


def lipschitz_x_global(y, geom):
    return float(lipschitz_x_pixel(y, geom).max())


def lipschitz_y_global(x, geom):
    return float(lipschitz_y_pixel(x, geom).max())


def lipschitz_block(y_or_x, geom, block, wrt="x"):
    """Modulus for the sub-block ``block`` (boolean mask or flat indices).

    ``wrt="x"`` expects the object and bounds the probe-gradient on the
    block; ``wrt="y"`` expects the probe.
    """
    if wrt == "x":
        moduli = lipschitz_x_pixel(y_or_x, geom)
    elif wrt == "y":
        moduli = lipschitz_y_pixel(y_or_x, geom)
    else:
        raise ValueError(f"wrt must be 'x' or 'y', got {wrt!r}")
    mask = check_mask(block, geom.side, "block")
    if not mask.any():
        raise ValueError("empty block")
    return float(moduli[mask].max())
