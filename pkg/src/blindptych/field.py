"""Complex 2-D field arithmetic.

Images are plain ``numpy`` arrays of shape ``(N, N)``; stacks of exit waves or
magnitudes are ``(m, N, N)``. The Fourier transform is unitary and scan shifts
are cyclic pixel permutations, so ``shift_adjoint`` is the exact inverse of
``shift``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_image


@dataclass(frozen=True)
class ScanGeometry:
    """Integer scan offsets ``(row, col)`` on an ``N x N`` periodic grid."""

    shifts: tuple
    side: int

    def __post_init__(self):
        side = int(self.side)
        if side < 1:
            raise ValueError(f"side must be positive, got {self.side}")
        offsets = np.asarray(self.shifts, dtype=np.int64).reshape(-1, 2)
        if len(offsets) == 0:
            raise ValueError("a scan needs at least one position")
        offsets = np.mod(offsets, side)
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "shifts", tuple((int(r), int(c)) for r, c in offsets))

    @property
    def m(self):
        return len(self.shifts)

    def offset(self, j):
        if not 0 <= j < self.m:
            raise IndexError(f"frame index {j} out of range for {self.m} frames")
        return self.shifts[j]


def fft2(img):
    """Orthonormal 2-D DFT over the last two axes."""
    arr = np.asarray(img)
    _check_fourier_input(arr)
    return np.fft.fft2(arr, norm="ortho")


def ifft2(img):
    """Inverse of :func:`fft2`."""
    arr = np.asarray(img)
    _check_fourier_input(arr)
    return np.fft.ifft2(arr, norm="ortho")


def _check_fourier_input(arr):
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise ValueError(f"expected square trailing dimensions, got shape {arr.shape}")
    if arr.shape[-1] == 0:
        raise ValueError("empty image")


def shift(img, j, geom):
    """Cyclically translate ``img`` by the ``j``-th scan offset (0-based)."""
    img = _check_on_grid(img, geom)
    return np.roll(img, geom.offset(j), axis=(0, 1))


def shift_adjoint(img, j, geom):
    """Adjoint (and inverse) of :func:`shift`."""
    img = _check_on_grid(img, geom)
    r, c = geom.offset(j)
    return np.roll(img, (-r, -c), axis=(0, 1))


def _check_on_grid(img, geom):
    img = check_image(img)
    if img.shape[0] != geom.side:
        raise ValueError(f"image side {img.shape[0]} does not match scan side {geom.side}")
    return img


def shift_all(img, geom):
    """Stack ``S_j(img)`` for every frame; shape ``(m, N, N)``."""
    img = np.asarray(img)
    out = np.empty((geom.m,) + img.shape, dtype=img.dtype)
    for j, off in enumerate(geom.shifts):
        out[j] = np.roll(img, off, axis=(0, 1))
    return out


def adjoint_sum(stack, geom):
    """``sum_j S_j^*(stack[j])``, accumulated in frame order."""
    stack = np.asarray(stack)
    total = np.zeros(stack.shape[1:], dtype=stack.dtype)
    for j, (r, c) in enumerate(geom.shifts):
        total += np.roll(stack[j], (-r, -c), axis=(0, 1))
    return total


def forward_sum(img_stack, geom):
    """``sum_j S_j(img_stack[j])``; ``img_stack`` may also be a single image."""
    arr = np.asarray(img_stack)
    total = np.zeros(arr.shape[-2:], dtype=arr.dtype)
    for j, off in enumerate(geom.shifts):
        total += np.roll(arr if arr.ndim == 2 else arr[j], off, axis=(0, 1))
    return total


def hadamard(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    return a * b


def real_inner(a, b):
    """Real inner product ``sum Re(a) Re(b) + Im(a) Im(b)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a.real * b.real + a.imag * b.imag))
