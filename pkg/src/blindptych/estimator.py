"""scikit-learn style wrapper around :func:`blindptych.solvers.run`."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_stack
from .field import ScanGeometry, fft2
from .metrics import r_factor
from .model import MeasurementSet, ObjectConstraint, ProbeConstraint, ProblemInstance, exit_waves
from .simulate import disk_mask
from .solvers import SolverConfig, run


class PtychoReconstructor(BaseEstimator):
    """Joint probe and object recovery from diffraction magnitudes.

    Parameters
    ----------
    variant : str
        Solver name, one of ``blindptych.solvers.VARIANTS``.
    probe_support : array_like of bool, optional
        Probe support mask. Takes precedence over ``probe_radius``.
    probe_radius : float, optional
        Radius of a centred disk support; the full field when both are None.
    amplitude_cap, amp_lo, amp_hi : float
        Probe magnitude cap and object magnitude annulus.
    max_iters, warmup_iters, inner_rounds : int
    alpha, beta, gamma : float, optional
        Step factors and exit-wave proximal weight (variant defaults if None).
    random_state : int
        Seed for the random object initialisation.

    Attributes
    ----------
    probe_ : ndarray
    object_ : ndarray
    exit_waves_ : ndarray
    trace_ : Trace
    geometry_ : ScanGeometry
    """

    def __init__(
        self,
        variant="phebie_parallel",
        probe_support=None,
        probe_radius=None,
        amplitude_cap=1.0,
        amp_lo=0.5,
        amp_hi=1.0,
        max_iters=300,
        warmup_iters=10,
        inner_rounds=3,
        alpha=None,
        beta=None,
        gamma=1e-30,
        random_state=0,
    ):
        self.variant = variant
        self.probe_support = probe_support
        self.probe_radius = probe_radius
        self.amplitude_cap = amplitude_cap
        self.amp_lo = amp_lo
        self.amp_hi = amp_hi
        self.max_iters = max_iters
        self.warmup_iters = warmup_iters
        self.inner_rounds = inner_rounds
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.random_state = random_state

    def _support(self, side):
        if self.probe_support is not None:
            mask = np.asarray(self.probe_support, dtype=bool)
            if mask.shape != (side, side):
                raise ValueError(f"probe_support must have shape {(side, side)}, got {mask.shape}")
            return mask
        if self.probe_radius is not None:
            return disk_mask(side, self.probe_radius)
        return np.ones((side, side), dtype=bool)

    def _problem(self, X, shifts):
        mags = check_stack(X, "X", dtype=float)
        if np.any(mags < 0):
            raise ValueError("X holds magnitudes and must be nonnegative")
        side = mags.shape[1]
        geom = ScanGeometry([tuple(s) for s in shifts], side)
        if geom.m != mags.shape[0]:
            raise ValueError(f"{geom.m} shifts for {mags.shape[0]} frames")
        probe_c = ProbeConstraint(self._support(side), self.amplitude_cap)
        object_c = ObjectConstraint(np.ones((side, side), dtype=bool), self.amp_lo, self.amp_hi)
        return ProblemInstance(probe_c, object_c, MeasurementSet(mags, geom))

    def fit(self, X, shifts, x0=None, y0=None):
        """Reconstruct from magnitudes ``X`` of shape ``(m, N, N)`` at ``shifts``."""
        problem = self._problem(X, shifts)
        cfg = SolverConfig(
            variant=self.variant,
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            inner_rounds=self.inner_rounds,
            warmup_iters=self.warmup_iters,
            max_iters=self.max_iters,
            seed=self.random_state,
        )
        state, trace = run(problem, cfg, x0=x0, y0=y0)
        self.probe_ = state.x
        self.object_ = state.y
        self.exit_waves_ = state.z
        self.trace_ = trace
        self.geometry_ = problem.geometry
        self.n_frames_ = problem.meas.m
        return self

    def predict(self, shifts=None):
        """Model magnitudes ``|F(S_j(probe) * object)|`` for ``shifts`` (default: fitted)."""
        check_is_fitted(self, "object_")
        geom = self.geometry_ if shifts is None else ScanGeometry([tuple(s) for s in shifts], self.object_.shape[0])
        return np.abs(fft2(exit_waves(self.probe_, self.object_, geom)))

    def score(self, X, shifts=None):
        """Negative R-factor, so larger is better."""
        check_is_fitted(self, "object_")
        geom = self.geometry_ if shifts is None else ScanGeometry([tuple(s) for s in shifts], self.object_.shape[0])
        meas = MeasurementSet(check_stack(X, "X", dtype=float, side=self.object_.shape[0]), geom)
        return -r_factor(self.probe_, self.object_, geom, meas)
