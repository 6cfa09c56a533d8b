"""Blind ptychographic reconstruction with certified alternating proximal solvers."""

from .field import ScanGeometry, fft2, ifft2, shift, shift_adjoint
from .metrics import certificate_report, r_factor, register, rms_error_registered
from .model import (
    MeasurementSet,
    ObjectConstraint,
    ProbeConstraint,
    ProblemInstance,
    grad_x,
    grad_y,
    lipschitz_x_pixel,
    lipschitz_y_pixel,
    objective,
)
from .projections import project_modulus, project_object, project_probe, z_update
from .simulate import SimulationParams, simulate_problem
from .solvers import VARIANTS, SolverConfig, SolverDivergence, run

__version__ = "0.1.0"

__all__ = [
    "MeasurementSet",
    "ObjectConstraint",
    "ProbeConstraint",
    "ProblemInstance",
    "ScanGeometry",
    "SimulationParams",
    "SolverConfig",
    "SolverDivergence",
    "VARIANTS",
    "certificate_report",
    "fft2",
    "grad_x",
    "grad_y",
    "ifft2",
    "lipschitz_x_pixel",
    "lipschitz_y_pixel",
    "objective",
    "project_modulus",
    "project_object",
    "project_probe",
    "r_factor",
    "register",
    "rms_error_registered",
    "run",
    "shift",
    "shift_adjoint",
    "simulate_problem",
    "z_update",
]
