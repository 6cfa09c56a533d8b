"""Blind ptychography solvers.

Five variants share one driver, :func:`run`:

``phebie_whole``
    Projected gradient on the whole probe and object blocks with the global
    Lipschitz modulus, then the proximal exit-wave step.
``phebie_parallel``
    Same three steps with a separate step size for every pixel.
``phebie_seq``
    Sub-block sweep (rectangular tiles, singletons by default); each tile's
    gradient is evaluated at the partially updated iterate. Because the
    gradient is pixel-separable this reproduces ``phebie_parallel`` when the
    tiles are single pixels.
``thibault_dm``
    Douglas-Rachford on the exit waves with an alternating least-squares
    approximation of the projection onto the product set.
``maiden_rodenburg``
    Sup-norm step sizes, simultaneous probe/object updates from one exit
    wave, cyclic frame schedule.

Step sizes always use ``t = alpha * max(L, eta)`` where ``L`` includes the
factor 2 of the gradient, so the applied step is ``grad / t``.
"""

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .field import adjoint_sum, forward_sum, shift_all
from .metrics import r_factor
from .model import exit_waves, grad_x, grad_y, lipschitz_x_pixel, lipschitz_y_pixel, objective
from .projections import project_modulus, project_object, project_probe, z_update
from .simulate import random_object_init

PHEBIE_VARIANTS = ("phebie_whole", "phebie_seq", "phebie_parallel")
VARIANTS = PHEBIE_VARIANTS + ("thibault_dm", "maiden_rodenburg")
_MODES = {"phebie_whole": "whole", "phebie_seq": "sequential", "phebie_parallel": "parallel"}
_DENOM_FLOOR = 1e-12


class CertificateWarning(RuntimeWarning):
    """A PHeBIE step missed the sufficient-decrease inequality."""


class SolverDivergence(FloatingPointError):
    """Raised when an iterate becomes non-finite; carries the partial trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    variant: str = "phebie_parallel"
    alpha: float = None
    beta: float = None
    gamma: float = 1e-30
    eta_x: float = None
    eta_y: float = None
    inner_rounds: int = 3
    warmup_iters: int = 10
    max_iters: int = 300
    seed: int = 0
    block_shape: tuple = (1, 1)
    mr_frames: str = "all"
    diagnostics: bool = True
    record_time: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        default = 2.0 if self.variant == "maiden_rodenburg" else 1.1
        alpha = default if self.alpha is None else self.alpha
        beta = default if self.beta is None else self.beta
        floor = 2.0 if self.variant == "maiden_rodenburg" else 1.0
        for name, val in (("alpha", alpha), ("beta", beta)):
            arr = np.asarray(val, dtype=float)
            bad = np.any(arr < floor) if floor == 2.0 else np.any(arr <= floor)
            if bad or not np.all(np.isfinite(arr)):
                rel = ">= 2" if floor == 2.0 else "> 1"
                raise ValueError(f"{name} must be {rel} for {self.variant}, got {val}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if int(self.inner_rounds) < 1:
            raise ValueError(f"inner_rounds must be >= 1, got {self.inner_rounds}")
        if int(self.warmup_iters) < 0 or int(self.max_iters) < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.mr_frames not in ("all", "current"):
            raise ValueError(f"mr_frames must be 'all' or 'current', got {self.mr_frames!r}")
        bh, bw = (int(v) for v in self.block_shape)
        if bh < 1 or bw < 1:
            raise ValueError(f"block_shape must be positive, got {self.block_shape}")
        object.__setattr__(self, "block_shape", (bh, bw))

    @property
    def lambda_minus(self):
        """``0.5 min{(alpha-1) eta_x, (beta-1) eta_y, gamma}``; needs floors set."""
        a = float(np.min(self.alpha))
        b = float(np.min(self.beta))
        return 0.5 * min((a - 1) * self.eta_x, (b - 1) * self.eta_y, self.gamma)


@dataclass
class SolverState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    k: int = 0
    F: float = float("nan")
    last_step_sq: float = float("nan")

    def copy(self):
        return replace(self, x=self.x.copy(), y=self.y.copy(), z=self.z.copy())


@dataclass
class TraceRow:
    k: int
    F: float
    step_sq: float
    decrease_slack: float
    r_factor: float
    elapsed_ms: float = None
    lipschitz_ratio: float = None
    certificate_ok: bool = True


@dataclass
class Trace:
    variant: str
    lambda_minus: float
    f_initial: float = float("nan")
    rows: list = field(default_factory=list)

    @property
    def main_rows(self):
        return [r for r in self.rows if r.k >= 1]


def cyclic_schedule(m):
    """Frame index ``k mod m`` for iteration ``k`` (every frame recurs forever)."""
    return lambda k: k % m


def _resolved(cfg, problem):
    eta_x = problem.eta_x if cfg.eta_x is None else cfg.eta_x
    eta_y = problem.eta_y if cfg.eta_y is None else cfg.eta_y
    if cfg.eta_x == eta_x and cfg.eta_y == eta_y:
        return cfg
    return replace(cfg, eta_x=eta_x, eta_y=eta_y)


def _step_scalars(moduli, factor, floor, mode):
    if mode == "whole":
        return factor * max(float(moduli.max()), floor)
    return factor * np.maximum(moduli, floor)


def _tiles(side, block_shape):
    bh, bw = block_shape
    for r0 in range(0, side, bh):
        for c0 in range(0, side, bw):
            yield slice(r0, r0 + bh), slice(c0, c0 + bw)


def phebie_x_update(state, problem, cfg, mode="parallel"):
    """Projected-gradient probe step; returns ``(x_new, step_scalars)``."""
    cfg = _resolved(cfg, problem)
    geom = problem.geometry
    x, y, z = state.x, state.y, state.z
    moduli = lipschitz_x_pixel(y, geom)
    if mode in ("parallel", "whole"):
        t = _step_scalars(moduli, cfg.alpha, cfg.eta_x, mode)
        return project_probe(x - grad_x(x, y, z, geom) / t, problem.probe_c), t
    if mode != "sequential":
        raise ValueError(f"unknown mode {mode!r}")
    x_new = x.copy()
    t_all = np.empty(moduli.shape)
    alpha = np.broadcast_to(np.asarray(cfg.alpha, dtype=float), moduli.shape)
    for blk in _tiles(geom.side, cfg.block_shape):
        g = grad_x(x_new, y, z, geom)[blk]
        t = alpha[blk] * max(float(moduli[blk].max()), cfg.eta_x)
        cand = x_new.copy()
        cand[blk] = x_new[blk] - g / t
        x_new[blk] = project_probe(cand, problem.probe_c)[blk]
        t_all[blk] = t
    return x_new, t_all


def phebie_y_update(state, x_new, problem, cfg, mode="parallel"):
    """Projected-gradient object step at the updated probe ``x_new``."""
    cfg = _resolved(cfg, problem)
    geom = problem.geometry
    y, z = state.y, state.z
    moduli = lipschitz_y_pixel(x_new, geom)
    if mode in ("parallel", "whole"):
        t = _step_scalars(moduli, cfg.beta, cfg.eta_y, mode)
        return project_object(y - grad_y(x_new, y, z, geom) / t, problem.object_c), t
    if mode != "sequential":
        raise ValueError(f"unknown mode {mode!r}")
    y_new = y.copy()
    t_all = np.empty(moduli.shape)
    beta = np.broadcast_to(np.asarray(cfg.beta, dtype=float), moduli.shape)
    for blk in _tiles(geom.side, cfg.block_shape):
        g = grad_y(x_new, y_new, z, geom)[blk]
        t = beta[blk] * max(float(moduli[blk].max()), cfg.eta_y)
        cand = y_new.copy()
        cand[blk] = y_new[blk] - g / t
        y_new[blk] = project_object(cand, problem.object_c)[blk]
        t_all[blk] = t
    return y_new, t_all


def phebie_iteration(state, problem, cfg, update_probe=True):
    """One probe / object / exit-wave sweep. Returns ``(new_state, info)``."""
    mode = _MODES.get(cfg.variant, "parallel")
    if update_probe:
        x_new, t_x = phebie_x_update(state, problem, cfg, mode)
    else:
        x_new, t_x = state.x, None
    y_new, t_y = phebie_y_update(state, x_new, problem, cfg, mode)
    z_new = z_update(x_new, y_new, state.z, problem.geometry, problem.meas, cfg.gamma)
    new = SolverState(x_new, y_new, z_new, state.k + 1)
    return new, {"t_x": t_x, "t_y": t_y}


def heuristic_pd(x, y, z, geom, rounds, probe_c=None, object_c=None, update_probe=True, history=None):
    """Alternating exact least-squares fit of ``(x, y)`` to the exit waves ``z``.

    Runs ``rounds + 1`` probe/object sweeps (``l = 0, ..., rounds``). Each
    half-step minimises ``sum_j ||S_j(x) y - z_j||^2`` over one block exactly;
    the object half-step uses the freshly updated probe. The per-pixel
    objective is isotropic around the unconstrained minimiser, so projecting
    that minimiser onto a disk or annulus stays exact when constraints are
    given. Pixels whose denominator is below ``1e-12`` keep their value.
    If ``history`` is a list, the fit objective is appended before the first
    sweep and after every half-step.
    Returns ``(x, y, v)`` with ``v_j = S_j(x) y``.
    """
    if int(rounds) < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if history is not None:
        history.append(objective(x, y, z, geom))
    for _ in range(int(rounds) + 1):
        if update_probe:
            den = adjoint_sum(np.broadcast_to(np.abs(y) ** 2, z.shape), geom)
            num = adjoint_sum(np.conj(y) * z, geom)
            x = _ratio_or_keep(num, den, x)
            if probe_c is not None:
                x = project_probe(x, probe_c)
            if history is not None:
                history.append(objective(x, y, z, geom))
        den = forward_sum(np.abs(x) ** 2, geom)
        num = np.sum(np.conj(shift_all(x, geom)) * z, axis=0)
        y = _ratio_or_keep(num, den, y)
        if object_c is not None:
            y = project_object(y, object_c)
        if history is not None:
            history.append(objective(x, y, z, geom))
    return x, y, exit_waves(x, y, geom)


def _ratio_or_keep(num, den, prev):
    ok = den >= _DENOM_FLOOR
    return np.where(ok, num / np.where(ok, den, 1.0), prev)


def dm_iteration(state, problem, cfg, update_probe=True):
    """Douglas-Rachford step on ``z``; ``(x, y)`` are the shadow iterates."""
    x, y, v = heuristic_pd(
        state.x, state.y, state.z, problem.geometry, cfg.inner_rounds,
        problem.probe_c, problem.object_c, update_probe,
    )
    z_hat = project_modulus(2 * v - state.z, problem.meas.mags)
    z_new = state.z + z_hat - v
    return SolverState(x, y, z_new, state.k + 1), {}


def mr_iteration(state, problem, cfg, schedule=None, update_probe=True):
    """Maiden-Rodenburg step driven by frame ``schedule(k)``.

    ``state.z`` holds one exit wave per frame, but only frame ``schedule(k)``
    enters the update. With ``cfg.mr_frames == "all"`` that exit wave is
    paired with every shift in the gradient sums (the sums run over all
    frames); ``"current"`` restricts the sums to the scheduled frame.
    Probe and object are both updated from ``(x^k, y^k)``.
    """
    cfg = _resolved(cfg, problem)
    geom = problem.geometry
    schedule = schedule or cyclic_schedule(geom.m)
    j = schedule(state.k)
    x, y = state.x, state.y
    zc = state.z[j]
    if cfg.mr_frames == "all":
        frames = range(geom.m)
    else:
        frames = [j]
    offs = [geom.shifts[i] for i in frames]

    def s(img, off):
        return np.roll(img, off, axis=(0, 1))

    def s_adj(img, off):
        return np.roll(img, (-off[0], -off[1]), axis=(0, 1))

    if update_probe:
        wy = sum(s_adj(np.abs(y) ** 2, o) for o in offs)
        gx = 2.0 * (wy * x - sum(s_adj(np.conj(y) * zc, o) for o in offs))
        tx = cfg.alpha * max(2.0 * float(wy.max()), cfg.eta_x)
        x_new = project_probe(x - gx / tx, problem.probe_c)
    else:
        x_new = x
    wx = sum(s(np.abs(x) ** 2, o) for o in offs)
    gy = 2.0 * (wx * y - sum(np.conj(s(x, o)) * zc for o in offs))
    ty = cfg.beta * max(2.0 * float(wx.max()), cfg.eta_y)
    y_new = project_object(y - gy / ty, problem.object_c)

    j_next = schedule(state.k + 1)
    z_new = state.z.copy()
    z_new[j_next] = project_modulus(s(x_new, geom.shifts[j_next]) * y_new, problem.meas.mags[j_next])
    return SolverState(x_new, y_new, z_new, state.k + 1), {}


def initial_state(problem, x0=None, y0=None, seed=0):
    """Feasible starting point.

    The default probe is the constraint support filled with the amplitude cap;
    the default object is a random feasible field drawn from ``seed``.
    """
    geom = problem.geometry
    if x0 is None:
        x0 = problem.probe_c.support * problem.probe_c.amplitude_cap
    if y0 is None:
        y0 = random_object_init(geom.side, problem.object_c, seed)
    x = project_probe(np.asarray(x0, dtype=complex), problem.probe_c)
    y = project_object(np.asarray(y0, dtype=complex), problem.object_c)
    z = project_modulus(exit_waves(x, y, geom), problem.meas.mags)
    state = SolverState(x, y, z, 0)
    state.F = objective(x, y, z, geom)
    return state


def _step_sq(a, b):
    return float(sum(np.sum(np.abs(u - v) ** 2) for u, v in ((a.x, b.x), (a.y, b.y), (a.z, b.z))))


def _lipschitz_ratio(prev, new, info, problem, cfg):
    geom = problem.geometry
    gx_old = grad_x(prev.x, prev.y, prev.z, geom)
    gx_new = grad_x(new.x, new.y, new.z, geom)
    gy_old = grad_y(new.x, prev.y, prev.z, geom)
    gy_new = grad_y(new.x, new.y, new.z, geom)
    ax = info["t_x"] * (prev.x - new.x) + gx_new - gx_old
    ay = info["t_y"] * (prev.y - new.y) + gy_new - gy_old
    az = cfg.gamma * (prev.z - new.z)
    num = np.sqrt(sum(np.sum(np.abs(a) ** 2) for a in (ax, ay, az)))
    den = np.sqrt(_step_sq(prev, new))
    return float(num / den) if den > 0 else None


def run(problem, cfg, x0=None, y0=None, callback=None):
    """Warm-up with the probe frozen, then ``cfg.max_iters`` main iterations.

    Returns ``(final_state, trace)``. Warm-up rows carry ``k <= 0``; main rows
    ``k = 1..max_iters``. For PHeBIE variants every main step is checked
    against the sufficient-decrease inequality; misses are flagged in the
    trace and raised as :class:`CertificateWarning`. A non-finite iterate
    raises :class:`SolverDivergence`.
    """
    cfg = _resolved(cfg, problem)
    geom = problem.geometry
    phebie = cfg.variant in PHEBIE_VARIANTS
    lam = cfg.lambda_minus if phebie else 0.0
    trace = Trace(cfg.variant, lam)
    state = initial_state(problem, x0, y0, cfg.seed)
    schedule = cyclic_schedule(geom.m)

    if cfg.variant in PHEBIE_VARIANTS:
        step = phebie_iteration
    elif cfg.variant == "thibault_dm":
        step = dm_iteration
    else:
        def step(s, p, c, update_probe=True):
            return mr_iteration(s, p, c, schedule, update_probe)

    t0 = time.perf_counter()
    total = cfg.warmup_iters + cfg.max_iters
    for it in range(total):
        k = it - cfg.warmup_iters + 1
        warm = k <= 0
        if k == 1:
            trace.f_initial = state.F
        new, info = step(state, problem, cfg, update_probe=not warm)
        if not all(np.all(np.isfinite(a)) for a in (new.x, new.y, new.z)):
            raise SolverDivergence(f"non-finite iterate at k={k} ({cfg.variant})", trace)
        new.F = objective(new.x, new.y, new.z, geom)
        new.last_step_sq = _step_sq(state, new)
        slack = state.F - lam * new.last_step_sq - new.F
        ok = True
        if phebie:
            ok = slack >= -1e-9 * (1.0 + abs(state.F))
            if not ok:
                warnings.warn(
                    f"sufficient decrease missed at k={k}: slack {slack:.3e}", CertificateWarning, stacklevel=2
                )
        ratio = None
        if phebie and not warm and cfg.diagnostics:
            ratio = _lipschitz_ratio(state, new, info, problem, cfg)
        row = TraceRow(
            k=k,
            F=new.F,
            step_sq=new.last_step_sq,
            decrease_slack=slack,
            r_factor=r_factor(new.x, new.y, geom, problem.meas),
            elapsed_ms=(time.perf_counter() - t0) * 1e3 if cfg.record_time else None,
            lipschitz_ratio=ratio,
            certificate_ok=ok,
        )
        trace.rows.append(row)
        state = new
        if callback is not None:
            callback(state, row)
    if cfg.max_iters == 0:
        trace.f_initial = state.F
    return state, trace
