"""TOML run configuration and instance persistence.

A config has a top-level ``seed`` and three optional tables::

    seed = 0

    [instance]              # SimulationParams fields, or `sidecar = "..."`
    N = 64
    grid = 5

    [instance.noise]        # optional; `lambda` or `mean_peak_count`
    mean_peak_count = 2.0
    seed = 1

    [solver]                # SolverConfig fields
    variant = "phebie_parallel"

    [benchmark]
    trials = 5
    variants = ["phebie_whole", "phebie_parallel", "thibault_dm", "maiden_rodenburg"]
"""

import dataclasses
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .field import ScanGeometry
from .io import read_cimg, read_json, read_rimg, write_cimg, write_json, write_rimg
from .model import MeasurementSet, ObjectConstraint, ProbeConstraint, ProblemInstance
from .simulate import SimulationParams, add_poisson_noise, simulate_problem
from .solvers import SolverConfig

SIDECAR_NAME = "instance.json"


def load_config(path):
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    cfg["_base_dir"] = str(Path(path).resolve().parent)
    return cfg


def apply_overrides(cfg, seed=None, variant=None):
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    if variant is not None:
        cfg["solver"] = dict(cfg.get("solver", {}), variant=variant)
    return cfg


def simulation_params(cfg):
    """``SimulationParams`` from the ``[instance]`` table (noise handled separately)."""
    table = {k: v for k, v in cfg.get("instance", {}).items() if k not in ("noise", "sidecar")}
    known = {f.name for f in dataclasses.fields(SimulationParams)}
    unknown = set(table) - known
    if unknown:
        raise ValueError(f"unknown [instance] keys: {', '.join(sorted(unknown))}")
    if "seed" in cfg:
        table.setdefault("truth_seed", int(cfg["seed"]))
    for key in ("truth_amp_range", "truth_ramp"):
        if key in table:
            table[key] = tuple(table[key])
    return SimulationParams(**table)


def noise_lambda(meas, noise):
    """Resolve the Poisson rate scale.

    ``lambda`` is used as given; ``mean_peak_count`` picks the scale so the
    brightest pixel of an average frame expects that many photons.
    """
    if "lambda" in noise:
        return float(noise["lambda"])
    target = float(noise.get("mean_peak_count", 2.0))
    peak = float(np.mean(np.max(meas.mags.reshape(meas.m, -1) ** 2, axis=1)))
    if peak <= 0:
        raise ValueError("cannot calibrate noise on all-zero measurements")
    return target / peak


def build_instance(cfg):
    """Return ``(problem, truth, clean_meas, info)`` for the config.

    ``truth`` and ``clean_meas`` are ``None`` when loading from a sidecar that
    does not carry them.
    """
    inst = cfg.get("instance", {})
    if "sidecar" in inst:
        path = Path(cfg.get("_base_dir", ".")) / inst["sidecar"]
        return load_instance(path)
    params = simulation_params(cfg)
    problem, truth = simulate_problem(params)
    clean = problem.meas
    info = {"simulation": dataclasses.asdict(params), "noise": None}
    noise = inst.get("noise")
    if noise:
        lam = noise_lambda(clean, noise)
        seed = int(noise.get("seed", cfg.get("seed", 0)))
        noisy = add_poisson_noise(clean, lam, seed)
        problem = dataclasses.replace(problem, meas=noisy)
        info["noise"] = {"lambda": lam, "seed": seed}
    return problem, truth, clean, info


def solver_config(cfg, **overrides):
    table = dict(cfg.get("solver", {}))
    table.setdefault("seed", int(cfg.get("seed", 0)))
    if "block_shape" in table:
        table["block_shape"] = tuple(table["block_shape"])
    table.update(overrides)
    known = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = set(table) - known
    if unknown:
        raise ValueError(f"unknown [solver] keys: {', '.join(sorted(unknown))}")
    return SolverConfig(**table)


def save_instance(out_dir, problem, truth=None, clean_meas=None, info=None):
    """Write measurements, supports, optional truth and the JSON sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"measurements": "measurements.rimg", "supports": "supports.rimg"}
    write_rimg(out / files["measurements"], problem.meas.mags)
    supports = np.stack([problem.probe_c.support, problem.object_c.support]).astype(float)
    write_rimg(out / files["supports"], supports)
    if clean_meas is not None and clean_meas is not problem.meas:
        files["measurements_clean"] = "measurements_clean.rimg"
        write_rimg(out / files["measurements_clean"], clean_meas.mags)
    if truth is not None:
        files["truth_probe"] = "truth_probe.cimg"
        files["truth_object"] = "truth_object.cimg"
        write_cimg(out / files["truth_probe"], truth["probe"])
        write_cimg(out / files["truth_object"], truth["object"])
    sidecar = {
        "format": 1,
        "side": problem.meas.side,
        "shifts": [list(s) for s in problem.geometry.shifts],
        "probe_constraint": {"amplitude_cap": problem.probe_c.amplitude_cap, "support_frame": 0},
        "object_constraint": {
            "amp_lo": problem.object_c.amp_lo,
            "amp_hi": problem.object_c.amp_hi,
            "support_frame": 1,
        },
        "eta_x": problem.eta_x,
        "eta_y": problem.eta_y,
        "files": files,
    }
    sidecar.update(info or {})
    write_json(out / SIDECAR_NAME, sidecar)
    return out / SIDECAR_NAME


def load_instance(sidecar_path):
    sidecar_path = Path(sidecar_path)
    base = sidecar_path.parent
    meta = read_json(sidecar_path)
    files = meta["files"]
    geom = ScanGeometry([tuple(s) for s in meta["shifts"]], meta["side"])
    meas = MeasurementSet(read_rimg(base / files["measurements"]), geom)
    supports = read_rimg(base / files["supports"]) > 0.5
    pc = meta["probe_constraint"]
    oc = meta["object_constraint"]
    problem = ProblemInstance(
        ProbeConstraint(supports[pc["support_frame"]], pc["amplitude_cap"]),
        ObjectConstraint(supports[oc["support_frame"]], oc["amp_lo"], oc["amp_hi"]),
        meas,
        meta.get("eta_x", 1e-12),
        meta.get("eta_y", 1e-12),
    )
    truth = None
    if "truth_probe" in files and "truth_object" in files:
        truth = {
            "probe": read_cimg(base / files["truth_probe"])[0],
            "object": read_cimg(base / files["truth_object"])[0],
        }
    clean = None
    if "measurements_clean" in files:
        clean = MeasurementSet(read_rimg(base / files["measurements_clean"]), geom)
    info = {k: v for k, v in meta.items() if k in ("simulation", "noise", "seeds")}
    return problem, truth, clean, info
