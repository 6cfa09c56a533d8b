"""Command-line entry point: simulate, reconstruct, benchmark, metrics."""

import argparse
import dataclasses
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .io import read_cimg, read_json, read_trace, write_cimg, write_json, write_previews, write_trace
from .metrics import aggregate, certificate_report, r_factor, rms_error_registered, summary_csv, summary_table
from .model import objective
from .solvers import VARIANTS, CertificateWarning, SolverDivergence, run

log = logging.getLogger("blindptych")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3

DEFAULT_BENCH_VARIANTS = ("phebie_whole", "phebie_parallel", "thibault_dm", "maiden_rodenburg")


def thread_cap():
    """Worker cap from ``PTYCHO_THREADS`` (default: CPU count)."""
    raw = os.environ.get("PTYCHO_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"PTYCHO_THREADS must be an integer, got {raw!r}") from None
    return max(1, value)


def _load(args):
    cfg = cfgmod.load_config(args.config) if args.config else {}
    return cfgmod.apply_overrides(cfg, seed=args.seed, variant=getattr(args, "variant", None))


def run_metrics(problem, truth, x, y, z, trace=None, elapsed=None):
    geom = problem.geometry
    row = {
        "F": objective(x, y, z, geom),
        "step_sq": trace.rows[-1].step_sq if trace is not None and trace.rows else None,
        "r_factor": r_factor(x, y, geom, problem.meas),
        "rms_object": None,
        "rms_probe": None,
        "time_s": elapsed,
    }
    if truth is not None:
        row["rms_object"] = rms_error_registered(y, truth["object"])
        row["rms_probe"] = rms_error_registered(x, truth["probe"])
    return row


# ---- simulate ---------------------------------------------------------------


def cmd_simulate(args):
    cfg = _load(args)
    problem, truth, clean, info = cfgmod.build_instance(cfg)
    out = Path(args.out)
    cfgmod.save_instance(out, problem, truth, clean, dict(info, seeds={"config": cfg.get("seed")}))
    if truth is not None:
        write_previews(out / "truth_probe", truth["probe"])
        write_previews(out / "truth_object", truth["object"])
    print(f"wrote {problem.meas.m} frames of {problem.meas.side}x{problem.meas.side} to {out}")
    return EXIT_OK


# ---- reconstruct ------------------------------------------------------------


def cmd_reconstruct(args):
    cfg = _load(args)
    solver_cfg = cfgmod.solver_config(cfg)
    problem, truth, clean, info = cfgmod.build_instance(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.save_instance(out / "instance", problem, truth, clean, info)

    log.info("running %s for %d+%d iterations", solver_cfg.variant, solver_cfg.warmup_iters, solver_cfg.max_iters)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CertificateWarning)
        try:
            state, trace = run(problem, solver_cfg)
        except SolverDivergence as exc:
            write_trace(out / "trace.csv", exc.trace)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
    elapsed = time.perf_counter() - t0

    write_cimg(out / "probe.cimg", state.x)
    write_cimg(out / "object.cimg", state.y)
    write_cimg(out / "exit_waves.cimg", state.z)
    write_trace(out / "trace.csv", trace)
    write_previews(out / "probe", state.x)
    write_previews(out / "object", state.y)

    row = dict(run_metrics(problem, truth, state.x, state.y, state.z, trace, elapsed), name=solver_cfg.variant)
    report = certificate_report(trace)
    write_json(
        out / "certificate.json",
        {
            "variant": solver_cfg.variant,
            "solver": dataclasses.asdict(solver_cfg),
            "f_initial": trace.f_initial,
            "certificate": report,
            "warnings": len(caught),
            "metrics": row,
        },
    )
    (out / "summary.csv").write_text(summary_csv([row]))
    sys.stdout.write(summary_table([row]))
    print(f"certificate ok: {report['ok']}")
    return EXIT_OK


# ---- benchmark --------------------------------------------------------------


def trial_seeds(seed, trials):
    """Per-trial ``(truth_seed, init_seed, noise_seed)`` derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(trials)
    return [tuple(int(v) for v in child.generate_state(3)) for child in children]


def _bench_job(job):
    cfg, variant, trial, seeds = job
    truth_seed, init_seed, noise_seed = seeds
    cfg = dict(cfg)
    inst = dict(cfg.get("instance", {}))
    if "sidecar" not in inst:
        inst["truth_seed"] = truth_seed
        if inst.get("noise"):
            inst["noise"] = dict(inst["noise"], seed=noise_seed)
    cfg["instance"] = inst
    solver_cfg = cfgmod.solver_config(cfg, variant=variant, seed=init_seed)
    problem, truth, _, _ = cfgmod.build_instance(cfg)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CertificateWarning)
        try:
            state, trace = run(problem, solver_cfg)
        except SolverDivergence:
            nan = float("nan")
            return {"name": variant, "trial": trial, "F": nan, "step_sq": nan, "rms_object": nan,
                    "rms_probe": nan, "r_factor": nan, "time_s": time.perf_counter() - t0, "certificate_ok": False}
    elapsed = time.perf_counter() - t0
    row = run_metrics(problem, truth, state.x, state.y, state.z, trace, elapsed)
    row.update(name=variant, trial=trial, certificate_ok=certificate_report(trace)["ok"])
    return row


def cmd_benchmark(args):
    cfg = _load(args)
    bench = cfg.get("benchmark", {})
    trials = int(bench.get("trials", 5))
    if trials < 1:
        raise ValueError(f"benchmark.trials must be >= 1, got {trials}")
    variants = [args.variant] if args.variant else list(bench.get("variants", DEFAULT_BENCH_VARIANTS))
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
    seeds = trial_seeds(int(cfg.get("seed", 0)), trials)
    jobs = [(cfg, v, t, seeds[t]) for t in range(trials) for v in variants]

    workers = min(thread_cap(), len(jobs))
    log.info("%d jobs on %d worker(s)", len(jobs), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_job, jobs))
    else:
        rows = [_bench_job(j) for j in jobs]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run_rows = [dict(r, name=f"{r['name']}#{r['trial']}") for r in rows]
    (out / "benchmark_runs.csv").write_text(summary_csv(run_rows))
    agg = aggregate(rows)
    (out / "benchmark_summary.csv").write_text(summary_csv(agg))
    table = summary_table(agg)
    (out / "benchmark_summary.txt").write_text(table)
    write_json(out / "benchmark_seeds.json", {"seed": cfg.get("seed", 0), "trials": seeds, "variants": variants})
    sys.stdout.write(table)
    return EXIT_OK


# ---- metrics ----------------------------------------------------------------


def cmd_metrics(args):
    run_dir = Path(args.out)
    if args.config:
        problem, truth, _, _ = cfgmod.build_instance(_load(args))
    else:
        problem, truth, _, _ = cfgmod.load_instance(run_dir / "instance" / cfgmod.SIDECAR_NAME)
    x = read_cimg(run_dir / "probe.cimg")[0]
    y = read_cimg(run_dir / "object.cimg")[0]
    z = read_cimg(run_dir / "exit_waves.cimg")
    trace = read_trace(run_dir / "trace.csv") if (run_dir / "trace.csv").exists() else None
    elapsed = None
    cert_path = run_dir / "certificate.json"
    if cert_path.exists():
        elapsed = read_json(cert_path).get("metrics", {}).get("time_s")
    row = dict(run_metrics(problem, truth, x, y, z, trace, elapsed), name=run_dir.name)
    (run_dir / "metrics.csv").write_text(summary_csv([row]))
    write_json(run_dir / "metrics.json", row)
    sys.stdout.write(summary_table([row]))
    return EXIT_OK


# ---- parser -----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="blindptych", description="Blind ptychographic reconstruction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, variant=True):
        p.add_argument("--config", help="TOML config file (defaults used when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        if variant:
            p.add_argument("--variant", choices=VARIANTS, help="overrides the config solver variant")
        return p

    common(sub.add_parser("simulate", help="generate a synthetic instance"), variant=False).set_defaults(
        func=cmd_simulate
    )
    common(sub.add_parser("reconstruct", help="run one solver")).set_defaults(func=cmd_reconstruct)
    common(sub.add_parser("benchmark", help="trials x variants with mean/worst aggregation")).set_defaults(
        func=cmd_benchmark
    )
    common(
        sub.add_parser("metrics", help="recompute metrics for a reconstruct output directory (--out)"),
        variant=False,
    ).set_defaults(func=cmd_metrics)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, TypeError) as exc:
        # bad config values are usage errors
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, KeyError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
