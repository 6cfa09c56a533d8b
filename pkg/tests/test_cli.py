import filecmp
import time

import numpy as np
import pytest

from blindptych import cli
from blindptych import config as cfgmod
from blindptych.io import read_cimg, read_json, read_rimg, read_trace
from blindptych.solvers import SolverDivergence, Trace

MINI = """
seed = 3
[instance]
N = 32
grid = 3
stride = 8
probe_radius = 8
support_radius = 9
[solver]
variant = "phebie_parallel"
warmup_iters = 3
max_iters = 25
"""

NOISE = """
[instance.noise]
mean_peak_count = 2.0
seed = 9
"""


@pytest.fixture
def mini(tmp_path):
    path = tmp_path / "mini.toml"
    path.write_text(MINI)
    return path


def test_simulate_writes_stack_and_sidecar(mini, tmp_path):
    assert cli.main(["simulate", "--config", str(mini), "--out", str(tmp_path / "a")]) == 0
    mags = read_rimg(tmp_path / "a" / "measurements.rimg")
    assert mags.shape == (9, 32, 32)
    meta = read_json(tmp_path / "a" / "instance.json")
    assert len(meta["shifts"]) == 9 and meta["side"] == 32
    assert meta["simulation"]["truth_seed"] == 3
    for name in ("truth_probe.cimg", "truth_object.cimg", "truth_object_amp.pgm", "supports.rimg"):
        assert (tmp_path / "a" / name).exists()


def test_simulate_is_byte_identical(mini, tmp_path):
    for d in ("a", "b"):
        assert cli.main(["simulate", "--config", str(mini), "--out", str(tmp_path / d)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert mismatch == [] and errors == []


def test_seed_override_changes_truth(mini, tmp_path):
    cli.main(["simulate", "--config", str(mini), "--out", str(tmp_path / "a")])
    cli.main(["simulate", "--config", str(mini), "--out", str(tmp_path / "b"), "--seed", "4"])
    a = read_cimg(tmp_path / "a" / "truth_object.cimg")
    b = read_cimg(tmp_path / "b" / "truth_object.cimg")
    assert not np.array_equal(a, b)


def test_noise_block_changes_measurements(mini, tmp_path):
    noisy = tmp_path / "noisy.toml"
    noisy.write_text(MINI + NOISE)
    cli.main(["simulate", "--config", str(noisy), "--out", str(tmp_path / "n")])
    cli.main(["simulate", "--config", str(mini), "--out", str(tmp_path / "c")])
    clean = read_rimg(tmp_path / "c" / "measurements.rimg")
    np.testing.assert_array_equal(read_rimg(tmp_path / "n" / "measurements_clean.rimg"), clean)
    assert not np.array_equal(read_rimg(tmp_path / "n" / "measurements.rimg"), clean)
    meta = read_json(tmp_path / "n" / "instance.json")
    assert meta["noise"]["seed"] == 9 and meta["noise"]["lambda"] > 0


def test_sidecar_roundtrip(mini, tmp_path):
    cfg = cfgmod.load_config(mini)
    problem, truth, clean, info = cfgmod.build_instance(cfg)
    path = cfgmod.save_instance(tmp_path / "inst", problem, truth, clean, info)
    back, truth2, _, _ = cfgmod.load_instance(path)
    assert back.geometry == problem.geometry
    assert back.meas.mags.tobytes() == problem.meas.mags.tobytes()
    assert np.array_equal(back.probe_c.support, problem.probe_c.support)
    assert back.object_c.amp_lo == problem.object_c.amp_lo
    assert truth2["object"].tobytes() == truth["object"].tobytes()


def test_reconstruct_from_sidecar_and_metrics(mini, tmp_path):
    cli.main(["simulate", "--config", str(mini), "--out", str(tmp_path / "sim")])
    cfg = tmp_path / "from_file.toml"
    cfg.write_text('seed = 1\n[instance]\nsidecar = "sim/instance.json"\n[solver]\nmax_iters = 25\nwarmup_iters = 3\n')
    out = tmp_path / "rec"
    assert cli.main(["reconstruct", "--config", str(cfg), "--out", str(out)]) == 0
    trace = read_trace(out / "trace.csv")
    main = [r for r in trace.rows if r.k >= 1]
    assert main[-1].r_factor < main[0].r_factor
    cert = read_json(out / "certificate.json")
    assert cert["certificate"]["ok"] and cert["variant"] == "phebie_parallel"
    assert cli.main(["metrics", "--out", str(out)]) == 0
    m = read_json(out / "metrics.json")
    assert m["r_factor"] == pytest.approx(cert["metrics"]["r_factor"], rel=1e-12)
    assert m["F"] == pytest.approx(cert["metrics"]["F"], rel=1e-12)
    assert m["rms_object"] == pytest.approx(cert["metrics"]["rms_object"], rel=1e-12)


def test_reconstruct_is_deterministic(mini, tmp_path):
    for d in ("a", "b"):
        assert cli.main(["reconstruct", "--config", str(mini), "--out", str(tmp_path / d), "--variant", "phebie_whole"]) == 0
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    assert (tmp_path / "a" / "object.cimg").read_bytes() == (tmp_path / "b" / "object.cimg").read_bytes()
    assert read_json(tmp_path / "a" / "certificate.json")["variant"] == "phebie_whole"


def test_invalid_variant_is_usage_error(mini, tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["reconstruct", "--config", str(mini), "--out", str(tmp_path / "x"), "--variant", "bogus"])
    assert info.value.code == 2
    bad = tmp_path / "bad.toml"
    bad.write_text('[solver]\nvariant = "bogus"\n')
    assert cli.main(["reconstruct", "--config", str(bad), "--out", str(tmp_path / "y")]) == 2
    bad.write_text("[solver]\nunknown_key = 1\n")
    assert cli.main(["reconstruct", "--config", str(bad), "--out", str(tmp_path / "y")]) == 2
    assert "unknown" in capsys.readouterr().err


def test_divergence_gives_nonzero_exit(mini, tmp_path, monkeypatch):
    def boom(problem, cfg):
        raise SolverDivergence("non-finite iterate", Trace(cfg.variant, 0.0))

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["reconstruct", "--config", str(mini), "--out", str(tmp_path / "d")]) == cli.EXIT_DIVERGED
    assert (tmp_path / "d" / "trace.csv").exists()


def test_missing_config_is_error(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o")]) == 1


def test_benchmark_single_trial_equals_run(mini, tmp_path, monkeypatch):
    monkeypatch.setenv("PTYCHO_THREADS", "1")
    bench = tmp_path / "bench.toml"
    bench.write_text(MINI + '\n[benchmark]\ntrials = 1\nvariants = ["phebie_whole", "thibault_dm"]\n')
    assert cli.main(["benchmark", "--config", str(bench), "--out", str(tmp_path / "b")]) == 0
    lines = (tmp_path / "b" / "benchmark_summary.csv").read_text().splitlines()
    assert [ln.split(",")[0] for ln in lines[1:]] == [
        "phebie_whole mean", "phebie_whole worst", "thibault_dm mean", "thibault_dm worst",
    ]
    mean, worst = lines[1].split(","), lines[2].split(",")
    assert mean[1:6] == worst[1:6]  # time column excluded
    runs = (tmp_path / "b" / "benchmark_runs.csv").read_text().splitlines()
    assert runs[1].split(",")[1:6] == mean[1:6]


def test_benchmark_mean_below_worst_with_workers(mini, tmp_path, monkeypatch):
    monkeypatch.setenv("PTYCHO_THREADS", "2")
    bench = tmp_path / "bench.toml"
    bench.write_text(MINI.replace("max_iters = 25", "max_iters = 8") + '\n[benchmark]\ntrials = 3\nvariants = ["phebie_parallel"]\n')
    assert cli.main(["benchmark", "--config", str(bench), "--out", str(tmp_path / "b")]) == 0
    lines = (tmp_path / "b" / "benchmark_summary.csv").read_text().splitlines()
    mean, worst = (list(map(float, ln.split(",")[1:])) for ln in lines[1:3])
    assert all(a <= b for a, b in zip(mean, worst))
    seeds = read_json(tmp_path / "b" / "benchmark_seeds.json")
    assert len({tuple(t) for t in seeds["trials"]}) == 3


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PTYCHO_THREADS", "3")
    assert cli.thread_cap() == 3
    monkeypatch.setenv("PTYCHO_THREADS", "0")
    assert cli.thread_cap() == 1
    monkeypatch.setenv("PTYCHO_THREADS", "many")
    with pytest.raises(ValueError):
        cli.thread_cap()
    monkeypatch.delenv("PTYCHO_THREADS")
    assert cli.thread_cap() >= 1


def test_trial_seeds_are_derived_and_stable():
    a = cli.trial_seeds(0, 4)
    assert a == cli.trial_seeds(0, 4) and len(set(a)) == 4
    assert cli.trial_seeds(0, 2) == a[:2]


def test_four_variant_noiseless_bench_is_quick(tmp_path, monkeypatch):
    monkeypatch.setenv("PTYCHO_THREADS", "1")
    bench = tmp_path / "bench.toml"
    bench.write_text(MINI.replace("warmup_iters = 3\nmax_iters = 25", "warmup_iters = 10\nmax_iters = 300") + "\n[benchmark]\ntrials = 5\n")
    t0 = time.perf_counter()
    assert cli.main(["benchmark", "--config", str(bench), "--out", str(tmp_path / "b")]) == 0
    assert time.perf_counter() - t0 < 300
    names = [ln.split(",")[0] for ln in (tmp_path / "b" / "benchmark_summary.csv").read_text().splitlines()[1:]]
    assert len(names) == 8
