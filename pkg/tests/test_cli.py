import json
import subprocess
import sys

import numpy as np
import pytest

from graphheat import cli, manifolds


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def config_line(out):
    line = next(l for l in out.splitlines() if l.startswith("config "))
    return json.loads(line[len("config "):])


def metrics_line(out):
    line = next(l for l in out.splitlines() if l.startswith("{"))
    return json.loads(line)


def test_no_subcommand_prints_help(capsys):
    code, _, err = run_cli([], capsys)
    assert code == 1
    assert "usage:" in err


def test_unknown_subcommand(capsys):
    code, _, err = run_cli(["frobnicate"], capsys)
    assert code == 1
    assert err.startswith("error:")


def test_help_states_units(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["estimate", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "length units" in out
    assert "length^2 units" in out
    assert "dimensionless" in out


def test_sample_circle(tmp_path, capsys):
    out = tmp_path / "cloud.csv"
    code, stdout, _ = run_cli(
        ["sample", "--n-samples", "40", "--density", "sinusoid", "--amplitude", "0.5",
         "--out", str(out)],
        capsys,
    )
    assert code == 0
    cfg = config_line(stdout)
    assert cfg["command"] == "sample"
    assert cfg["n_samples"] == 40
    assert cfg["amplitude"] == 0.5
    assert cfg["arc_length"] == pytest.approx(2.0 * np.pi)
    lines = out.read_text().splitlines()
    assert lines[0] == "x0,x1,x2,intrinsic0"
    assert len(lines) == 41
    assert f"wrote {out}" in stdout


def test_sample_sphere(tmp_path, capsys):
    out = tmp_path / "sphere.csv"
    code, stdout, _ = run_cli(
        ["sample", "--manifold", "sphere", "--density", "exp_z", "--n-samples", "30",
         "--out", str(out)],
        capsys,
    )
    assert code == 0
    assert config_line(stdout)["concentration"] == 1.5
    assert out.read_text().splitlines()[0] == "x0,x1,x2,intrinsic0,intrinsic1,intrinsic2"


def test_sample_usage_errors(tmp_path, capsys):
    code, _, err = run_cli(["sample", "--n-samples", "1"], capsys)
    assert code == 1 and "--n-samples" in err
    code, _, err = run_cli(
        ["sample", "--manifold", "sphere", "--density", "sinusoid", "--n-samples", "10"],
        capsys,
    )
    assert code == 1 and "circle density" in err
    code, _, err = run_cli(
        ["sample", "--n-samples", "10", "--arc-length", "-2"], capsys
    )
    assert code == 1 and "--arc-length" in err


def test_estimate_defaults_to_half_time_unit(tmp_path, capsys):
    out = tmp_path / "est.csv"
    code, stdout, _ = run_cli(
        ["estimate", "--n-samples", "300", "--sigma", "0.25", "--out", str(out)],
        capsys,
    )
    assert code == 0
    cfg = config_line(stdout)
    assert cfg["n_steps"] == 8
    assert cfg["t"] == 0.5
    assert cfg["mode"] == "density_corrected"
    assert cfg["truncation"] == "dense"
    lines = out.read_text().splitlines()
    assert lines[0] == "index,estimate,truth,abs_error"
    assert len(lines) == 301
    metrics = metrics_line(stdout)
    assert 0.0 < metrics["err_rms"] <= metrics["err_inf"] < 0.5


def test_estimate_steps_flag_overrides_time(tmp_path, capsys):
    out = tmp_path / "est.csv"
    code, stdout, _ = run_cli(
        ["estimate", "--n-samples", "100", "--sigma", "0.25", "--t", "9",
         "--steps", "4", "--out", str(out)],
        capsys,
    )
    assert code == 0
    cfg = config_line(stdout)
    assert cfg["n_steps"] == 4
    assert cfg["t"] == 0.25


def test_estimate_usage_errors(tmp_path, capsys):
    code, _, err = run_cli(
        ["estimate", "--n-samples", "100", "--sigma", "-0.1"], capsys
    )
    assert code == 1 and "--sigma" in err
    code, _, err = run_cli(
        ["estimate", "--n-samples", "100", "--sigma", "0.25", "--t", "0.01"], capsys
    )
    assert code == 1 and "rounded to 0" in err
    code, _, err = run_cli(
        ["estimate", "--n-samples", "100", "--sigma", "0.25", "--amplitude", "1.0"],
        capsys,
    )
    assert code == 1 and "--amplitude" in err
    code, _, err = run_cli(
        ["estimate", "--n-samples", "100", "--sigma", "0.25", "--cutoff-multiplier", "2"],
        capsys,
    )
    assert code == 1 and "--cutoff-multiplier" in err


def test_extend_writes_query_grid(tmp_path, capsys):
    out = tmp_path / "ext.csv"
    code, stdout, _ = run_cli(
        ["extend", "--n-samples", "300", "--sigma", "0.25", "--queries", "57",
         "--out", str(out)],
        capsys,
    )
    assert code == 0
    assert config_line(stdout)["queries"] == 57
    lines = out.read_text().splitlines()
    assert lines[0] == "index,estimate,truth,abs_error"
    assert len(lines) == 58
    metrics = metrics_line(stdout)
    assert 0.0 < metrics["err_inf"] < 0.5


def test_extend_rejects_zero_steps(capsys):
    code, _, err = run_cli(
        ["extend", "--n-samples", "100", "--sigma", "0.25", "--steps", "0"], capsys
    )
    assert code == 1 and "--steps" in err


def test_heatkernel_sphere_defaults_to_densest_anchor(tmp_path, capsys):
    out = tmp_path / "hk.csv"
    code, stdout, _ = run_cli(
        ["heatkernel", "--n-samples", "400", "--sigma", "0.1", "--out", str(out)],
        capsys,
    )
    assert code == 0
    cfg = config_line(stdout)
    assert cfg["n_steps"] == 15
    assert cfg["t"] == pytest.approx(0.15)
    cloud = manifolds.sample_cloud(
        manifolds.ManifoldSpec("sphere"),
        manifolds.DensitySpec("exp_z", concentration=1.5),
        400,
        seed=1000,
    )
    assert cfg["anchor"] == manifolds.densest_sample_index(cloud)
    lines = out.read_text().splitlines()
    assert lines[0] == "index,estimate,truth"
    assert len(lines) == 401


def test_heatkernel_explicit_anchor_and_circle_truth(tmp_path, capsys):
    out = tmp_path / "hk.csv"
    code, stdout, _ = run_cli(
        ["heatkernel", "--manifold", "circle", "--density", "uniform",
         "--n-samples", "300", "--sigma", "0.25", "--steps", "8", "--anchor", "7",
         "--out", str(out)],
        capsys,
    )
    assert code == 0
    cfg = config_line(stdout)
    assert cfg["anchor"] == 7
    assert cfg["t"] == 0.5
    metrics = metrics_line(stdout)
    assert np.isfinite(metrics["err_inf"])


def test_heatkernel_usage_errors(capsys):
    code, _, err = run_cli(
        ["heatkernel", "--n-samples", "50", "--sigma", "0.1", "--anchor", "50"], capsys
    )
    assert code == 1 and "--anchor" in err
    code, _, err = run_cli(
        ["heatkernel", "--manifold", "circle", "--density", "exp_z",
         "--n-samples", "50", "--sigma", "0.1"],
        capsys,
    )
    assert code == 1 and "not a circle density" in err


def test_disconnected_graph_exits_2(capsys):
    code, _, err = run_cli(
        ["heatkernel", "--manifold", "circle", "--density", "uniform",
         "--n-samples", "100", "--sigma", "0.001", "--steps", "1",
         "--truncation", "truncated"],
        capsys,
    )
    assert code == 2
    assert err.startswith("runtime error:")
    assert "no neighbor within cutoff" in err


def test_threads_flag(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run_cli(
        ["sample", "--n-samples", "10", "--threads", "2", "--out", str(out)], capsys
    )
    assert code == 0
    code, _, err = run_cli(
        ["sample", "--n-samples", "10", "--threads", "0", "--out", str(out)], capsys
    )
    assert code == 1 and "--threads" in err


def sweep_config(tmp_path, **overrides):
    data = {
        "manifold": {"kind": "circle", "arc_length": 2.0 * np.pi},
        "density": {"kind": "sinusoid", "amplitude": 0.8},
        "n_values": [250, 500, 1000],
        "sigma_rule": {"kind": "fixed", "sigma": 0.25},
        "t": 0.5,
        "trials": 2,
        "base_seed": 1000,
    }
    data.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def test_sweep_and_rate(tmp_path, capsys):
    cfg = sweep_config(tmp_path)
    out = tmp_path / "sweep.csv"
    plots = tmp_path / "plots"
    code, stdout, _ = run_cli(
        ["sweep", "--config", str(cfg), "--out", str(out), "--plot-dir", str(plots)],
        capsys,
    )
    assert code == 0
    assert config_line(stdout)["trials"] == 2
    lines = out.read_text().splitlines()
    assert len(lines) == 7
    for metric in ("err_inf", "err_rms"):
        assert (plots / f"sweep_{metric}.svg").exists()
        assert (plots / f"sweep_{metric}.png").exists()

    code, stdout, _ = run_cli(["rate", "--input", str(out)], capsys)
    assert code == 0
    fit = metrics_line(stdout)
    assert set(fit) == {"metric", "slope", "intercept", "r_squared"}
    assert np.isfinite(fit["slope"])


def test_sweep_set_and_seed_overrides(tmp_path, capsys):
    cfg = sweep_config(tmp_path)
    out = tmp_path / "sweep.csv"
    code, stdout, _ = run_cli(
        ["sweep", "--config", str(cfg), "--out", str(out),
         "--set", "trials=1", "--set", "n_values=[250]",
         "--set", "sigma_rule.sigma=0.3", "--seed", "2024"],
        capsys,
    )
    assert code == 0
    resolved = config_line(stdout)
    assert resolved["trials"] == 1
    assert resolved["n_values"] == [250]
    assert resolved["sigma_rule"]["sigma"] == 0.3
    assert resolved["base_seed"] == 2024
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].split(",")[5] == "2024"


def test_sweep_timing_flag_changes_wall_column(tmp_path, capsys):
    cfg = sweep_config(tmp_path, n_values=[250], trials=1)
    plain = tmp_path / "plain.csv"
    timed = tmp_path / "timed.csv"
    assert run_cli(["sweep", "--config", str(cfg), "--out", str(plain)], capsys)[0] == 0
    assert run_cli(
        ["sweep", "--config", str(cfg), "--out", str(timed), "--timing"], capsys
    )[0] == 0
    assert plain.read_text().splitlines()[1].endswith(",0")
    assert float(timed.read_text().splitlines()[1].split(",")[-1]) > 0.0


def test_sweep_usage_errors(tmp_path, capsys):
    code, _, err = run_cli(
        ["sweep", "--config", str(tmp_path / "missing.json")], capsys
    )
    assert code == 1 and "not found" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    code, _, err = run_cli(["sweep", "--config", str(bad)], capsys)
    assert code == 1 and "not valid JSON" in err
    array = tmp_path / "array.json"
    array.write_text("[1,2]")
    code, _, err = run_cli(["sweep", "--config", str(array)], capsys)
    assert code == 1 and "JSON object" in err
    cfg = sweep_config(tmp_path, extra_key=1)
    code, _, err = run_cli(["sweep", "--config", str(cfg)], capsys)
    assert code == 1 and "invalid sweep config" in err
    cfg = sweep_config(tmp_path)
    code, _, err = run_cli(["sweep", "--config", str(cfg), "--set", "trials"], capsys)
    assert code == 1 and "KEY=VALUE" in err
    code, _, err = run_cli(["sweep", "--config", str(cfg), "--set", "t.x=1"], capsys)
    assert code == 1 and "config section" in err


def test_rate_usage_errors(tmp_path, capsys):
    code, _, err = run_cli(["rate", "--input", str(tmp_path / "none.csv")], capsys)
    assert code == 1 and "cannot read" in err
    short = tmp_path / "short.csv"
    cfg = sweep_config(tmp_path, n_values=[250], trials=1)
    assert run_cli(["sweep", "--config", str(cfg), "--out", str(short)], capsys)[0] == 0
    code, _, err = run_cli(["rate", "--input", str(short)], capsys)
    assert code == 1 and ">= 3 distinct" in err
    stray = tmp_path / "stray.csv"
    stray.write_text("x,y\n1,2\n")
    code, _, err = run_cli(["rate", "--input", str(stray)], capsys)
    assert code == 1 and "header mismatch" in err


def test_fig2_cli(tmp_path, capsys):
    out_dir = tmp_path / "fig2"
    code, stdout, _ = run_cli(["fig2", "--out-dir", str(out_dir)], capsys)
    assert code == 0
    metrics = metrics_line(stdout)
    assert 0.03 < metrics["err_inf"] < 0.3
    assert (out_dir / "fig2_column.csv").exists()
    assert (out_dir / "fig2.svg").exists()
    assert (out_dir / "fig2.png").exists()
    assert (out_dir / "fig2_summary.json").exists()
    assert stdout.count("wrote ") == 4


def test_module_entry_point(tmp_path):
    out = tmp_path / "cloud.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "graphheat.cli", "sample", "--n-samples", "10",
         "--out", str(out)],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    assert out.exists()
