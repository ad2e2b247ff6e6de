import json
import subprocess
import sys

import yaml

from adaptive_levels.cli import main

SMALL = {
    "fitness": {"mode": "relative", "focal_agent": "naive"},
    "ga": {"population_size": 6, "generations": 2, "attempts_per_level": 2},
    "repeats": 1,
    "calibration": {"levels": 4},
    "seed": 5,
}


def write_config(tmp_path, data=SMALL):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "aggregate.csv").exists() and (out / "run_00.csv").exists()
    assert (out / "fitness.png").stat().st_size > 0
    assert "mean fitness" in capsys.readouterr().out


def test_run_no_plot_and_seed_override(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "9", "--no-plot", "--trace"]) == 0
    assert not (out / "fitness.png").exists()
    assert (out / "trace_00.jsonl").exists()
    assert json.loads((out / "experiment.json").read_text())["root_seed"] == 9


def test_calibrate_prints_and_saves(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["calibrate", "--config", str(cfg), "--player", "tnt-hunter", "--out", str(tmp_path)]) == 0
    assert "chosen: tnt-hunter" in capsys.readouterr().out
    report = json.loads((tmp_path / "calibration.json").read_text())
    assert report["chosen"] == "tnt-hunter" and len(report["level_ids"]) == 4


def test_benchmark_from_run_output(tmp_path, capsys):
    cfg = write_config(tmp_path)
    run_dir = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(run_dir), "--no-plot"]) == 0
    bench = tmp_path / "bench"
    assert main(["benchmark", "--runs", str(run_dir), "--top", "3", "--out", str(bench)]) == 0
    manifest = json.loads((bench / "benchmark.json").read_text())
    assert len(manifest) == 3
    assert all((bench / e["file"]).exists() for e in manifest)


def test_missing_config_is_an_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "nope.yaml" in err


def test_invalid_config_is_an_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"repeats": -3})
    assert main(["calibrate", "--config", str(cfg)]) == 1
    assert "error:" in capsys.readouterr().err


def test_module_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "adaptive_levels", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for command in ("run", "calibrate", "benchmark"):
        assert command in proc.stdout
