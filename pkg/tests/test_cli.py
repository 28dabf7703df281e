import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conic_purge import EllipseParams
from conic_purge.geometry import ellipse_boundary_points
from conic_purge.synth import write_dataset_csv


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "conic_purge", *args],
                          capture_output=True, text=True, cwd=cwd)


TYPICAL_CONFIG = {
    "model": {"type": "ellipse", "center": [0.0, 0.0], "semi_major": 5.0,
              "eccentricity": 0.95, "rotation": 0.0},
    "n_inliers": 100, "n_outliers": 50,
    "sigma0": 0.01, "sigma1": 2.0, "seed": 11,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TYPICAL_CONFIG))
    return path


def write_noiseless_ellipse(path, n=60):
    e = EllipseParams(1.0, -0.5, 4.0, 2.5, 0.3)
    pts = ellipse_boundary_points(e, np.linspace(0, 2 * math.pi, n + 1)[:-1])
    write_dataset_csv(path, pts)
    return e


class TestGenerate:
    def test_typical_scenario_counts(self, tmp_path, config_path):
        out = tmp_path / "data.csv"
        proc = run_cli("generate", "--config", str(config_path),
                       "--out", str(out))
        assert proc.returncode == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 151
        assert lines[0] == "x,y,label"
        assert sum(1 for ln in lines if ln.endswith(",outlier")) == 50

    def test_small_clean_dataset(self, tmp_path):
        cfg = dict(TYPICAL_CONFIG, n_inliers=12, n_outliers=0)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "d.csv"
        assert run_cli("generate", "--config", str(path),
                       "--out", str(out)).returncode == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 13
        assert all(ln.endswith(",inlier") for ln in lines[1:])

    def test_byte_identical(self, tmp_path, config_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("generate", "--config", str(config_path), "--out", str(a))
        run_cli("generate", "--config", str(config_path), "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_bad_config_exit_1(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        proc = run_cli("generate", "--config", str(path),
                       "--out", str(tmp_path / "x.csv"))
        assert proc.returncode == 1

    def test_missing_file_exit_1(self, tmp_path):
        proc = run_cli("generate", "--config", str(tmp_path / "nope.json"),
                       "--out", str(tmp_path / "x.csv"))
        assert proc.returncode == 1


class TestDetect:
    def test_noiseless_ellipse_zero_outliers(self, tmp_path):
        data = tmp_path / "clean.csv"
        e = write_noiseless_ellipse(data)
        model_path = tmp_path / "model.json"
        proc = run_cli("detect", "--data", str(data), "--stage", "both",
                       "--seed", "0", "--out-model", str(model_path),
                       "--out-labels", str(tmp_path / "labels.csv"))
        assert proc.returncode == 0
        summary = json.loads(proc.stdout)
        assert summary["n_outliers_detected"] == 0
        model = json.loads(model_path.read_text())
        assert math.isclose(model["semi_axes"][0], e.a, rel_tol=1e-6)
        assert math.isclose(model["semi_axes"][1], e.b, rel_tol=1e-6)
        assert np.allclose(model["center"], [e.center_x, e.center_y],
                           atol=1e-6)

    def test_stage_composability(self, tmp_path, config_path):
        data = tmp_path / "data.csv"
        run_cli("generate", "--config", str(config_path), "--out", str(data))
        prox = tmp_path / "prox.csv"
        chained = tmp_path / "chained.csv"
        both = tmp_path / "both.csv"
        assert run_cli("detect", "--data", str(data), "--stage", "proximity",
                       "--seed", "11", "--out-labels", str(prox),
                       "--out-model", str(tmp_path / "m0.json")
                       ).returncode == 0
        assert run_cli("detect", "--data", str(data), "--stage", "model",
                       "--init-labels", str(prox), "--seed", "11",
                       "--out-labels", str(chained),
                       "--out-model", str(tmp_path / "m1.json")
                       ).returncode == 0
        assert run_cli("detect", "--data", str(data), "--stage", "both",
                       "--seed", "11", "--out-labels", str(both),
                       "--out-model", str(tmp_path / "m2.json")
                       ).returncode == 0
        assert chained.read_bytes() == both.read_bytes()
        assert (tmp_path / "m1.json").read_bytes() == \
            (tmp_path / "m2.json").read_bytes()

    def test_metrics_against_truth(self, tmp_path, config_path):
        data = tmp_path / "data.csv"
        run_cli("generate", "--config", str(config_path), "--out", str(data))
        proc = run_cli("detect", "--data", str(data), "--seed", "11")
        summary = json.loads(proc.stdout)
        assert {"precision", "recall", "f1"} <= set(summary)
        assert summary["precision"] >= 0.9 and summary["recall"] >= 0.9

    def test_ransac_baseline(self, tmp_path, config_path):
        data = tmp_path / "data.csv"
        run_cli("generate", "--config", str(config_path), "--out", str(data))
        proc = run_cli("detect", "--data", str(data), "--baseline", "ransac",
                       "--k", "200", "--seed", "3")
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["stage"] == "ransac"

    def test_duplicated_points_exit_2(self, tmp_path):
        data = tmp_path / "dup.csv"
        rows = ["x,y"] + ["1.0,2.0"] * 20
        data.write_text("\n".join(rows) + "\n")
        proc = run_cli("detect", "--data", str(data))
        assert proc.returncode == 2
        assert "DegenerateBandwidth" in proc.stderr

    def test_too_few_rows_exit_1(self, tmp_path):
        data = tmp_path / "tiny.csv"
        data.write_text("x,y\n" + "\n".join(f"{i}.0,0.0" for i in range(5)))
        assert run_cli("detect", "--data", str(data)).returncode == 1

    def test_usage_error_exit_1(self):
        assert run_cli("detect").returncode == 1
        assert run_cli("detect", "--data", "d.csv",
                       "--stage", "bogus").returncode == 1

    def test_spectrum_and_eligible_dumps(self, tmp_path, config_path):
        data = tmp_path / "data.csv"
        run_cli("generate", "--config", str(config_path), "--out", str(data))
        spec_csv = tmp_path / "spectrum.csv"
        elig_csv = tmp_path / "eligible.csv"
        proc = run_cli("detect", "--data", str(data), "--seed", "11",
                       "--dump-spectrum", str(spec_csv),
                       "--dump-eligible", str(elig_csv))
        assert proc.returncode == 0
        spec_lines = spec_csv.read_text().splitlines()
        assert spec_lines[0] == "index,eigenvalue"
        assert len(spec_lines) == 151
        eigenvalues = [float(ln.split(",")[1]) for ln in spec_lines[1:]]
        assert eigenvalues == sorted(eigenvalues)
        elig_lines = elig_csv.read_text().splitlines()
        assert elig_lines[0] == "eigenvalue,hf_measure,flagged_count"
        assert len(elig_lines) > 1

    def test_ellipsoid_dataset(self, tmp_path):
        cfg = {"model": {"type": "ellipsoid", "center": [0.0, 0.0, 0.0],
                         "semi_axes": [5.0, 4.0, 3.0]},
               "n_inliers": 300, "n_outliers": 50,
               "sigma0": 0.1, "sigma1": 5.0, "seed": 2}
        cfg_path = tmp_path / "cfg3d.json"
        cfg_path.write_text(json.dumps(cfg))
        data = tmp_path / "data3d.csv"
        assert run_cli("generate", "--config", str(cfg_path),
                       "--out", str(data)).returncode == 0
        assert data.read_text().splitlines()[0] == "x,y,z,label"
        model_path = tmp_path / "model3d.json"
        proc = run_cli("detect", "--data", str(data), "--seed", "2",
                       "--out-model", str(model_path),
                       "--out-labels", str(tmp_path / "l3d.csv"))
        assert proc.returncode == 0
        model = json.loads(model_path.read_text())
        assert model["type"] == "ellipsoid"
        assert np.allclose(sorted(model["semi_axes"], reverse=True),
                           [5.0, 4.0, 3.0], atol=0.3)

    def test_detect_determinism(self, tmp_path, config_path):
        data = tmp_path / "data.csv"
        run_cli("generate", "--config", str(config_path), "--out", str(data))
        outs = []
        for tag in ("a", "b"):
            labels = tmp_path / f"{tag}.csv"
            model = tmp_path / f"{tag}.json"
            proc = run_cli("detect", "--data", str(data), "--seed", "5",
                           "--out-labels", str(labels),
                           "--out-model", str(model))
            outs.append((labels.read_bytes(), model.read_bytes(), proc.stdout))
        assert outs[0] == outs[1]


class TestSweep:
    def sweep_spec(self, trials=2, grid=(10, 20)):
        return {
            "base": dict(TYPICAL_CONFIG, sigma0=0.1, sigma1=3.0),
            "vary": "n_outliers",
            "grid": list(grid),
            "trials": trials,
            "pipelines": ["two_stage", "no_elimination"],
            "master_seed": 5,
        }

    def test_columns_and_rows(self, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps(self.sweep_spec()))
        out = tmp_path / "curves.csv"
        proc = run_cli("sweep", "--spec", str(spec), "--out", str(out))
        assert proc.returncode == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ("param_value,pipeline,mean_error,median_error,"
                            "p90_error,mean_precision,mean_recall")
        assert len(lines) == 1 + 2 * 2  # grid x pipelines
        for line in lines[1:]:
            cells = line.split(",")
            assert cells[1] in ("two_stage", "no_elimination")
            float(cells[0]), float(cells[2]), float(cells[6])

    def test_elimination_beats_none(self, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps(self.sweep_spec(trials=3, grid=(30,))))
        out = tmp_path / "curves.csv"
        run_cli("sweep", "--spec", str(spec), "--out", str(out))
        rows = {ln.split(",")[1]: ln.split(",") for ln
                in out.read_text().splitlines()[1:]}
        assert float(rows["two_stage"][3]) < float(rows["no_elimination"][3])

    def test_empty_grid(self, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps(self.sweep_spec(grid=())))
        out = tmp_path / "curves.csv"
        proc = run_cli("sweep", "--spec", str(spec), "--out", str(out))
        assert proc.returncode == 0
        assert out.read_text().splitlines() == [
            "param_value,pipeline,mean_error,median_error,p90_error,"
            "mean_precision,mean_recall"]

    def test_malformed_spec_exit_1(self, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps({"vary": "n_outliers"}))
        assert run_cli("sweep", "--spec", str(spec),
                       "--out", str(tmp_path / "c.csv")).returncode == 1
        spec.write_text(json.dumps(dict(self.sweep_spec(),
                                        pipelines=["bogus"])))
        assert run_cli("sweep", "--spec", str(spec),
                       "--out", str(tmp_path / "c.csv")).returncode == 1

    def test_sweep_determinism_and_threads(self, tmp_path, monkeypatch):
        import os
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps(self.sweep_spec()))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("sweep", "--spec", str(spec), "--out", str(a))
        env = dict(os.environ, CONIC_PURGE_THREADS="2")
        proc = subprocess.run(
            [sys.executable, "-m", "conic_purge", "sweep", "--spec",
             str(spec), "--out", str(b)],
            capture_output=True, text=True, env=env)
        assert proc.returncode == 0
        assert a.read_bytes() == b.read_bytes()
