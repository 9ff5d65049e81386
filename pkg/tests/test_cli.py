import csv
import json
import os

import numpy as np
import pytest

from mcen.cli import main


@pytest.fixture
def gaussian_csv(tmp_path):
    rng = np.random.default_rng(0)
    n, p, r = 60, 4, 3
    X = rng.normal(size=(n, p))
    B = np.zeros((p, r))
    B[:2, 0] = 1.0
    B[2:, 1] = -1.0
    Y = X @ B + rng.normal(size=(n, r))
    path = tmp_path / "train.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(p)] + [f"y{k}" for k in range(r)])
        for i in range(n):
            w.writerow([repr(float(v)) for v in X[i]] + [repr(float(v)) for v in Y[i]])
    return str(path)


@pytest.fixture
def binomial_csv(tmp_path):
    rng = np.random.default_rng(1)
    n, p = 80, 3
    X = rng.normal(size=(n, p))
    pi = 1 / (1 + np.exp(-X @ np.array([[1.2], [0.0], [-0.7]])))
    y = (rng.random((n, 1)) < pi).astype(float)
    path = tmp_path / "btrain.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(p)] + ["y"])
        for i in range(n):
            w.writerow([repr(float(v)) for v in X[i]] + [repr(float(y[i, 0]))])
    return str(path)


class TestFitCommand:
    def test_zero_fit_at_huge_delta(self, gaussian_csv, tmp_path):
        out = str(tmp_path / "fit_out")
        rc = main(["fit", "--data", gaussian_csv, "--responses", "y0,y1,y2",
                   "--Q", "1", "--gamma", "0.0", "--delta", "1e9",
                   "--seed", "0", "--out", out])
        assert rc == 0
        doc = json.load(open(os.path.join(out, "fit.json")))
        assert not any(doc["coefficients_colmajor"])
        assert doc["all_zero_init"] is True
        assert "manifest" in doc and doc["manifest"]["version"]

    def test_byte_identical_repeat(self, gaussian_csv, tmp_path):
        out = str(tmp_path / "rep")
        argv = ["fit", "--data", gaussian_csv, "--responses", "y0,y1,y2",
                "--Q", "2", "--gamma", "0.5", "--delta", "0.1",
                "--seed", "7", "--out", out]
        assert main(argv) == 0
        first = open(os.path.join(out, "fit.json"), "rb").read()
        assert main(argv) == 0
        second = open(os.path.join(out, "fit.json"), "rb").read()
        assert first == second

    def test_missing_response_column(self, gaussian_csv, tmp_path):
        rc = main(["fit", "--data", gaussian_csv, "--responses", "nope",
                   "--Q", "1", "--gamma", "0", "--delta", "1",
                   "--out", str(tmp_path / "x")])
        assert rc == 2

    def test_missing_value_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,y0\n1.0,2.0\n,3.0\n")
        rc = main(["fit", "--data", str(path), "--responses", "y0",
                   "--Q", "1", "--gamma", "0", "--delta", "1",
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_requires_triple(self, gaussian_csv, tmp_path):
        rc = main(["fit", "--data", gaussian_csv, "--responses", "y0",
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_binomial_fit(self, binomial_csv, tmp_path):
        out = str(tmp_path / "bf")
        rc = main(["fit", "--data", binomial_csv, "--responses", "y",
                   "--kind", "binomial", "--Q", "1", "--gamma", "0.1",
                   "--delta", "1.0", "--out", out])
        assert rc == 0
        doc = json.load(open(os.path.join(out, "fit.json")))
        assert doc["kind"] == "binomial"
        assert doc["has_intercept_row"] is True


class TestPredictCommand:
    def test_round_trip_training_predictions(self, gaussian_csv, tmp_path):
        fit_out = str(tmp_path / "f")
        assert main(["fit", "--data", gaussian_csv, "--responses", "y0,y1,y2",
                     "--Q", "2", "--gamma", "0.0", "--delta", "0.05",
                     "--out", fit_out]) == 0
        pred_out = str(tmp_path / "p")
        rc = main(["predict", "--data", gaussian_csv,
                   "--fit", os.path.join(fit_out, "fit.json"), "--out", pred_out])
        assert rc == 0
        rows = list(csv.reader(
            ln for ln in open(os.path.join(pred_out, "predictions.csv"))
            if not ln.startswith("#")
        ))
        assert rows[0] == ["y0", "y1", "y2"]
        got = np.asarray(rows[1:], dtype=float)

        from mcen.serialize import fit_from_json
        from mcen.mcen_gaussian import predict

        f = fit_from_json(open(os.path.join(fit_out, "fit.json")).read())
        data = list(csv.reader(open(gaussian_csv)))
        X = np.asarray(data[1:], dtype=float)[:, :4]
        assert np.abs(got - predict(f, X)).max() < 1e-8

    def test_zero_fit_predicts_constants(self, gaussian_csv, tmp_path):
        fit_out = str(tmp_path / "fz")
        main(["fit", "--data", gaussian_csv, "--responses", "y0,y1,y2",
              "--Q", "1", "--gamma", "0.0", "--delta", "1e9", "--out", fit_out])
        pred_out = str(tmp_path / "pz")
        assert main(["predict", "--data", gaussian_csv,
                     "--fit", os.path.join(fit_out, "fit.json"),
                     "--out", pred_out]) == 0
        rows = [r for r in csv.reader(
            ln for ln in open(os.path.join(pred_out, "predictions.csv"))
            if not ln.startswith("#")
        )][1:]
        vals = np.asarray(rows, dtype=float)
        assert np.abs(vals - vals[0]).max() == 0.0

    def test_wrong_column_count(self, gaussian_csv, tmp_path):
        fit_out = str(tmp_path / "fw")
        main(["fit", "--data", gaussian_csv, "--responses", "y0,y1,y2",
              "--Q", "1", "--gamma", "0", "--delta", "0.1", "--out", fit_out])
        bad = tmp_path / "narrow.csv"
        bad.write_text("a,b\n1.0,2.0\n3.0,4.0\n")
        rc = main(["predict", "--data", str(bad),
                   "--fit", os.path.join(fit_out, "fit.json"),
                   "--out", str(tmp_path / "pw")])
        assert rc == 2


class TestCvCommand:
    def test_single_cell_grid(self, gaussian_csv, tmp_path):
        out = str(tmp_path / "cv1")
        rc = main(["cv", "--data", gaussian_csv, "--responses", "y0,y1,y2",
                   "--grid", '{"Q":[2],"gamma":[0.5],"delta":[0.1]}',
                   "--K", "4", "--seed", "1", "--out", out])
        assert rc == 0
        best = json.load(open(os.path.join(out, "best.json")))["best"]
        assert best == {"Q": 2, "gamma": 0.5, "delta": 0.1}
        assert os.path.exists(os.path.join(out, "fit.json"))
        table = open(os.path.join(out, "cv_table.csv")).read().splitlines()
        assert table[0].startswith("# manifest:")
        assert table[1] == "Q,gamma,delta,fold,criterion"
        assert len(table) == 2 + 4  # one cell x four folds

    def test_k_exceeding_n(self, gaussian_csv, tmp_path):
        rc = main(["cv", "--data", gaussian_csv, "--responses", "y0,y1,y2",
                   "--K", "1000", "--out", str(tmp_path / "cvk")])
        assert rc == 2

    def test_bad_grid_json(self, gaussian_csv, tmp_path):
        rc = main(["cv", "--data", gaussian_csv, "--responses", "y0",
                   "--grid", "{not json", "--out", str(tmp_path / "cvb")])
        assert rc == 2


class TestSimulateCommand:
    def test_desk_run_shape_and_determinism(self, tmp_path):
        out = str(tmp_path / "sim")
        argv = ["simulate", "--eta", "0.75", "--lambda", "0.02",
                "--replications", "2", "--n-test", "80", "--K", "3",
                "--n-delta", "3", "--methods", "SEN", "--seed", "11",
                "--out", out]
        assert main(argv) == 0
        lines = open(os.path.join(out, "results.csv")).read().splitlines()
        assert lines[1] == "method,replication,metric,value"
        assert len(lines) == 2 + 2 * 4  # 2 reps x 4 metrics
        summary1 = json.load(open(os.path.join(out, "summary.json")))
        assert main(argv) == 0
        summary2 = json.load(open(os.path.join(out, "summary.json")))
        assert summary1 == summary2

    def test_invalid_p(self, tmp_path):
        rc = main(["simulate", "--eta", "0.5", "--lambda", "0.02", "--p", "17",
                   "--replications", "1", "--methods", "SEN",
                   "--out", str(tmp_path / "simbad")])
        assert rc == 2
