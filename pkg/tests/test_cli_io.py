"""File formats and the command-line interface."""

import json
import subprocess
import sys

import numpy as np
import pytest

from lptnreg.cli import main
from lptnreg.exceptions import InputError
from lptnreg.io import read_dataset, read_report, read_table, write_report, write_table

FAST = ["--iters", "3000", "--burnin", "500"]


@pytest.fixture
def csv_path(tmp_path):
    rng = np.random.default_rng(71)
    n = 25
    a = rng.normal(10, 2, n)
    b = rng.normal(-3, 1, n)
    y = 1.0 + 0.5 * a - 2.0 * b + rng.standard_normal(n)
    y[4] += 40.0
    lines = ["a,price,b"] + [f"{ai},{yi},{bi}" for ai, yi, bi in zip(a.tolist(), y.tolist(), b.tolist())]
    path = tmp_path / "data.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# Readers and writers
# ---------------------------------------------------------------------------

class TestIo:
    def test_read_dataset(self, csv_path):
        d = read_dataset(csv_path, "price")
        assert d.coef_names == ("intercept", "a", "b")
        assert d.n == 25 and np.all(d.x[:, 0] == 1.0)

    def test_semicolon_sniffed(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("x;y\n1;2\n2;4.5\n3;5\n")
        d = read_dataset(p, "y")
        np.testing.assert_array_equal(d.y, [2.0, 4.5, 5.0])

    def test_bad_cell_names_row_and_column(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x,y\n1,2\n2,oops\n")
        with pytest.raises(InputError, match=r"row 3, column 'y'"):
            read_dataset(p, "y")

    def test_missing_response(self, csv_path):
        with pytest.raises(InputError, match="response column"):
            read_dataset(csv_path, "cost")

    def test_ragged(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("x,y\n1,2\n2\n")
        with pytest.raises(InputError, match="row 3"):
            read_dataset(p, "y")

    def test_report_round_trip(self, tmp_path):
        rep = {"a": np.float64(1.5), "b": np.arange(3), "c": {"d": float("nan")}}
        write_report(rep, tmp_path / "r.json")
        back = read_report(tmp_path / "r.json")
        assert back["a"] == 1.5 and back["b"] == [0, 1, 2] and np.isnan(back["c"]["d"])

    def test_table_round_trip(self, tmp_path):
        rows = [["name", "k", "v"], ["x", 1, 0.1], ["y", 2, 1e-300]]
        write_table(rows, tmp_path / "t.csv")
        header, body = read_table(tmp_path / "t.csv")
        assert header == rows[0] and body == rows[1:]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

class TestCli:
    def test_fit_report(self, csv_path, tmp_path):
        out = tmp_path / "fit.json"
        code = main(["fit", str(csv_path), "--response", "price", "--seed", "1", "--out", str(out), *FAST])
        assert code == 0
        rep = read_report(out)
        assert rep["command"] == "fit" and rep["model"] == "lptn:0.95" and rep["seed"] == 1
        assert set(rep["parameters"]) == {"intercept", "a", "b", "sigma"}
        slope = rep["parameters"]["b"]
        assert slope["hpd_lower"] < slope["median"] < slope["hpd_upper"]
        assert slope["mean"] == pytest.approx(-2.0, abs=0.6)
        assert set(rep["column_means"]) == {"a", "b"}

    def test_rerun_byte_identical(self, csv_path, tmp_path):
        paths = []
        for k in range(2):
            p = tmp_path / f"o{k}.csv"
            assert main(["outliers", str(csv_path), "--response", "price", "--seed", "3", "--out", str(p), *FAST]) == 0
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()
        header, body = read_table(paths[0])
        flags = [r[header.index("row")] for r in body if r[header.index("flag")] == 1]
        assert flags == [5]

    def test_predict(self, csv_path, tmp_path):
        out = tmp_path / "p.json"
        args = ["predict", str(csv_path), "--response", "price", "--seed", "4", "--x", "10,-3", "--out", str(out)]
        assert main([*args, *FAST]) == 0
        rep = read_report(out)
        assert rep["median"] == pytest.approx(1.0 + 5.0 + 6.0, abs=1.5)
        assert main(["predict", str(csv_path), "--response", "price", "--seed", "4", "--x", "10", *FAST]) == 2

    def test_bf(self, csv_path, tmp_path):
        out = tmp_path / "bf.json"
        args = ["bf", str(csv_path), "--response", "price", "--seed", "5", "--index", "2",
                "--iters", "30000", "--burnin", "3000", "--out", str(out)]
        assert main(args) == 0
        rep = read_report(out)
        assert rep["tested"] == "a" and rep["bayes_factor"] > 0 and 0 < rep["p_full"] < 1

    def test_efficiency_series(self, tmp_path):
        out = tmp_path / "eff.csv"
        assert main(["efficiency", "--rhos", "0.8,0.9,0.95,0.98", "--out", str(out)]) == 0
        header, body = read_table(out)
        ratios = [r[header.index("sigma_ratio")] for r in body]
        assert np.all(np.diff(ratios) < 0) and ratios[-1] < 1.01

    def test_robustness_two_series(self, csv_path, tmp_path):
        out = tmp_path / "curve.csv"
        args = ["robustness", str(csv_path), "--response", "price", "--seed", "6", "--row", "2",
                "--a", "0", "--b", "10", "--omegas", "1,100", "--iters", "2000", "--burnin", "400",
                "--out", str(out)]
        assert main(args) == 0
        header, body = read_table(out)
        assert header[:3] == ["model", "omega", "y_out"]
        assert [r[0] for r in body] == ["normal", "normal", "lptn:0.95", "lptn:0.95"]

    def test_simstudy_table(self, tmp_path):
        out = tmp_path / "study.csv"
        args = ["simstudy", "--scenarios", "0,1", "--rhos", "0.95", "--dfs", "4", "--sizes", "50",
                "--reps", "2", "--seed", "7", "--out", str(out)]
        assert main(args) == 0
        header, body = read_table(out)
        assert len(body) == 6 and "protection_beta" in header

    def test_input_error_exit_two(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("x,y\n1,2\n2,oops\n3,4\n4,5\n")
        assert main(["fit", str(p), "--response", "y", "--seed", "1", *FAST]) == 2
        diag = json.loads(capsys.readouterr().err)
        assert diag["exit_code"] == 2 and "row 3" in diag["message"] and "'y'" in diag["message"]

    def test_improper_posterior_exit_two(self, tmp_path, capsys):
        p = tmp_path / "tiny.csv"
        p.write_text("x,y\n1,2\n2,3\n3,5\n")
        assert main(["fit", str(p), "--response", "y", "--seed", "1", *FAST]) == 2
        assert "improper" in json.loads(capsys.readouterr().err)["message"]

    def test_student_outliers_unsupported(self, csv_path):
        args = ["outliers", str(csv_path), "--response", "price", "--seed", "1", "--model", "student:4", *FAST]
        assert main(args) == 2

    def test_seed_required(self, csv_path):
        with pytest.raises(SystemExit):
            main(["fit", str(csv_path), "--response", "price"])

    def test_module_entry(self):
        res = subprocess.run([sys.executable, "-m", "lptnreg", "efficiency", "--rhos", "0.95"],
                             capture_output=True, text=True, check=True)
        assert res.stdout.startswith("rho,tau,lambda,sigma_ratio")
