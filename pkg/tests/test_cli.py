import json

import numpy as np
import pytest

from gee_subsample.cli import main
from gee_subsample.panel import read_panel


@pytest.fixture
def panel_csv(tmp_path):
    path = tmp_path / "p.csv"
    assert main(["simulate", "--case", "3", "--m", "800", "--seed", "2", "--out", str(path)]) == 0
    return path


def test_simulate_writes_panel(panel_csv):
    P = read_panel(panel_csv)
    assert (P.m, P.n, P.p) == (800, 5, 6)


def test_fit_json(panel_csv, tmp_path, capsys):
    assert main(["fit", "--data", str(panel_csv), "--family", "binomial", "--structure", "ar1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["structure"] == "ar1" and len(out["beta"]) == 6 and out["converged"]
    assert out["covariates"][0] == "x1"


def test_subfit_with_toml_config(panel_csv, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'data = "{panel_csv}"\nfamily = "binomial"\nr = 300\nr0 = 100\nseed = 4\n')
    out = tmp_path / "o.json"
    assert main(["subfit", "--config", str(cfg), "--method", "mV", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["plan"]["method"] == "mV" and data["plan"]["r"] == 300


def test_json_config_and_flag_precedence(panel_csv, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"data": str(panel_csv), "family": "binomial", "structure": "ar1"}))
    out = tmp_path / "o.json"
    assert main(["fit", "--config", str(cfg), "--structure", "exch", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["structure"] == "exchangeable"


def test_bench_csv_deterministic(tmp_path):
    args = ["bench", "--case", "2", "--m", "300", "--replications", "2", "--r-grid", "120",
            "--r0", "80", "--structures", "ind,ar1", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--csv", str(a), "--json", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--csv", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads((tmp_path / "a.json").read_text())["config"]["m"] == 300


def test_bench_from_config(tmp_path):
    cfg = tmp_path / "b.toml"
    cfg.write_text('case = 3\nm = 300\nreplications = 1\nr_grid = [100, 150]\nr0 = 80\n'
                   'methods = ["mVc"]\nstructures = ["ind"]\n')
    out = tmp_path / "b.csv"
    assert main(["bench", "--config", str(cfg), "--csv", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 2 + 1


def test_holdout(panel_csv, tmp_path):
    out = tmp_path / "h.csv"
    args = ["holdout", "--data", str(panel_csv), "--family", "binomial", "--train-fraction", "0.75",
            "--replications", "1", "--r-grid", "200", "--r0", "100", "--structures", "ind",
            "--csv", str(out)]
    assert main(args) == 0
    header = out.read_text().splitlines()[0]
    assert header.endswith("pe,pe_mc_se")


@pytest.mark.parametrize("argv", [[], ["fit"], ["bench", "--m", "x"]])
def test_argparse_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


@pytest.mark.parametrize("argv,code", [
    (["fit", "--data", "missing.csv"], 3),
    (["simulate", "--case", "9", "--out", "x.csv"], 1),
    (["bench", "--r-grid", "600,300"], 1),
    (["fit", "--config", "nope.toml"], 1),
])
def test_exit_codes(argv, code, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("colour = 'red'\n")
    assert main(["simulate", "--config", str(cfg), "--out", "x.csv"]) == 1


def test_bad_csv_is_io_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,time,y,x\n1,1,zzz,0\n")
    assert main(["fit", "--data", str(bad)]) == 3


def test_numerical_failure_exit_2(tmp_path):
    path = tmp_path / "z.csv"
    rows = ["id,time,y,x"] + [f"{i},{t},0,{(i * 7 + t) % 5}" for i in range(30) for t in (1, 2)]
    path.write_text("\n".join(rows) + "\n")
    # all-zero binary responses: the pilot logistic fit cannot converge
    assert main(["subfit", "--data", str(path), "--family", "binomial", "--r", "40",
                 "--r0", "10", "--seed", "1"]) == 2


def test_write_to_directory_is_io_error(tmp_path):
    assert main(["simulate", "--m", "3", "--out", str(tmp_path)]) == 3
