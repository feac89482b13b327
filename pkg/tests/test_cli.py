import json
import subprocess
import sys

import numpy as np
import pytest

from krrselect import cli
from krrselect.fit import read_csv_dataset


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def smooth_csv(tmp_path, n=60):
    x = np.linspace(0.0, 1.0, n)
    y = np.sin(2 * np.pi * x) + 0.05 * np.random.default_rng(0).standard_normal(n)
    lines = ["x1,y"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(x, y)]
    return write(tmp_path, "\n".join(lines) + "\n")


@pytest.mark.parametrize("selector", ["asus", "lp", "holdout"])
def test_fit_writes_json(tmp_path, selector):
    out = tmp_path / "fit.json"
    code = cli.main(["fit", str(smooth_csv(tmp_path)), "--selector", selector, "--kernel", "gaussian:0.2", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert {"rule", "lambda", "k_hat", "fallback", "n", "config_digest", "seed"} <= set(doc)
    assert doc["rule"] == selector and doc["n"] == 60


def test_fit_stdout_and_trig_kernel(tmp_path, capsys):
    assert cli.main(["fit", str(smooth_csv(tmp_path)), "--kernel", "trig:2:100", "--noise", "0.05,0.05"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["noise"]["source"] == "user"


def test_fit_two_row_holdout_is_input_error(tmp_path, capsys):
    p = write(tmp_path, "x,y\n0.1,1\n0.9,1\n")
    assert cli.main(["fit", str(p), "--kernel", "gaussian:0.5", "--selector", "holdout"]) == 2
    assert "hold-out" in capsys.readouterr().err


def test_fit_constant_y_records_fallback(tmp_path, capsys):
    p = write(tmp_path, "x1,y\n" + "".join(f"{i / 19},3.0\n" for i in range(20)))
    assert cli.main(["fit", str(p), "--noise", "0.1,0.1"]) == 0
    assert json.loads(capsys.readouterr().out)["fallback"] is True


@pytest.mark.parametrize("text, line", [
    ("x1,y\n0.1,1\n0.2,abc\n", "line 3"),
    ("x1,y\n0.1,1\n0.2\n", "line 3"),
    ("a,b\n0.1,1\n", "line 1"),
    ("x1,y\n0.1,1\n0.5,nan\n", "line 3"),
    ("", "line 1"),
])
def test_malformed_csv_names_line(tmp_path, capsys, text, line):
    p = write(tmp_path, text)
    assert cli.main(["fit", str(p)]) == 2
    assert line in capsys.readouterr().err


def test_missing_file_and_bad_flags(tmp_path, capsys):
    assert cli.main(["fit", str(tmp_path / "missing.csv")]) == 2
    assert cli.main(["fit", str(smooth_csv(tmp_path)), "--kernel", "cubic:1"]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["fit", "x.csv", "--noise", "1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 2


def test_trig_kernel_out_of_domain(tmp_path, capsys):
    p = write(tmp_path, "x1,y\n0.1,1\n1.5,2\n0.3,1\n")
    assert cli.main(["fit", str(p), "--kernel", "trig:2:50"]) == 2


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    import krrselect.fit as fit_mod

    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("eigensolver did not converge")

    monkeypatch.setattr(fit_mod, "build_cache", boom)
    assert cli.main(["fit", str(smooth_csv(tmp_path))]) == 3


def test_multivariate_csv(tmp_path, capsys):
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(40, 2))
    y = x[:, 0] - x[:, 1]
    p = write(tmp_path, "x1,x2,y\n" + "".join(f"{a},{b},{c}\n" for (a, b), c in zip(x, y)))
    assert read_csv_dataset(p).xs.shape == (40, 2)
    assert cli.main(["fit", str(p), "--kernel", "gaussian:0.5"]) == 0


SIM = ["--sizes", "40,60,90,135", "--trials", "2", "--J", "60", "--cap", "200"]


def test_simulate_outputs_identical_across_runs_and_jobs(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["simulate", *SIM, "--selectors", "asus,lp", "--out", str(a)]) == 0
    assert cli.main(["simulate", *SIM, "--selectors", "asus,lp", "--jobs", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()


def test_simulate_rejects_bad_config(capsys):
    assert cli.main(["simulate", "--sizes", "100,50,200,300"]) == 2
    assert cli.main(["simulate", "--kernel", "gaussian:0.1"]) == 2


def test_compare_prop1_calibrate(tmp_path, capsys):
    assert cli.main(["compare", *SIM]) == 0
    assert capsys.readouterr().out.startswith("selector,n,median_err_rho")
    assert cli.main(["prop1", *SIM]) == 0
    assert capsys.readouterr().out.startswith("n,trial,seed,max_ratio")
    out = tmp_path / "cal.json"
    assert cli.main(["calibrate", "--sizes", "40,60", "--trials", "1", "--J", "40", "--c-grid", "1e-4,1e-2",
                     "--r-values", "0.5", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["best_c_scale"] in (1e-4, 1e-2)


def test_paper_mode_runs(tmp_path, capsys):
    assert cli.main(["fit", str(smooth_csv(tmp_path)), "--mode", "paper"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["c_scale"] == 1.0 and doc["grid_size"] >= 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "krrselect", "fit", str(smooth_csv(tmp_path))],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["rule"] == "asus"
