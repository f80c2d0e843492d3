import json
import math
import subprocess
import sys

import numpy as np
import pytest

from gotmmd.cli import cli_dispatch
from gotmmd.kernel import KernelParams, kernel_eval


def run(capsys, *argv):
    code = cli_dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out.strip(), err


def test_moments(capsys):
    code, out, _ = run(capsys, "moments", "--d", "3", "--u", "0", "--s", "4")
    assert code == 0 and out == "15"
    code, out, _ = run(capsys, "moments", "--d", "3", "--u", "0", "--s", "4", "--log")
    assert float(out) == pytest.approx(math.log(15), rel=1e-15)


def test_kernel_eval(capsys):
    code, out, _ = run(capsys, "kernel-eval", "--d", "3", "--epsilon", "1", "--x", "0,0,0",
                       "--y", "0,0,0")
    assert code == 0
    assert float(out) == pytest.approx(kernel_eval(np.zeros(3), np.zeros(3),
                                                   KernelParams(3, 1, 1.0, 1.0)), rel=1e-15)


def test_mmd_and_ot(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    np.savetxt(a, rng.normal(size=(10, 2)), delimiter=",")
    np.savetxt(b, rng.normal(size=(10, 2)) + 1, delimiter=",")
    code, v, _ = run(capsys, "mmd", "--a", str(a), "--b", str(b))
    assert code == 0 and float(v) > 0
    code, dh, _ = run(capsys, "mmd", "--a", str(a), "--b", str(b), "--delta-hat")
    assert float(dh) == pytest.approx(5 * float(v), rel=1e-14)
    code, u, _ = run(capsys, "mmd", "--a", str(a), "--b", str(b), "--estimator", "u")
    assert code == 0 and float(u) < float(v)
    code, c, _ = run(capsys, "ot", "--a", str(a), "--b", str(b))
    assert code == 0 and float(c) > 0
    code, s, _ = run(capsys, "ot", "--a", str(a), "--b", str(b), "--method", "sinkhorn",
                     "--reg", "0.01")
    assert code == 0 and float(s) >= float(c) - 1e-9
    code, g, _ = run(capsys, "ot", "--a", str(a), "--b", str(b), "--method", "got",
                     "--sigma", "0.5", "--noise-reps", "3", "--seed", "2")
    assert code == 0 and g.splitlines()[0] == "estimate,std_err,method"


def test_bounds(capsys, tmp_path):
    out_file = tmp_path / "b.csv"
    code, out, _ = run(capsys, "bounds", "--kind", "thm6_kxx_ub", "--d", "5", "--b", "0.5",
                       "--out", str(out_file))
    assert code == 0
    header, row = out.splitlines()
    assert header == "kind,inputs,epsilon,lambda,log_value,value"
    assert row.startswith("thm6_kxx_ub,")
    assert out_file.read_text().strip() == out


def test_config_defaults_for_commands(capsys, tmp_path):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"d": 3, "s": 4}))
    code, out, _ = run(capsys, "moments", "--config", str(cfg))
    assert code == 0 and out == "15"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "moments", "--config", str(cfg))
    assert code == 1 and "unknown config keys" in err


def test_experiment_fig1(tmp_path, capsys):
    cfg = tmp_path / "fig1.json"
    cfg.write_text(json.dumps({"experiment": "fig1", "d": [10, 50], "delta": [0, 0.5, 1]}))
    out = tmp_path / "runs"
    code, text, _ = run(capsys, "experiment", "fig1", "--config", str(cfg), "--out", str(out))
    assert code == 0
    assert (out / "fig1.csv").exists() and (out / "fig1.meta.json").exists()
    assert len((out / "fig1.csv").read_text().splitlines()) == 7


def test_invalid_inputs_exit_1(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"experiment": "fig1", "d": []}))
    code, _, err = run(capsys, "experiment", "fig1", "--config", str(cfg))
    assert code == 1 and "non-empty" in err
    code, _, err = run(capsys, "moments", "--d", "3", "--s", "4", "--frobnicate")
    assert code == 1 and "usage" in err
    code, _, _ = run(capsys, "moments", "--d", "3")
    assert code == 1
    code, _, _ = run(capsys, "kernel-eval", "--d", "3", "--x", "0,0", "--y", "0,0,0")
    assert code == 1
    code, _, _ = run(capsys, "mmd", "--a", str(tmp_path / "missing.csv"), "--b", "x")
    assert code == 1


def test_numerical_failure_exit_2(capsys):
    z = ",".join(["10"] * 300)
    code, _, err = run(capsys, "kernel-eval", "--d", "300", "--x", z, "--y", z)
    assert code == 2 and "numerical failure" in err


def test_threads_flag(capsys, monkeypatch):
    code, out, _ = run(capsys, "moments", "--d", "2", "--s", "2", "--threads", "1")
    assert code == 0 and out == "2"
    monkeypatch.setenv("GOTMMD_THREADS", "0")
    code, _, _ = run(capsys, "moments", "--d", "2", "--s", "2")
    assert code == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gotmmd", "moments", "--d", "3", "--s", "4"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "15"
