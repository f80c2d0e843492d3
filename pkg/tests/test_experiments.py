import json
import math

import numpy as np
import pytest

from gotmmd.experiments import (
    ConfigError,
    ExperimentConfig,
    default_config,
    fit_decay_slope,
    gnuplot_script,
    load_config,
    run_experiment,
    run_fig1,
    write_outputs,
)


def small_fig2():
    return load_config({"experiment": "fig2", "d": [2, 3], "delta": [0.0, 0.5], "n": [20],
                        "sigma": [1.0], "replicas": 4, "master_seed": 3})


def small_fig3():
    return load_config({"experiment": "fig3", "N": [5, 10], "n": [10, 12], "replicas": 3,
                        "master_seed": 4})


def test_fit_decay_slope():
    ns = np.array([30, 50, 70, 100])
    slope, intercept, r2 = fit_decay_slope(ns, 3.0 / ns)
    assert slope == pytest.approx(-1.0, abs=1e-12)
    assert intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)
    assert fit_decay_slope(ns, np.full(4, 2.0))[0] == pytest.approx(0.0, abs=1e-12)
    mixed = fit_decay_slope(ns, 1.0 / ns + 0.01)[0]
    assert -1 < mixed < 0
    with pytest.raises(ValueError):
        fit_decay_slope(ns, -1.0 / ns)
    with pytest.raises(ValueError):
        fit_decay_slope(ns[:2], ns[:2])


def test_default_configs_valid():
    for exp in ("fig1", "fig2", "fig3"):
        for desk in (True, False):
            cfg = default_config(exp, desk).validate()
            assert cfg.desk_scale == desk
    assert default_config("fig2", False).n == [400]
    assert default_config("fig3", False).replicas == 100


def test_config_validation():
    with pytest.raises(ConfigError):
        load_config({"experiment": "fig1", "d": []})
    with pytest.raises(ConfigError):
        load_config({"experiment": "fig2", "replicas": 0})
    with pytest.raises(ConfigError):
        load_config({"experiment": "fig2", "typo": 1})
    with pytest.raises(ConfigError):
        load_config({"experiment": "fig4"})
    with pytest.raises(ConfigError):
        load_config({"experiment": "fig1", "sigma": [-1.0]})
    with pytest.raises(ConfigError):
        load_config({"experiment": "fig1"}, "fig2")


def test_config_hash_tracks_content():
    a, b = default_config("fig1"), default_config("fig1")
    assert a.hash() == b.hash()
    b.master_seed = 1
    assert a.hash() != b.hash()


def test_fig1_rows():
    cfg = load_config({"experiment": "fig1", "d": [10, 100], "delta": [0.0, 0.5, 1.0]})
    rec = run_fig1(cfg)
    assert rec.header == ["d", "delta", "log_ub_over_d", "log_lb_over_d"]
    assert len(rec.rows) == 6
    for d, delta, ub, lb in rec.rows:
        assert lb <= ub


def test_fig2_small_run():
    rec = run_experiment(small_fig2())
    assert rec.header[:9] == ["d", "delta", "sigma", "log_ub_over_d", "log_lb_over_d",
                              "mc_mean_over_d", "mc_mean", "mc_se", "n"]
    assert len(rec.rows) == 4
    for row in rec.rows:
        d, mc_over_d, mean = row[0], row[5], row[6]
        assert mc_over_d == pytest.approx(math.log(mean) / d, rel=1e-14)


def test_fig3_small_run_has_controls():
    rec = run_experiment(small_fig3())
    designs = [r[-1] for r in rec.rows]
    assert designs.count("sphere") == 4 and designs.count("orthogonal") == 2
    assert all(r[2] > 0 for r in rec.rows)


def test_outputs_and_determinism(tmp_path):
    for cfg in (small_fig2(), small_fig3(), default_config("fig1")):
        cfg.gnuplot = True
        p1 = write_outputs(run_experiment(cfg), tmp_path / "a")
        p2 = write_outputs(run_experiment(cfg), tmp_path / "b")
        a = open(p1["csv"], "rb").read()
        assert a == open(p2["csv"], "rb").read()
        meta = json.loads(open(p1["metadata"]).read())
        assert meta["config_hash"] == cfg.hash() and meta["master_seed"] == cfg.master_seed
        assert "version" in meta and "seeds" in meta
        assert "plot" in open(p1["gnuplot"]).read()
        # sidecar reproduces the run
        again = load_config(meta["config"])
        assert run_experiment(again).csv_text().encode() == a


def test_seed_changes_output():
    a = small_fig2()
    b = small_fig2()
    b.master_seed = 99
    assert run_experiment(a).csv_text() != run_experiment(b).csv_text()


def test_csv_number_format():
    cfg = load_config({"experiment": "fig1", "d": [10], "delta": [0.5]})
    text = run_fig1(cfg).csv_text().splitlines()
    assert text[0] == "d,delta,log_ub_over_d,log_lb_over_d"
    ub = text[1].split(",")[2]
    assert float(ub) == run_fig1(cfg).rows[0][2]
    assert gnuplot_script(run_fig1(cfg)).startswith("set datafile")


def test_config_dataclass_fields():
    cfg = ExperimentConfig("fig1", d=[5], delta=[0.1], N=[], n=[], sigma=[0.1])
    assert cfg.validate() is cfg
    assert set(cfg.to_dict()) >= {"experiment", "d", "delta", "N", "n", "sigma", "p", "replicas",
                                  "master_seed", "output_dir", "desk_scale"}
