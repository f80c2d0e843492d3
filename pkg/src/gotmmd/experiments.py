"""Configuration-driven experiments: bound curves, sub-gamma MMD sandwich, dependent samples.

Each experiment writes ``<name>.csv`` (17 significant digits, rows sorted by
grid position) and ``<name>.meta.json`` with the config, its hash, the seed
ledger and timing.  Every random quantity is drawn from a stream derived from
``(master_seed, cell index, replica index)``, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    log_kxx_lb_example1,
    log_kxx_ub_thm6,
    phase_transition_asymptote,
    select_params_thm6,
)
from .distributions import (
    DependentDesign,
    child_seed,
    sample_dependent_gp,
    sample_subgamma_example1,
    sample_unit_sphere,
)
from .mmd import delta_hat, mmd2_paper
from .kernel import TwoMomentKernel

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "RunRecord",
    "default_config",
    "load_config",
    "run_fig1",
    "run_fig2",
    "run_fig3",
    "run_experiment",
    "fit_decay_slope",
    "format_number",
    "write_outputs",
    "gnuplot_script",
]

EXPERIMENTS = ("fig1", "fig2", "fig3")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; list fields are the grids."""

    experiment: str
    d: list
    delta: list
    N: list
    n: list
    sigma: list
    p: float = 1.0
    v: float = 1.0
    replicas: int = 50
    master_seed: int = 0
    output_dir: str = "runs"
    desk_scale: bool = True
    gnuplot: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        needed = {"fig1": ("d", "delta", "sigma"),
                  "fig2": ("d", "delta", "sigma", "n"),
                  "fig3": ("d", "N", "n", "sigma")}[self.experiment]
        for name in ("d", "delta", "N", "n", "sigma"):
            val = getattr(self, name)
            if not isinstance(val, list):
                raise ConfigError(f"{name} must be a list")
            if name in needed and not val:
                raise ConfigError(f"grid {name!r} must be non-empty")
        for name in ("d", "N", "n"):
            for x in getattr(self, name):
                if isinstance(x, bool) or not isinstance(x, int) or x < 1:
                    raise ConfigError(f"{name} entries must be positive integers, got {x!r}")
        if any(not (isinstance(s, (int, float)) and s > 0) for s in self.sigma):
            raise ConfigError("sigma entries must be positive")
        if any(not isinstance(x, (int, float)) for x in self.delta):
            raise ConfigError("delta entries must be numbers")
        if not (isinstance(self.p, (int, float)) and self.p > 0):
            raise ConfigError("p must be positive")
        if not (isinstance(self.v, (int, float)) and self.v > 0):
            raise ConfigError("v must be positive")
        if isinstance(self.replicas, bool) or not isinstance(self.replicas, int) or self.replicas < 1:
            raise ConfigError("replicas must be a positive integer")
        if self.experiment == "fig2" and self.replicas < 2:
            raise ConfigError("fig2 needs at least two replicas for a standard error")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int) \
                or not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an integer in [0, 2^64)")
        if self.experiment == "fig3" and len(self.d) != 1:
            raise ConfigError("fig3 takes a single dimension")
        if self.experiment == "fig3" and len(self.sigma) != 1:
            raise ConfigError("fig3 takes a single sigma")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


_FIELDS = {f.name for f in fields(ExperimentConfig)}


def default_config(experiment: str, desk_scale: bool = True) -> ExperimentConfig:
    """Defaults for each experiment; ``desk_scale=False`` selects the larger original sizes."""
    if experiment == "fig1":
        cfg = ExperimentConfig("fig1", d=[10, 50, 100, 500, 1000],
                               delta=[round(0.025 * i, 3) for i in range(41)],
                               N=[], n=[], sigma=[0.1], replicas=1)
    elif experiment == "fig2":
        cfg = ExperimentConfig("fig2", d=list(range(2, 21)), delta=[0.0, 0.25, 0.5, 0.75],
                               N=[], n=[200], sigma=[1.0, 4.0], replicas=50)
        if not desk_scale:
            cfg.d, cfg.n, cfg.replicas = list(range(2, 41)), [400], 200
    elif experiment == "fig3":
        cfg = ExperimentConfig("fig3", d=[5], delta=[], N=list(range(5, 101, 5)),
                               n=[30, 50, 70, 100], sigma=[0.5], replicas=50)
        if not desk_scale:
            cfg.replicas = 100
    else:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    cfg.desk_scale = desk_scale
    return cfg


def load_config(source, experiment: str | None = None) -> ExperimentConfig:
    """Build a config from a JSON path or dict; missing keys take the experiment defaults."""
    if isinstance(source, (str, os.PathLike)):
        try:
            raw = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    exp = raw.get("experiment", experiment)
    if exp is None:
        raise ConfigError("config does not name an experiment")
    if experiment is not None and exp != experiment:
        raise ConfigError(f"config is for {exp!r}, not {experiment!r}")
    base = default_config(exp, bool(raw.get("desk_scale", True)))
    merged = {**base.to_dict(), **raw}
    return ExperimentConfig(**merged).validate()


@dataclass
class RunRecord:
    """Rows and provenance of one experiment run."""

    config: ExperimentConfig
    header: list
    rows: list
    seeds: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = __version__

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([format_number(x) for x in row])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {
            "experiment": self.config.experiment,
            "config": self.config.to_dict(),
            "config_hash": self.config.hash(),
            "master_seed": self.config.master_seed,
            "version": self.version,
            "wall_clock_seconds": self.wall_clock,
            "seeds": self.seeds,
            "diagnostics": self.diagnostics,
        }


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_fig1(config: ExperimentConfig) -> RunRecord:
    """Deterministic curves ``(1/d) log`` of the sub-gamma UB and scale-mixture LB versus delta.

    ``b = d^-delta`` and the LB uses ``eps = sqrt d``.
    """
    config.validate()
    t0 = time.perf_counter()
    sigma = float(config.sigma[0])
    rows = []
    for d in config.d:
        eps = min(math.sqrt(d), d + 2.0 * config.p)
        for delta in config.delta:
            b = float(d) ** (-float(delta))
            ub = log_kxx_ub_thm6(d, config.p, sigma, config.v, b) / d
            lb = log_kxx_lb_example1(d, config.p, sigma, b, eps) / d
            rows.append((d, float(delta), ub, lb))
    rec = RunRecord(config, ["d", "delta", "log_ub_over_d", "log_lb_over_d"], rows)
    rec.diagnostics = {"asymptote": phase_transition_asymptote(config.v, sigma), "sigma": sigma}
    rec.wall_clock = time.perf_counter() - t0
    return rec


def _fig2_cell(d, delta, sigma, n, p, v, replicas, cell_seed):
    b = float(d) ** (-float(delta))
    params = select_params_thm6(d, p, sigma, v, b)
    kern = TwoMomentKernel(params, method="table")
    vals = np.empty(replicas)
    for r in range(replicas):
        X = sample_subgamma_example1(2 * n, d, b, child_seed(cell_seed, r))
        vals[r] = delta_hat(X[:n], X[n:], kern)
    mean = math.fsum(vals) / replicas
    se = math.sqrt(math.fsum((vals - mean) ** 2) / (replicas - 1) / replicas)
    eps = params.epsilon
    ub = log_kxx_ub_thm6(d, p, sigma, v, b)
    lb = log_kxx_lb_example1(d, p, sigma, b, eps)
    flagged = not (math.isfinite(se) and se <= mean)
    return params, ub, lb, mean, se, flagged


def run_fig2(config: ExperimentConfig) -> RunRecord:
    """Monte-Carlo replica mean of ``Delta_hat^2`` for the scale mixture, next to UB and LB.

    The kernel uses the sub-gamma parameter rule with ``(v, b) = (v, d^-delta)``.
    ``mc_mean_over_d`` is ``(1/d) log`` of the replica mean; ``mc_mean`` and
    ``mc_se`` are on the linear scale.
    """
    config.validate()
    t0 = time.perf_counter()
    rows, seeds, flags = [], {}, []
    cell = 0
    for si, sigma in enumerate(config.sigma):
        for di, d in enumerate(config.d):
            for ei, delta in enumerate(config.delta):
                for ni, n in enumerate(config.n):
                    cs = child_seed(config.master_seed, cell)
                    seeds[str(cell)] = {"d": d, "delta": delta, "sigma": sigma, "n": n, "seed": cs}
                    params, ub, lb, mean, se, flagged = _fig2_cell(
                        d, delta, float(sigma), n, config.p, config.v, config.replicas, cs)
                    mc_over_d = math.log(mean) / d if mean > 0 else -math.inf
                    rows.append(((si, di, ei, ni), (d, float(delta), float(sigma), ub / d, lb / d,
                                                    mc_over_d, mean, se, n, config.replicas,
                                                    params.epsilon, params.lam, int(flagged))))
                    if flagged:
                        flags.append(cell)
                    cell += 1
    rows.sort(key=lambda t: t[0])
    header = ["d", "delta", "sigma", "log_ub_over_d", "log_lb_over_d", "mc_mean_over_d",
              "mc_mean", "mc_se", "n", "replicas", "epsilon", "lambda", "se_flag"]
    rec = RunRecord(config, header, [r for _, r in rows], seeds)
    rec.diagnostics = {"se_flagged_cells": flags, "kernel_method": "table"}
    rec.wall_clock = time.perf_counter() - t0
    return rec


def _fig3_cell(d, N, n, sigma, p, replicas, cell_seed, orthogonal=False):
    params = select_params_thm6(d, p, sigma, 1.0, 0.0)
    kern = TwoMomentKernel(params, method="table")
    if orthogonal:
        alphas = np.eye(N)[:n]
    else:
        alphas = sample_unit_sphere(n, N, child_seed(cell_seed, 0))
    design = DependentDesign(alphas)
    vals = np.empty(replicas)
    for r in range(replicas):
        rs = child_seed(cell_seed, r + 1)
        S = sample_dependent_gp(design, d, child_seed(rs, 0))
        Sp = sample_dependent_gp(design, d, child_seed(rs, 1))
        vals[r] = mmd2_paper(S, Sp, kern).value
    mean = math.fsum(vals) / replicas
    std = math.sqrt(math.fsum((vals - mean) ** 2) / (replicas - 1)) if replicas > 1 else 0.0
    return mean, std


def run_fig3(config: ExperimentConfig) -> RunRecord:
    """Two-sample V-statistic for dependent Gaussian-process samples.

    For each ``(N, n)`` one design of ``n`` uniform unit vectors in ``R^N`` is
    drawn, and the statistic is averaged over independent realizations of two
    sample sets on that design.  Control rows with ``design=orthogonal`` use
    ``alpha_i = e_i`` (independent samples) at ``N = n``.
    """
    config.validate()
    t0 = time.perf_counter()
    d = config.d[0]
    sigma = float(config.sigma[0])
    rows, seeds = [], {}
    cell = 0
    for ni, n in enumerate(config.n):
        for Ni, N in enumerate(config.N):
            cs = child_seed(config.master_seed, cell)
            seeds[str(cell)] = {"N": N, "n": n, "design": "sphere", "seed": cs}
            mean, std = _fig3_cell(d, N, n, sigma, config.p, config.replicas, cs)
            rows.append(((0, ni, Ni), (N, n, mean, std, config.replicas, "sphere")))
            cell += 1
    for ni, n in enumerate(config.n):
        cs = child_seed(config.master_seed, cell)
        seeds[str(cell)] = {"N": n, "n": n, "design": "orthogonal", "seed": cs}
        mean, std = _fig3_cell(d, n, n, sigma, config.p, config.replicas, cs, orthogonal=True)
        rows.append(((1, ni, 0), (n, n, mean, std, config.replicas, "orthogonal")))
        cell += 1
    rows.sort(key=lambda t: t[0])
    header = ["N", "n", "mean_gamma2", "std_gamma2", "replicas", "design"]
    rec = RunRecord(config, header, [r for _, r in rows], seeds)
    params = select_params_thm6(d, config.p, sigma, 1.0, 0.0)
    rec.diagnostics = {"epsilon": params.epsilon, "lambda": params.lam, "kernel_method": "table"}
    rec.wall_clock = time.perf_counter() - t0
    return rec


def run_experiment(config: ExperimentConfig) -> RunRecord:
    runner = {"fig1": run_fig1, "fig2": run_fig2, "fig3": run_fig3}[config.experiment]
    return runner(config)


def fit_decay_slope(ns, values) -> tuple[float, float, float]:
    """Least-squares line through ``(log n, log value)``: ``(slope, intercept, r_squared)``."""
    x = np.asarray(ns, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("need at least three (n, value) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("n and values must be positive")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def gnuplot_script(record: RunRecord) -> str:
    """A small gnuplot script plotting the CSV written next to it."""
    exp = record.config.experiment
    lines = ["set datafile separator ','", "set key autotitle columnhead", f"set output '{exp}.png'",
             "set terminal pngcairo size 900,600"]
    if exp == "fig1":
        lines += ["set xlabel 'delta'", "set ylabel '(1/d) log E k(X,X)'",
                  f"plot for [dd in '{' '.join(str(d) for d in record.config.d)}'] "
                  f"'{exp}.csv' using ($1==dd ? $2 : 1/0):3 with lines title 'UB d='.dd, "
                  f"for [dd in '{' '.join(str(d) for d in record.config.d)}'] "
                  f"'{exp}.csv' using ($1==dd ? $2 : 1/0):4 with lines dt 2 title 'LB d='.dd"]
    elif exp == "fig2":
        lines += ["set xlabel 'd'", "set ylabel '(1/d) log'",
                  f"plot '{exp}.csv' using 1:4 with points title 'UB', "
                  f"'' using 1:5 with points title 'LB', '' using 1:6 with points title 'MC'"]
    else:
        lines += ["set xlabel 'N'", "set ylabel 'mean gamma^2'", "set logscale y",
                  f"plot for [nn in '{' '.join(str(n) for n in record.config.n)}'] "
                  f"'{exp}.csv' using ($2==nn && strcol(6) eq 'sphere' ? $1 : 1/0):3:4 "
                  f"with yerrorlines title 'n='.nn"]
    return "\n".join(lines) + "\n"


def write_outputs(record: RunRecord, out_dir) -> dict:
    """Write ``<exp>.csv``, ``<exp>.meta.json`` and optionally ``<exp>.gp``; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exp = record.config.experiment
    paths = {"csv": out / f"{exp}.csv", "metadata": out / f"{exp}.meta.json"}
    paths["csv"].write_text(record.csv_text())
    paths["metadata"].write_text(json.dumps(record.metadata(), indent=2, sort_keys=True) + "\n")
    if record.config.gnuplot:
        paths["gnuplot"] = out / f"{exp}.gp"
        paths["gnuplot"].write_text(gnuplot_script(record))
    return {k: str(v) for k, v in paths.items()}
