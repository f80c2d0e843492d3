"""Command line interface: ``gotmmd <subcommand> [options]``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    """Raised instead of exiting when argparse rejects the command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")], dtype=float)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def read_points(path) -> np.ndarray:
    """Point-cloud CSV: one point per row, comma-separated coordinates, no header."""
    X = np.loadtxt(path, delimiter=",", ndmin=2)
    if X.size == 0:
        raise ValueError(f"{path}: empty point cloud")
    return X


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--config", default=None, help="JSON file of option defaults or experiment config")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (overrides GOTMMD_THREADS)")


def _kernel_opts(p: argparse.ArgumentParser, need_d: bool = True):
    if need_d:
        p.add_argument("--d", type=int, required=False)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=None, help="default min(d + 2p, sqrt d)")
    p.add_argument("--lam", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gotmmd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("moments", help="noncentral chi moment M_{d,u}(s)")
    p.add_argument("--d", type=float, required=False)
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--s", type=float, required=False)
    p.add_argument("--log", action="store_true", help="print the natural log instead")
    _common(p)

    p = sub.add_parser("kernel-eval", help="two-moment kernel k(x, y)")
    _kernel_opts(p)
    p.add_argument("--x", type=_floats, required=False)
    p.add_argument("--y", type=_floats, required=False)
    p.add_argument("--log", action="store_true")
    _common(p)

    p = sub.add_parser("mmd", help="squared MMD between two point-cloud CSV files")
    _kernel_opts(p, need_d=False)
    p.add_argument("--a", required=False, help="first point cloud CSV")
    p.add_argument("--b", required=False, help="second point cloud CSV")
    p.add_argument("--estimator", choices=("v", "u"), default="v",
                   help="v: diagonal-inclusive (default), u: unbiased")
    p.add_argument("--delta-hat", action="store_true", help="print (n/2) times the V-statistic")
    _common(p)

    p = sub.add_parser("bounds", help="evaluate a closed-form bound")
    p.add_argument("--kind", required=False,
                   choices=("thm1_rate", "thm4_kxx_ub", "thm5_moment_ub", "thm6_kxx_ub",
                            "example1_kxx_lb", "dep_eq18"))
    p.add_argument("--d", type=int)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--s", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--eps", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--C", type=float, default=1.0, help="kernel constant for dep_eq18")
    _common(p)

    p = sub.add_parser("ot", help="optimal transport between two point-cloud CSV files")
    p.add_argument("--a", required=False)
    p.add_argument("--b", required=False)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--method", choices=("exact", "sinkhorn", "got"), default="exact")
    p.add_argument("--reg", type=float, default=None, help="Sinkhorn regularization")
    p.add_argument("--sigma", type=float, default=0.0, help="smoothing level for --method got")
    p.add_argument("--noise-reps", type=int, default=10)
    _common(p)

    p = sub.add_parser("experiment", help="run a configured experiment")
    p.add_argument("name", choices=("fig1", "fig2", "fig3"))
    p.add_argument("--full-scale", action="store_true", help="use the larger original sizes")
    _common(p)
    return parser


def _set_threads(n):
    if n is None:
        env = os.environ.get("GOTMMD_THREADS")
        n = int(env) if env else None
    if n is None:
        return
    if n < 1:
        raise ValueError("thread count must be positive")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _apply_config_defaults(parser, argv, args):
    """Re-parse with option defaults taken from a JSON config (non-experiment commands)."""
    raw = json.loads(Path(args.config).read_text())
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    sub.set_defaults(**raw)
    return parser.parse_args(argv)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise ValueError("missing required option(s): " + ", ".join("--" + m for m in missing))


def _emit(text: str, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _kernel_params(args, d):
    from .kernel import KernelParams

    eps = args.epsilon if args.epsilon is not None else min(d + 2.0 * args.p, math.sqrt(d))
    return KernelParams(d=d, p=args.p, sigma=args.sigma, epsilon=eps, lam=args.lam)


def _cmd_moments(args):
    from .special_fns import log_noncentral_chi_moment, noncentral_chi_moment

    _require(args, "d", "s")
    if args.log:
        return _fmt(log_noncentral_chi_moment(args.d, args.u, args.s))
    return format(float(noncentral_chi_moment(args.d, args.u, args.s)), ".15g")


def _cmd_kernel(args):
    from .kernel import kernel_log_eval

    _require(args, "d", "x", "y")
    params = _kernel_params(args, args.d)
    lv = kernel_log_eval(args.x, args.y, params)
    return _fmt(lv if args.log else math.exp(lv))


def _cmd_mmd(args):
    from .mmd import delta_hat, mmd2_paper, mmd2_unbiased

    _require(args, "a", "b")
    A, B = read_points(args.a), read_points(args.b)
    params = _kernel_params(args, A.shape[1])
    if args.delta_hat:
        return _fmt(delta_hat(A, B, params))
    est = (mmd2_paper if args.estimator == "v" else mmd2_unbiased)(A, B, params)
    return _fmt(est.value)


def _cmd_bounds(args):
    from . import bounds

    _require(args, "kind")
    keys = {"thm1_rate": ("d", "p", "sigma", "s", "m", "n"),
            "thm4_kxx_ub": ("d", "p", "sigma", "s", "m"),
            "thm5_moment_ub": ("d", "s", "v", "b"),
            "thm6_kxx_ub": ("d", "p", "sigma", "v", "b"),
            "example1_kxx_lb": ("d", "p", "sigma", "b"),
            "dep_eq18": ("N", "n")}[args.kind]
    _require(args, *keys)
    inputs = {k: getattr(args, k) for k in keys}
    if args.kind == "example1_kxx_lb" and args.eps is not None:
        inputs["eps"] = args.eps
    if args.kind == "dep_eq18":
        inputs["C_kP"] = args.C
    row = bounds.report(args.kind, **inputs).csv_row()
    cols = list(row)
    return ",".join(cols) + "\n" + ",".join(_fmt(v) if isinstance(v, float) else str(v)
                                           for v in row.values())


def _cmd_ot(args):
    from .ot import got_empirical, ot_exact, sinkhorn

    _require(args, "a", "b")
    A, B = read_points(args.a), read_points(args.b)
    if args.method == "exact":
        return _fmt(ot_exact(A, B, args.p).cost)
    if args.method == "sinkhorn":
        _require(args, "reg")
        plan = sinkhorn(A, B, args.p, args.reg)
        if not plan.converged:
            raise FloatingPointError(
                f"Sinkhorn did not converge (residual {plan.info.get('achieved_residual'):.3g})")
        return _fmt(plan.cost)
    est = got_empirical(A, B, args.sigma, args.p, args.noise_reps, args.seed)
    return f"estimate,std_err,method\n{_fmt(est.estimate)},{_fmt(est.std_err)},{est.method}"


def _cmd_experiment(args):
    from .experiments import default_config, load_config, run_experiment, write_outputs

    if args.config:
        cfg = load_config(args.config, args.name)
    else:
        cfg = default_config(args.name, desk_scale=not args.full_scale).validate()
    if args.seed_given:
        cfg.master_seed = args.seed
    out = args.out or cfg.output_dir
    cfg.output_dir = out
    rec = run_experiment(cfg)
    paths = write_outputs(rec, out)
    return "\n".join(f"{k}: {v}" for k, v in sorted(paths.items()))


_COMMANDS = {
    "moments": _cmd_moments,
    "kernel-eval": _cmd_kernel,
    "mmd": _cmd_mmd,
    "bounds": _cmd_bounds,
    "ot": _cmd_ot,
    "experiment": _cmd_experiment,
}


def cli_dispatch(argv=None) -> int:
    """Parse ``argv`` and run the subcommand; returns the process exit code."""
    from .experiments import ConfigError
    from .kernel import QuadratureError
    from .ot import OTError

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
        if args.config and args.command != "experiment":
            seed_given = args.seed_given
            args = _apply_config_defaults(parser, argv, args)
            args.seed_given = seed_given
        _set_threads(args.threads)
        text = _COMMANDS[args.command](args)
        if args.command != "experiment":
            _emit(text, args.out)
        else:
            print(text)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (FloatingPointError, OverflowError, OTError, QuadratureError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, ConfigError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
