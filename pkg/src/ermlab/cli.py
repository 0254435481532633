"""Command-line front end.

Subcommands: ``width``, ``fixedpoint``, ``erm``, ``experiment``, ``demo``,
``fit``.  Exit codes: 0 success, 2 config error, 3 numerical failure in at
least one required cell.
"""

import argparse
import json
import sys

import numpy as np

from .erm import ErmConfig, erm_linear, excess_risk
from .fixed_points import FixedPointQuery, solve_fixed_point
from .geometry import ConvexBody
from .harness import ConfigError, ExperimentConfig, fit_rate, presets, run_experiment
from .sim import DesignSpec, NoiseSpec, sample_dataset
from .widths import gaussian_width_mc


def _common_flags(parser):
    parser.add_argument("--config", default=None, help="config file path")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--trials", type=int, default=None)


def _body_flags(parser):
    parser.add_argument("--body", default="l1_ball",
                        choices=["l1_ball", "l2_ball", "linf_ball", "maxnorm_ball"])
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--p", type=int, default=0)
    parser.add_argument("--q", type=int, default=0)
    parser.add_argument("--radius", type=float, default=1.0)


def _make_body(args):
    if args.body == "maxnorm_ball":
        if not (args.p and args.q):
            raise ConfigError("--p and --q are required for maxnorm_ball")
        return ConvexBody("maxnorm_ball", (args.p, args.q), args.radius)
    return ConvexBody(args.body, args.dim, args.radius)


def _emit(payload):
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ermlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_width = sub.add_parser("width", help="localized gaussian width estimate")
    _common_flags(p_width)
    _body_flags(p_width)
    p_width.add_argument("--r", type=float, required=True)

    p_fp = sub.add_parser("fixedpoint", help="solve a complexity fixed point")
    _common_flags(p_fp)
    _body_flags(p_fp)
    p_fp.add_argument("--kind", required=True,
                      choices=["s_star", "r_star", "r_k", "q_star"])
    p_fp.add_argument("--N", type=int, default=None)
    p_fp.add_argument("--eta", type=float, default=None)
    p_fp.add_argument("--Q", type=float, default=None)
    p_fp.add_argument("--k", type=int, default=None)

    p_erm = sub.add_parser("erm", help="one synthetic ERM solve")
    _common_flags(p_erm)
    _body_flags(p_erm)
    p_erm.add_argument("--design", default="gaussian")
    p_erm.add_argument("--noise", default="gaussian_noise",
                       choices=["gaussian_noise", "orthogonal_target"])
    p_erm.add_argument("--sigma", type=float, default=1.0)
    p_erm.add_argument("--N", type=int, default=128)

    p_exp = sub.add_parser("experiment", help="run a config or preset")
    _common_flags(p_exp)
    p_exp.add_argument("--preset", default=None, choices=sorted(presets()))

    p_demo = sub.add_parser("demo", help="run a demo preset")
    _common_flags(p_demo)
    p_demo.add_argument("--name", required=True,
                        choices=["ratio_lower", "two_point_demo",
                                 "shift_bound_check", "width_profile"])

    p_fit = sub.add_parser("fit", help="log-log rate fit on a rows.csv")
    _common_flags(p_fit)
    p_fit.add_argument("--csv", required=True)
    p_fit.add_argument("--x", default="N")
    p_fit.add_argument("--y", default="excess_risk")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _load_config(args, preset_name=None) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            config = ExperimentConfig.from_text(fh.read())
    elif preset_name:
        config = presets()[preset_name]
    else:
        raise ConfigError("either --config or --preset is required")
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
    config.validate()
    return config


def _dispatch(args) -> int:
    seed = args.seed if args.seed is not None else 0
    trials = args.trials if args.trials is not None else 400

    if args.command == "width":
        est = gaussian_width_mc(_make_body(args), args.r, trials=trials, seed=seed)
        _emit({"r": est.r, "mean": est.mean, "stderr": est.stderr,
               "trials": est.trials})
        return 0

    if args.command == "fixedpoint":
        query = FixedPointQuery(args.kind, N=args.N, eta=args.eta, Q=args.Q,
                                k=args.k)
        res = solve_fixed_point(_make_body(args), query, trials=trials, seed=seed)
        _emit({"value": res.value, "residual": res.residual,
               "bracket": list(res.bracket), "clipped": res.clipped,
               "stderr": res.stderr, "flavor": res.flavor})
        return 0

    if args.command == "erm":
        body = _make_body(args)
        if args.design == "matrix_iid":
            design = DesignSpec("matrix_iid", p=args.p, q=args.q)
        else:
            design = DesignSpec(args.design, d=args.dim)
        t_star = np.zeros(body.ambient_dim)
        if args.noise == "gaussian_noise":
            t_star[: min(4, body.ambient_dim)] = args.radius / min(4, body.ambient_dim)
        data = sample_dataset(design, NoiseSpec(args.noise, args.sigma),
                              None if args.noise == "orthogonal_target" else t_star,
                              args.N, seed=seed)
        sol = erm_linear(body, data, ErmConfig())
        _emit({"empirical_risk": sol.empirical_risk,
               "excess_risk": excess_risk(sol, data),
               "iterations": sol.iterations, "certificate": sol.certificate})
        return 0

    if args.command == "experiment":
        config = _load_config(args, args.preset)
        out = args.out or f"./ermlab_out/{config.config_id()}"
        _, summary = run_experiment(config, out_dir=out, threads=args.threads)
        _emit({"out": out, "n_rows": summary["n_rows"],
               "n_failures": summary["n_failures"]})
        return 3 if summary["n_failures"] else 0

    if args.command == "demo":
        config = _load_config(args, args.name)
        out = args.out or f"./ermlab_out/{config.config_id()}"
        _, summary = run_experiment(config, out_dir=out, threads=args.threads)
        _emit({"out": out, "n_rows": summary["n_rows"],
               "n_failures": summary["n_failures"]})
        return 3 if summary["n_failures"] else 0

    if args.command == "fit":
        rows = _read_csv_rows(args.csv)
        slope, intercept, r2 = fit_rate(rows, x=args.x, y=args.y)
        _emit({"slope": slope, "intercept": intercept, "r2": r2})
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def _read_csv_rows(path):
    import csv

    rows = []
    with open(path) as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                try:
                    row[k] = float(v)
                except (TypeError, ValueError):
                    row[k] = v
            rows.append(row)
    return rows


if __name__ == "__main__":
    sys.exit(main())
