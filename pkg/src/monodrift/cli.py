"""Command-line interface: simulate, estimate, monotonize, experiment.

Exit codes: 0 on success, 2 on configuration errors (message names the
offending key or flag), 1 on runtime failures.  All subcommands accept
`--spec <file>` (flat key = value config); explicit flags override file
values, and the MONODRIFT_SEED environment variable overrides the seed.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    RunConfig,
    build_config,
    dump_config,
    estimator_config,
    experiment_spec,
    model_of,
    parse_grid_spec,
)
from .experiment import (
    emit_figure_data,
    make_pair_grid,
    run_experiment,
    write_report_json,
    write_table_csv,
)
from .monotone import (
    BandwidthPair,
    MonotoneInput,
    check_theory_range,
    select_lh_adaptive,
    tabulate_monotone,
)
from .nadaraya import nw_drift, read_curve_csv, select_eta_loocv, write_curve_csv
from .sde import extract_copies_from_long_path, read_paths_csv, simulate_copies, write_paths_csv

_DEF = RunConfig()


def _overrides(args: argparse.Namespace, names: dict[str, str]) -> dict:
    out = {}
    for attr, key in names.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    return out


def _parse_triple(text: str, key: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"key '{key}' must look like lo,hi,npts, got {text!r}")
    try:
        lo, hi, npts = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"invalid value for key '{key}': {exc}") from exc
    if npts < 2 or not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        raise ConfigError(f"key '{key}': need finite lo < hi and npts >= 2")
    return np.linspace(lo, hi, npts)


def _parse_pair_of_floats(text: str, key: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"key '{key}' must look like a,b, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"invalid value for key '{key}': {exc}") from exc


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = build_config(
        args.spec,
        _overrides(
            args,
            {
                "model": "model",
                "n_paths": "n_paths",
                "n_steps": "n_steps",
                "horizon": "horizon",
                "seed": "seed",
            },
        ),
    )
    model = model_of(cfg)
    if args.from_long_path:
        bundle = extract_copies_from_long_path(
            model,
            cfg.n_paths,
            cfg.n_steps,
            cfg.horizon,
            cfg.seed,
            max_total_steps=args.max_total_steps,
        )
    else:
        bundle = simulate_copies(
            model, cfg.n_paths, cfg.n_steps, cfg.horizon, cfg.seed
        )
    write_paths_csv(bundle, args.out)
    if cfg.verbosity >= 1:
        print(
            f"wrote {args.out}: {bundle.n_paths} paths, {bundle.n_steps} steps, "
            f"horizon {bundle.horizon}, model {model.label}, seed {bundle.seed}"
        )
    return 0


def cmd_estimate(args: argparse.Namespace) -> int:
    cfg = build_config(args.spec, _overrides(args, {}))
    est = estimator_config(cfg)
    bundle = read_paths_csv(args.paths)
    if args.eta == "loocv":
        grid = parse_grid_spec(cfg.eta_grid, "eta_grid")
        eta = select_eta_loocv(bundle, est, grid).eta
        if cfg.verbosity >= 1:
            print(f"selected eta = {eta!r} by leave-one-path-out CV")
    else:
        try:
            eta = float(args.eta)
        except ValueError as exc:
            raise ConfigError(
                f"invalid value for key 'eta': expected a number or 'loocv', "
                f"got {args.eta!r}"
            ) from exc
    if args.grid is None:
        grid_pts = np.linspace(est.lo_wide, est.hi_wide, cfg.curve_grid_points)
    else:
        grid_pts = _parse_triple(args.grid, "grid")
    curve = nw_drift(bundle, est, eta, grid_pts)
    write_curve_csv(curve, args.out)
    if cfg.verbosity >= 1:
        print(f"wrote {args.out}: ratio drift estimate on {grid_pts.size} points")
    return 0


def cmd_monotonize(args: argparse.Namespace) -> int:
    cfg = build_config(args.spec, _overrides(args, {}))
    est = estimator_config(cfg)
    curve = read_curve_csv(args.curve)
    left = right = None
    if args.endpoints is not None:
        left, right = _parse_pair_of_floats(args.endpoints, "endpoints")
    inp = MonotoneInput(
        curve, est, args.slope_margin, left_value=left, right_value=right
    )

    have_fixed = args.ell is not None or args.h is not None
    if have_fixed == (args.adaptive is not None):
        raise ConfigError(
            "give either both keys 'ell' and 'h', or key 'adaptive' (not both)"
        )
    if args.adaptive is not None:
        pairs = make_pair_grid(parse_grid_spec(args.adaptive, "adaptive"))
    else:
        if args.ell is None or args.h is None:
            raise ConfigError("keys 'ell' and 'h' must be given together")
        pairs = (BandwidthPair(args.ell, args.h),)
    if cfg.theory_strict:
        try:
            check_theory_range(pairs, est, args.slope_margin)
        except ValueError as exc:
            raise ConfigError(f"keys 'ell'/'h': {exc}") from exc

    if len(pairs) == 1:
        pair = pairs[0]
    else:
        selection = select_lh_adaptive(inp, pairs, mode=args.mode)
        pair = selection.pair
        if cfg.verbosity >= 1:
            print(f"selected ell = {pair.ell!r}, h = {pair.h!r} adaptively")
    out_curve = tabulate_monotone(inp, pair, practical=(args.mode == "practical"))
    write_curve_csv(out_curve, args.out)
    if cfg.verbosity >= 1:
        print(f"wrote {args.out}: monotone estimate on {out_curve.abscissae.size} points")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = build_config(
        args.spec,
        _overrides(
            args,
            {
                "model": "model",
                "repetitions": "repetitions",
                "seed": "seed",
                "workers": "workers",
                "out": "out_dir",
                "figures": "n_figure_reps",
            },
        ),
    )
    if args.dump_config:
        print(dump_config(cfg), end="")
        return 0
    spec = experiment_spec(cfg)
    if cfg.theory_strict:
        try:
            check_theory_range(spec.lh_grid, spec.cfg, spec.model.slope_margin)
        except ValueError as exc:
            raise ConfigError(f"key 'lh_grid': {exc}") from exc

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log = None
    if cfg.verbosity >= 2:
        def log(row):
            print(
                f"rep {row.rep}: eta={row.eta!r} ell={row.ell!r} h={row.h!r} "
                f"err_monotone={row.err_monotone:.4f} err_nw={row.err_nw:.4f}",
                file=sys.stderr,
            )
    report = run_experiment(spec, workers=cfg.workers, log=log)
    write_report_json(report, spec, out / "report.json")
    write_table_csv([report], out / "table1.csv")
    if cfg.n_figure_reps > 0:
        from .report import render_figures  # defers the matplotlib import

        n_curves = min(cfg.n_figure_reps, cfg.repetitions)
        csv_paths, _ = emit_figure_data(spec, n_curves, out)
        render_figures(
            csv_paths,
            out / "figures.png",
            title=f"Model {spec.model.label}: adaptive monotone drift estimates",
        )
    if cfg.verbosity >= 1:
        print(
            f"model {report.model_label}: monotone {report.mean_monotone:.3f} "
            f"(sd {report.sd_monotone:.3f}), ratio {report.mean_nw:.3f} "
            f"(sd {report.sd_nw:.3f}); artifacts in {out}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monodrift",
        description="Monotone drift estimation for recurrent diffusions "
        "observed as repeated path copies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser(
        "simulate", help="simulate path copies and write them as CSV"
    )
    sim.add_argument("--model", help=f"built-in model, A or B (default {_DEF.model})")
    sim.add_argument(
        "--n-paths", type=int, dest="n_paths",
        help=f"number of path copies (default {_DEF.n_paths})",
    )
    sim.add_argument(
        "--n-steps", type=int, dest="n_steps",
        help=f"observation steps per path (default {_DEF.n_steps})",
    )
    sim.add_argument(
        "--horizon", type=float, help=f"time horizon T (default {_DEF.horizon})"
    )
    sim.add_argument("--seed", type=int, help=f"RNG seed (default {_DEF.seed})")
    sim.add_argument(
        "--from-long-path", action="store_true",
        help="cut copies from one long trajectory at level crossings "
        "(default: independent copies)",
    )
    sim.add_argument(
        "--max-total-steps", type=int, default=2_000_000,
        help="step budget for --from-long-path (default 2000000)",
    )
    sim.add_argument("--spec", help="config file (flat key = value)")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser(
        "estimate", help="ratio drift estimate from a paths CSV"
    )
    est.add_argument("--paths", required=True, help="input paths CSV")
    est.add_argument(
        "--eta", default="loocv",
        help="bandwidth value, or 'loocv' for leave-one-path-out selection "
        "(default loocv)",
    )
    est.add_argument(
        "--grid",
        help="evaluation grid as lo,hi,npts (default: widened interval, "
        f"{_DEF.curve_grid_points} points)",
    )
    est.add_argument("--spec", help="config file (flat key = value)")
    est.add_argument("--out", required=True, help="output curve CSV path")
    est.set_defaults(func=cmd_estimate)

    mono = sub.add_parser(
        "monotonize", help="monotonize a tabulated drift estimate"
    )
    mono.add_argument("--curve", required=True, help="input curve CSV")
    mono.add_argument("--ell", type=float, help="re-inversion bandwidth")
    mono.add_argument("--h", type=float, help="inversion bandwidth")
    mono.add_argument(
        "--adaptive",
        help="bandwidth-pair grid as lo:hi:count; picks the pair whose "
        "output stays L1-closest to the input curve",
    )
    mono.add_argument(
        "--mode", choices=("oracle", "practical"), default="oracle",
        help="anchor mode: oracle uses --endpoints, practical estimates "
        "them from the curve (default oracle)",
    )
    mono.add_argument(
        "--endpoints",
        help="target values at the margin points as left,right (left > right)",
    )
    mono.add_argument(
        "--slope-margin", type=float, default=1.0, dest="slope_margin",
        help="lower bound on the drift's negative slope (default 1.0)",
    )
    mono.add_argument("--spec", help="config file (flat key = value)")
    mono.add_argument("--out", required=True, help="output curve CSV path")
    mono.set_defaults(func=cmd_monotonize)

    exp = sub.add_parser(
        "experiment",
        help="Monte-Carlo study: report.json, table1.csv, figure data",
    )
    exp.add_argument("--model", help=f"built-in model, A or B (default {_DEF.model})")
    exp.add_argument(
        "--repetitions", type=int,
        help=f"number of repetitions (default {_DEF.repetitions})",
    )
    exp.add_argument("--seed", type=int, help=f"base RNG seed (default {_DEF.seed})")
    exp.add_argument(
        "--workers", type=int, help=f"worker processes (default {_DEF.workers})"
    )
    exp.add_argument(
        "--figures", type=int,
        help=f"number of overlay curves to emit (default {_DEF.n_figure_reps})",
    )
    exp.add_argument("--spec", help="config file (flat key = value)")
    exp.add_argument(
        "--out", help=f"output directory (default {_DEF.out_dir})"
    )
    exp.add_argument(
        "--dump-config", action="store_true",
        help="print the effective configuration and exit",
    )
    exp.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"monodrift: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"monodrift: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
