"""Monte-Carlo study of the two-stage drift estimator.

Each repetition simulates a fresh bundle of paths, selects the ratio
bandwidth by leave-one-path-out CV, tabulates the ratio estimate on the
widened interval, monotonizes it with an adaptively selected bandwidth
pair (anchored at the true drift's margin values), and records integrated
L1 errors of both the monotone and the raw ratio estimate over the
reporting interval.  Reports aggregate means and sample standard
deviations, and every repetition is reproducible in isolation from
``seed + rep``.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .monotone import (
    EVAL_GRID_POINTS,
    BandwidthPair,
    MonotoneInput,
    select_lh_adaptive,
    tabulate_monotone,
)
from .nadaraya import CurveOnGrid, EstimatorConfig, nw_drift, select_eta_loocv
from .sde import SdeModel, simulate_copies

# Reporting grid has 0.01 spacing on [-1, 1]; four extra nodes extend it to
# the widened interval [-1.02, 1.02] at the same spacing, so restriction
# back to the reporting interval hits grid nodes exactly.
CURVE_GRID_POINTS = 205


def default_bandwidth_grid() -> tuple[float, ...]:
    """The 35-point bandwidth grid 0.05, 0.10, ..., 1.75."""
    return tuple(float(v) for v in np.linspace(0.05, 1.75, 35))


def make_pair_grid(values: Sequence[float]) -> tuple[BandwidthPair, ...]:
    """All (ell, h) combinations of a value grid, in lexicographic order."""
    vals = [float(v) for v in values]
    return tuple(BandwidthPair(l, h) for l in vals for h in vals)


@dataclass(frozen=True)
class ExperimentSpec:
    """Complete description of one Monte-Carlo run."""

    model: SdeModel
    cfg: EstimatorConfig
    n_paths: int = 100
    n_steps: int = 50
    horizon: float = 5.0
    repetitions: int = 100
    eta_grid: tuple[float, ...] = default_bandwidth_grid()
    lh_grid: tuple[BandwidthPair, ...] = make_pair_grid(default_bandwidth_grid())
    curve_grid_points: int = CURVE_GRID_POINTS
    seed: int = 1789

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be positive")
        if not np.isfinite(self.horizon) or self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if len(self.eta_grid) == 0:
            raise ValueError("eta_grid must be nonempty")
        if len(self.lh_grid) == 0:
            raise ValueError("lh_grid must be nonempty")
        if self.curve_grid_points < 2:
            raise ValueError("curve_grid_points must be >= 2")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")


@dataclass(frozen=True)
class RepetitionRow:
    """Selections and errors of one completed repetition."""

    rep: int
    seed: int
    eta: float
    ell: float
    h: float
    err_monotone: float
    err_nw: float


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated outcome of a Monte-Carlo run."""

    model_label: str
    n_paths: int
    n_steps: int
    horizon: float
    repetitions: int
    seed: int
    rows: tuple[RepetitionRow, ...]
    failures: tuple[tuple[int, str], ...]
    mean_monotone: float
    sd_monotone: float
    mean_nw: float
    sd_nw: float
    degenerate_sd: bool


def integrated_l1_error(curve: CurveOnGrid, truth: Callable) -> float:
    """Trapezoid integral of |curve - truth| on the curve's own grid."""
    diff = np.abs(curve.values - np.asarray(truth(curve.abscissae), dtype=float))
    return float(np.trapezoid(diff, curve.abscissae))


def run_repetition(
    spec: ExperimentSpec,
    rep: int,
    eta: float | None = None,
    pair: BandwidthPair | None = None,
) -> tuple[RepetitionRow, CurveOnGrid]:
    """Run the full pipeline for one repetition.

    Passing `eta` or `pair` skips the corresponding data-driven selection
    (non-adaptive mode, used for rate checks).  Returns the result row and
    the monotone estimate tabulated on the reporting grid.
    """
    if not 0 <= rep < spec.repetitions:
        raise ValueError(f"rep must lie in [0, {spec.repetitions}), got {rep}")
    cfg = spec.cfg
    seed = spec.seed + rep
    bundle = simulate_copies(
        spec.model, spec.n_paths, spec.n_steps, spec.horizon, seed
    )
    if eta is None:
        eta = select_eta_loocv(bundle, cfg, spec.eta_grid).eta
    grid = np.linspace(cfg.lo_wide, cfg.hi_wide, spec.curve_grid_points)
    curve = nw_drift(bundle, cfg, eta, grid)
    inp = MonotoneInput(
        curve,
        cfg,
        spec.model.slope_margin,
        left_value=float(spec.model.drift(cfg.lo_margin)),
        right_value=float(spec.model.drift(cfg.hi_margin)),
    )
    if pair is None:
        pair = select_lh_adaptive(inp, spec.lh_grid, mode="oracle").pair
    mono = tabulate_monotone(inp, pair)
    nw_reporting = curve.restrict(cfg.domain_lo, cfg.domain_hi, EVAL_GRID_POINTS)
    row = RepetitionRow(
        rep=rep,
        seed=seed,
        eta=float(eta),
        ell=pair.ell,
        h=pair.h,
        err_monotone=integrated_l1_error(mono, spec.model.drift),
        err_nw=integrated_l1_error(nw_reporting, spec.model.drift),
    )
    return row, mono


def _rep_outcome(args: tuple[ExperimentSpec, int]):
    spec, rep = args
    try:
        row, _ = run_repetition(spec, rep)
        return row
    except Exception as exc:  # recorded, not fatal, unless too frequent
        return (rep, f"{type(exc).__name__}: {exc}")


def run_experiment(
    spec: ExperimentSpec,
    workers: int = 1,
    log: Callable[[RepetitionRow], None] | None = None,
) -> ExperimentReport:
    """Run all repetitions and aggregate Table-1 style statistics.

    `workers > 1` fans repetitions out to a process pool; aggregation is
    ordered by repetition index, so the report is identical to a serial
    run.  Repetitions that raise are recorded as failures; more than 10%
    failures aborts with an error.
    """
    args = [(spec, rep) for rep in range(spec.repetitions)]
    if workers <= 1:
        outcomes = map(_rep_outcome, args)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        outcomes = pool.map(_rep_outcome, args)

    rows: list[RepetitionRow] = []
    failures: list[tuple[int, str]] = []
    for outcome in outcomes:
        if isinstance(outcome, RepetitionRow):
            rows.append(outcome)
            if log is not None:
                log(outcome)
        else:
            failures.append(outcome)
    if workers > 1:
        pool.shutdown()

    if len(failures) > 0.1 * spec.repetitions:
        first = failures[0]
        raise RuntimeError(
            f"{len(failures)} of {spec.repetitions} repetitions failed "
            f"(first: rep {first[0]}, {first[1]})"
        )

    err_m = np.array([r.err_monotone for r in rows])
    err_n = np.array([r.err_nw for r in rows])
    degenerate = len(rows) < 2
    return ExperimentReport(
        model_label=spec.model.label,
        n_paths=spec.n_paths,
        n_steps=spec.n_steps,
        horizon=spec.horizon,
        repetitions=spec.repetitions,
        seed=spec.seed,
        rows=tuple(rows),
        failures=tuple(failures),
        mean_monotone=float(np.mean(err_m)),
        sd_monotone=0.0 if degenerate else float(np.std(err_m, ddof=1)),
        mean_nw=float(np.mean(err_n)),
        sd_nw=0.0 if degenerate else float(np.std(err_n, ddof=1)),
        degenerate_sd=degenerate,
    )


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def report_to_dict(report: ExperimentReport, spec: ExperimentSpec) -> dict:
    cfg = spec.cfg
    return {
        "model": report.model_label,
        "kernel": cfg.kernel.family,
        "domain": [cfg.domain_lo, cfg.domain_hi],
        "margin": cfg.margin,
        "burn_in": cfg.burn_in,
        "density_floor": cfg.density_floor,
        "n_paths": report.n_paths,
        "n_steps": report.n_steps,
        "horizon": report.horizon,
        "repetitions": report.repetitions,
        "seed": report.seed,
        "eta_grid": list(spec.eta_grid),
        "bandwidth_pairs": len(spec.lh_grid),
        "mean_monotone": report.mean_monotone,
        "sd_monotone": report.sd_monotone,
        "mean_nw": report.mean_nw,
        "sd_nw": report.sd_nw,
        "degenerate_sd": report.degenerate_sd,
        "failures": [{"rep": rep, "error": msg} for rep, msg in report.failures],
        "rows": [
            {
                "rep": r.rep,
                "seed": r.seed,
                "eta": r.eta,
                "ell": r.ell,
                "h": r.h,
                "err_monotone": r.err_monotone,
                "err_nw": r.err_nw,
            }
            for r in report.rows
        ],
    }


def render_report_json(report: ExperimentReport, spec: ExperimentSpec) -> str:
    return json.dumps(report_to_dict(report, spec), sort_keys=True, indent=2) + "\n"


def write_report_json(
    report: ExperimentReport, spec: ExperimentSpec, path: str | Path
) -> None:
    Path(path).write_text(render_report_json(report, spec))


def write_table_csv(reports: Sequence[ExperimentReport], path: str | Path) -> None:
    """Summary table: one row per model, both estimators' mean and sd."""
    lines = ["model,mean_monotone,sd_monotone,mean_nw,sd_nw"]
    for rep in reports:
        lines.append(
            f"{rep.model_label},{rep.mean_monotone!r},{rep.sd_monotone!r},"
            f"{rep.mean_nw!r},{rep.sd_nw!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _gnuplot_script(csv_names: Sequence[str], model_label: str) -> str:
    head = [
        "set terminal pngcairo size 900,640",
        "set output 'figures_gnuplot.png'",
        "set datafile separator comma",
        f"set title 'Model {model_label}: adaptive monotone drift estimates'",
        "set xlabel 'x'",
        "set ylabel 'drift'",
        "set key top right",
    ]
    parts = [
        f"plot '{csv_names[0]}' skip 1 using 1:2 with lines "
        "lc rgb 'red' lw 2 title 'true drift'"
    ]
    for i, name in enumerate(csv_names):
        title = "title 'monotone estimates'" if i == 0 else "notitle"
        parts.append(
            f"     '{name}' skip 1 using 1:3 with lines lc rgb 'black' dt 2 {title}"
        )
    return "\n".join(head) + "\n" + ", \\\n".join(parts) + "\n"


def emit_figure_data(
    spec: ExperimentSpec, n_curves: int, out_dir: str | Path
) -> tuple[list[Path], Path]:
    """Write per-repetition overlay data and a gnuplot script rendering it.

    Repetitions 0..n_curves-1 are (re)run and each yields a CSV with
    columns x, truth, estimate on the reporting grid.  Returns the CSV
    paths and the script path.
    """
    if not 1 <= n_curves <= spec.repetitions:
        raise ValueError(
            f"n_curves must lie in [1, {spec.repetitions}], got {n_curves}"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_paths: list[Path] = []
    for rep in range(n_curves):
        _, mono = run_repetition(spec, rep)
        truth = np.asarray(spec.model.drift(mono.abscissae), dtype=float)
        lines = ["x,truth,estimate"]
        for x, t, e in zip(mono.abscissae, truth, mono.values):
            lines.append(f"{float(x)!r},{float(t)!r},{float(e)!r}")
        path = out / f"fig_rep_{rep:03d}.csv"
        try:
            path.write_text("\n".join(lines) + "\n")
        except OSError as exc:
            raise OSError(f"could not write figure data to {path}: {exc}") from exc
        csv_paths.append(path)
    gp_path = out / "figures.gp"
    gp_path.write_text(_gnuplot_script([p.name for p in csv_paths], spec.model.label))
    return csv_paths, gp_path
