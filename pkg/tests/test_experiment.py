import json
from pathlib import Path

import numpy as np
import pytest

from monodrift.experiment import (
    ExperimentSpec,
    RepetitionRow,
    default_bandwidth_grid,
    emit_figure_data,
    integrated_l1_error,
    make_pair_grid,
    render_report_json,
    run_experiment,
    run_repetition,
    write_report_json,
    write_table_csv,
)
from monodrift.kernels import KernelSpec
from monodrift.monotone import BandwidthPair
from monodrift.nadaraya import CurveOnGrid, EstimatorConfig
from monodrift.report import read_figure_csv, render_figures
from monodrift.sde import builtin_model

import oracles

CFG = EstimatorConfig()


def _small_spec(model="A", reps=3, **kw):
    defaults = dict(
        model=builtin_model(model),
        cfg=CFG,
        n_paths=15,
        n_steps=50,
        horizon=5.0,
        repetitions=reps,
        eta_grid=(0.1, 0.3, 0.6),
        lh_grid=make_pair_grid((0.1, 0.4)),
        seed=99,
    )
    defaults.update(kw)
    return ExperimentSpec(**defaults)


def test_spec_validation():
    with pytest.raises(ValueError, match="repetitions"):
        _small_spec(reps=0)
    with pytest.raises(ValueError, match="eta_grid"):
        _small_spec(eta_grid=())
    with pytest.raises(ValueError, match="lh_grid"):
        _small_spec(lh_grid=())
    with pytest.raises(ValueError, match="horizon"):
        _small_spec(horizon=-1.0)


def test_default_grid_is_multiples_of_005():
    grid = default_bandwidth_grid()
    assert len(grid) == 35
    np.testing.assert_allclose(grid, 0.05 * np.arange(1, 36), rtol=1e-12)
    pairs = make_pair_grid(grid)
    assert len(pairs) == 35 * 35


def test_integrated_l1_error_trivial_cases():
    xs = np.linspace(-1.0, 1.0, 201)
    truth = lambda x: -np.asarray(x)
    exact = CurveOnGrid(xs, -xs)
    assert integrated_l1_error(exact, truth) == 0.0
    shifted = CurveOnGrid(xs, -xs + 0.1)
    assert integrated_l1_error(shifted, truth) == pytest.approx(0.2, abs=1e-12)


def test_integrated_l1_error_matches_fine_quadrature():
    rng = np.random.default_rng(11)
    xs = np.linspace(-1.0, 1.0, 201)
    values = np.cumsum(rng.normal(0.0, 0.02, xs.size)) - xs
    curve = CurveOnGrid(xs, values)
    truth = lambda x: -np.asarray(x)
    got = integrated_l1_error(curve, truth)
    want = oracles.fine_l1_distance(
        lambda x: np.interp(x, xs, values), lambda x: -x, -1.0, 1.0
    )
    assert got == pytest.approx(want, abs=1e-3)


def test_run_repetition_row_contents():
    spec = _small_spec()
    row, mono = run_repetition(spec, 1)
    assert row.rep == 1 and row.seed == spec.seed + 1
    assert row.eta in spec.eta_grid
    assert BandwidthPair(row.ell, row.h) in spec.lh_grid
    assert row.err_monotone >= 0.0 and row.err_nw >= 0.0
    assert mono.abscissae.shape == (201,)
    assert np.all(np.diff(mono.values) < 0.0)
    with pytest.raises(ValueError, match="rep"):
        run_repetition(spec, 5)


def test_fixed_bandwidth_mode_skips_selection():
    spec = _small_spec()
    row, _ = run_repetition(spec, 0, eta=0.7, pair=BandwidthPair(0.33, 0.21))
    assert row.eta == 0.7 and row.ell == 0.33 and row.h == 0.21


def test_report_statistics_recompute():
    spec = _small_spec()
    report = run_experiment(spec)
    assert len(report.rows) == 3 and not report.failures
    err_m = [r.err_monotone for r in report.rows]
    err_n = [r.err_nw for r in report.rows]
    assert report.mean_monotone == pytest.approx(np.mean(err_m), abs=1e-15)
    assert report.sd_monotone == pytest.approx(np.std(err_m, ddof=1), abs=1e-15)
    assert report.mean_nw == pytest.approx(np.mean(err_n), abs=1e-15)
    assert report.sd_nw == pytest.approx(np.std(err_n, ddof=1), abs=1e-15)
    assert not report.degenerate_sd


def test_single_repetition_degenerate_sd():
    spec = _small_spec(reps=1)
    report = run_experiment(spec)
    assert report.degenerate_sd
    assert report.sd_monotone == 0.0 and report.sd_nw == 0.0
    assert report.mean_monotone == report.rows[0].err_monotone


def test_report_json_deterministic_bytes(tmp_path):
    spec = _small_spec(reps=2)
    a = render_report_json(run_experiment(spec), spec)
    b = render_report_json(run_experiment(spec), spec)
    assert a == b
    path = tmp_path / "report.json"
    write_report_json(run_experiment(spec), spec, path)
    assert path.read_text() == a
    parsed = json.loads(a)
    assert parsed["model"] == "A" and len(parsed["rows"]) == 2


def test_worker_pool_matches_serial():
    spec = _small_spec(reps=4, n_paths=8)
    serial = run_experiment(spec, workers=1)
    pooled = run_experiment(spec, workers=2)
    assert render_report_json(serial, spec) == render_report_json(pooled, spec)


def test_failures_are_recorded_and_capped():
    # dt = horizon / n_steps = 5 makes the linear Euler recursion explode,
    # so every repetition fails and the 10% cap trips
    spec = _small_spec(reps=2, n_steps=1, n_paths=3)
    with pytest.raises(RuntimeError, match="repetitions failed"):
        run_experiment(spec)


def test_table_csv_format(tmp_path):
    spec = _small_spec(reps=2)
    report = run_experiment(spec)
    path = tmp_path / "table1.csv"
    write_table_csv([report], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "model,mean_monotone,sd_monotone,mean_nw,sd_nw"
    cells = lines[1].split(",")
    assert cells[0] == "A"
    assert float(cells[1]) == report.mean_monotone
    assert float(cells[4]) == report.sd_nw


def test_emit_figure_data_contents(tmp_path):
    spec = _small_spec(model="B", reps=2)
    csv_paths, gp_path = emit_figure_data(spec, 2, tmp_path)
    assert [p.name for p in csv_paths] == ["fig_rep_000.csv", "fig_rep_001.csv"]
    assert gp_path.read_text().startswith("set terminal pngcairo")
    assert "fig_rep_001.csv" in gp_path.read_text()
    x, truth, estimate = read_figure_csv(csv_paths[0])
    assert x.shape == (201,)
    assert x[0] == -1.0 and x[-1] == 1.0
    # truth column is the model drift: sin(1.25) - 1.5 at x = 1
    assert truth[-1] == pytest.approx(np.sin(1.25) - 1.5, abs=1e-12)
    assert np.all(np.diff(estimate) <= 0.0)
    # the emitted curve reproduces the corresponding repetition
    _, mono = run_repetition(spec, 0)
    np.testing.assert_array_equal(estimate, mono.values)


def test_emit_figure_data_model_a_truth_at_zero(tmp_path):
    spec = _small_spec(reps=1)
    csv_paths, _ = emit_figure_data(spec, 1, tmp_path)
    x, truth, _ = read_figure_csv(csv_paths[0])
    assert truth[np.argmin(np.abs(x))] == 0.0
    with pytest.raises(ValueError, match="n_curves"):
        emit_figure_data(spec, 2, tmp_path)


def test_render_figures_writes_png(tmp_path):
    spec = _small_spec(reps=1)
    csv_paths, _ = emit_figure_data(spec, 1, tmp_path)
    out = render_figures(csv_paths, tmp_path / "figures.png", title="Model A")
    data = out.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    with pytest.raises(ValueError, match="no figure CSVs"):
        render_figures([], tmp_path / "x.png")
