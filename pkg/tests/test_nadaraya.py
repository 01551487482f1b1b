import numpy as np
import pytest

from monodrift.kernels import KernelSpec, pdf_scaled
from monodrift.nadaraya import (
    CurveOnGrid,
    EstimatorConfig,
    af_estimate,
    density_estimate,
    nw_drift,
    read_curve_csv,
    select_eta_loocv,
    write_curve_csv,
)
from monodrift.sde import PathBundle, SdeModel, builtin_model, simulate_copies

import oracles

CFG = EstimatorConfig()


def _zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _constant_bundle(n_paths=3, n_steps=50, horizon=5.0, level=0.5):
    values = np.full((n_paths, n_steps + 1), level)
    return PathBundle(values=values, horizon=horizon, seed=0)


def test_config_validation():
    with pytest.raises(ValueError, match="domain_lo"):
        EstimatorConfig(domain_lo=1.0, domain_hi=-1.0)
    with pytest.raises(ValueError, match="margin"):
        EstimatorConfig(margin=0.0)
    with pytest.raises(ValueError, match="burn_in"):
        EstimatorConfig(burn_in=-0.1)
    with pytest.raises(ValueError, match="density_floor"):
        EstimatorConfig(density_floor=0.0)
    cfg = EstimatorConfig()
    assert cfg.lo_margin == pytest.approx(-1.01)
    assert cfg.hi_wide == pytest.approx(1.02)


def test_curve_on_grid_validation_and_interp():
    with pytest.raises(ValueError, match="increasing"):
        CurveOnGrid(np.array([0.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(ValueError, match="uniform"):
        CurveOnGrid(np.array([0.0, 0.4, 1.0]), np.zeros(3))
    curve = CurveOnGrid(np.linspace(0.0, 1.0, 11), np.linspace(5.0, 0.0, 11))
    assert curve.interp(0.55) == pytest.approx(2.25)
    sub = curve.restrict(0.2, 0.8, 7)
    assert sub.lo == pytest.approx(0.2)
    np.testing.assert_allclose(sub.values, 5.0 * (1.0 - sub.abscissae), atol=1e-12)
    with pytest.raises(ValueError, match="span"):
        curve.restrict(-0.5, 0.5, 5)


def test_curve_csv_round_trip(tmp_path):
    curve = CurveOnGrid(np.linspace(-1.02, 1.02, 205), np.sin(np.linspace(0, 3, 205)))
    out = tmp_path / "curve.csv"
    write_curve_csv(curve, str(out))
    back = read_curve_csv(str(out))
    assert np.array_equal(back.abscissae, curve.abscissae)
    assert np.array_equal(back.values, curve.values)


def test_density_of_constant_paths_is_a_kernel_bump():
    # every window sample sits at 0.5, so the density estimate collapses to
    # K_eta(0.5 - x); the time window [0.5, 5] aligns exactly with the grid
    bundle = _constant_bundle()
    for eta in (0.15, 0.4):
        for x in (-0.3, 0.2, 0.5):
            expected = pdf_scaled(CFG.kernel, 0.5 - x, eta)
            assert density_estimate(bundle, CFG, eta, x) == pytest.approx(
                expected, abs=1e-12
            )


def test_af_of_constant_paths_is_zero():
    bundle = _constant_bundle()
    assert af_estimate(bundle, CFG, 0.2, 0.4) == 0.0


def test_estimates_match_naive_loops():
    m = builtin_model("A")
    bundle = simulate_copies(m, 4, 20, 2.0, seed=9)
    cfg = EstimatorConfig(burn_in=0.4)
    for x in (-0.2, 0.1, 0.45):
        dens = density_estimate(bundle, cfg, 0.3, x)
        afre = af_estimate(bundle, cfg, 0.3, x)
        assert dens == pytest.approx(
            oracles.naive_density(bundle.values, 2.0, 0.4, "gaussian", 0.3, x),
            abs=1e-12,
        )
        assert afre == pytest.approx(
            oracles.naive_afhat(bundle.values, 2.0, 0.4, "gaussian", 0.3, x),
            abs=1e-12,
        )


def test_shift_equivariance():
    m = builtin_model("A")
    bundle = simulate_copies(m, 5, 30, 3.0, seed=2)
    shifted = PathBundle(bundle.values + 2.0, bundle.horizon, bundle.seed)
    d0 = density_estimate(bundle, CFG, 0.3, 0.1)
    d1 = density_estimate(shifted, CFG, 0.3, 2.1)
    assert d1 == pytest.approx(d0, abs=1e-12)
    a0 = af_estimate(bundle, CFG, 0.3, 0.1)
    a1 = af_estimate(shifted, CFG, 0.3, 2.1)
    assert a1 == pytest.approx(a0, abs=1e-12)


def test_path_order_invariance():
    m = builtin_model("B")
    bundle = simulate_copies(m, 6, 30, 3.0, seed=4)
    perm = PathBundle(bundle.values[::-1].copy(), bundle.horizon, bundle.seed)
    assert density_estimate(perm, CFG, 0.2, 0.3) == pytest.approx(
        density_estimate(bundle, CFG, 0.2, 0.3), abs=1e-13
    )
    sel0 = select_eta_loocv(bundle, CFG, [0.2, 0.5])
    sel1 = select_eta_loocv(perm, CFG, [0.2, 0.5])
    np.testing.assert_allclose(sel0.criteria, sel1.criteria, rtol=1e-12)


def test_deterministic_decay_ratio_recovers_drift():
    # with the noise switched off, increments are exactly a(X) dt, so the
    # ratio estimate is a kernel-weighted average of a near the query point
    model = SdeModel("decay", lambda x: -x, _zeros, 0.5, 1.0)
    bundle = simulate_copies(model, 1, 50, 5.0, seed=0)
    x = 0.25
    dens = density_estimate(bundle, CFG, 0.05, x)
    afre = af_estimate(bundle, CFG, 0.05, x)
    assert dens > 0.0
    assert afre / dens == pytest.approx(-x, rel=0.15)


def test_density_matches_time_averaged_ou_marginal():
    m = builtin_model("A")
    bundle = simulate_copies(m, 400, 50, 5.0, seed=11)
    oracle = oracles.ou_time_avg_density(0.0, 0.5, 0.5, 5.0)
    assert density_estimate(bundle, CFG, 0.25, 0.0) == pytest.approx(oracle, abs=0.1)


def test_density_integrates_to_about_one():
    m = builtin_model("A")
    bundle = simulate_copies(m, 20, 50, 5.0, seed=13)
    cfg = EstimatorConfig(kernel=KernelSpec("triweight"))
    eta = 0.3
    span_lo = bundle.values.min() - 2.0 * eta
    span_hi = bundle.values.max() + 2.0 * eta
    grid = np.linspace(span_lo, span_hi, 40_001)
    dens = np.array([0.0])
    from monodrift.nadaraya import _point_estimates

    dens, _ = _point_estimates(bundle, cfg, eta, grid)
    mass = np.trapezoid(dens, grid)
    assert mass <= 1.0 + 1e-6
    assert mass == pytest.approx(1.0, abs=0.02)


def test_window_validation():
    bundle = _constant_bundle(horizon=1.0, n_steps=10)
    with pytest.raises(ValueError, match="burn_in"):
        density_estimate(bundle, EstimatorConfig(burn_in=1.0), 0.3, 0.0)
    with pytest.raises(ValueError, match="window"):
        density_estimate(bundle, EstimatorConfig(burn_in=0.95), 0.3, 0.0)


def test_eta_validation():
    bundle = _constant_bundle()
    for bad in (0.0, -0.5, np.nan):
        with pytest.raises(ValueError, match="eta"):
            density_estimate(bundle, CFG, bad, 0.0)


def test_nw_drift_grid_span_enforced_and_truncation():
    m = builtin_model("A")
    bundle = simulate_copies(m, 2, 50, 5.0, seed=5)
    with pytest.raises(ValueError, match="span"):
        nw_drift(bundle, CFG, 0.3, np.linspace(-1.0, 1.0, 201))
    grid = np.linspace(CFG.lo_wide, CFG.hi_wide, 205)
    curve = nw_drift(bundle, CFG, 0.03, grid)
    assert curve.abscissae.shape == (205,)
    # a tiny bandwidth leaves sparsely visited edge regions below the floor
    dens = np.array([density_estimate(bundle, CFG, 0.03, x) for x in grid])
    low = dens <= CFG.density_floor / 2.0
    assert low.any(), "expected some truncated region in this configuration"
    assert np.all(curve.values[low] == 0.0)
    assert np.any(curve.values != 0.0)


def test_loocv_matches_naive_reimplementation():
    m = builtin_model("A")
    bundle = simulate_copies(m, 4, 8, 2.0, seed=21)
    cfg = EstimatorConfig(burn_in=0.5)
    etas = [0.15, 0.3, 0.8]
    sel = select_eta_loocv(bundle, cfg, etas)
    oracle = oracles.naive_loocv_criteria(
        bundle.values, 2.0, 0.5, "gaussian", etas, cfg.density_floor
    )
    np.testing.assert_allclose(sel.criteria, oracle, rtol=0.0, atol=1e-9)
    assert sel.eta == etas[int(np.argmin(oracle))]


def test_loocv_single_path_selects_smallest_eta():
    # with one path the leave-out numerator is empty, the criterion is zero
    # for every candidate, and ties resolve to the smallest bandwidth
    m = builtin_model("A")
    bundle = simulate_copies(m, 1, 20, 2.0, seed=3)
    sel = select_eta_loocv(bundle, CFG, [0.4, 0.2, 0.9])
    np.testing.assert_array_equal(sel.criteria, 0.0)
    assert sel.eta == 0.2


def test_loocv_empty_grid_rejected():
    bundle = _constant_bundle()
    with pytest.raises(ValueError, match="nonempty"):
        select_eta_loocv(bundle, CFG, [])


def test_loocv_selection_lands_in_grid():
    m = builtin_model("A")
    bundle = simulate_copies(m, 30, 50, 5.0, seed=8)
    etas = np.linspace(0.05, 1.75, 35)
    sel = select_eta_loocv(bundle, CFG, etas)
    assert sel.eta in etas
    assert 0.05 <= sel.eta <= 1.75
