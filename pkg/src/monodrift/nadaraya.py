"""Kernel drift estimation from repeated path copies.

Given N copies observed on a uniform grid, the local occupation density and
the drift numerator are estimated by Riemann sums over the observation
window [t0, horizon]:

    density(x) = (1 / (N * T0)) * sum_i sum_k K_eta(X^i_k - x) * dt
    afhat(x)   = (1 / (N * T0)) * sum_i sum_k K_eta(X^i_k - x) * (X^i_{k+1} - X^i_k)

with T0 = horizon - t0 and k running over grid times in [t0, horizon - dt].
The drift estimate is their ratio, truncated to zero wherever the density
estimate falls at or below half the configured floor.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec, pdf_scaled
from .sde import PathBundle

# Evaluation-row budget for the pairwise kernel matrices built during
# cross-validation; keeps peak memory around a few hundred MB.
_CHUNK_ENTRIES = 20_000_000


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimation settings shared across the pipeline.

    Attributes
    ----------
    domain_lo, domain_hi : endpoints of the reporting interval I_0.
    margin : widening step eps; estimation happens on the interval widened
        by 2 * eps, endpoint anchoring uses the interval widened by eps.
    burn_in : initial stretch t0 of every copy dropped from the Riemann sums.
    density_floor : occupation-density level below half of which the drift
        ratio is truncated to zero.
    kernel : smoothing kernel family.
    z_grid_points : number of quadrature nodes for the value-space integral
        of the monotonization stage.
    """

    domain_lo: float = -1.0
    domain_hi: float = 1.0
    margin: float = 0.01
    burn_in: float = 0.5
    density_floor: float = 0.05
    kernel: KernelSpec = field(default_factory=KernelSpec)
    z_grid_points: int = 200

    def __post_init__(self) -> None:
        if not self.domain_lo < self.domain_hi:
            raise ValueError(
                f"domain_lo must be below domain_hi, got "
                f"[{self.domain_lo}, {self.domain_hi}]"
            )
        if self.margin <= 0.0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.burn_in < 0.0:
            raise ValueError(f"burn_in must be nonnegative, got {self.burn_in}")
        if self.density_floor <= 0.0:
            raise ValueError(
                f"density_floor must be positive, got {self.density_floor}"
            )
        if self.z_grid_points < 2:
            raise ValueError(
                f"z_grid_points must be at least 2, got {self.z_grid_points}"
            )

    # Widened interval endpoints: lo/hi_margin widen by eps, lo/hi_wide by 2*eps.
    @property
    def lo_margin(self) -> float:
        return self.domain_lo - self.margin

    @property
    def hi_margin(self) -> float:
        return self.domain_hi + self.margin

    @property
    def lo_wide(self) -> float:
        return self.domain_lo - 2.0 * self.margin

    @property
    def hi_wide(self) -> float:
        return self.domain_hi + 2.0 * self.margin


@dataclass(frozen=True)
class CurveOnGrid:
    """A function tabulated on a uniform grid; off-node evaluation is linear."""

    abscissae: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.abscissae, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ValueError("curve needs matching 1-D abscissae/values, >= 2 points")
        steps = np.diff(x)
        if steps.min() <= 0.0:
            raise ValueError("curve abscissae must be strictly increasing")
        if steps.max() - steps.min() > 1e-9 * max(steps.max(), 1.0):
            raise ValueError("curve abscissae must be uniformly spaced")
        object.__setattr__(self, "abscissae", x)
        object.__setattr__(self, "values", v)

    @property
    def lo(self) -> float:
        return float(self.abscissae[0])

    @property
    def hi(self) -> float:
        return float(self.abscissae[-1])

    def interp(self, x) -> float | np.ndarray:
        out = np.interp(x, self.abscissae, self.values)
        return float(out) if np.ndim(x) == 0 else out

    def restrict(self, lo: float, hi: float, n_points: int) -> "CurveOnGrid":
        """Resample onto n_points uniform nodes over [lo, hi] (within span)."""
        if lo < self.lo - 1e-9 or hi > self.hi + 1e-9:
            raise ValueError(
                f"restriction [{lo}, {hi}] exceeds curve span [{self.lo}, {self.hi}]"
            )
        grid = np.linspace(lo, hi, n_points)
        return CurveOnGrid(grid, self.interp(grid))


def write_curve_csv(curve: CurveOnGrid, path: str) -> None:
    """Write a curve as abscissa,value CSV rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("abscissa,value\n")
        for x, v in zip(curve.abscissae, curve.values):
            fh.write(f"{float(x)!r},{float(v)!r}\n")


def read_curve_csv(path: str) -> CurveOnGrid:
    xs, vs = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("abscissa"):
            raise ValueError(f"{path} is not a curve CSV")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a, b = line.split(",")
            xs.append(float(a))
            vs.append(float(b))
    return CurveOnGrid(np.asarray(xs), np.asarray(vs))


def _window_start(bundle: PathBundle, cfg: EstimatorConfig) -> int:
    """First grid index k with k * dt inside [burn_in, horizon - dt]."""
    if cfg.burn_in >= bundle.horizon:
        raise ValueError(
            f"burn_in {cfg.burn_in} must be below the horizon {bundle.horizon}"
        )
    k0 = int(np.ceil(cfg.burn_in / bundle.dt - 1e-9))
    if k0 > bundle.n_steps - 1:
        raise ValueError(
            f"observation window [{cfg.burn_in}, {bundle.horizon}] contains no "
            f"full grid step at dt={bundle.dt}"
        )
    return k0


def _flat_window(
    bundle: PathBundle, cfg: EstimatorConfig
) -> tuple[np.ndarray, np.ndarray, int]:
    """Window samples and their forward increments, flattened path-major."""
    k0 = _window_start(bundle, cfg)
    pts = bundle.values[:, k0:-1]
    incs = bundle.values[:, k0 + 1 :] - pts
    return pts.ravel(), incs.ravel(), pts.shape[1]


def _check_eta(eta: float) -> None:
    if not np.isfinite(eta) or eta <= 0.0:
        raise ValueError(f"eta must be positive and finite, got {eta}")


def _point_estimates(
    bundle: PathBundle, cfg: EstimatorConfig, eta: float, xs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """density and afhat evaluated at each abscissa in xs."""
    pts, incs, _ = _flat_window(bundle, cfg)
    t_window = bundle.horizon - cfg.burn_in
    scale = 1.0 / (bundle.n_paths * t_window)
    density = np.empty(xs.size)
    afhat = np.empty(xs.size)
    step = max(1, _CHUNK_ENTRIES // max(pts.size, 1))
    for lo in range(0, xs.size, step):
        hi = min(lo + step, xs.size)
        weights = pdf_scaled(cfg.kernel, xs[lo:hi, None] - pts[None, :], eta)
        density[lo:hi] = weights.sum(axis=1) * (bundle.dt * scale)
        afhat[lo:hi] = (weights @ incs) * scale
    return density, afhat


def density_estimate(
    bundle: PathBundle, cfg: EstimatorConfig, eta: float, x: float
) -> float:
    """Occupation-density estimate at x with bandwidth eta."""
    _check_eta(eta)
    d, _ = _point_estimates(bundle, cfg, eta, np.asarray([x], dtype=float))
    return float(d[0])


def af_estimate(
    bundle: PathBundle, cfg: EstimatorConfig, eta: float, x: float
) -> float:
    """Drift-numerator estimate (kernel-weighted increments) at x."""
    _check_eta(eta)
    _, a = _point_estimates(bundle, cfg, eta, np.asarray([x], dtype=float))
    return float(a[0])


def nw_drift(
    bundle: PathBundle, cfg: EstimatorConfig, eta: float, grid: np.ndarray
) -> CurveOnGrid:
    """Ratio drift estimate tabulated on a grid spanning the widened interval.

    The grid must span exactly [lo_wide, hi_wide]; values where the density
    estimate is at or below density_floor / 2 are truncated to zero.
    """
    _check_eta(eta)
    grid = np.asarray(grid, dtype=float)
    if abs(grid[0] - cfg.lo_wide) > 1e-9 or abs(grid[-1] - cfg.hi_wide) > 1e-9:
        raise ValueError(
            f"grid [{grid[0]}, {grid[-1]}] must span the widened interval "
            f"[{cfg.lo_wide}, {cfg.hi_wide}]"
        )
    density, afhat = _point_estimates(bundle, cfg, eta, grid)
    keep = density > cfg.density_floor / 2.0
    values = np.zeros_like(density)
    np.divide(afhat, density, out=values, where=keep)
    values[~keep] = 0.0
    return CurveOnGrid(grid, values)


@dataclass(frozen=True)
class LoocvSelection:
    """Result of leave-one-out bandwidth selection."""

    eta: float                # selected bandwidth (smallest among ties)
    eta_grid: np.ndarray      # candidates, in the order supplied
    criteria: np.ndarray      # criterion value per candidate


def select_eta_loocv(
    bundle: PathBundle, cfg: EstimatorConfig, eta_grid
) -> LoocvSelection:
    """Select the ratio-estimator bandwidth by leave-one-path-out CV.

    For each candidate eta the criterion sums, over paths i, the discretized
    contrast along path i's own window samples:

        sum_k a_i(X^i_k)^2 * dt - 2 * sum_k a_i(X^i_k) * (X^i_{k+1} - X^i_k)

    where a_i is the ratio estimate whose numerator omits path i entirely
    while keeping the full 1/(N * T0) normalization, and whose denominator
    is the all-paths density estimate; the ratio is truncated to zero where
    that density is at or below density_floor / 2.  Ties select the smaller
    eta.  The single-path case degenerates to a zero numerator.
    """
    etas = np.asarray(list(eta_grid), dtype=float)
    if etas.size == 0:
        raise ValueError("eta_grid must be nonempty")
    for e in etas:
        _check_eta(e)

    pts, incs, m = _flat_window(bundle, cfg)
    n_paths = bundle.n_paths
    total = pts.size
    dt = bundle.dt
    t_window = bundle.horizon - cfg.burn_in
    scale = 1.0 / (n_paths * t_window)
    half_floor = cfg.density_floor / 2.0

    density = np.empty((etas.size, total))
    af_loo = np.empty((etas.size, total))

    # evaluation rows processed in path-aligned chunks to bound memory
    paths_per_chunk = max(1, _CHUNK_ENTRIES // max(m * total, 1))
    for lo in range(0, n_paths, paths_per_chunk):
        hi = min(lo + paths_per_chunk, n_paths)
        rows = slice(lo * m, hi * m)
        n_chunk = hi - lo
        diff = pts[rows, None] - pts[None, :]
        np.square(diff, out=diff)
        buf = np.empty_like(diff)
        chunk_incs = incs[rows].reshape(n_chunk, m)
        for e_idx, eta in enumerate(etas):
            weights = _kernel_from_sq(cfg.kernel, diff, eta, out=buf)
            density[e_idx, rows] = weights.sum(axis=1) * (dt * scale)
            if n_paths == 1:
                af_loo[e_idx, rows] = 0.0  # no other paths to borrow from
                continue
            af_all = (weights @ incs) * scale
            # subtract the evaluation path's own numerator contribution
            idx = np.arange(n_chunk)
            own_blocks = weights.reshape(n_chunk, m, n_paths, m)[idx, :, lo + idx, :]
            own = np.einsum("imn,in->im", own_blocks, chunk_incs)
            af_loo[e_idx, rows] = af_all - own.ravel() * scale

    ratio = np.zeros_like(af_loo)
    keep = density > half_floor
    np.divide(af_loo, density, out=ratio, where=keep)
    ratio[~keep] = 0.0
    criteria = (ratio * ratio).sum(axis=1) * dt - 2.0 * (ratio @ incs)

    order = np.argsort(etas, kind="stable")  # ties resolve to the smaller eta
    best = order[0]
    for idx in order[1:]:
        if criteria[idx] < criteria[best]:
            best = idx
    return LoocvSelection(eta=float(etas[best]), eta_grid=etas, criteria=criteria)


def _kernel_from_sq(
    kernel: KernelSpec, sq_diff: np.ndarray, eta: float, out: np.ndarray | None = None
) -> np.ndarray:
    """Scaled kernel weights from squared point differences."""
    if out is None:
        out = np.empty_like(sq_diff)
    if kernel.family == "gaussian":
        np.multiply(sq_diff, -0.5 / (eta * eta), out=out)
        np.exp(out, out=out)
        out *= 1.0 / (eta * np.sqrt(2.0 * np.pi))
        return out
    np.multiply(sq_diff, -1.0 / (eta * eta), out=out)
    out += 1.0
    np.maximum(out, 0.0, out=out)
    cube = out * out
    out *= cube
    out *= 35.0 / (32.0 * eta)
    return out
