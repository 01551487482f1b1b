"""Path simulation for scalar diffusions dX = a(X) dt + s(X) dW.

Paths are generated by the Euler scheme directly on the observation grid
t_k = k * dt with dt = horizon / n_steps; no finer internal grid is used, so
simulated values are exactly the discretely observed values fed to the
estimators.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class SimulationDivergedError(RuntimeError):
    """A simulated path left the representable range (NaN/inf values)."""


class HittingTimeBudgetError(RuntimeError):
    """The level-crossing scan exhausted its step budget before finding all copies."""


def _drift_a(x):
    return -x


def _drift_b(x):
    return np.sin(1.25 * x) - 1.5 * x


def _unit_vol(x):
    return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SdeModel:
    """A scalar diffusion specification.

    Attributes
    ----------
    label : short display name.
    drift : vectorized drift coefficient a(x).
    vol : vectorized diffusion coefficient s(x).
    x0 : common starting point of every observed copy.
    slope_margin : a known lower bound on -a'(x), strictly positive for the
        strictly decreasing drifts this package targets.
    """

    label: str
    drift: Callable[[np.ndarray], np.ndarray]
    vol: Callable[[np.ndarray], np.ndarray]
    x0: float
    slope_margin: float


def builtin_model(label: str) -> SdeModel:
    """Return one of the two bundled test models.

    Model "A" is the unit-noise Ornstein-Uhlenbeck process a(x) = -x started
    at 0.5 (slope margin 1).  Model "B" has drift a(x) = sin(5x/4) - 3x/2,
    also with unit noise and x0 = 0.5; since -a'(x) = 3/2 - (5/4)cos(5x/4)
    its slope margin is 1/4.
    """
    if label == "A":
        return SdeModel("A", _drift_a, _unit_vol, 0.5, 1.0)
    if label == "B":
        return SdeModel("B", _drift_b, _unit_vol, 0.5, 0.25)
    raise ValueError(f"unknown model {label!r}; available models: A, B")


@dataclass(frozen=True)
class PathBundle:
    """N path copies observed on a common uniform grid.

    `values` has shape (n_paths, n_steps + 1); row i holds copy i at times
    0, dt, ..., horizon.
    """

    values: np.ndarray
    horizon: float
    seed: int

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1] - 1

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def increments(self) -> np.ndarray:
        """Forward differences along time, shape (n_paths, n_steps)."""
        return self.values[:, 1:] - self.values[:, :-1]


def _check_sim_args(n_steps: int, horizon: float) -> None:
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not np.isfinite(horizon) or horizon <= 0.0:
        raise ValueError(f"horizon must be positive and finite, got {horizon}")


def simulate_copies(
    model: SdeModel, n_paths: int, n_steps: int, horizon: float, seed: int
) -> PathBundle:
    """Simulate n_paths independent copies started at model.x0.

    Each path index draws from its own counter-derived substream, so path i
    is reproducible independently of n_paths.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    _check_sim_args(n_steps, horizon)
    dt = horizon / n_steps
    sqdt = np.sqrt(dt)

    children = np.random.SeedSequence(seed).spawn(n_paths)
    noise = np.empty((n_paths, n_steps))
    for i, child in enumerate(children):
        noise[i] = np.random.default_rng(child).standard_normal(n_steps)

    values = np.empty((n_paths, n_steps + 1))
    values[:, 0] = model.x0
    for k in range(n_steps):
        x = values[:, k]
        values[:, k + 1] = x + model.drift(x) * dt + model.vol(x) * sqdt * noise[:, k]

    if not np.isfinite(values).all():
        bad = int(np.nonzero(~np.isfinite(values).all(axis=1))[0][0])
        raise SimulationDivergedError(f"path {bad} produced non-finite values")
    return PathBundle(values=values, horizon=float(horizon), seed=int(seed))


def _grow_path(
    model: SdeModel, rng: np.random.Generator, values: list[float], n_new: int, dt: float
) -> None:
    """Append n_new Euler steps to `values` in place, drawing from rng."""
    sqdt = np.sqrt(dt)
    noise = rng.standard_normal(n_new)
    x = values[-1]
    for z in noise:
        x = x + float(model.drift(x)) * dt + float(model.vol(x)) * sqdt * z
        values.append(x)


def find_copy_starts(
    values: np.ndarray, level: float, n_copies: int, n_steps: int
) -> list[int]:
    """Scan a long path for successive copy start indices.

    The first copy starts at index 0 (the path starts at `level`).  Each
    later copy starts at the first grid crossing of `level` occurring after
    the previous copy's observation window: a sign change of values - level
    between consecutive grid points j, j+1 with j >= prev_start + n_steps,
    snapped to the later grid point j + 1.  Returns as many starts as found,
    up to n_copies.
    """
    s = np.asarray(values, dtype=float) - level
    prod = s[:-1] * s[1:]
    crossings = np.nonzero(prod <= 0.0)[0]  # pair indices j
    starts = [0]
    while len(starts) < n_copies:
        j_min = starts[-1] + n_steps
        pos = np.searchsorted(crossings, j_min)
        if pos >= crossings.size:
            break
        starts.append(int(crossings[pos]) + 1)
    return starts


def extract_copies_from_long_path(
    model: SdeModel,
    n_copies: int,
    n_steps: int,
    horizon: float,
    seed: int,
    max_total_steps: int | None = None,
) -> PathBundle:
    """Build a PathBundle by cutting copies out of one long simulated path.

    The long path runs on the same grid spacing dt = horizon / n_steps.
    Copy i starts at the i-th qualifying level crossing of model.x0 (see
    find_copy_starts) and spans n_steps further grid points; its first value
    is snapped to x0 exactly.  Raises HittingTimeBudgetError if
    max_total_steps (default 500 * n_copies * n_steps) Euler steps do not
    contain enough crossings.
    """
    if n_copies < 1:
        raise ValueError(f"n_copies must be >= 1, got {n_copies}")
    _check_sim_args(n_steps, horizon)
    if max_total_steps is None:
        max_total_steps = 500 * n_copies * n_steps
    dt = horizon / n_steps
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    chunk = max(8 * n_steps, 4096)

    values: list[float] = [model.x0]
    starts = [0]
    while True:
        need = starts[-1] + n_steps + 1  # enough points to close the last copy
        if len(starts) == n_copies and len(values) >= need:
            break
        capacity = max_total_steps + 1 - len(values)
        if capacity <= 0:
            complete = sum(s + n_steps + 1 <= len(values) for s in starts)
            raise HittingTimeBudgetError(
                f"found {complete} of {n_copies} complete copies within "
                f"{max_total_steps} simulated steps"
            )
        _grow_path(model, rng, values, min(chunk, capacity), dt)
        arr = np.asarray(values)
        if not np.isfinite(arr).all():
            raise SimulationDivergedError("long path produced non-finite values")
        starts = find_copy_starts(arr, model.x0, n_copies, n_steps)

    arr = np.asarray(values)
    out = np.empty((n_copies, n_steps + 1))
    for i, s0 in enumerate(starts):
        out[i] = arr[s0 : s0 + n_steps + 1]
        out[i, 0] = model.x0
    return PathBundle(values=out, horizon=float(horizon), seed=int(seed))


def write_paths_csv(bundle: PathBundle, path: str) -> None:
    """Write a bundle as CSV: a comment header, then one row per path."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# horizon={bundle.horizon!r} n_steps={bundle.n_steps} "
            f"n_paths={bundle.n_paths} seed={bundle.seed}\n"
        )
        for row in bundle.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_paths_csv(path: str) -> PathBundle:
    """Read a bundle written by write_paths_csv; values round-trip exactly."""
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if header is None:
                    header = dict(
                        item.split("=", 1) for item in line[1:].split() if "=" in item
                    )
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"{path} is not a path-bundle CSV (missing header or rows)")
    values = np.asarray(rows, dtype=float)
    horizon = float(header["horizon"])
    seed = int(header["seed"])
    expected = (int(header["n_paths"]), int(header["n_steps"]) + 1)
    if values.shape != expected:
        raise ValueError(
            f"{path}: value block has shape {values.shape}, header says {expected}"
        )
    return PathBundle(values=values, horizon=horizon, seed=seed)
