"""Smoothing kernels: densities, rescaled densities and antiderivatives.

Two families are supported: the Gaussian density (unbounded support, used by
the default estimation pipeline) and the triweight density
(35/32)(1 - u^2)^3 on [-1, 1], which is twice continuously differentiable
with pdf and pdf' vanishing at the support endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

GAUSSIAN = "gaussian"
TRIWEIGHT = "triweight"
_FAMILIES = (GAUSSIAN, TRIWEIGHT)

_SQRT_2PI = np.sqrt(2.0 * np.pi)
# Normalizer of (1 - u^2)^3 on [-1, 1]: the integral is 32/35.
_TRIWEIGHT_NORM = 35.0 / 32.0


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family selector; `family` is 'gaussian' or 'triweight'."""

    family: str = GAUSSIAN

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}"
            )

    @property
    def cdf_strictly_increasing(self) -> bool:
        """Whether the antiderivative is strictly increasing on all of R.

        True for unbounded-support families (gaussian); compact-support
        families saturate at exactly 0 and 1 outside their support.
        """
        return self.family == GAUSSIAN


def _as_checked_array(u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.isnan(arr).any():
        raise ValueError("kernel argument contains NaN")
    return arr


def _maybe_scalar(arr: np.ndarray, like) -> float | np.ndarray:
    if np.isscalar(like) or np.ndim(like) == 0:
        return float(arr)
    return arr


def pdf(kernel: KernelSpec, u) -> float | np.ndarray:
    """Kernel density K(u); accepts scalars or arrays."""
    arr = _as_checked_array(u)
    if kernel.family == GAUSSIAN:
        out = np.exp(-0.5 * arr * arr) / _SQRT_2PI
    else:
        t = 1.0 - arr * arr
        out = np.where(t > 0.0, _TRIWEIGHT_NORM * t * t * t, 0.0)
    return _maybe_scalar(out, u)


def pdf_scaled(kernel: KernelSpec, u, bandwidth: float) -> float | np.ndarray:
    """Rescaled density K_b(u) = K(u / b) / b for bandwidth b > 0."""
    if not np.isfinite(bandwidth) or bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be positive and finite, got {bandwidth}")
    arr = _as_checked_array(u)
    out = pdf(kernel, arr / bandwidth) / bandwidth
    return _maybe_scalar(np.asarray(out), u)


def cdf(kernel: KernelSpec, u) -> float | np.ndarray:
    """Antiderivative of the density, i.e. integral of K from -inf to u.

    Gaussian values come from the error function; triweight values from the
    closed-form polynomial antiderivative, clamped to [0, 1] outside the
    support.
    """
    arr = _as_checked_array(u)
    if kernel.family == GAUSSIAN:
        out = ndtr(arr)
    else:
        c = np.clip(arr, -1.0, 1.0)
        c2 = c * c
        # odd part of the antiderivative of (35/32)(1 - u^2)^3
        odd = c * (1.0 - c2 * (1.0 - c2 * (0.6 - c2 / 7.0)))
        out = np.clip(0.5 + _TRIWEIGHT_NORM * odd, 0.0, 1.0)
        # saturate exactly at and beyond the support edges
        out = np.where(arr >= 1.0, 1.0, np.where(arr <= -1.0, 0.0, out))
    return _maybe_scalar(np.asarray(out), u)
