"""Tukey edge-stopping function and the gamma schedule that drives it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .volume import (
    Adjacency,
    Boundary,
    ConfigurationError,
    as_image,
    default_adjacency,
    pad_offsets,
    to3d,
)

__all__ = [
    "GammaEstimate",
    "GammaSchedule",
    "directional_gradient_sum",
    "estimate_gamma0",
    "estimate_sigma_gs",
    "lambda_max",
    "should_stop",
    "tukey",
]

SQRT5 = math.sqrt(5.0)

# Largest stable diffusion rate per (axes, adjacency size).
_LAMBDA_MAX = {
    (2, 4): Fraction(4, 5),
    (2, 8): Fraction(8, 7),
    (3, 6): Fraction(6, 7),
    (3, 18): Fraction(18, 13),
    (3, 26): Fraction(78, 47),
}


def tukey(grad, gamma):
    """Tukey biweight edge-stopping function.

    Returns ``(1 - (grad / (sqrt(5) * gamma))**2)**2`` for
    ``|grad| <= sqrt(5) * gamma`` and 0 beyond. Works elementwise on arrays.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    lim = SQRT5 * gamma
    g = np.asarray(grad, dtype=np.float64)
    u = g / lim
    out = np.where(np.abs(g) <= lim, (1.0 - u * u) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


def lambda_max_fraction(num_axes: int, adjacency_size: int) -> Fraction:
    try:
        return _LAMBDA_MAX[(num_axes, adjacency_size)]
    except KeyError:
        raise ConfigurationError(
            f"no stability limit for {adjacency_size}-adjacency in {num_axes}D"
        ) from None


def lambda_max(num_axes: int, adjacency_size: int) -> float:
    """Maximum ADF rate that keeps each iteration free of new extrema."""
    return float(lambda_max_fraction(num_axes, adjacency_size))


def should_stop(gamma_t: float, i_max: float, stop_fraction: float = 0.01) -> bool:
    if not i_max > 0:
        raise ValueError(f"stopping rule needs a positive maximum intensity, got {i_max}")
    return gamma_t <= stop_fraction * i_max


@dataclass(frozen=True)
class GammaSchedule:
    """Geometric gamma decay: ``gamma_t = gamma0 * retention**t``.

    ``gamma0 == 0`` is accepted and means there is nothing to filter.
    """

    gamma0: float
    retention: float
    stop_fraction: float = 0.01

    def __post_init__(self):
        if not (self.gamma0 >= 0 and math.isfinite(self.gamma0)):
            raise ConfigurationError(f"gamma0 must be finite and >= 0, got {self.gamma0}")
        if not 0 < self.retention < 1:
            raise ConfigurationError(f"retention must lie in (0, 1), got {self.retention}")
        if not 0 < self.stop_fraction < 1:
            raise ConfigurationError(f"stop_fraction must lie in (0, 1), got {self.stop_fraction}")

    def gamma_at(self, t: int) -> float:
        return self.gamma0 * self.retention ** t


@dataclass(frozen=True)
class GammaEstimate:
    sigma_gs: float
    conservativeness: float

    def __post_init__(self):
        if not self.sigma_gs >= 0:
            raise ValueError(f"sigma_gs must be >= 0, got {self.sigma_gs}")
        if not 0 < self.conservativeness <= 1:
            raise ConfigurationError(
                f"conservativeness must lie in (0, 1], got {self.conservativeness}"
            )

    @property
    def gamma0(self) -> float:
        return self.conservativeness * self.sigma_gs


def _resolve(arr, adj):
    adj = adj or default_adjacency(arr.ndim)
    if adj.ndim != arr.ndim:
        raise ConfigurationError(f"{adj.ndim}D adjacency used on a {arr.ndim}D image")
    return adj


def directional_gradient_sum(image, adj: Adjacency | None = None,
                             bp: Boundary | str = Boundary.COUNT_IN_BOUNDS) -> np.ndarray:
    """Per-pixel sum of ``I_s - I_p`` over the available neighbors ``p``.

    Isolated noise gives large magnitudes; on a straight edge the
    contributions from the two sides largely cancel.
    """
    arr = as_image(image)
    adj = _resolve(arr, adj)
    periodic = Boundary.parse(bp) is Boundary.PERIODIC
    return _kernels.gradient_sum(to3d(arr), pad_offsets(adj.offsets), periodic).reshape(arr.shape)


def estimate_sigma_gs(image, adj: Adjacency | None = None,
                      bp: Boundary | str = Boundary.COUNT_IN_BOUNDS,
                      top_fraction: float = 0.05) -> float:
    """Population std of ``|G_s|`` over the ``top_fraction`` largest pixels.

    The cutoff is the ``ceil(top_fraction * N)``-th largest magnitude; every
    pixel tied with it is included.
    """
    arr = as_image(image)
    if not 0 < top_fraction <= 1:
        raise ValueError(f"top_fraction must lie in (0, 1], got {top_fraction}")
    if arr.size * top_fraction < 1:
        raise ValueError(
            f"{arr.size} pixels is too few to take the top {top_fraction:.0%} of gradient sums"
        )
    mags = np.abs(directional_gradient_sum(arr, adj, bp)).ravel()
    k = math.ceil(top_fraction * mags.size)
    cutoff = np.partition(mags, mags.size - k)[mags.size - k]
    top = mags[mags >= cutoff]
    return float(np.std(top))


def estimate_gamma0(image, conservativeness: float, adj: Adjacency | None = None,
                    bp: Boundary | str = Boundary.COUNT_IN_BOUNDS,
                    top_fraction: float = 0.05) -> GammaEstimate:
    return GammaEstimate(estimate_sigma_gs(image, adj, bp, top_fraction), conservativeness)
