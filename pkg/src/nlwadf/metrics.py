"""Global full-reference quality metrics: MSE, PSNR, SSIM and IQI.

SSIM and IQI are computed over the whole image as a single window, with
population statistics. The SSIM stabilizers scale with the squared pixel
count (``c1 = 1e-4 * N**2``, ``c2 = 9e-4 * N**2``), which drives SSIM to 1
on anything but tiny images.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["MetricsReport", "evaluate", "iqi", "mse", "psnr", "ssim"]


def _pair(i, j):
    a = np.asarray(i, dtype=np.float64)
    b = np.asarray(j, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("metrics of empty images")
    return a.ravel(), b.ravel()


def _stats(a, b):
    mu_a = a.mean()
    mu_b = b.mean()
    da = a - mu_a
    db = b - mu_b
    return mu_a, mu_b, np.mean(da * da), np.mean(db * db), np.mean(da * db)


def mse(i, j) -> float:
    a, b = _pair(i, j)
    d = a - b
    return float(np.mean(d * d))


def psnr(i, j) -> float:
    """``20 log10(max(I^M, J^M)) - 10 log10(MSE)``; ``inf`` when the images match."""
    a, b = _pair(i, j)
    err = mse(a, b)
    if err == 0:
        return math.inf
    peak = max(a.max(), b.max())
    if peak <= 0:
        return math.nan
    return 20.0 * math.log10(peak) - 10.0 * math.log10(err)


def ssim(i, j) -> float:
    a, b = _pair(i, j)
    n = a.size
    c1 = 0.0001 * n * n
    c2 = 0.0009 * n * n
    mu_a, mu_b, var_a, var_b, cov = _stats(a, b)
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(num / den)


def iqi(i, j) -> float:
    """Universal image quality index; ``nan`` when the denominator vanishes."""
    a, b = _pair(i, j)
    mu_a, mu_b, var_a, var_b, cov = _stats(a, b)
    den = (mu_a * mu_a + mu_b * mu_b) * (var_a + var_b)
    if den == 0:
        return math.nan
    return float(4 * mu_a * mu_b * cov / den)


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    psnr: float
    ssim: float
    iqi: float

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(filtered, reference) -> MetricsReport:
    return MetricsReport(mse(filtered, reference), psnr(filtered, reference),
                         ssim(filtered, reference), iqi(filtered, reference))
