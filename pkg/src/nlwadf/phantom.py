"""Piecewise-constant test phantom."""

import numpy as np


def make_phantom(size: int = 128, full_scale: float = 100.0) -> np.ndarray:
    """Square image with three flat regions at 25%, 50% and 85% of ``full_scale``.

    Background 25%, a centered disc at 50%, and inside it an off-center
    square and a small disc at 85%.
    """
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    img = np.full((size, size), 0.25 * full_scale)
    img[(x - c) ** 2 + (y - c) ** 2 <= (0.38 * size) ** 2] = 0.50 * full_scale
    lo, hi = int(0.30 * size), int(0.50 * size)
    img[lo:hi, lo:hi] = 0.85 * full_scale
    img[(x - 0.65 * size) ** 2 + (y - 0.62 * size) ** 2 <= (0.09 * size) ** 2] = 0.85 * full_scale
    return img
