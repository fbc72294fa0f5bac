"""Seeded Gaussian and Rician noise.

Stream definition (fixed; changing it changes every sweep result):

* ``numpy.random.Philox`` (Philox4x64-10) keyed with the 64-bit seed,
  counter starting at zero; raw 64-bit words are read with ``random_raw``.
* Pixel ``i`` (flat, x-fastest) owns words ``2i`` and ``2i + 1``. Each word
  ``w`` becomes ``u = ((w >> 11) + 0.5) * 2**-53``, strictly inside (0, 1).
* Box-Muller turns ``(u1, u2)`` into ``z1 = r cos(2 pi u2)`` and
  ``z2 = r sin(2 pi u2)`` with ``r = sqrt(-2 ln u1)``.
* Gaussian noise uses ``z1``; Rician noise uses both.

Because each pixel's draws depend only on ``(seed, i)``, chunks can be
generated independently and the result is identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .volume import as_image, max_intensity

__all__ = ["NoiseSpec", "add_gaussian", "add_noise", "add_rician", "normal_pairs"]

MODELS = ("gaussian", "rician")
_SEED_LIMIT = 2 ** 64


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model, standard deviation as a fraction of the image maximum, and seed."""

    model: str = "gaussian"
    level: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"noise model must be one of {MODELS}, got {self.model!r}")
        if not 0 < self.level <= 1:
            raise ValueError(f"noise level must lie in (0, 1], got {self.level}")
        if not 0 <= int(self.seed) < _SEED_LIMIT:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


def _chunk(seed: int, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    bitgen = np.random.Philox(key=int(seed))
    # advance() steps whole counter blocks of 4 words
    block, skip = divmod(2 * start, 4)
    bitgen.advance(block)
    words = bitgen.random_raw(skip + 2 * count)[skip:]
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * math.pi * u2
    return r * np.cos(theta), r * np.sin(theta)


def normal_pairs(seed: int, n: int, workers: int = 1, chunk_size: int = 1 << 18):
    """Two independent standard-normal arrays of length ``n`` for ``seed``."""
    z1 = np.empty(n)
    z2 = np.empty(n)
    starts = range(0, n, chunk_size)

    def fill(start):
        count = min(chunk_size, n - start)
        z1[start:start + count], z2[start:start + count] = _chunk(seed, start, count)

    if workers > 1 and n > chunk_size:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    return z1, z2


def add_gaussian(image, spec: NoiseSpec, workers: int = 1) -> np.ndarray:
    """Additive N(0, (level * I^M)^2) noise. The result is not clamped."""
    arr = as_image(image)
    sigma = spec.level * max_intensity(arr)
    z1, _ = normal_pairs(spec.seed, arr.size, workers)
    return arr + sigma * z1.reshape(arr.shape)


def add_rician(image, spec: NoiseSpec, workers: int = 1) -> np.ndarray:
    """Magnitude of the image plus complex Gaussian noise, ``sigma = level * I^M``."""
    arr = as_image(image)
    if np.any(arr < 0):
        raise ValueError("Rician noise expects a non-negative magnitude image")
    sigma = spec.level * max_intensity(arr)
    z1, z2 = normal_pairs(spec.seed, arr.size, workers)
    real = arr + sigma * z1.reshape(arr.shape)
    imag = sigma * z2.reshape(arr.shape)
    return np.sqrt(real * real + imag * imag)


def add_noise(image, spec: NoiseSpec, workers: int = 1) -> np.ndarray:
    if spec.model == "gaussian":
        return add_gaussian(image, spec, workers)
    return add_rician(image, spec, workers)
