"""Scalar image/volume container, neighborhoods and boundary handling.

Arrays follow numpy axis order, ``(ny, nx)`` or ``(nz, ny, nx)``, stored
C-contiguous so that x is the fastest-varying index. ``Volume.dims`` and
``Volume.spacing`` are reported x-first, the way file headers list them.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "Adjacency",
    "Boundary",
    "ConfigurationError",
    "Volume",
    "as_image",
    "default_adjacency",
    "make_adjacency",
    "max_intensity",
    "median_filter",
    "neighbors",
]

VALID_ADJACENCIES = {2: (4, 8), 3: (6, 18, 26)}


class ConfigurationError(ValueError):
    """Invalid combination of filter settings."""


class Boundary(str, enum.Enum):
    """How neighbors that fall outside the grid are treated.

    ``COUNT_IN_BOUNDS`` drops them, so border pixels see fewer neighbors.
    ``PERIODIC`` wraps indices around every axis.
    """

    COUNT_IN_BOUNDS = "count-in-bounds"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, value: "Boundary | str") -> "Boundary":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key in ("clamp", "count-in-bounds", "count_in_bounds"):
            return cls.COUNT_IN_BOUNDS
        if key in ("periodic", "wrap"):
            return cls.PERIODIC
        raise ConfigurationError(f"unknown boundary policy {value!r}")


@dataclass(frozen=True)
class Volume:
    """Dense 2D or 3D image with float64 intensities.

    ``data`` is coerced to a C-contiguous float64 copy. ``spacing`` is the
    physical voxel size per axis, x-first, and defaults to 1.0.
    """

    data: np.ndarray
    spacing: tuple[float, ...] | None = None

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim not in (2, 3):
            raise ValueError(f"expected a 2D or 3D array, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("volume is empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("volume contains NaN or infinite intensities")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        spacing = self.spacing
        if spacing is None:
            spacing = (1.0,) * arr.ndim
        spacing = tuple(float(s) for s in spacing)
        if len(spacing) != arr.ndim:
            raise ValueError(f"spacing has {len(spacing)} entries for a {arr.ndim}D volume")
        object.__setattr__(self, "spacing", spacing)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        """Extent per axis, x first."""
        return tuple(reversed(self.data.shape))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def with_data(self, data) -> "Volume":
        return Volume(data, self.spacing)


def as_image(image) -> np.ndarray:
    """Coerce a Volume or array-like to a float64 2D/3D array."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected a 2D or 3D image, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("image is empty")
    return arr


def to3d(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    return arr[np.newaxis] if arr.ndim == 2 else arr


def pad_offsets(offsets: np.ndarray) -> np.ndarray:
    """Left-pad 2D offsets with a zero z component for the 3D kernels."""
    offsets = np.asarray(offsets, dtype=np.int64)
    out = np.zeros((offsets.shape[0], 3), dtype=np.int64)
    out[:, 3 - offsets.shape[1]:] = offsets
    return out


@dataclass(frozen=True)
class Adjacency:
    """Local neighborhood: integer offsets (array axis order) and their lengths."""

    offsets: np.ndarray
    distances: np.ndarray = field(repr=False)

    @property
    def ndim(self) -> int:
        return self.offsets.shape[1]

    @property
    def size(self) -> int:
        return self.offsets.shape[0]

    def __len__(self):
        return self.size


def make_adjacency(num_axes: int, size: int) -> Adjacency:
    """Standard neighborhood of ``size`` pixels in ``num_axes`` dimensions.

    4 and 6 are the unit axis offsets, 8 and 26 every offset in the unit
    cube, 18 the cube offsets no longer than sqrt(2).
    """
    if size not in VALID_ADJACENCIES.get(num_axes, ()):
        raise ConfigurationError(
            f"no {size}-adjacency in {num_axes}D; valid sizes: {VALID_ADJACENCIES.get(num_axes, ())}"
        )
    max_sq = {4: 1, 6: 1, 18: 2, 8: num_axes, 26: num_axes}[size]
    offsets = [
        off for off in itertools.product((-1, 0, 1), repeat=num_axes)
        if 0 < sum(c * c for c in off) <= max_sq
    ]
    offsets = np.array(offsets, dtype=np.int64)
    offsets.setflags(write=False)
    distances = np.sqrt((offsets * offsets).sum(axis=1).astype(np.float64))
    distances.setflags(write=False)
    return Adjacency(offsets, distances)


def default_adjacency(num_axes: int) -> Adjacency:
    return make_adjacency(num_axes, 8 if num_axes == 2 else 26)


def neighbors(image, s: int, adj: Adjacency, bp: Boundary | str = Boundary.COUNT_IN_BOUNDS):
    """Neighbors of the pixel with flat index ``s`` as ``(flat_index, distance)`` pairs."""
    arr = as_image(image)
    bp = Boundary.parse(bp)
    if not 0 <= s < arr.size:
        raise IndexError(f"pixel index {s} out of range for {arr.size} pixels")
    if adj.ndim != arr.ndim:
        raise ConfigurationError(f"{adj.ndim}D adjacency used on a {arr.ndim}D image")
    coord = np.unravel_index(s, arr.shape)
    result = []
    for off, dist in zip(adj.offsets, adj.distances):
        q = [int(c) + int(o) for c, o in zip(coord, off)]
        if bp is Boundary.PERIODIC:
            q = [c % n for c, n in zip(q, arr.shape)]
        elif any(c < 0 or c >= n for c, n in zip(q, arr.shape)):
            continue
        result.append((int(np.ravel_multi_index(q, arr.shape)), float(dist)))
    return result


def max_intensity(image) -> float:
    arr = np.asarray(image, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("max_intensity of an empty volume")
    return float(arr.max())


def median_filter(image, adj: Adjacency | None = None,
                  bp: Boundary | str = Boundary.COUNT_IN_BOUNDS) -> np.ndarray:
    """Median over each pixel and its available neighbors.

    Even-sized sets (border pixels) take the mean of the two middle values.
    """
    arr = as_image(image)
    adj = adj or default_adjacency(arr.ndim)
    if adj.ndim != arr.ndim:
        raise ConfigurationError(f"{adj.ndim}D adjacency used on a {arr.ndim}D image")
    out = _kernels.median(to3d(arr), pad_offsets(adj.offsets), Boundary.parse(bp) is Boundary.PERIODIC)
    return out.reshape(arr.shape)


def euclidean_offsets(num_axes: int, radius: float, include_zero: bool) -> np.ndarray:
    """Integer offsets with norm <= radius, in lexicographic order."""
    r = int(math.floor(radius))
    offs = [
        off for off in itertools.product(range(-r, r + 1), repeat=num_axes)
        if sum(c * c for c in off) <= radius * radius and (include_zero or any(off))
    ]
    return np.array(offs, dtype=np.int64).reshape(-1, num_axes)
