"""Non-local weighted diffusion.

Each pixel gets up to ``num_patches`` extra diffusion partners: the centers
of the most similar patches inside a search radius. Similarity is measured
once, on a median-filtered guide, and the partners are then treated as
neighbors at a fixed synthetic distance for the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .filter import FilterParams, FilterRunReport, diffusion_step, iterate_schedule
from .volume import (
    Adjacency,
    Boundary,
    ConfigurationError,
    as_image,
    default_adjacency,
    euclidean_offsets,
    median_filter,
    pad_offsets,
    to3d,
)

__all__ = [
    "NonLocalConfig",
    "NonLocalLinks",
    "PatchShape",
    "build_links",
    "nlwadf_step",
    "patch_offsets",
    "patch_ssd",
    "run_nlwadf",
]

GUIDES = ("median", "raw")


@dataclass(frozen=True)
class PatchShape:
    radius: float
    offsets: np.ndarray

    @property
    def size(self) -> int:
        return self.offsets.shape[0]


def patch_offsets(radius: float, num_axes: int = 2) -> PatchShape:
    """All integer offsets (zero included) no longer than ``radius``, lexicographic."""
    if not radius > 0:
        raise ConfigurationError(f"patch radius must be positive, got {radius}")
    offs = euclidean_offsets(num_axes, radius, include_zero=True)
    offs.setflags(write=False)
    return PatchShape(float(radius), offs)


@dataclass(frozen=True)
class NonLocalConfig:
    """Search radius, patch radius, synthetic partner distance and partner count.

    ``num_patches=0`` is allowed and reduces NL-WADF to plain WADF.
    ``guide`` is ``"median"`` (median-prefiltered image) or ``"raw"``.
    """

    search_radius: float = 4.0
    patch_radius: float = 1.1
    patch_distance: float = 0.5
    num_patches: int = 2
    guide: str = "median"

    def __post_init__(self):
        if not self.search_radius >= 1:
            raise ConfigurationError(f"search radius must be >= 1, got {self.search_radius}")
        if not self.patch_radius > 0:
            raise ConfigurationError(f"patch radius must be positive, got {self.patch_radius}")
        if not self.patch_distance > 0:
            raise ConfigurationError(f"patch distance must be positive, got {self.patch_distance}")
        if self.num_patches < 0:
            raise ConfigurationError(f"num_patches must be >= 0, got {self.num_patches}")
        if self.guide not in GUIDES:
            raise ConfigurationError(f"guide must be one of {GUIDES}, got {self.guide!r}")

    def search_offsets(self, num_axes: int) -> tuple[np.ndarray, np.ndarray]:
        offs = euclidean_offsets(num_axes, self.search_radius, include_zero=False)
        return offs, np.sqrt((offs * offs).sum(axis=1).astype(np.float64))


@dataclass(frozen=True)
class NonLocalLinks:
    """Partner flat indices per pixel, ``-1`` marking an unused slot.

    Each row is sorted best match first. All partners sit at ``distance``.
    """

    indices: np.ndarray
    distance: float

    @property
    def num_patches(self) -> int:
        return self.indices.shape[1]

    def partners(self, s: int) -> list[int]:
        row = self.indices[s]
        return [int(q) for q in row if q >= 0]


def patch_ssd(guide, a: int, b: int, shape: PatchShape,
              bp: Boundary | str = Boundary.COUNT_IN_BOUNDS) -> float:
    """Mean squared difference between the patches centered at flat indices a and b.

    Only offsets valid around both centers count. Returns inf when none do.
    """
    arr = as_image(guide)
    periodic = Boundary.parse(bp) is Boundary.PERIODIC
    ca = np.array(np.unravel_index(a, arr.shape))
    cb = np.array(np.unravel_index(b, arr.shape))
    dims = np.array(arr.shape)
    total = 0.0
    count = 0
    for off in shape.offsets:
        pa, pb = ca + off, cb + off
        if periodic:
            pa, pb = pa % dims, pb % dims
        elif np.any(pa < 0) or np.any(pa >= dims) or np.any(pb < 0) or np.any(pb >= dims):
            continue
        diff = arr[tuple(pa)] - arr[tuple(pb)]
        total += diff * diff
        count += 1
    return total / count if count else float("inf")


def build_links(image, cfg: NonLocalConfig, adj: Adjacency | None = None,
                bp: Boundary | str = Boundary.COUNT_IN_BOUNDS) -> NonLocalLinks:
    """Match every pixel to its ``cfg.num_patches`` most similar patch centers.

    Candidates lie within ``search_radius`` (Euclidean, self excluded). Ties
    in patch SSD go to the nearer candidate, then to the smaller flat index.
    """
    arr = as_image(image)
    adj = adj or default_adjacency(arr.ndim)
    periodic = Boundary.parse(bp) is Boundary.PERIODIC
    cand, cand_dist = cfg.search_offsets(arr.ndim)
    if cand.shape[0] < cfg.num_patches:
        raise ConfigurationError(
            f"search radius {cfg.search_radius} offers {cand.shape[0]} candidates, "
            f"fewer than num_patches={cfg.num_patches}"
        )
    if periodic:
        reach = int(np.floor(cfg.search_radius))
        if any(n <= 2 * reach for n in arr.shape):
            raise ConfigurationError(
                f"periodic matching needs every axis longer than {2 * reach} pixels, got {arr.shape}"
            )
    if cfg.num_patches == 0:
        return NonLocalLinks(np.empty((arr.size, 0), dtype=np.int64), float(cfg.patch_distance))
    guide = median_filter(arr, adj, bp) if cfg.guide == "median" else arr
    shape = patch_offsets(cfg.patch_radius, arr.ndim)
    idx = _kernels.build_links(to3d(guide), pad_offsets(cand), cand_dist,
                               pad_offsets(shape.offsets), cfg.num_patches, periodic)
    return NonLocalLinks(idx, float(cfg.patch_distance))


def nlwadf_step(image, links: NonLocalLinks, gamma: float, adj: Adjacency | None = None,
                bp: Boundary | str = Boundary.COUNT_IN_BOUNDS) -> np.ndarray:
    """One WADF update whose neighborhood also includes the non-local partners.

    The flux sum is normalized by the local neighbor count plus the number
    of partners actually linked for that pixel.
    """
    arr = as_image(image)
    adj = adj or default_adjacency(arr.ndim)
    if adj.ndim != arr.ndim:
        raise ConfigurationError(f"{adj.ndim}D adjacency used on a {arr.ndim}D image")
    if links.indices.shape[0] != arr.size:
        raise ValueError(f"links cover {links.indices.shape[0]} pixels, image has {arr.size}")
    return diffusion_step(arr, gamma, adj, bp, 1.0 / adj.distances,
                          np.ascontiguousarray(links.indices, dtype=np.int64), links.distance)


def run_nlwadf(image, params: FilterParams, cfg: NonLocalConfig,
               links: NonLocalLinks | None = None) -> tuple[np.ndarray, FilterRunReport]:
    """Build the partner links once, then iterate NL-WADF under the gamma schedule.

    ``params.variant`` must be ``"wadf"``. Precomputed ``links`` may be
    passed to skip matching.
    """
    arr = as_image(image)
    if params.variant != "wadf":
        raise ConfigurationError("NL-WADF extends the weighted filter; use variant='wadf'")
    adj, _ = params.resolved(arr.ndim)
    bp = params.boundary
    if params.schedule.gamma0 == 0:
        return arr.copy(), FilterRunReport(0, [], "gamma-threshold")
    if links is None:
        links = build_links(arr, cfg, adj, bp)
    idx = np.ascontiguousarray(links.indices, dtype=np.int64)
    weights = 1.0 / adj.distances

    def step(cur, gamma):
        return diffusion_step(cur, gamma, adj, bp, weights, idx, links.distance)

    return iterate_schedule(arr, params.schedule, params.max_iterations, step)
