"""Backend dispatch for the hot kernels.

The numba backend is used when numba imports cleanly. Setting the
environment variable ``NLWADF_DISABLE_NUMBA`` to a non-empty value other
than ``0``/``false`` selects the pure-numpy fallback at import time.
``use_backend`` switches temporarily (benchmarks, parity tests).
"""

import contextlib
import importlib
import os

import numpy as np

_FALSY = ("", "0", "false", "no", "off")


def _load(name):
    return importlib.import_module(f"{__name__}._{name}")


def _initial():
    if os.environ.get("NLWADF_DISABLE_NUMBA", "").strip().lower() not in _FALSY:
        return _load("numpy")
    try:
        return _load("numba")
    except ImportError:
        return _load("numpy")


_active = _initial()


def available_backends():
    names = ["numpy"]
    try:
        _load("numba")
    except ImportError:
        pass
    else:
        names.insert(0, "numba")
    return names


def backend_name():
    return _active.NAME


def get_backend(name):
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    return _load(name)


def set_backend(name):
    global _active
    _active = get_backend(name)


@contextlib.contextmanager
def use_backend(name):
    global _active
    previous = _active
    _active = get_backend(name)
    try:
        yield _active
    finally:
        _active = previous


def diffuse(img, offsets, weights, gamma, periodic, links=None, link_weight=1.0):
    if links is None:
        links = np.empty((img.size, 0), dtype=np.int64)
    return _active.diffuse(img, offsets, weights, float(gamma), bool(periodic), links,
                           float(link_weight))


def gradient_sum(img, offsets, periodic):
    return _active.gradient_sum(img, offsets, bool(periodic))


def median(img, offsets, periodic):
    return _active.median(img, offsets, bool(periodic))


def build_links(guide, cand_offsets, cand_dist, patch_offsets, num_patches, periodic):
    return _active.build_links(guide, cand_offsets, cand_dist, patch_offsets,
                               int(num_patches), bool(periodic))
