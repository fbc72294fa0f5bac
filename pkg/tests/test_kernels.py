import os
import subprocess
import sys

import numpy as np
import pytest

from nlwadf import _kernels
from nlwadf.nonlocal_diffusion import NonLocalConfig, build_links
from nlwadf.volume import make_adjacency, pad_offsets, to3d

needs_numba = pytest.mark.skipif("numba" not in _kernels.available_backends(),
                                 reason="numba is not importable")


def _both(fn):
    with _kernels.use_backend("numba"):
        a = fn()
    with _kernels.use_backend("numpy"):
        b = fn()
    return a, b


@needs_numba
class TestParity:
    @pytest.mark.parametrize("ndim,size", [(2, 4), (2, 8), (3, 6), (3, 18), (3, 26)])
    @pytest.mark.parametrize("periodic", [False, True])
    def test_diffuse(self, rng, ndim, size, periodic):
        img = to3d(rng.uniform(0, 100, size=(17, 13) if ndim == 2 else (7, 6, 5)))
        adj = make_adjacency(ndim, size)
        offs = pad_offsets(adj.offsets)
        a, b = _both(lambda: _kernels.diffuse(img, offs, 1.0 / adj.distances, 20.0, periodic, None, 1.0))
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-12)

    @pytest.mark.parametrize("periodic", [False, True])
    def test_gradient_sum_and_median(self, rng, periodic):
        img = to3d(rng.normal(size=(9, 11)))
        offs = pad_offsets(make_adjacency(2, 8).offsets)
        a, b = _both(lambda: _kernels.gradient_sum(img, offs, periodic))
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
        a, b = _both(lambda: _kernels.median(img, offs, periodic))
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("bp", ["clamp", "periodic"])
    def test_links_bit_equal(self, rng, bp):
        img = rng.integers(0, 4, size=(12, 12)).astype(float)  # many ties
        a, b = _both(lambda: build_links(img, NonLocalConfig(3.0, 1.5, 0.5, 3), bp=bp).indices)
        np.testing.assert_array_equal(a, b)


def test_backend_switching():
    before = _kernels.backend_name()
    with _kernels.use_backend("numpy"):
        assert _kernels.backend_name() == "numpy"
    assert _kernels.backend_name() == before
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


@pytest.mark.parametrize("value,expected", [("1", "numpy"), ("true", "numpy"), ("0", None)])
def test_env_flag(value, expected):
    env = dict(os.environ, NLWADF_DISABLE_NUMBA=value)
    out = subprocess.run([sys.executable, "-c", "import nlwadf; print(nlwadf.backend_name())"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    if expected is None:
        expected = "numba" if "numba" in _kernels.available_backends() else "numpy"
    assert out == expected
