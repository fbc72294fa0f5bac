"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_backends.py [--size2d 256] [--size3d 64] [--repeat 3]

Each kernel runs once per backend to warm up (numba compiles on first call),
then the best of ``--repeat`` timings is reported. Outputs of the two
backends are compared so a speedup never hides a divergence.
"""

import argparse
import time

import numpy as np

from nlwadf import _kernels
from nlwadf.esf import directional_gradient_sum
from nlwadf.filter import wadf_step
from nlwadf.nonlocal_diffusion import NonLocalConfig, build_links, nlwadf_step
from nlwadf.volume import make_adjacency, median_filter


def _best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(size2d, size3d, rng):
    img2 = rng.uniform(0, 100, size=(size2d, size2d))
    img3 = rng.uniform(0, 100, size=(size3d,) * 3)
    adj8, adj26 = make_adjacency(2, 8), make_adjacency(3, 26)
    cfg = NonLocalConfig(4.0, 1.1, 0.5, 2)
    cfg3 = NonLocalConfig(2.0, 1.1, 0.5, 2)
    links2 = build_links(img2, cfg, adj8)
    return [
        (f"wadf step {size2d}^2 8-adj", lambda: wadf_step(img2, 20.0, adj8)),
        (f"wadf step {size3d}^3 26-adj", lambda: wadf_step(img3, 20.0, adj26)),
        (f"nlwadf step {size2d}^2", lambda: nlwadf_step(img2, links2, 20.0, adj8)),
        (f"gradient sum {size3d}^3", lambda: directional_gradient_sum(img3, adj26)),
        (f"median {size2d}^2", lambda: median_filter(img2, adj8)),
        (f"median {size3d}^3", lambda: median_filter(img3, adj26)),
        (f"links {size2d}^2 SR4", lambda: build_links(img2, cfg, adj8).indices),
        (f"links {size3d}^3 SR2", lambda: build_links(img3, cfg3, adj26).indices),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size2d", type=int, default=256)
    parser.add_argument("--size3d", type=int, default=64)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = _kernels.available_backends()
    if "numba" not in backends:
        parser.exit(1, "numba is not importable; nothing to compare\n")
    cases = _cases(args.size2d, args.size3d, np.random.default_rng(0))
    print(f"{'kernel':<24} {'numba s':>9} {'numpy s':>9} {'speedup':>8}  outputs")
    for name, fn in cases:
        timings, outputs = {}, {}
        for backend in ("numba", "numpy"):
            with _kernels.use_backend(backend):
                timings[backend], outputs[backend] = _best_of(fn, args.repeat)
        a, b = outputs["numba"], outputs["numpy"]
        if a.dtype.kind == "i":
            agree = "equal" if np.array_equal(a, b) else "DIFFER"
        else:
            agree = f"max abs diff {np.max(np.abs(a - b)):.1e}"
        print(f"{name:<24} {timings['numba']:>9.4f} {timings['numpy']:>9.4f} "
              f"{timings['numpy'] / timings['numba']:>7.1f}x  {agree}")


if __name__ == "__main__":
    main()
