"""Acceptance gate: one test per criterion, each recorded for the terminal summary.

Run alone with ``pytest tests/test_acceptance.py``; the summary prints one
``[PASS]``/``[FAIL]`` line per criterion.
"""

import math
import time
from collections import Counter

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_RESULTS
from nlwadf import _kernels
from nlwadf.cli import main
from nlwadf.esf import GammaSchedule, estimate_gamma0, estimate_sigma_gs, lambda_max
from nlwadf.filter import FilterParams, adf_step, run_filter, wadf_step
from nlwadf.io import VolumeFormatError, read_volume, write_volume
from nlwadf.metrics import iqi, mse, psnr, ssim
from nlwadf.noise import NoiseSpec, add_gaussian, normal_pairs
from nlwadf.nonlocal_diffusion import NonLocalConfig, build_links, nlwadf_step, run_nlwadf
from nlwadf.phantom import make_phantom
from nlwadf.volume import Volume, make_adjacency

pytestmark = pytest.mark.acceptance

TABLE_ROWS = [(2, 4), (2, 8), (3, 6), (3, 18), (3, 26)]
RETENTIONS = (0.16, 0.32, 0.48, 0.64, 0.80, 0.96)


def record(key, ok, detail):
    ACCEPTANCE_RESULTS[key] = (bool(ok), detail)
    assert ok, detail


def _rel_err(got, want):
    scale = np.maximum(np.abs(want), 1e-300)
    return float(np.max(np.abs(got - want) / scale))


def _coords_links(links, shape):
    return {tuple(int(c) for c in np.unravel_index(s, shape)):
            [tuple(int(c) for c in np.unravel_index(q, shape)) for q in links.partners(s)]
            for s in range(links.indices.shape[0])}


# --- 1 ----------------------------------------------------------------------

def test_01_oracle_equivalence():
    rng = np.random.default_rng(1)
    cfg = NonLocalConfig(2.0, 1.1, 0.5, 2)
    cases = []
    for ndim, size in TABLE_ROWS:
        for periodic in (False, True):
            img = rng.uniform(0, 100, size=(6, 6) if ndim == 2 else (6, 6, 6))
            cases.append((ndim, size, periodic, img, 0.3 * estimate_sigma_gs(img) + 1.0))

    def run_all():
        outs = []
        for ndim, size, periodic, img, gamma in cases:
            adj = make_adjacency(ndim, size)
            bp = "periodic" if periodic else "clamp"
            links = build_links(img, cfg, adj, bp)
            outs.append((adf_step(img, gamma, adj, bp), wadf_step(img, gamma, adj, bp),
                         nlwadf_step(img, links, gamma, adj, bp), links))
        return outs

    worst = 0.0
    link_mismatch = 0
    for name in _kernels.available_backends():
        with _kernels.use_backend(name):
            outs = run_all()
        for (ndim, size, periodic, img, gamma), (a, w, nl, links) in zip(cases, outs):
            lam = lambda_max(ndim, size)
            guide = oracles.median(img, size, periodic)
            ref_links = oracles.links(guide, cfg.search_radius, cfg.patch_radius, cfg.num_patches, periodic)
            link_mismatch += _coords_links(links, img.shape) != ref_links
            worst = max(
                worst,
                _rel_err(a, oracles.step(img, gamma, size, periodic, "adf", lam=lam)),
                _rel_err(w, oracles.step(img, gamma, size, periodic, "wadf")),
                _rel_err(nl, oracles.step(img, gamma, size, periodic, "nlwadf", links=ref_links,
                                          pd=cfg.patch_distance)),
            )
    run_all()  # warm-up already done; time the active backend
    t0 = time.perf_counter()
    run_all()
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and link_mismatch == 0 and elapsed < 1.0
    record("1 oracle equivalence", ok,
           f"max rel err {worst:.2e} (tol 1e-12), link mismatches {link_mismatch}, "
           f"{len(cases)} cases x 3 filters in {elapsed:.3f}s (limit 1s), "
           f"backends {','.join(_kernels.available_backends())}")


# --- 2 ----------------------------------------------------------------------

def test_02_extremum_principle():
    rng = np.random.default_rng(2)
    nl_cfg = NonLocalConfig(2.0, 1.1, 0.5, 2)
    violations = {"adf": Counter(), "wadf": Counter(), "nlwadf": Counter()}
    worst = dict.fromkeys(violations, 0.0)
    for k in range(200):
        ndim, size = TABLE_ROWS[k % 5]
        bp = "periodic" if (k // 5) % 2 else "clamp"
        img = rng.uniform(0, 100, size=(12, 12) if ndim == 2 else (6, 6, 6))
        adj = make_adjacency(ndim, size)
        sched = GammaSchedule(estimate_gamma0(img, rng.uniform(0.2, 1.0), adj, bp).gamma0,
                              float(rng.choice([0.8, 0.96])))
        links = build_links(img, nl_cfg, adj, bp)
        steps = {
            "adf": lambda cur, g: adf_step(cur, g, adj, bp),
            "wadf": lambda cur, g: wadf_step(cur, g, adj, bp),
            "nlwadf": lambda cur, g: nlwadf_step(cur, links, g, adj, bp),
        }
        for variant, step in steps.items():
            cur = img
            for t in range(50):
                nxt = step(cur, sched.gamma_at(t))
                excess = max(nxt.max() - cur.max(), cur.min() - nxt.min())
                if excess > 1e-12:
                    violations[variant][f"{ndim}D/{size}"] += 1
                    worst[variant] = max(worst[variant], excess)
                cur = nxt
    parts = []
    for variant, counts in violations.items():
        total = sum(counts.values())
        where = ", ".join(f"{key}:{n}" for key, n in sorted(counts.items())) or "none"
        parts.append(f"{variant} {total} violating steps (worst {worst[variant]:.3g}; {where})")
    ok = all(sum(c.values()) == 0 for c in violations.values())
    record("2 extremum principle", ok,
           "200 volumes x 50 iterations, ADF at the tabulated rate, WADF, NL-WADF (PD=0.5): "
           + "; ".join(parts))


# --- 3 ----------------------------------------------------------------------

def test_03_conservation():
    rng = np.random.default_rng(3)
    worst = 0.0
    for ndim, size in TABLE_ROWS:
        img = rng.uniform(0, 100, size=(32, 32) if ndim == 2 else (12, 12, 12))
        adj = make_adjacency(ndim, size)
        sched = GammaSchedule(estimate_gamma0(img, 0.8, adj, "periodic").gamma0, 0.96)
        cur = img
        for t in range(50):
            cur = wadf_step(cur, sched.gamma_at(t), adj, "periodic")
        worst = max(worst, abs(cur.sum() - img.sum()) / abs(img.sum()))
    record("3 conservation", worst < 1e-9,
           f"periodic WADF, 50 iterations, all 5 adjacencies: max relative drift {worst:.2e} (tol 1e-9)")


# --- 4 ----------------------------------------------------------------------

def test_04_edge_preservation():
    contrast = 60.0
    gamma0 = 0.95 * contrast / math.sqrt(5)
    failures = []
    runs = 0
    for shape in ((24, 24), (10, 10, 10)):
        img = np.full(shape, 20.0)
        img[..., shape[-1] // 2:] += contrast
        for bp in ("clamp", "periodic"):
            params = FilterParams(GammaSchedule(gamma0, 0.8), boundary=bp)
            outs = {
                "adf": run_filter(img, FilterParams(GammaSchedule(gamma0, 0.8), "adf", boundary=bp)),
                "wadf": run_filter(img, params),
                "nlwadf": run_nlwadf(img, params, NonLocalConfig(3.0, 1.1, 0.5, 2)),
            }
            for variant, (out, report) in outs.items():
                runs += 1
                if report.iterations_run == 0 or not np.array_equal(out, img):
                    failures.append(f"{variant}/{len(shape)}D/{bp}")
    record("4 edge preservation", not failures,
           f"step contrast {contrast} > gamma0*sqrt(5) = {gamma0 * math.sqrt(5):.2f}; "
           f"{runs - len(failures)}/{runs} full runs bit-identical"
           + (f"; changed: {', '.join(failures)}" if failures else ""))


# --- 5 and 6 ----------------------------------------------------------------

@pytest.fixture(scope="module")
def phantom_case():
    truth = make_phantom(128)
    noisy = add_gaussian(truth, NoiseSpec("gaussian", 0.05, 0))
    return truth, noisy, psnr(noisy, truth), estimate_gamma0(noisy, 0.8).gamma0


@pytest.fixture(scope="module")
def wadf_results(phantom_case):
    truth, noisy, _, gamma0 = phantom_case
    t0 = time.perf_counter()
    scores = {}
    for r in RETENTIONS:
        out, _ = run_filter(noisy, FilterParams(GammaSchedule(gamma0, r)))
        scores[r] = psnr(out, truth)
    return scores, time.perf_counter() - t0


def test_05_denoising_efficacy(phantom_case, wadf_results):
    _, _, base, _ = phantom_case
    scores, elapsed = wadf_results
    gains = {r: s - base for r, s in scores.items()}
    best = max(scores, key=scores.get)
    all_gain = all(g >= 3.0 for g in gains.values())
    ordering = best in (0.48, 0.64, 0.80, 0.96) and scores[best] > scores[0.16]
    ok = all_gain and ordering and elapsed < 30
    table = ", ".join(f"r={r:.2f}:{gains[r]:+.2f}dB" for r in RETENTIONS)
    record("5 denoising efficacy", ok,
           f"noisy {base:.2f} dB; gain per retention {table}; best r={best:.2f}; "
           f"all >= +3 dB: {all_gain}; ordering: {ordering}; {elapsed:.1f}s (limit 30s)")


def test_06_nlwadf_parity(phantom_case, wadf_results):
    truth, noisy, base, gamma0 = phantom_case
    scores, _ = wadf_results
    t0 = time.perf_counter()
    out, report = run_nlwadf(noisy, FilterParams(GammaSchedule(gamma0, 0.32)),
                             NonLocalConfig(4.0, 1.1, 0.5, 2))
    elapsed = time.perf_counter() - t0
    nl = psnr(out, truth)
    best = max(scores.values())
    within = abs(nl - best) <= 1.0
    gain = nl - base >= 3.0
    record("6 NL-WADF parity", within and gain and elapsed < 120,
           f"NL-WADF {nl:.2f} dB vs best WADF {best:.2f} dB (diff {nl - best:+.2f}, tol +-1.0): {within}; "
           f"gain over noisy {nl - base:+.2f} dB (>= 3): {gain}; "
           f"{report.iterations_run} iterations in {elapsed:.1f}s (limit 120s)")


# --- 7 ----------------------------------------------------------------------

def test_07_metric_identities():
    rng = np.random.default_rng(7)
    problems = []
    for _ in range(20):
        img = rng.uniform(0, 255, size=tuple(rng.integers(2, 20, size=2)))
        if not (mse(img, img) == 0 and ssim(img, img) == 1 and iqi(img, img) == 1
                and psnr(img, img) == math.inf):
            problems.append("identity")
    toys = [
        (mse([[0.0, 0.0]], [[2.0, -2.0]]), 4.0),
        (mse([[1.0, 2.0, 3.0]], [[0.0, 1.0, 3.0]]), 2.0 / 3.0),
        (psnr([[0.0, 2.0]], [[2.0, 2.0]]), 10 * math.log10(2)),
        (iqi([1.0, 3.0], [1.0, 5.0]), 48 / 65),
    ]
    for _ in range(10):
        a = rng.uniform(0, 100, size=6)
        b = a + rng.normal(0, 5, size=6)
        toys.append((ssim(a, b), oracles.ssim(a, b)))
        toys.append((iqi(a, b), oracles.iqi(a, b)))
    worst = max(abs(got - want) / abs(want) for got, want in toys)
    if worst > 1e-12:
        problems.append(f"toy rel err {worst:.2e}")
    record("7 metric identities", not problems,
           f"20 self-comparisons exact; {len(toys)} toy values max rel err {worst:.2e} (tol 1e-12)"
           + (f"; problems: {problems}" if problems else ""))


# --- 8 ----------------------------------------------------------------------

def test_08_gamma_invariances():
    rng = np.random.default_rng(8)
    worst_shift = worst_scale = 0.0
    for k in range(100):
        shape = (int(rng.integers(8, 24)), int(rng.integers(8, 24)))
        if k % 4 == 3:
            shape = (6, 7, 8)
        img = rng.uniform(0, 100, size=shape)
        base = estimate_sigma_gs(img)
        shift = rng.uniform(-500, 500)
        scale = rng.uniform(0.1, 10)
        worst_shift = max(worst_shift, abs(estimate_sigma_gs(img + shift) - base) / base)
        worst_scale = max(worst_scale, abs(estimate_sigma_gs(scale * img) - scale * base) / (scale * base))
    ok = worst_shift <= 1e-9 and worst_scale <= 1e-9
    record("8 gamma estimation invariances", ok,
           f"100 images: shift rel err {worst_shift:.2e}, scale rel err {worst_scale:.2e} (tol 1e-9)")


# --- 9 ----------------------------------------------------------------------

def test_09_reproducibility(tmp_path):
    truth = tmp_path / "truth.mha"
    write_volume(Volume(make_phantom(48)), truth)
    grid = tmp_path / "grid.txt"
    grid.write_text("gamma_retention = 0.32, 0.8\nconservativeness = 0.4, 0.8\nnoise_levels = 0.03, 0.07\n"
                    "sr = 2, 3\npr = 1.1\npd = 0.5, 1\nnum_patches = 1, 2\nrealizations = 2\n")
    outs = []
    for jobs in (1, 4):
        path = tmp_path / f"run{jobs}.csv"
        assert main(["sweep", str(truth), str(path), "--grid", str(grid), "--seed", "42",
                     "--jobs", str(jobs)]) == 0
        outs.append(path.read_bytes())
    csv_same = outs[0] == outs[1]
    ref = normal_pairs(2024, 600_000, workers=1)
    noise_same = all(
        np.array_equal(ref[0], got[0]) and np.array_equal(ref[1], got[1])
        for got in (normal_pairs(2024, 600_000, workers=w, chunk_size=c)
                    for w, c in ((2, 1 << 18), (4, 1 << 16), (8, 12345)))
    )
    lines = outs[0].count(b"\n")
    record("9 reproducibility", csv_same and noise_same,
           f"sweep CSV byte-identical across reruns (jobs 1 vs 4, {lines} lines): {csv_same}; "
           f"noise bit-identical across 1/2/4/8 threads: {noise_same}")


# --- 10 ---------------------------------------------------------------------

def _mutations(blob, rng, count):
    for _ in range(count):
        data = bytearray(blob)
        kind = rng.integers(0, 4)
        if kind == 0 and data:
            data = data[:int(rng.integers(0, len(data)))]
        elif kind == 1 and data:
            for _ in range(int(rng.integers(1, 6))):
                data[int(rng.integers(0, len(data)))] = int(rng.integers(0, 256))
        elif kind == 2:
            pos = int(rng.integers(0, len(data) + 1))
            data[pos:pos] = rng.integers(0, 256, size=int(rng.integers(1, 20)), dtype=np.uint8).tobytes()
        else:
            pos = int(rng.integers(0, len(data) + 1))
            data[pos:pos] = rng.choice([b"#", b"-", b"999999999999", b"\n", b" = ", b"LOCAL", b"MET_"])
        yield bytes(data)


def test_10_io_round_trips(tmp_path):
    rng = np.random.default_rng(10)
    trips = mismatches = 0
    for k in range(150):
        pgm = rng.integers(0, 65536 if k % 2 else 256, size=tuple(rng.integers(1, 12, size=2))).astype(float)
        for fmt in ("pgm-p5", "pgm-p2"):
            write_volume(pgm, tmp_path / "rt.pgm", format=fmt)
            mismatches += not np.array_equal(read_volume(tmp_path / "rt.pgm").data, pgm)
            trips += 1
        shape = tuple(rng.integers(1, 7, size=int(rng.integers(2, 4))))
        vol = Volume(rng.normal(0, 10.0 ** rng.integers(-5, 30), size=shape),
                     spacing=tuple(rng.uniform(0.1, 3, size=len(shape))))
        for suffix in (".mha", ".mhd"):
            write_volume(vol, tmp_path / f"rt{suffix}")
            back = read_volume(tmp_path / f"rt{suffix}")
            mismatches += not (np.array_equal(back.data, vol.data) and back.spacing == vol.spacing)
            trips += 1

    seeds = [(tmp_path / "rt.pgm").read_bytes(), (tmp_path / "rt.mha").read_bytes(),
             b"P2\n3 2\n# c\n255\n1 2 3\n4 5 6\n",
             b"NDims = 2\nDimSize = 2 2\nElementType = MET_FLOAT\nElementDataFile = LOCAL\n" + bytes(16)]
    crashes = []
    fuzzed = 0
    for blob in seeds:
        for mutated in _mutations(blob, rng, 500):
            for suffix in (".pgm", ".mha"):
                path = tmp_path / f"fz{suffix}"
                path.write_bytes(mutated)
                fuzzed += 1
                try:
                    read_volume(path)
                except VolumeFormatError:
                    pass
                except Exception as exc:  # noqa: BLE001 - anything else is a crash
                    crashes.append(f"{type(exc).__name__}: {exc}"[:80])
    ok = mismatches == 0 and not crashes
    record("10 I/O round trips", ok,
           f"{trips} float64 round trips, {mismatches} mismatches; {fuzzed} fuzzed files, "
           f"{len(crashes)} non-format errors" + (f" e.g. {crashes[0]}" if crashes else ""))
