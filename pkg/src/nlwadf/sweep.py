"""Parameter sweep over noise levels and filter settings, written as CSV."""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .esf import GammaSchedule, estimate_sigma_gs
from .filter import FilterParams, run_filter
from .metrics import evaluate
from .noise import NoiseSpec, add_noise
from .nonlocal_diffusion import NonLocalConfig, NonLocalLinks, build_links, run_nlwadf
from .volume import Boundary, make_adjacency

__all__ = ["CSV_HEADER", "SweepGrid", "SweepRow", "load_grid", "parse_grid", "run_sweep"]

CSV_HEADER = (
    "row_type", "variant", "noise_model", "noise_level", "realization",
    "conservativeness", "gamma_retention", "sr", "pr", "pd", "num_patches",
    "gamma0", "iterations", "mse", "psnr", "ssim", "iqi",
)


@dataclass
class SweepGrid:
    gamma_retention: tuple[float, ...] = (0.16, 0.32, 0.48, 0.64, 0.80, 0.96)
    conservativeness: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8, 1.0)
    sr: tuple[float, ...] = (2.0, 3.0, 4.0)
    pr: tuple[float, ...] = (1.1, 1.5, 1.8, 1.9)
    pd: tuple[float, ...] = (0.5, 1.0, 2.0)
    num_patches: tuple[int, ...] = (1, 2)
    noise_levels: tuple[float, ...] = (0.01, 0.03, 0.05, 0.07, 0.09)
    variants: tuple[str, ...] = ("wadf", "nlwadf")
    noise_model: tuple[str, ...] = ("gaussian",)
    realizations: tuple[int, ...] = (1,)
    adjacency: tuple[int, ...] = (0,)
    boundary: tuple[str, ...] = ("count-in-bounds",)
    max_iterations: tuple[int, ...] = (1000,)

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name):
                raise ValueError(f"sweep grid key {f.name!r} has no values")
        bad = set(self.variants) - {"wadf", "nlwadf"}
        if bad:
            raise ValueError(f"unknown sweep variants {sorted(bad)}")
        for key in ("noise_model", "realizations", "adjacency", "boundary", "max_iterations"):
            if len(getattr(self, key)) != 1:
                raise ValueError(f"sweep grid key {key!r} takes a single value")

    def wadf_points(self):
        return list(itertools.product(self.gamma_retention, self.conservativeness))

    def nlwadf_points(self):
        return list(itertools.product(self.sr, self.pr, self.pd, self.num_patches,
                                      self.gamma_retention, self.conservativeness))

    def size(self) -> int:
        per_image = 0
        if "wadf" in self.variants:
            per_image += len(self.wadf_points())
        if "nlwadf" in self.variants:
            per_image += len(self.nlwadf_points())
        return per_image * len(self.noise_levels) * self.realizations[0]


_INT_KEYS = {"num_patches", "realizations", "adjacency", "max_iterations"}
_STR_KEYS = {"variants", "noise_model", "boundary"}


def parse_grid(text: str) -> SweepGrid:
    """Parse ``key = v1, v2, ...`` lines (``#`` starts a comment) over the defaults."""
    known = {f.name for f in fields(SweepGrid)}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"grid line {lineno}: expected 'key = v1, v2, ...'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"grid line {lineno}: unknown key {key!r}")
        items = [v.strip() for v in value.split(",") if v.strip()]
        try:
            if key in _STR_KEYS:
                parsed = tuple(items)
            elif key in _INT_KEYS:
                parsed = tuple(int(v) for v in items)
            else:
                parsed = tuple(float(v) for v in items)
        except ValueError:
            raise ValueError(f"grid line {lineno}: bad value list {value!r} for {key}") from None
        overrides[key] = parsed
    return SweepGrid(**overrides)


def load_grid(path) -> SweepGrid:
    return parse_grid(Path(path).read_text())


@dataclass
class SweepRow:
    variant: str
    noise_model: str
    noise_level: float
    realization: int
    conservativeness: float
    gamma_retention: float
    sr: float | None
    pr: float | None
    pd: float | None
    num_patches: int | None
    gamma0: float
    iterations: int
    mse: float
    psnr: float
    ssim: float
    iqi: float

    def cells(self) -> list[str]:
        vals = ["run", self.variant, self.noise_model, self.noise_level, self.realization,
                self.conservativeness, self.gamma_retention, self.sr, self.pr, self.pd,
                self.num_patches, self.gamma0, self.iterations, self.mse, self.psnr,
                self.ssim, self.iqi]
        return [_fmt(v) for v in vals]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _noise_seed(seed: int, level_index: int, realization: int) -> int:
    ss = np.random.SeedSequence([seed, level_index, realization])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _adjacency(grid: SweepGrid, ndim: int):
    size = grid.adjacency[0] or (8 if ndim == 2 else 26)
    return make_adjacency(ndim, size)


def _tasks(grid, seed):
    """Noise settings for each (level, realization), in grid order."""
    model = grid.noise_model[0]
    for li, level in enumerate(grid.noise_levels):
        for r in range(grid.realizations[0]):
            spec = NoiseSpec(model, level, _noise_seed(seed, li, r))
            yield {"level": level, "realization": r, "spec": spec}


def run_sweep(truth, grid: SweepGrid, seed: int = 0, jobs: int = 1, log=None) -> list[SweepRow]:
    """Run every grid point on every noisy copy of ``truth``.

    Noise is generated once per (level, realization) and shared by all grid
    points. Rows come back in grid order whatever ``jobs`` is.
    """
    truth = np.asarray(truth, dtype=np.float64)
    adj = _adjacency(grid, truth.ndim)
    bp = Boundary.parse(grid.boundary[0])
    max_iter = grid.max_iterations[0]
    rows: list[SweepRow] = []

    for ctx in _tasks(grid, seed):
        noisy = add_noise(truth, ctx["spec"])
        sigma = estimate_sigma_gs(noisy, adj, bp)
        link_cache: dict[tuple[float, float], NonLocalLinks] = {}
        jobs_list = []
        if "wadf" in grid.variants:
            jobs_list += [("wadf", None, r, c) for r, c in grid.wadf_points()]
        if "nlwadf" in grid.variants:
            max_p = max(grid.num_patches)
            for sr, pr in itertools.product(grid.sr, grid.pr):
                cfg = NonLocalConfig(sr, pr, 1.0, max_p)
                link_cache[(sr, pr)] = build_links(noisy, cfg, adj, bp)
            jobs_list += [("nlwadf", (sr, pr, pd, p), r, c)
                          for sr, pr, pd, p, r, c in grid.nlwadf_points()]

        def run_one(job):
            variant, nl, retention, cons = job
            try:
                params = FilterParams(GammaSchedule(cons * sigma, retention), "wadf", adj, bp,
                                      max_iterations=max_iter)
                if variant == "wadf":
                    out, report = run_filter(noisy, params)
                else:
                    sr, pr, pd, p = nl
                    full = link_cache[(sr, pr)]
                    links = NonLocalLinks(np.ascontiguousarray(full.indices[:, :p]), float(pd))
                    out, report = run_nlwadf(noisy, params, NonLocalConfig(sr, pr, pd, p), links)
            except Exception as exc:
                raise RuntimeError(
                    f"sweep run failed at variant={variant} level={ctx['level']} "
                    f"realization={ctx['realization']} retention={retention} "
                    f"conservativeness={cons} nonlocal={nl}: {exc}"
                ) from exc
            m = evaluate(out, truth)
            sr, pr, pd, p = nl if nl else (None, None, None, None)
            return SweepRow(variant, grid.noise_model[0], ctx["level"], ctx["realization"],
                            cons, retention, sr, pr, pd, p, cons * sigma,
                            report.iterations_run, m.mse, m.psnr, m.ssim, m.iqi)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows.extend(pool.map(run_one, jobs_list))
        else:
            rows.extend(run_one(job) for job in jobs_list)
        if log:
            log(f"noise level {ctx['level']} realization {ctx['realization']}: "
                f"{len(jobs_list)} runs done")
    return rows


def aggregate(rows: list[SweepRow]) -> list[dict]:
    """Mean iterations and metrics per (variant, retention), in first-seen order."""
    groups: dict[tuple[str, float], list[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.variant, row.gamma_retention), []).append(row)
    out = []
    for (variant, retention), members in groups.items():
        out.append({
            "variant": variant,
            "gamma_retention": retention,
            "count": len(members),
            "iterations": float(np.mean([m.iterations for m in members])),
            "mse": float(np.mean([m.mse for m in members])),
            "psnr": float(np.mean([m.psnr for m in members])),
            "ssim": float(np.mean([m.ssim for m in members])),
            "iqi": float(np.mean([m.iqi for m in members])),
        })
    return out


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.cells())
    for agg in aggregate(rows):
        writer.writerow([_fmt(v) for v in (
            "mean", agg["variant"], "", "", "", "", agg["gamma_retention"], "", "", "", "",
            "", agg["iterations"], agg["mse"], agg["psnr"], agg["ssim"], agg["iqi"])])
    return buf.getvalue()


def summary_table(rows: list[SweepRow]) -> str:
    lines = [f"{'variant':<8} {'retention':>9} {'IQI':>8} {'MSE':>10} {'PSNR':>7} {'runs':>5}"]
    for agg in aggregate(rows):
        lines.append(f"{agg['variant']:<8} {agg['gamma_retention']:>9.2f} {agg['iqi']:>8.4f} "
                     f"{agg['mse']:>10.4f} {agg['psnr']:>7.2f} {agg['count']:>5d}")
    return "\n".join(lines)
