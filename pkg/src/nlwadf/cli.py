"""Command-line interface: ``nlwadf {add-noise,filter,metrics,sweep,phantom}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, _kernels
from .esf import GammaSchedule, estimate_gamma0
from .filter import FilterParams, run_filter
from .io import ELEMENT_TYPES, read_volume, write_volume
from .metrics import evaluate
from .noise import NoiseSpec, add_noise
from .nonlocal_diffusion import NonLocalConfig, run_nlwadf
from .phantom import make_phantom
from .sweep import SweepGrid, load_grid, rows_to_csv, run_sweep, summary_table
from .volume import Boundary, Volume, make_adjacency

_NONLOCAL_FLAGS = ("sr", "pr", "pd", "patches")


def _fmt(x: float) -> str:
    if x != x:
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def cmd_add_noise(args) -> int:
    if not 0 < args.level <= 1:
        raise ValueError(f"--level must lie in (0, 1], got {args.level}")
    vol = read_volume(args.input)
    noisy = add_noise(vol, NoiseSpec(args.model, args.level, args.seed))
    write_volume(vol.with_data(noisy), args.output, element_type=args.dtype)
    return 0


def cmd_filter(args, parser) -> int:
    given = [f for f in _NONLOCAL_FLAGS if getattr(args, f) is not None]
    if args.variant != "nlwadf" and given:
        parser.error(f"--{', --'.join(given)} only apply to --variant nlwadf")
    if args.variant != "adf" and args.lam is not None:
        parser.error("--lambda only applies to --variant adf")

    vol = read_volume(args.input)
    adj = make_adjacency(vol.ndim, args.adjacency) if args.adjacency else None
    bp = Boundary.parse(args.boundary)
    if args.gamma0 is not None:
        gamma0 = args.gamma0
    else:
        gamma0 = estimate_gamma0(vol, args.conservativeness, adj, bp).gamma0
    schedule = GammaSchedule(gamma0, args.retention, args.stop_fraction)
    variant = "adf" if args.variant == "adf" else "wadf"
    params = FilterParams(schedule, variant, adj, bp, args.lam, args.max_iters)
    if args.variant == "nlwadf":
        cfg = NonLocalConfig(
            4.0 if args.sr is None else args.sr,
            1.1 if args.pr is None else args.pr,
            0.5 if args.pd is None else args.pd,
            2 if args.patches is None else args.patches,
        )
        out, report = run_nlwadf(vol, params, cfg)
    else:
        out, report = run_filter(vol, params)
    write_volume(vol.with_data(out), args.output, element_type=args.dtype)
    final = report.final_gamma
    print(f"variant={args.variant} gamma0={_fmt(gamma0)} iterations={report.iterations_run} "
          f"final_gamma={'none' if final is None else _fmt(final)} stopped_by={report.stopped_by}")
    return 0


def cmd_metrics(args) -> int:
    m = evaluate(read_volume(args.filtered), read_volume(args.reference))
    print(",".join(_fmt(v) for v in (m.mse, m.psnr, m.ssim, m.iqi)))
    return 0


def cmd_sweep(args) -> int:
    grid = load_grid(args.grid) if args.grid else SweepGrid()
    truth = read_volume(args.ground_truth)
    print(f"sweep: {grid.size()} runs ({len(grid.noise_levels)} noise levels, "
          f"variants {', '.join(grid.variants)}, backend {_kernels.backend_name()})")
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    rows = run_sweep(truth, grid, seed=args.seed, jobs=args.jobs, log=log)
    Path(args.output).write_text(rows_to_csv(rows), encoding="ascii", newline="\n")
    print(summary_table(rows))
    return 0


def cmd_phantom(args) -> int:
    write_volume(Volume(make_phantom(args.size, args.full_scale)), args.output,
                 element_type=args.dtype)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlwadf", description="Weighted and non-local anisotropic diffusion filtering.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    dtypes = tuple(ELEMENT_TYPES)

    p = sub.add_parser("add-noise", help="inject seeded Gaussian or Rician noise")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--model", choices=("gaussian", "rician"), default="gaussian")
    p.add_argument("--level", type=float, required=True,
                   help="noise std as a fraction of the image maximum, e.g. 0.07")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=dtypes)

    p = sub.add_parser("filter", help="denoise with ADF, WADF or NL-WADF")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--variant", choices=("adf", "wadf", "nlwadf"), default="wadf")
    p.add_argument("--conservativeness", type=float, default=0.4,
                   help="gamma0 as a multiple of the gradient-sum spread (default 0.4)")
    p.add_argument("--gamma0", type=float, help="explicit initial gamma; skips estimation")
    p.add_argument("--retention", type=float, default=0.8,
                   help="gamma multiplier per iteration (default 0.8)")
    p.add_argument("--stop-fraction", type=float, default=0.01)
    p.add_argument("--adjacency", type=int, choices=(4, 8, 6, 18, 26))
    p.add_argument("--boundary", choices=("clamp", "periodic"), default="clamp")
    p.add_argument("--lambda", dest="lam", type=float, help="ADF rate (default: stability limit)")
    p.add_argument("--sr", type=float, help="search radius in pixels (default 4.0)")
    p.add_argument("--pr", type=float, help="patch radius in pixels (default 1.1)")
    p.add_argument("--pd", type=float, help="distance assigned to matched patches (default 0.5)")
    p.add_argument("--patches", type=int, help="number of matched patches (default 2)")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--dtype", choices=dtypes)

    p = sub.add_parser("metrics", help="print mse,psnr,ssim,iqi as one CSV line")
    p.add_argument("filtered")
    p.add_argument("reference")

    p = sub.add_parser("sweep", help="grid sweep over noise levels and filter settings")
    p.add_argument("ground_truth")
    p.add_argument("output", help="CSV file to write")
    p.add_argument("--grid", help="key = v1, v2, ... file overriding the default grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("phantom", help="write the three-level synthetic phantom")
    p.add_argument("output")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--full-scale", type=float, default=100.0)
    p.add_argument("--dtype", choices=dtypes)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="nlwadf: %(levelname)s: %(message)s")
    try:
        if args.command == "add-noise":
            return cmd_add_noise(args)
        if args.command == "filter":
            return cmd_filter(args, parser)
        if args.command == "metrics":
            return cmd_metrics(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_phantom(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"nlwadf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
