"""Command line front end.

Exit codes: 0 success, 1 error, 2 a verification ran and failed.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .affinity import affinity_estimate
from .attractor import (
    _homogeneous,
    _orbital,
    RasterGrid,
    condensation_raster,
    target_raster,
    write_points_csv,
)
from .boxdim import count_curve, estimate_dims, format_report
from .config import load_config
from .ifs import discretize
from .verify import (
    cosc_check_rect,
    kappa_condition,
    projection_measures,
    verify_sandwich,
)

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _window(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected jlo:jhi, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="config file (bundled examples are found by name)")
    common.add_argument("--jmin", type=int, help="coarsest scale, delta = 2^-jmin")
    common.add_argument("--jmax", type=int, help="finest scale, delta = 2^-jmax")
    common.add_argument("--window", type=_window, help="slope window jlo:jhi")
    common.add_argument("--budget", type=int, help="word enumeration budget (stoppings and pressure sums)")
    common.add_argument("--tol", type=float, help="slack for the sandwich bounds")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="seed for randomised sampling")
    common.add_argument("--angles", type=int, help="number of projection angles")
    common.add_argument("--workers", type=int, default=1, help="worker threads")

    parser = argparse.ArgumentParser(prog="selfaffine", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("affinity", parents=[common], help="s_k sequence and affinity dimension bound")
    p.add_argument("--kmax", type=int, help="largest word length")

    for name, helptext in (("attract", "points CSV and raster PGM"), ("render", "raster PGM")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--target", choices=["C", "F0", "O", "FC"], default="FC")
        p.add_argument("--delta", type=float, help="cell size; defaults to 2^-jmax")

    p = sub.add_parser("boxdim", parents=[common], help="box-count curve and slopes")
    p.add_argument("--target", choices=["C", "F0", "O", "FC"], default="FC")

    p = sub.add_parser("verify", parents=[common], help="bounds and sufficient conditions")
    p.add_argument("--sandwich", action="store_true")
    p.add_argument("--kappa", action="store_true")
    p.add_argument("--cosc", action="store_true")
    p.add_argument("--projection", action="store_true")
    p.add_argument("--kmax", type=int)
    return parser


def _load(args):
    cfg = load_config(args.config)
    j_range = (args.jmin or cfg.j_range[0], args.jmax or cfg.j_range[1])
    return cfg.with_overrides(
        j_range=j_range,
        window=args.window,
        stopping_budget=args.budget,
        pressure_budget=args.budget,
        tolerance=args.tol,
        seed=args.seed,
        angles=args.angles,
        k_max=getattr(args, "kmax", None),
    )


def _write(out: Path, name: str, data) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(data)
    return path


def _emit(out: Path, values: dict) -> None:
    text = format_report(values)
    _write(out, "report.txt", text)
    sys.stdout.write(text)


def cmd_affinity(cfg, args, out: Path) -> int:
    est = affinity_estimate(cfg.ifs(), cfg.k_max, cfg.pressure_budget, args.workers)
    values = {"affinity_upper_bound": est.upper, "affinity_estimate": est.extrapolated}
    values.update({f"s_{k}": v for k, v in est.sequence})
    values.update({"k_max": est.k_max, "convergence": est.convergence})
    _emit(out, values)
    print(f"affinity dimension <= {est.upper:.6f} (UPPER-BOUND, k <= {est.k_max}); "
          f"{est.extrapolated:.6f} (ESTIMATE)")
    return EXIT_OK


def _raster(cfg, system, target: str, delta: float, workers: int) -> RasterGrid:
    return target_raster(system, target, delta, cfg.stopping_budget, workers)


def cmd_render(cfg, args, out: Path, with_points: bool = False) -> int:
    system = cfg.system()
    if system.dim != 2:
        raise ValueError("rendering needs a planar system")
    delta = args.delta if args.delta is not None else math.ldexp(1.0, -cfg.j_range[1])
    if with_points:
        if args.target == "C":
            pts = discretize(system.condensation, delta)
        elif args.target == "F0":
            pts = _homogeneous(system, delta, None, cfg.stopping_budget, args.workers, True).points()
        else:
            acc = _orbital(system, delta, cfg.stopping_budget, args.workers, True)
            if args.target == "FC":
                acc.merge(_homogeneous(system, delta, None, cfg.stopping_budget, args.workers, True))
            pts = acc.points()
        _write(out, "points.csv", "")
        write_points_csv(out / "points.csv", system.normalization.inverse(pts))
    grid = _raster(cfg, system, args.target, delta, args.workers)
    _write(out, "raster.pgm", grid.to_pgm())
    _emit(out, {"target": args.target, "delta": delta, "occupied_cells": grid.count})
    return EXIT_OK


def cmd_boxdim(cfg, args, out: Path) -> int:
    system = cfg.system()
    if args.target == "C":
        gen = lambda d: condensation_raster(system, d)  # noqa: E731
    else:
        gen = lambda d: _raster(cfg, system, args.target, d, args.workers)  # noqa: E731
    curve = count_curve(gen, cfg.j_range, cfg.refine)
    est = estimate_dims(curve, cfg.window)
    _write(out, f"curve_{args.target}.csv", curve.to_csv())
    _emit(out, {"target": args.target, **est.as_dict()})
    return EXIT_OK


def cmd_verify(cfg, args, out: Path) -> int:
    chosen = [k for k in ("sandwich", "kappa", "cosc", "projection") if getattr(args, k)]
    if not chosen:
        chosen = ["sandwich", "kappa"]
        if cfg.cosc is not None:
            chosen.append("cosc")
        if cfg.dim == 2 and cfg.condensation:
            chosen.append("projection")
    values: dict = {}
    failed = False
    c = cfg.condensation_set()
    if c is None:
        raise ValueError("verification needs a condensation set")
    if "sandwich" in chosen:
        rep = verify_sandwich(
            cfg.system(), j_range=cfg.j_range, tol=cfg.tolerance, k_max=cfg.k_max, refine=cfg.refine,
            budget=cfg.stopping_budget, pressure_budget=cfg.pressure_budget, workers=args.workers,
            window=cfg.window,
        )
        values.update(rep.as_dict())
        values["sandwich"] = "PASS" if rep.ok else "FAIL"
        failed |= not rep.ok
        for name, curve in rep.curves.items():
            _write(out, f"sandwich_{name}.csv", curve.to_csv())
    if "kappa" in chosen:
        deltas = [math.ldexp(1.0, -j) for j in range(cfg.kappa_j_range[0], cfg.kappa_j_range[1] + 1)]
        rep = kappa_condition(cfg.system(), delta_list=deltas, budget=cfg.stopping_budget)
        ok = rep.kappa_floor > cfg.kappa_floor
        values.update({"kappa_floor": rep.kappa_floor, "kappa_threshold": cfg.kappa_floor,
                       "kappa": "PASS" if ok else "FAIL"})
        failed |= not ok
        _write(out, "kappa.csv", rep.to_csv())
    if "cosc" in chosen:
        if cfg.cosc is None:
            raise ValueError("--cosc needs a [cosc] section with the rectangle U")
        res = cosc_check_rect(cfg.ifs(), c, *cfg.cosc)
        values.update(res.as_dict())
        values["cosc"] = "PASS" if res.ok else "FAIL"
        failed |= not res.ok
    if "projection" in chosen:
        meas = projection_measures(c, cfg.angles)
        low = float(meas.min())
        ok = low > cfg.projection_floor
        values.update({"projection_min": low, "projection_threshold": cfg.projection_floor,
                       "projection": "PASS" if ok else "FAIL"})
        failed |= not ok
        rows = ["angle,measure"] + [f"{math.pi * k / cfg.angles:.17g},{m:.17g}" for k, m in enumerate(meas)]
        _write(out, "projection.csv", "\n".join(rows) + "\n")
    _emit(out, values)
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        cfg = _load(args)
        if args.command == "affinity":
            return cmd_affinity(cfg, args, out)
        if args.command == "attract":
            return cmd_render(cfg, args, out, with_points=True)
        if args.command == "render":
            return cmd_render(cfg, args, out)
        if args.command == "boxdim":
            return cmd_boxdim(cfg, args, out)
        return cmd_verify(cfg, args, out)
    except Exception as exc:  # reported, not raised: the exit code carries it
        print(f"selfaffine {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
