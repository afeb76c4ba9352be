"""Box-count curves over dyadic scales and finite-scale dimension estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .attractor import RasterGrid


class CountCurveError(ValueError):
    pass


@dataclass(frozen=True)
class CountCurve:
    """Samples (j, delta_j = 2^-j, N_delta_j) with j increasing."""

    samples: tuple[tuple[int, float, int], ...]
    dim: int

    def __post_init__(self):
        samples = tuple((int(j), float(d), int(c)) for j, d, c in self.samples)
        object.__setattr__(self, "samples", samples)
        check_curve(self)

    @property
    def j(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def counts(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples])

    def to_csv(self) -> str:
        lines = ["j,delta,count"]
        lines += [f"{j},{d:.17g},{c}" for j, d, c in self.samples]
        return "\n".join(lines) + "\n"


def check_curve(curve: CountCurve) -> None:
    prev = None
    for j, delta, count in curve.samples:
        if delta != math.ldexp(1.0, -j):
            raise CountCurveError(f"delta at j={j} is {delta}, expected 2^-{j}")
        if count <= 0:
            raise CountCurveError(f"count at j={j} is not positive")
        if prev is not None:
            pj, pc = prev
            if j != pj + 1:
                raise CountCurveError("scales must be consecutive and increasing")
            if not pc <= count <= pc * 2**curve.dim:
                raise CountCurveError(
                    f"count {count} at j={j} is not within [{pc}, {pc * 2**curve.dim}] of the previous scale"
                )
        prev = (j, count)


def count_curve(generator: Callable[[float], RasterGrid], j_range: tuple[int, int], refine: int = 1,
                per_scale: bool = False) -> CountCurve:
    """Count occupied cells at delta = 2^-j for j in j_range (inclusive).

    By default one raster is generated at 2^-(j_max + refine) and the coarser
    counts are read off it by merging cells, which makes the monotonicity and
    2^n-splitting invariants hold exactly. ``per_scale=True`` calls the
    generator once per scale instead and raises if those invariants fail.
    """
    j_min, j_max = j_range
    if j_min < 1 or j_max < j_min:
        raise ValueError(f"bad j_range {j_range}")
    samples = []
    if per_scale:
        dim = None
        for j in range(j_min, j_max + 1):
            grid = generator(math.ldexp(1.0, -j))
            dim = grid.dim
            samples.append((j, math.ldexp(1.0, -j), grid.count))
        return CountCurve(tuple(samples), dim)
    finest = j_max + refine
    grid = generator(math.ldexp(1.0, -finest))
    return curve_from_raster(grid, j_range, finest)


def curve_from_raster(grid: RasterGrid, j_range: tuple[int, int], j_of_grid: int) -> CountCurve:
    j_min, j_max = j_range
    if j_max > j_of_grid:
        raise ValueError("raster is coarser than the finest requested scale")
    samples = []
    for j in range(j_min, j_max + 1):
        samples.append((j, math.ldexp(1.0, -j), grid.coarsen(j_of_grid - j).count))
    return CountCurve(tuple(samples), grid.dim)


@dataclass(frozen=True)
class DimEstimate:
    """Least-squares slope of log2 N against j over ``window``, with the
    largest and smallest two-point slopes in the window as upper and lower
    proxies. These are finite-scale proxies, not the limsup/liminf."""

    ols_slope: float
    upper_proxy: float
    lower_proxy: float
    window: tuple[int, int]

    def as_dict(self, prefix: str = "") -> dict:
        return {
            f"{prefix}ols_slope": self.ols_slope,
            f"{prefix}upper_proxy": self.upper_proxy,
            f"{prefix}lower_proxy": self.lower_proxy,
            f"{prefix}window": f"{self.window[0]}:{self.window[1]}",
        }


def default_window(js) -> tuple[int, int]:
    js = sorted(js)
    half = max(2, math.ceil(len(js) / 2))
    return js[-half], js[-1]


def estimate_dims(curve: CountCurve, window: tuple[int, int] | None = None) -> DimEstimate:
    if len(curve.samples) < 4:
        raise ValueError("need at least 4 samples to estimate a dimension")
    js = curve.j
    if window is None:
        window = default_window(js)
    lo, hi = window
    sel = (js >= lo) & (js <= hi)
    if sel.sum() < 2:
        raise ValueError(f"window {window} holds fewer than 2 samples")
    x = js[sel].astype(float)
    counts = curve.counts[sel].astype(float)
    y = np.log2(counts)
    xc = x - x.mean()
    # valid curves have every step in [0, n]; clipping only absorbs rounding
    slope = float(np.clip(np.dot(xc, y - y.mean()) / np.dot(xc, xc), 0, curve.dim))
    steps = np.log2(counts[1:] / counts[:-1])
    return DimEstimate(slope, float(steps.max()), float(steps.min()), (int(x[0]), int(x[-1])))


def format_report(values: dict) -> str:
    """Flat ``key = value`` lines; floats with 17 significant digits."""
    lines = []
    for key, val in values.items():
        if isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, float):
            text = f"{val:.17g}"
        else:
            text = str(val)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
