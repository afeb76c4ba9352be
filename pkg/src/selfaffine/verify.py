"""Numerical checks of the dimension bounds and of the sufficient conditions
for equality: the kappa condition, the projection condition and the
condensation open set condition on rectangles.

Everything here is falsification at finite scales, never proof: each
verifier reports its estimates and tolerances alongside the verdict.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .affinity import DEFAULT_PRESSURE_BUDGET, affinity_estimate
from .attractor import (
    CellAccumulator,
    CondensationImages,
    _homogeneous,
    _orbital,
    cell_indices,
    condensation_raster,
    ellipsoid_images,
    RasterGrid,
)
from .boxdim import DimEstimate, curve_from_raster, estimate_dims
from .ifs import (
    DEFAULT_STOPPING_BUDGET,
    IFS,
    BoundingBall,
    CondensationSet,
    System,
    discretize,
    normalize,
    stopping_nodes,
)


class UnsupportedDimensionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# sandwich bound

@dataclass
class BoundReport:
    dim_F0: DimEstimate
    dim_C: DimEstimate
    dim_FC: DimEstimate
    s_upper: float
    lower_bound_ok: bool
    upper_bound_ok: bool
    slack: float
    curves: dict = field(default_factory=dict, repr=False)

    @staticmethod
    def flags(dim_F0, dim_C, dim_FC, s_upper, slack) -> tuple[bool, bool]:
        lower = max(dim_F0.ols_slope, dim_C.ols_slope) <= dim_FC.ols_slope + slack
        upper = dim_FC.ols_slope <= max(s_upper, dim_C.ols_slope) + slack
        return lower, upper

    def recompute_flags(self) -> tuple[bool, bool]:
        return self.flags(self.dim_F0, self.dim_C, self.dim_FC, self.s_upper, self.slack)

    @property
    def ok(self) -> bool:
        return self.lower_bound_ok and self.upper_bound_ok

    def as_dict(self) -> dict:
        out = {}
        out.update(self.dim_F0.as_dict("dim_F0."))
        out.update(self.dim_C.as_dict("dim_C."))
        out.update(self.dim_FC.as_dict("dim_FC."))
        out.update(
            {
                "s_upper": self.s_upper,
                "slack": self.slack,
                "lower_bound_ok": self.lower_bound_ok,
                "upper_bound_ok": self.upper_bound_ok,
            }
        )
        return out


def _as_system(ifs_or_system, c=None, ball=None) -> System:
    if isinstance(ifs_or_system, System):
        return ifs_or_system
    return normalize(ifs_or_system, c, ball)


def target_curves(system: System, j_range, refine: int = 1, budget: int = DEFAULT_STOPPING_BUDGET,
                  workers: int = 1, window=None) -> dict:
    """Count curves and estimates for C, F_empty and F_C from one finest raster each."""
    finest = j_range[1] + refine
    delta = math.ldexp(1.0, -finest)
    corner = system.ball.corner
    f0 = _homogeneous(system, delta, None, budget, workers, False)
    orb = _orbital(system, delta, budget, workers, False)
    fc = CellAccumulator(delta, corner)
    fc.merge(f0)
    fc.merge(orb)
    grids = {
        "F0": RasterGrid(delta, corner.copy(), f0.cells()),
        "C": condensation_raster(system, delta),
        "FC": RasterGrid(delta, corner.copy(), fc.cells()),
    }
    out = {}
    for name, grid in grids.items():
        curve = curve_from_raster(grid, j_range, finest)
        out[name] = (curve, estimate_dims(curve, window))
    return out


def verify_sandwich(ifs, c: CondensationSet | None = None, j_range=(4, 11), tol: float = 0.1, *,
                    ball: BoundingBall | None = None, k_max: int = 12, refine: int = 1,
                    budget: int = DEFAULT_STOPPING_BUDGET, pressure_budget: int = DEFAULT_PRESSURE_BUDGET,
                    workers: int = 1, window=None) -> BoundReport:
    """Compare finite-scale slopes of F_empty, C and F_C with the affinity upper bound.

    ``ifs`` may also be an already normalised :class:`System`.
    """
    system = _as_system(ifs, c, ball)
    curves = target_curves(system, j_range, refine, budget, workers, window)
    s_upper = affinity_estimate(system.ifs, k_max, pressure_budget, workers).upper
    d0, dc, dfc = curves["F0"][1], curves["C"][1], curves["FC"][1]
    lower, upper = BoundReport.flags(d0, dc, dfc, s_upper, tol)
    return BoundReport(d0, dc, dfc, s_upper, lower, upper, tol, {k: v[0] for k, v in curves.items()})


# ---------------------------------------------------------------------------
# kappa condition

@dataclass
class KappaReport:
    per_delta: dict[float, float]
    kappa_floor: float
    words: dict[float, int] = field(default_factory=dict)

    def rows(self) -> list[tuple[float, int, float]]:
        return [(d, self.words.get(d, 0), self.per_delta[d]) for d in sorted(self.per_delta, reverse=True)]

    def to_csv(self) -> str:
        lines = ["delta,words,min_ratio"]
        lines += [f"{d:.17g},{w},{r:.17g}" for d, w, r in self.rows()]
        return "\n".join(lines) + "\n"


def _owner_counts(chunks, n_owners: int, delta: float, origin: np.ndarray) -> np.ndarray:
    rows = []
    for pts, owner in chunks:
        cells = cell_indices(pts, delta, origin)
        rows.append(np.unique(np.column_stack([owner, cells]), axis=0))
    if not rows:
        return np.zeros(n_owners, dtype=np.int64)
    uniq = np.unique(np.concatenate(rows), axis=0)
    return np.bincount(uniq[:, 0], minlength=n_owners)


def kappa_ratios(system: System, delta: float, budget: int = DEFAULT_STOPPING_BUDGET) -> np.ndarray:
    """N_delta(S_w(C)) / N_delta(S_w(X)) for every w in the n-delta-stopping."""
    if system.condensation is None:
        raise ValueError("the kappa condition needs a condensation set")
    images = CondensationImages(system.condensation)
    origin = system.ball.corner
    out = []
    for nodes in stopping_nodes(system.ifs, system.dim, delta, budget):
        c_chunks = list(images.emit(nodes, delta, with_owner=True))
        x_chunks = list(ellipsoid_images(nodes, system.ball, delta, with_owner=True))
        n_c = _owner_counts(c_chunks, len(nodes), delta, origin)
        # C lies inside X, so S_w(C) samples count towards S_w(X) as well
        n_x = _owner_counts(c_chunks + x_chunks, len(nodes), delta, origin)
        out.append(n_c / n_x)
    return np.concatenate(out) if out else np.zeros(0)


def kappa_condition(ifs, c: CondensationSet | None = None, ball: BoundingBall | None = None,
                    delta_list: Sequence[float] = tuple(2.0**-j for j in range(4, 11)),
                    budget: int = DEFAULT_STOPPING_BUDGET) -> KappaReport:
    system = _as_system(ifs, c, ball)
    per_delta, words = {}, {}
    for delta in delta_list:
        if not 0 < delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {delta}")
        ratios = kappa_ratios(system, float(delta), budget)
        per_delta[float(delta)] = float(ratios.min())
        words[float(delta)] = int(ratios.size)
    return KappaReport(per_delta, min(per_delta.values()), words)


# ---------------------------------------------------------------------------
# projections

def projection_measures(c: CondensationSet, angles: int = 720, delta_proj: float = 1e-4) -> np.ndarray:
    """Length of the projection of C onto the line at angle pi*k/angles, k < angles.

    C is sampled at spacing delta_proj/2 and every projected sample is
    thickened to an interval of width delta_proj; the union length is exact
    for that thickened set.
    """
    if c.dim != 2:
        raise UnsupportedDimensionError("projection measures are only implemented in the plane")
    if angles < 4:
        raise ValueError("need at least 4 angles")
    pts = discretize(c, delta_proj)
    theta = np.pi * np.arange(angles) / angles
    dirs = np.stack([np.cos(theta), np.sin(theta)])
    out = np.empty(angles)
    step = max(1, (1 << 22) // max(1, len(pts)))
    for s in range(0, angles, step):
        proj = np.sort(pts @ dirs[:, s : s + step], axis=0)
        gaps = np.minimum(np.diff(proj, axis=0), delta_proj)
        out[s : s + step] = delta_proj + gaps.sum(axis=0)
    return out


def projection_measure_min(c: CondensationSet, angles: int = 720, delta_proj: float = 1e-4) -> float:
    return float(projection_measures(c, angles, delta_proj).min())


# ---------------------------------------------------------------------------
# condensation open set condition on a rectangle

@dataclass
class CoscResult:
    ok: bool
    clause: str | None = None
    index: tuple[int, ...] | None = None
    point: tuple[float, ...] | None = None
    eta: float | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def as_dict(self) -> dict:
        out = {"cosc_ok": self.ok}
        if self.eta is not None:
            out["cosc_eta"] = self.eta
        if not self.ok:
            out["cosc_failed_clause"] = self.clause
            if self.index is not None:
                out["cosc_maps"] = ",".join(str(i + 1) for i in self.index)
            if self.point is not None:
                out["cosc_point"] = ",".join(f"{v:.17g}" for v in self.point)
            out["cosc_message"] = self.message
        return out


def _rect_corners(lower, upper) -> np.ndarray:
    (x0, y0), (x1, y1) = lower, upper
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def _separated(p: np.ndarray, q: np.ndarray, tol: float) -> bool:
    """Separating-axis test for convex polygons; touching boundaries count as separated."""
    for poly in (p, q):
        edges = np.roll(poly, -1, axis=0) - poly
        for e in edges:
            axis = np.array([-e[1], e[0]])
            norm = np.hypot(*axis)
            if norm == 0:
                continue
            axis /= norm
            a, b = p @ axis, q @ axis
            if min(a.max(), b.max()) - max(a.min(), b.min()) <= tol:
                return True
    return False


def _dist_to_polygon_boundary(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    best = np.full(len(points), np.inf)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        ab = b - a
        t = np.clip(((points - a) @ ab) / max(ab @ ab, 1e-300), 0.0, 1.0)
        d = np.linalg.norm(points - (a + t[:, None] * ab), axis=1)
        best = np.minimum(best, d)
    return best


def cosc_check_rect(ifs: IFS, c: CondensationSet, lower, upper, tol: float = 1e-9,
                    sample: float = 1e-3) -> CoscResult:
    """Check the COSC for U the open rectangle (lower, upper) in the plane.

    Clauses: (a) S_i(U) inside U, (b) the S_i(U) pairwise disjoint, (c) C inside
    U but outside every closed image. On success ``eta`` is half the sampled
    distance from C to the boundary of U and to the images.
    """
    if ifs.dim != 2 or c.dim != 2:
        raise UnsupportedDimensionError("the rectangular COSC check is planar")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != (2,) or upper.shape != (2,) or np.any(upper <= lower):
        raise ValueError("U must be given by lower and upper corners of a non-degenerate rectangle")
    corners = _rect_corners(lower, upper)
    images = [corners @ f.linear.T + f.translation for f in ifs.maps]

    for i, img in enumerate(images):
        outside = np.any((img < lower - tol) | (img > upper + tol), axis=1)
        if outside.any():
            k = int(np.flatnonzero(outside)[0])
            return CoscResult(False, "a", (i,), tuple(map(float, img[k])),
                              message=f"S_{i + 1}(U) is not contained in U")

    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            if not _separated(images[i], images[j], tol):
                return CoscResult(False, "b", (i, j),
                                  message=f"S_{i + 1}(U) and S_{j + 1}(U) overlap")

    pts = discretize(c, sample)
    inside = np.all((pts > lower) & (pts < upper), axis=1)
    if not inside.all():
        k = int(np.flatnonzero(~inside)[0])
        return CoscResult(False, "c", (), tuple(map(float, pts[k])), message="C is not inside U")
    for i, f in enumerate(ifs.maps):
        pre = np.linalg.solve(f.linear, (pts - f.translation).T).T
        hit = np.all((pre >= lower - tol) & (pre <= upper + tol), axis=1)
        if hit.any():
            k = int(np.flatnonzero(hit)[0])
            return CoscResult(False, "c", (i,), tuple(map(float, pts[k])),
                              message=f"C meets the closure of S_{i + 1}(U)")

    gap = np.min(np.concatenate([pts - lower, upper - pts], axis=1), axis=1)
    for img in images:
        gap = np.minimum(gap, _dist_to_polygon_boundary(pts, img))
    return CoscResult(True, eta=float(gap.min()) / 2.0)
