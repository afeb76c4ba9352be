"""Point-set generation for F_empty, the orbital set and F_C, and their
rasterisation onto dyadic grids.

All generators expect a :class:`~selfaffine.ifs.System`, i.e. coordinates in
which the bounding ball X has unit diameter, so that ``delta`` is measured
relative to X.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ifs import (
    DEFAULT_STOPPING_BUDGET,
    BoundingBall,
    CondensationSet,
    Nodes,
    System,
    discretize,
    map_subtrees,
    root_nodes,
    walk,
)

_KEY_BASE = 1 << 21
_KEY_OFFSET = 1 << 20
_POINT_CHUNK = 1 << 22


class RasterError(ValueError):
    """Points fell outside the (inflated) bounding ball."""


# ---------------------------------------------------------------------------
# cell bookkeeping

def _encode(cells: np.ndarray) -> np.ndarray | None:
    if cells.size and (cells.min() <= -_KEY_OFFSET or cells.max() >= _KEY_OFFSET):
        return None
    key = np.zeros(cells.shape[0], dtype=np.int64)
    for d in range(cells.shape[1]):
        key = key * _KEY_BASE + (cells[:, d] + _KEY_OFFSET)
    return key


def _decode(keys: np.ndarray, n: int) -> np.ndarray:
    out = np.empty((keys.shape[0], n), dtype=np.int64)
    k = keys.copy()
    for d in range(n - 1, -1, -1):
        out[:, d] = k % _KEY_BASE - _KEY_OFFSET
        k //= _KEY_BASE
    return out


def unique_cells(cells: np.ndarray) -> np.ndarray:
    """Sorted unique rows of an integer cell array."""
    cells = np.asarray(cells, dtype=np.int64)
    if cells.shape[0] == 0:
        return cells.reshape(0, cells.shape[1] if cells.ndim == 2 else 0)
    keys = _encode(cells)
    if keys is None:
        return np.unique(cells, axis=0)
    return _decode(np.unique(keys), cells.shape[1])


def cell_indices(points: np.ndarray, delta: float, origin: np.ndarray) -> np.ndarray:
    return np.floor((np.asarray(points, dtype=float) - origin) / delta).astype(np.int64)


class CellAccumulator:
    """Deduplicates points at cell granularity as they are produced.

    With ``keep_points`` the first point seen in each cell is retained as
    that cell's representative.
    """

    def __init__(self, delta: float, origin, keep_points: bool = False):
        self.delta = float(delta)
        self.origin = np.asarray(origin, dtype=float)
        self.keep_points = keep_points
        self._cells: list[np.ndarray] = []
        self._points: list[np.ndarray] = []
        self._pending = 0

    def add(self, points: np.ndarray) -> None:
        if len(points) == 0:
            return
        cells = cell_indices(points, self.delta, self.origin)
        if self.keep_points:
            cells, first = np.unique(cells, axis=0, return_index=True)
            order = np.argsort(first, kind="stable")
            self._cells.append(cells[order])
            self._points.append(np.asarray(points)[first[order]])
        else:
            self._cells.append(unique_cells(cells))
        self._pending += len(self._cells[-1])
        if self._pending > _POINT_CHUNK:
            self._compact()

    def _compact(self) -> None:
        if not self._cells:
            return
        cells = np.concatenate(self._cells)
        if self.keep_points:
            pts = np.concatenate(self._points)
            cells, first = np.unique(cells, axis=0, return_index=True)
            order = np.argsort(first, kind="stable")
            self._cells, self._points = [cells[order]], [pts[first[order]]]
        else:
            self._cells = [unique_cells(cells)]
        self._pending = len(self._cells[0])

    def merge(self, other: "CellAccumulator") -> None:
        self._cells.extend(other._cells)
        self._points.extend(other._points)
        self._pending += other._pending
        self._compact()

    def cells(self) -> np.ndarray:
        self._compact()
        if not self._cells:
            return np.zeros((0, self.origin.shape[0]), dtype=np.int64)
        return unique_cells(self._cells[0])

    def points(self) -> np.ndarray:
        self._compact()
        if not self._points:
            return np.zeros((0, self.origin.shape[0]))
        return self._points[0]


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """Occupied cells of the grid origin + delta * Z^n."""

    delta: float
    origin: np.ndarray
    cells: np.ndarray  # (M, n) int64, sorted, unique

    @property
    def count(self) -> int:
        return int(self.cells.shape[0])

    @property
    def dim(self) -> int:
        return int(self.origin.shape[0])

    def occupancy(self) -> set[tuple[int, ...]]:
        return {tuple(int(v) for v in row) for row in self.cells}

    def coarsen(self, levels: int = 1) -> "RasterGrid":
        """The same grid with cells 2^levels times larger, anchored at the same origin."""
        return RasterGrid(self.delta * 2**levels, self.origin, unique_cells(self.cells >> levels))

    def union(self, other: "RasterGrid") -> "RasterGrid":
        if self.delta != other.delta or not np.array_equal(self.origin, other.origin):
            raise ValueError("can only merge rasters on the same grid")
        return RasterGrid(self.delta, self.origin, unique_cells(np.concatenate([self.cells, other.cells])))

    def __eq__(self, other):
        if not isinstance(other, RasterGrid):
            return NotImplemented
        return (
            self.delta == other.delta
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.cells, other.cells)
        )

    def to_pgm(self) -> bytes:
        """Binary P5 image over the occupied extent; 255 = occupied, row 0 = largest y."""
        if self.dim != 2:
            raise ValueError("PGM export needs a planar raster")
        if self.count == 0:
            return b"P5\n1 1\n255\n\x00"
        lo = self.cells.min(axis=0)
        hi = self.cells.max(axis=0)
        w, h = (hi - lo + 1).tolist()
        img = np.zeros((h, w), dtype=np.uint8)
        img[hi[1] - self.cells[:, 1], self.cells[:, 0] - lo[0]] = 255
        return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def rasterize(points, delta: float, ball: BoundingBall) -> RasterGrid:
    """Grid cells of side ``delta`` anchored at the ball's corner hit by ``points``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size and not ball.contains(pts, tol=delta):
        raise RasterError("point outside the bounding ball; the invariant ball is broken upstream")
    acc = CellAccumulator(delta, ball.corner)
    acc.add(pts)
    return RasterGrid(float(delta), ball.corner.copy(), acc.cells())


# ---------------------------------------------------------------------------
# images of the condensation set and of X under batches of words

def _apply(nodes: Nodes, pts: np.ndarray) -> np.ndarray:
    """S_w(p) for every node w and every p, flattened node-major."""
    out = np.einsum("bij,pj->bpi", nodes.linears, pts) + nodes.translations[:, None, :]
    return out.reshape(-1, pts.shape[1])


class CondensationImages:
    """S_w(C) sampled so that image points are at most delta/2 apart."""

    def __init__(self, c: CondensationSet):
        self.c = c
        self._cache: dict[int, np.ndarray] = {}

    def base_points(self, level: int) -> np.ndarray:
        if level not in self._cache:
            self._cache[level] = discretize(self.c, 2.0**-level)
        return self._cache[level]

    def emit(self, nodes: Nodes, delta: float, with_owner: bool = False):
        """Yields point arrays (and owning node indices when asked)."""
        # a spacing 2^-level <= delta / alpha_1 on C gives image spacing <= delta/2
        levels = np.ceil(np.log2(nodes.spectra[:, 0] / delta)).astype(int)
        levels = np.maximum(levels, 0)
        for level in np.unique(levels):
            idx = np.flatnonzero(levels == level)
            base = self.base_points(int(level))
            step = max(1, _POINT_CHUNK // max(1, len(base)))
            for s in range(0, len(idx), step):
                part = idx[s : s + step]
                pts = _apply(nodes.subset(part), base)
                if with_owner:
                    yield pts, np.repeat(part, len(base))
                else:
                    yield pts


_templates: dict[tuple[int, ...], np.ndarray] = {}


def _ball_template(counts: tuple[int, ...]) -> np.ndarray:
    """Grid points of the unit ball with ``counts[j]`` samples along axis j."""
    tpl = _templates.get(counts)
    if tpl is None:
        axes = [np.linspace(-1.0, 1.0, m) if m > 1 else np.zeros(1) for m in counts]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(counts))
        tpl = grid[np.sum(grid * grid, axis=1) <= 1.0 + 1e-12]
        _templates[counts] = tpl
    return tpl


def ellipsoid_images(nodes: Nodes, ball: BoundingBall, delta: float, with_owner: bool = False):
    """Samples of S_w(X) with spacing at most delta/2 along each principal axis."""
    n = ball.center.shape[0]
    centers = nodes.translations + nodes.linears @ ball.center
    semi = ball.radius * nodes.spectra
    counts = np.where(semi < delta / 4.0, 1, np.ceil(2.0 * semi / (delta / 2.0)).astype(np.int64) + 1)
    # odd counts keep the centre and the principal axes in the template
    counts |= 1
    single = np.all(counts == 1, axis=1)
    if single.any():
        idx = np.flatnonzero(single)
        if with_owner:
            yield centers[idx], idx
        else:
            yield centers[idx]
    rest = np.flatnonzero(~single)
    if rest.size == 0:
        return
    u, _, _ = np.linalg.svd(nodes.linears[rest])
    frames = u * semi[rest][:, None, :]
    keys = counts[rest]
    order = np.lexsort(keys.T[::-1])
    keys_sorted = keys[order]
    bounds = np.flatnonzero(np.any(np.diff(keys_sorted, axis=0) != 0, axis=1)) + 1
    for grp in np.split(order, bounds):
        tpl = _ball_template(tuple(int(v) for v in keys[grp[0]]))
        step = max(1, _POINT_CHUNK // len(tpl))
        for s in range(0, len(grp), step):
            part = grp[s : s + step]
            pts = np.einsum("bij,pj->bpi", frames[part], tpl) + centers[rest[part]][:, None, :]
            if with_owner:
                yield pts.reshape(-1, n), np.repeat(rest[part], len(tpl))
            else:
                yield pts.reshape(-1, n)


# ---------------------------------------------------------------------------
# generators

def invariant_radius(system: System, anchor) -> float:
    """Radius r with S_i(B(anchor, r)) inside B(anchor, r) for every map."""
    ifs = system.ifs
    a = np.asarray(anchor, dtype=float)
    drift = np.linalg.norm(ifs.translations + ifs.linears @ a - a, axis=1)
    return float(np.max(drift / (1.0 - ifs.spectra[:, 0])))


def default_anchor(system: System) -> np.ndarray:
    return system.ifs.fixed_points().mean(axis=0)


def _run(system: System, delta: float, work, workers: int, keep_points: bool) -> CellAccumulator:
    def task(start):
        acc = CellAccumulator(delta, system.ball.corner, keep_points)
        work(start, acc)
        return acc

    parts = map_subtrees(task, system.ifs, workers)
    total = CellAccumulator(delta, system.ball.corner, keep_points)
    for p in parts:
        total.merge(p)
    return total


def _check_delta(delta: float) -> None:
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")


def _homogeneous(system, delta, anchor, budget, workers, keep_points) -> CellAccumulator:
    _check_delta(delta)
    a = default_anchor(system) if anchor is None else np.asarray(anchor, dtype=float)
    radius = invariant_radius(system, a)
    if radius == 0.0:
        # every map fixes the anchor, so F_empty = {anchor}
        acc = CellAccumulator(delta, system.ball.corner, keep_points)
        acc.add(a[None])
        return acc

    # S_w(B(a, r)) has diameter <= 2 r alpha_1(S_w); once that is below delta
    # the single point S_w(a) stands for the whole piece S_w(F_empty)
    def work(start, acc):
        for nodes, leaf in walk(system.ifs, lambda nd: 2.0 * radius * nd.spectra[:, 0] < delta, start, budget):
            if leaf.any():
                lv = nodes.subset(leaf)
                acc.add(lv.translations + lv.linears @ a)

    return _run(system, delta, work, workers, keep_points)


def _orbital(system, delta, budget, workers, keep_points) -> CellAccumulator:
    _check_delta(delta)
    if system.condensation is None:
        raise ValueError("the orbital set needs a condensation set")
    images = CondensationImages(system.condensation)
    ball = system.ball

    def work(start, acc):
        for nodes, leaf in walk(system.ifs, lambda nd: nd.spectra[:, -1] < delta, start, budget):
            inner = nodes.subset(~leaf)
            if len(inner):
                for pts in images.emit(inner, delta):
                    acc.add(pts)
            stopped = nodes.subset(leaf)
            if len(stopped):
                # every deeper image S_v(C) lies in S_w(X) for the stopped prefix w
                for pts in ellipsoid_images(stopped, ball, delta):
                    acc.add(pts)

    total = _run(system, delta, work, workers, keep_points)
    first = CellAccumulator(delta, ball.corner, keep_points)
    first.add(discretize(system.condensation, delta))
    first.merge(total)
    return first


def homogeneous_points(system: System, delta: float, anchor=None, budget: int = DEFAULT_STOPPING_BUDGET,
                       workers: int = 1) -> np.ndarray:
    """Points S_w(anchor) that are delta-dense in F_empty, one per occupied cell."""
    return _homogeneous(system, delta, anchor, budget, workers, True).points()


def orbital_points(system: System, delta: float, budget: int = DEFAULT_STOPPING_BUDGET, workers: int = 1) -> np.ndarray:
    return _orbital(system, delta, budget, workers, True).points()


def inhomogeneous_points(system: System, delta: float, anchor=None, budget: int = DEFAULT_STOPPING_BUDGET,
                         workers: int = 1) -> np.ndarray:
    acc = _orbital(system, delta, budget, workers, True)
    acc.merge(_homogeneous(system, delta, anchor, budget, workers, True))
    return acc.points()


def _grid(system: System, delta: float, acc: CellAccumulator) -> RasterGrid:
    return RasterGrid(float(delta), system.ball.corner.copy(), acc.cells())


def homogeneous_raster(system: System, delta: float, anchor=None, budget: int = DEFAULT_STOPPING_BUDGET,
                       workers: int = 1) -> RasterGrid:
    return _grid(system, delta, _homogeneous(system, delta, anchor, budget, workers, False))


def orbital_raster(system: System, delta: float, budget: int = DEFAULT_STOPPING_BUDGET, workers: int = 1) -> RasterGrid:
    return _grid(system, delta, _orbital(system, delta, budget, workers, False))


def inhomogeneous_raster(system: System, delta: float, anchor=None, budget: int = DEFAULT_STOPPING_BUDGET,
                         workers: int = 1) -> RasterGrid:
    acc = _orbital(system, delta, budget, workers, False)
    acc.merge(_homogeneous(system, delta, anchor, budget, workers, False))
    return _grid(system, delta, acc)


def condensation_raster(system: System, delta: float) -> RasterGrid:
    if system.condensation is None:
        raise ValueError("system has no condensation set")
    return rasterize(discretize(system.condensation, delta), delta, system.ball)


def target_raster(system: System, target: str, delta: float, budget: int = DEFAULT_STOPPING_BUDGET,
                  workers: int = 1) -> RasterGrid:
    """Raster of ``target`` in {"C", "F0", "O", "FC"}."""
    if target == "C":
        return condensation_raster(system, delta)
    if target == "F0":
        return homogeneous_raster(system, delta, budget=budget, workers=workers)
    if target == "O":
        return orbital_raster(system, delta, budget, workers)
    if target == "FC":
        return inhomogeneous_raster(system, delta, budget=budget, workers=workers)
    raise ValueError(f"unknown target {target!r}; expected one of C, F0, O, FC")


def write_points_csv(path, points: np.ndarray) -> None:
    points = np.atleast_2d(points)
    names = ["x", "y", "z"][: points.shape[1]] if points.shape[1] <= 3 else [f"x{i}" for i in range(points.shape[1])]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for row in points:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def dyadic_deltas(j_values: Sequence[int]) -> list[float]:
    return [math.ldexp(1.0, -j) for j in j_values]
