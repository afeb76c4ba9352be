"""Iterated function systems, words, condensation geometry and stoppings.

Words are tuples of 0-based map indices; ``()`` is the empty word. A word
``(i1, ..., ik)`` stands for the composition S_i1 o ... o S_ik.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .linalg import AffineMap, DimensionMismatchError, batch_singular_values, compose

DEFAULT_STOPPING_BUDGET = 1 << 24
_BATCH = 1 << 15


class NotContractingError(ValueError):
    def __init__(self, index: int, alpha1: float):
        super().__init__(f"map {index + 1} is not contracting (alpha_1 = {alpha1:.6g})")
        self.index = index
        self.alpha1 = alpha1


class BudgetExceededError(RuntimeError):
    """Raised when a word enumeration visits more nodes than allowed."""


class IFS:
    """An ordered, finite family of contracting affine maps on R^n."""

    def __init__(self, maps: Sequence[AffineMap]):
        maps = tuple(maps)
        if not maps:
            raise ValueError("an IFS needs at least one map")
        n = maps[0].dim
        for i, f in enumerate(maps):
            if f.dim != n:
                raise DimensionMismatchError(f"map {i + 1} has dimension {f.dim}, expected {n}")
        linears = np.stack([f.linear for f in maps])
        spectra = batch_singular_values(linears)
        for i, a1 in enumerate(spectra[:, 0]):
            if not a1 < 1.0:
                raise NotContractingError(i, float(a1))
        self.maps = maps
        self.dim = n
        self.linears = linears
        self.translations = np.stack([f.translation for f in maps])
        self.spectra = spectra
        for arr in (self.linears, self.translations, self.spectra):
            arr.setflags(write=False)

    @classmethod
    def from_arrays(cls, linears, translations=None) -> "IFS":
        linears = np.asarray(linears, dtype=float)
        if translations is None:
            translations = np.zeros(linears.shape[:2])
        return cls([AffineMap(a, b) for a, b in zip(linears, translations)])

    def __len__(self) -> int:
        return len(self.maps)

    def __getitem__(self, i: int) -> AffineMap:
        return self.maps[i]

    def __repr__(self) -> str:
        return f"IFS(N={len(self)}, n={self.dim})"

    @property
    def min_alpha_n(self) -> float:
        return float(np.min(self.spectra[:, -1]))

    def fixed_points(self) -> np.ndarray:
        return np.stack([f.fixed_point() for f in self.maps])


def compose_word(ifs: IFS, word: Sequence[int]) -> AffineMap:
    """S_w = S_{w[0]} o S_{w[1]} o ... o S_{w[-1]}."""
    word = tuple(word)
    if not word:
        raise ValueError("the empty word has no associated map")
    for i in word:
        if not 0 <= i < len(ifs):
            raise IndexError(f"letter {i} out of range for an IFS with {len(ifs)} maps")
    out = ifs[word[-1]]
    for i in reversed(word[:-1]):
        out = compose(ifs[i], out)
    return out


# ---------------------------------------------------------------------------
# condensation geometry

@dataclass(frozen=True)
class Circle:
    center: tuple[float, ...]
    radius: float
    kind = "circle"

    def discretize(self, delta: float) -> np.ndarray:
        m = max(8, math.ceil(2.0 * math.pi * self.radius / (delta / 2.0)))
        t = 2.0 * math.pi * np.arange(m) / m
        c = np.asarray(self.center, dtype=float)
        return c + self.radius * np.stack([np.cos(t), np.sin(t)], axis=1)

    def extreme_points(self) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        return c + self.radius * np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)

    def transformed(self, scale: float, shift: np.ndarray) -> "Circle":
        c = np.asarray(self.center) * scale + shift
        return Circle(tuple(float(v) for v in c), self.radius * scale)


def _polyline(vertices: np.ndarray, delta: float) -> np.ndarray:
    pieces = []
    for p, q in zip(vertices[:-1], vertices[1:]):
        m = max(1, math.ceil(float(np.linalg.norm(q - p)) / (delta / 2.0)))
        t = np.arange(m)[:, None] / m
        pieces.append(p + t * (q - p))
    pieces.append(vertices[-1:])
    return np.concatenate(pieces)


@dataclass(frozen=True)
class Segment:
    p: tuple[float, ...]
    q: tuple[float, ...]
    kind = "segment"

    def discretize(self, delta: float) -> np.ndarray:
        return _polyline(np.array([self.p, self.q], dtype=float), delta)

    def extreme_points(self) -> np.ndarray:
        return np.array([self.p, self.q], dtype=float)

    def transformed(self, scale: float, shift: np.ndarray) -> "Segment":
        p = np.asarray(self.p) * scale + shift
        q = np.asarray(self.q) * scale + shift
        return Segment(tuple(map(float, p)), tuple(map(float, q)))


@dataclass(frozen=True)
class Polygon:
    """Boundary of a polygon; the vertex list is closed implicitly."""

    vertices: tuple[tuple[float, ...], ...]
    kind = "polygon"

    def discretize(self, delta: float) -> np.ndarray:
        v = np.array(self.vertices, dtype=float)
        pts = _polyline(np.concatenate([v, v[:1]]), delta)
        return pts[:-1]

    def extreme_points(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    def transformed(self, scale: float, shift: np.ndarray) -> "Polygon":
        v = np.asarray(self.vertices) * scale + shift
        return Polygon(tuple(tuple(map(float, row)) for row in v))


@dataclass(frozen=True)
class PointCloud:
    points: tuple[tuple[float, ...], ...]
    kind = "points"

    def discretize(self, delta: float) -> np.ndarray:
        return np.array(self.points, dtype=float)

    def extreme_points(self) -> np.ndarray:
        return np.array(self.points, dtype=float)

    def transformed(self, scale: float, shift: np.ndarray) -> "PointCloud":
        v = np.asarray(self.points) * scale + shift
        return PointCloud(tuple(tuple(map(float, row)) for row in v))


Primitive = Circle | Segment | Polygon | PointCloud


@dataclass(frozen=True)
class CondensationSet:
    primitives: tuple[Primitive, ...]

    def __post_init__(self):
        prims = tuple(self.primitives)
        if not prims:
            raise ValueError("condensation set must be non-empty")
        dims = {p.extreme_points().shape[1] for p in prims}
        if len(dims) != 1:
            raise DimensionMismatchError("condensation primitives have mixed dimensions")
        (dim,) = dims
        for p in prims:
            if p.kind != "points" and dim != 2:
                raise DimensionMismatchError(f"{p.kind} primitives are only supported in the plane")
            if len(p.extreme_points()) == 0:
                raise ValueError(f"empty {p.kind} primitive")
        object.__setattr__(self, "primitives", prims)

    @property
    def dim(self) -> int:
        return int(self.primitives[0].extreme_points().shape[1])

    def extreme_points(self) -> np.ndarray:
        return np.concatenate([p.extreme_points() for p in self.primitives])

    def transformed(self, scale: float, shift) -> "CondensationSet":
        shift = np.asarray(shift, dtype=float)
        return CondensationSet(tuple(p.transformed(scale, shift) for p in self.primitives))


def discretize(c: CondensationSet, delta: float) -> np.ndarray:
    """Points on ``c`` with spacing at most delta/2 along every primitive."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return np.concatenate([p.discretize(delta) for p in c.primitives])


# ---------------------------------------------------------------------------
# bounding ball and normalisation

@dataclass(frozen=True)
class BoundingBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def corner(self) -> np.ndarray:
        return self.center - self.radius

    def is_invariant(self, ifs: IFS, tol: float = 1e-12) -> bool:
        """Sufficient test for S_i(X) inside X, for every map."""
        img = ifs.translations + ifs.linears @ self.center
        drift = np.linalg.norm(img - self.center, axis=1)
        return bool(np.all(drift + ifs.spectra[:, 0] * self.radius <= self.radius + tol))

    def contains(self, points, tol: float = 1e-12) -> bool:
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return bool(np.all(d <= self.radius + tol))


def bounding_ball(ifs: IFS, c: CondensationSet | None = None) -> BoundingBall:
    """A ball X with S_i(X) inside X for every map and containing ``c``.

    The centre is the midpoint of the bounding box of the fixed points and the
    condensation set; the radius is the smallest one that makes the
    drift-plus-contraction estimate close, inflated by 1%.
    """
    pts = ifs.fixed_points()
    if c is not None:
        if c.dim != ifs.dim:
            raise DimensionMismatchError("condensation set and IFS dimensions differ")
        pts = np.concatenate([pts, c.extreme_points()])
    center = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    img = ifs.translations + ifs.linears @ center
    drift = np.linalg.norm(img - center, axis=1)
    radius = float(np.max(drift / (1.0 - ifs.spectra[:, 0])))
    radius = max(radius, float(np.max(np.linalg.norm(pts - center, axis=1))))
    if radius == 0.0:
        radius = 1.0
    return BoundingBall(center, 1.01 * radius)


@dataclass(frozen=True)
class Normalization:
    """Affine change of coordinates y = (x - ball.corner) / ball.diameter.

    It carries the bounding ball onto the ball of unit diameter centred at
    (1/2, ..., 1/2), so dyadic grids anchored at the origin are anchored at
    the ball's corner.
    """

    ball: BoundingBall

    @property
    def scale(self) -> float:
        return 1.0 / self.ball.diameter

    @property
    def shift(self) -> np.ndarray:
        return -self.ball.corner * self.scale

    def forward(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.shift

    def inverse(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    def unit_ball(self) -> BoundingBall:
        return BoundingBall(np.full(self.ball.center.shape, 0.5), 0.5)

    def conjugate(self, ifs: IFS) -> IFS:
        # T S T^-1 (y) = A y + (scale b + shift - A shift) for T(x) = scale x + shift
        a = ifs.linears
        shift = self.shift
        b = self.scale * ifs.translations + shift - a @ shift
        return IFS.from_arrays(a, b)

    def condensation(self, c: CondensationSet) -> CondensationSet:
        return c.transformed(self.scale, self.shift)


@dataclass(frozen=True)
class System:
    """An IFS with condensation set and bounding ball, in unit-diameter coordinates.

    ``original`` keeps the user-facing inputs and ``normalization`` maps
    between the two coordinate systems.
    """

    ifs: IFS
    condensation: CondensationSet | None
    ball: BoundingBall
    normalization: Normalization
    original: tuple = field(repr=False, default=())

    @property
    def dim(self) -> int:
        return self.ifs.dim


def normalize(ifs: IFS, c: CondensationSet | None = None, ball: BoundingBall | None = None) -> System:
    if ball is None:
        ball = bounding_ball(ifs, c)
    if not ball.is_invariant(ifs, tol=1e-9 * ball.radius):
        raise ValueError("bounding ball is not mapped into itself by every map")
    if c is not None and not ball.contains(c.extreme_points(), tol=1e-9 * ball.radius):
        raise ValueError("bounding ball does not contain the condensation set")
    norm = Normalization(ball)
    return System(
        ifs=norm.conjugate(ifs),
        condensation=None if c is None else norm.condensation(c),
        ball=norm.unit_ball(),
        normalization=norm,
        original=(ifs, c, ball),
    )


# ---------------------------------------------------------------------------
# word tree traversal

@dataclass
class Nodes:
    """A batch of words of equal length with their composed maps."""

    depth: int
    linears: np.ndarray  # (B, n, n)
    translations: np.ndarray  # (B, n)
    spectra: np.ndarray  # (B, n)
    words: np.ndarray | None  # (B, depth) letters, when tracked

    def __len__(self) -> int:
        return self.linears.shape[0]

    def subset(self, mask) -> "Nodes":
        return Nodes(
            self.depth,
            self.linears[mask],
            self.translations[mask],
            self.spectra[mask],
            None if self.words is None else self.words[mask],
        )

    def word_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.words]


def _children(ifs: IFS, nodes: Nodes) -> Nodes:
    big_n = len(ifs)
    b = len(nodes)
    n = ifs.dim
    # child (w, j) -> S_w o S_j, ordered w-major for lexicographic order
    lin = np.einsum("wik,jkl->wjil", nodes.linears, ifs.linears).reshape(b * big_n, n, n)
    tr = (np.einsum("wik,jk->wji", nodes.linears, ifs.translations) + nodes.translations[:, None, :]).reshape(
        b * big_n, n
    )
    words = None
    if nodes.words is not None:
        words = np.concatenate(
            [np.repeat(nodes.words, big_n, axis=0), np.tile(np.arange(big_n, dtype=np.int32), b)[:, None]],
            axis=1,
        )
    return Nodes(nodes.depth + 1, lin, tr, batch_singular_values(lin), words)


def root_nodes(ifs: IFS, track_words: bool = False, letters: Sequence[int] | None = None) -> Nodes:
    idx = np.arange(len(ifs)) if letters is None else np.asarray(letters, dtype=int)
    words = idx.astype(np.int32)[:, None] if track_words else None
    return Nodes(
        1,
        ifs.linears[idx].copy(),
        ifs.translations[idx].copy(),
        ifs.spectra[idx].copy(),
        words,
    )


def walk(ifs: IFS, is_leaf, start: Nodes, budget: int = DEFAULT_STOPPING_BUDGET, batch: int = _BATCH) -> Iterator[tuple[Nodes, np.ndarray]]:
    """Depth-first traversal of the word tree in batches.

    ``is_leaf(nodes) -> bool mask`` decides where descent stops. Yields
    ``(nodes, leaf_mask)`` for every visited batch; the whole subtree below
    ``start`` is visited in lexicographic order of batches.
    """
    stack = [start]
    visited = 0
    while stack:
        nodes = stack.pop()
        visited += len(nodes)
        if visited > budget:
            raise BudgetExceededError(f"word enumeration exceeded the budget of {budget} nodes")
        leaf = np.asarray(is_leaf(nodes), dtype=bool)
        yield nodes, leaf
        inner = nodes.subset(~leaf)
        if len(inner) == 0:
            continue
        kids = _children(ifs, inner)
        chunks = [kids.subset(slice(i, i + batch)) for i in range(0, len(kids), batch)]
        stack.extend(reversed(chunks))


def map_subtrees(fn, ifs: IFS, workers: int = 1, track_words: bool = False) -> list:
    """Apply ``fn(start_nodes)`` to every first-letter subtree; results in letter order."""
    roots = [root_nodes(ifs, track_words, [i]) for i in range(len(ifs))]
    if workers <= 1:
        return [fn(r) for r in roots]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, roots))


# ---------------------------------------------------------------------------
# stoppings

@dataclass(frozen=True)
class StoppingSet:
    words: tuple[tuple[int, ...], ...]
    m_index: int
    delta: float

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    def __contains__(self, w) -> bool:
        return tuple(w) in set(self.words)


def _check_stopping_args(ifs: IFS, m_index: int, delta: float) -> None:
    if not 1 <= m_index <= ifs.dim:
        raise ValueError(f"m_index must lie in [1, {ifs.dim}], got {m_index}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")


def stopping_nodes(ifs: IFS, m_index: int, delta: float, budget: int = DEFAULT_STOPPING_BUDGET,
                   track_words: bool = False, start: Nodes | None = None) -> Iterator[Nodes]:
    """Batches of words w with alpha_m(S_w) < delta <= alpha_m(S_{w-})."""
    _check_stopping_args(ifs, m_index, delta)
    if start is None:
        start = root_nodes(ifs, track_words)
    col = m_index - 1
    for nodes, leaf in walk(ifs, lambda nd: nd.spectra[:, col] < delta, start, budget):
        if leaf.any():
            yield nodes.subset(leaf)


def stopping_set(ifs: IFS, m_index: int, delta: float, budget: int = DEFAULT_STOPPING_BUDGET) -> StoppingSet:
    """The m-delta-stopping, in lexicographic order.

    The empty word is given alpha_m = 1, so for delta = 1 the stopping is the
    set of single letters.
    """
    words: list[tuple[int, ...]] = []
    for nodes in stopping_nodes(ifs, m_index, delta, budget, track_words=True):
        words.extend(nodes.word_tuples())
    words.sort()
    return StoppingSet(tuple(words), m_index, float(delta))
