import itertools
import math

import numpy as np
import pytest

from selfaffine.attractor import default_anchor, invariant_radius
from selfaffine.ifs import (
    IFS,
    BoundingBall,
    Circle,
    CondensationSet,
    NotContractingError,
    PointCloud,
    Polygon,
    Segment,
    bounding_ball,
    compose_word,
    discretize,
    normalize,
    stopping_set,
)
from selfaffine.linalg import compose

from conftest import point, random_ifs


def _sv(m):
    return np.linalg.svd(m, compute_uv=False)


def test_compose_word_examples(shears):
    assert compose_word(shears, (0,)) == shears.maps[0]
    sim = IFS.from_arrays([np.eye(2) / 2])
    np.testing.assert_allclose(compose_word(sim, (0, 0)).linear, np.eye(2) / 4)
    np.testing.assert_allclose(compose_word(shears, (0, 1)).linear, [[0.25, 0.25], [0.25, 0.5]])


def test_compose_word_empty_and_range(shears):
    with pytest.raises(ValueError):
        compose_word(shears, ())
    with pytest.raises(IndexError):
        compose_word(shears, (0, 2))


def test_not_contracting_names_map():
    with pytest.raises(NotContractingError, match="map 2"):
        IFS.from_arrays([np.eye(2) / 2, np.diag([1.2, 0.5])])


def test_stopping_equal_similarities():
    sim = IFS.from_arrays([np.eye(2) / 2, np.eye(2) / 2], [[0, 0], [0.5, 0.5]])
    st = stopping_set(sim, 1, 1 / 3)
    assert st.words == tuple(itertools.product(range(2), repeat=2))


def test_stopping_delta_one_gives_letters(shears, sierpinski):
    for ifs in (shears, sierpinski):
        for m in (1, 2):
            assert stopping_set(ifs, m, 1.0).words == tuple((i,) for i in range(len(ifs.maps)))


@pytest.mark.parametrize("r, delta", [(0.5, 0.1), (1 / 3, 0.01), (0.4, 0.05)])
def test_stopping_counts_similarity(r, delta):
    ifs = IFS.from_arrays([np.eye(2) * r] * 3, [[0, 0], [1 - r, 0], [0, 1 - r]])
    k = math.ceil(math.log(delta) / math.log(r))
    if r**k == delta:
        k += 1
    assert len(stopping_set(ifs, 2, delta)) == 3**k


def test_stopping_bruteforce_oracle(shears):
    # breadth-first over every word up to length 12, independent of the walker
    delta, m = 0.25, 2
    expected = []
    frontier = [((), np.eye(2), 1.0)]
    for _ in range(12):
        nxt = []
        for w, mat, parent_alpha in frontier:
            for i in range(2):
                prod = mat @ shears.linears[i]
                a = _sv(prod)[m - 1]
                if a < delta <= parent_alpha:
                    expected.append(w + (i,))
                elif a >= delta:
                    nxt.append((w + (i,), prod, a))
        frontier = nxt
    assert not frontier
    assert stopping_set(shears, m, delta).words == tuple(sorted(expected))


def test_stopping_domain(shears):
    for bad in (0.0, -1.0, 1.5):
        with pytest.raises(ValueError):
            stopping_set(shears, 1, bad)
    with pytest.raises(ValueError):
        stopping_set(shears, 3, 0.5)


def test_discretize_examples():
    cloud = CondensationSet((PointCloud(((0.1, 0.2), (0.3, 0.4))),))
    np.testing.assert_array_equal(discretize(cloud, 0.5), [[0.1, 0.2], [0.3, 0.4]])
    seg = discretize(CondensationSet((Segment((0, 0), (1, 0)),)), 0.5)
    assert len(seg) >= 5
    assert np.max(np.diff(seg[:, 0])) <= 0.25 + 1e-15
    circ = discretize(CondensationSet((Circle((0, 0), 0.2),)), 0.01)
    assert len(circ) >= math.ceil(2 * math.pi * 0.2 / 0.005)
    gaps = np.linalg.norm(np.diff(np.vstack([circ, circ[:1]]), axis=0), axis=1)
    assert gaps.max() <= 0.005


def test_polygon_closes():
    sq = discretize(CondensationSet((Polygon(((0, 0), (1, 0), (1, 1), (0, 1))),)), 0.1)
    gaps = np.linalg.norm(np.diff(np.vstack([sq, sq[:1]]), axis=0), axis=1)
    assert gaps.max() <= 0.05 + 1e-12


def test_condensation_validation():
    with pytest.raises(ValueError):
        CondensationSet(())
    with pytest.raises(ValueError):
        CondensationSet((PointCloud(((0, 0),)), PointCloud(((0, 0, 0),))))


def test_bounding_ball_single_map():
    ifs = IFS.from_arrays([np.eye(2) / 2])
    ball = bounding_ball(ifs, point(0.0, 0.0))
    assert ball.radius > 0
    assert ball.is_invariant(ifs)
    assert ball.contains([[0.0, 0.0]])


def test_bounding_ball_paper_example(shears, circle_c):
    ball = bounding_ball(shears, circle_c)
    assert ball.is_invariant(shears)
    assert ball.contains([[0, 0], [1, 0], [0, 1], [1, 1]])
    assert ball.contains(discretize(circle_c, 0.01))


def test_bounding_ball_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        ifs = random_ifs(rng, maps=3)
        c = CondensationSet((Segment(tuple(rng.uniform(-2, 2, 2)), tuple(rng.uniform(-2, 2, 2))),))
        ball = bounding_ball(ifs, c)
        assert ball.is_invariant(ifs)
        assert ball.contains(c.extreme_points())


def test_normalization_conjugates(shears, circle_c):
    system = normalize(shears, circle_c)
    assert system.ball.diameter == pytest.approx(1.0)
    np.testing.assert_allclose(system.ball.corner, 0.0, atol=1e-15)
    norm = system.normalization
    x = np.array([[0.3, 0.9], [0.0, 0.0]])
    for f, g in zip(shears.maps, system.ifs.maps):
        np.testing.assert_allclose(norm.forward(f(x)), g(norm.forward(x)), atol=1e-14)
    np.testing.assert_allclose(norm.inverse(norm.forward(x)), x, atol=1e-15)


def test_invariant_radius(shears, circle_c, sierpinski):
    # both shears fix the origin, so the anchor ball collapses to a point
    assert invariant_radius(normalize(shears, circle_c), default_anchor(normalize(shears, circle_c))) == 0.0
    system = normalize(sierpinski, point(0.25, 0.25))
    a = default_anchor(system)
    r = invariant_radius(system, a)
    assert BoundingBall(a, r).is_invariant(system.ifs, tol=1e-12)


def test_compose_word_associative():
    rng = np.random.default_rng(7)
    ifs = random_ifs(rng, maps=3)
    for _ in range(100):
        w1 = tuple(rng.integers(0, 3, rng.integers(1, 6)))
        w2 = tuple(rng.integers(0, 3, rng.integers(1, 6)))
        joined = compose_word(ifs, w1 + w2)
        split = compose(compose_word(ifs, w1), compose_word(ifs, w2))
        assert joined.allclose(split, atol=1e-12)
