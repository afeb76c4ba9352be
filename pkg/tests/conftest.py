import numpy as np
import pytest

from selfaffine.ifs import IFS, Circle, CondensationSet, PointCloud, Segment

SHEAR_A = [[0.5, 0.0], [0.5, 0.5]]
SHEAR_B = [[0.5, 0.5], [0.0, 0.5]]


@pytest.fixture
def shears():
    return IFS.from_arrays([SHEAR_A, SHEAR_B])


@pytest.fixture
def circle_c():
    return CondensationSet((Circle((0.75, 0.75), 0.2),))


@pytest.fixture
def sierpinski():
    h = np.eye(2) / 2
    return IFS.from_arrays([h, h, h], [[0, 0], [0.5, 0], [0, 0.5]])


@pytest.fixture
def tiling():
    h = np.eye(2) / 2
    return IFS.from_arrays([h] * 4, [[0, 0], [0.5, 0], [0, 0.5], [0.5, 0.5]])


def random_contraction(rng, n=2, max_alpha=0.6, min_alpha=1e-3):
    while True:
        a = rng.uniform(-0.6, 0.6, size=(n, n))
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[0] <= max_alpha and sv[-1] > min_alpha:
            return a


def random_ifs(rng, maps=2, n=2, **kw):
    return IFS.from_arrays([random_contraction(rng, n, **kw) for _ in range(maps)], rng.uniform(0, 1, size=(maps, n)))


def point(*xy):
    return CondensationSet((PointCloud((tuple(xy),)),))


def segment(p, q):
    return CondensationSet((Segment(p, q),))
