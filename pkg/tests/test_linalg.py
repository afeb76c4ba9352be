import math

import numpy as np
import pytest

from selfaffine.linalg import (
    AffineMap,
    DimensionMismatchError,
    InvalidMatrixError,
    batch_singular_values,
    compose,
    cover_bound,
    jacobi_eigvalsh,
    phi_s,
    singular_values,
)

from conftest import SHEAR_A, SHEAR_B

SQ5 = math.sqrt(5.0)


@pytest.mark.parametrize(
    "m, expected",
    [
        (np.eye(2), (1.0, 1.0)),
        (np.diag([0.5, 0.25]), (0.5, 0.25)),
        (SHEAR_A, ((1 + SQ5) / 4, (SQ5 - 1) / 4)),
        (SHEAR_B, ((1 + SQ5) / 4, (SQ5 - 1) / 4)),
    ],
)
def test_singular_values_known(m, expected):
    np.testing.assert_allclose(singular_values(m), expected, rtol=0, atol=1e-15)


def test_singular_values_3x3_against_lapack():
    rng = np.random.default_rng(0)
    mats = rng.normal(size=(500, 3, 3))
    ours = batch_singular_values(mats)
    ref = np.linalg.svd(mats, compute_uv=False)
    np.testing.assert_allclose(ours, ref, rtol=1e-10)


def test_jacobi_matches_eigvalsh():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(50, 4, 4))
    sym = a + np.swapaxes(a, 1, 2)
    ref = np.sort(np.linalg.eigvalsh(sym), axis=1)[:, ::-1]
    np.testing.assert_allclose(jacobi_eigvalsh(sym), ref, atol=1e-12)


def test_singular_matrix_rejected():
    with pytest.raises(InvalidMatrixError):
        singular_values([[1, 2], [2, 4]])
    with pytest.raises(InvalidMatrixError):
        singular_values([[0.5]])
    with pytest.raises(InvalidMatrixError):
        singular_values([[1, 0, 0], [0, 1, 0]])


@pytest.mark.parametrize("s, expected", [(0, 1.0), (1, 0.5), (1.5, 0.25), (2, 1 / 8), (4, 1 / 64), (3, (1 / 8) ** 1.5)])
def test_phi_diag(s, expected):
    assert phi_s(np.diag([0.5, 0.25]), s) == pytest.approx(expected, rel=1e-14)


def test_phi_negative_s():
    with pytest.raises(ValueError):
        phi_s(np.eye(2) / 2, -0.1)


def test_phi_sign_of_det_ignored():
    assert phi_s(np.diag([0.5, -0.25]), 3.0) == pytest.approx((1 / 8) ** 1.5)


def test_compose_examples():
    f = AffineMap(np.eye(2) / 2, [0.0, 0.0])
    assert compose(AffineMap.identity(2), f) == f
    assert compose(f, f).allclose(AffineMap(np.eye(2) / 4, [0, 0]))
    g = compose(AffineMap(SHEAR_A, [0, 0]), AffineMap(SHEAR_B, [0, 0]))
    np.testing.assert_allclose(g.linear, [[0.25, 0.25], [0.25, 0.5]])


def test_compose_translation_and_call():
    a = AffineMap([[0.5, 0.1], [0.0, 0.3]], [1.0, 2.0])
    b = AffineMap([[0.2, 0.0], [0.4, 0.5]], [-1.0, 0.5])
    x = np.array([0.3, -0.7])
    np.testing.assert_allclose(compose(a, b)(x), a(b(x)), atol=1e-15)


def test_compose_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        compose(AffineMap.identity(2), AffineMap.identity(3))
    with pytest.raises(DimensionMismatchError):
        AffineMap(np.eye(2), [0, 0, 0])


@pytest.mark.parametrize(
    "sv, m, expected",
    [((1, 1), 2, 4.0), ((0.8, 0.2), 2, 16.0), ((0.9, 0.3, 0.1), 3, 216.0), ((0.8, 0.2), 1, 4.0)],
)
def test_cover_bound(sv, m, expected):
    assert cover_bound(sv, m) == pytest.approx(expected, rel=1e-12)


def test_cover_bound_index():
    with pytest.raises(IndexError):
        cover_bound((0.5, 0.25), 3)
    with pytest.raises(IndexError):
        cover_bound((0.5, 0.25), 0)


def test_fixed_point_and_contraction():
    f = AffineMap(np.eye(2) / 2, [0.5, 0.5])
    np.testing.assert_allclose(f.fixed_point(), [1.0, 1.0])
    assert f.is_contracting()
    assert not AffineMap(np.diag([1.2, 0.5]), [0, 0]).is_contracting()
