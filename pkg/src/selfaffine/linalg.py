"""Small dense matrix helpers: singular values, the singular value function
and affine map composition.

Matrices are plain ``numpy`` arrays of shape ``(n, n)``; the batched helpers
take stacks of shape ``(..., n, n)`` so that word enumeration can push whole
levels of the word tree through at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidMatrixError(ValueError):
    """Raised for singular, non-square or otherwise unusable matrices."""


class DimensionMismatchError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    """Validate ``a`` as an invertible square matrix with n >= 2."""
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMatrixError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 2:
        raise InvalidMatrixError("dimension must be at least 2")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrixError("matrix has non-finite entries")
    if np.linalg.det(m) == 0.0:
        raise InvalidMatrixError("matrix is singular")
    m.setflags(write=False)
    return m


# ---------------------------------------------------------------------------
# singular values

def _sv_2x2(mats: np.ndarray) -> np.ndarray:
    # closed form; sqrt((p+t)^2+(q-r)^2) and sqrt((p-t)^2+(q+r)^2) are
    # alpha1 + alpha2 and alpha1 - alpha2
    p = mats[..., 0, 0]
    q = mats[..., 0, 1]
    r = mats[..., 1, 0]
    t = mats[..., 1, 1]
    e = np.hypot(p + t, q - r)
    f = np.hypot(p - t, q + r)
    a1 = 0.5 * (e + f)
    det = np.abs(p * t - q * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        a2 = np.where(a1 > 0, det / a1, 0.0)
    return np.stack([a1, a2], axis=-1)


def jacobi_eigvalsh(sym: np.ndarray, tol: float = 1e-15, max_sweeps: int = 50) -> np.ndarray:
    """Eigenvalues of a stack of symmetric matrices by cyclic Jacobi rotations.

    Rotations are applied to every matrix of the stack simultaneously, each
    with its own angle. Returns eigenvalues sorted in descending order.
    """
    a = np.array(sym, dtype=float, copy=True)
    squeeze = a.ndim == 2
    if squeeze:
        a = a[None]
    n = a.shape[-1]
    for _ in range(max_sweeps):
        off = np.sum(np.triu(a, 1) ** 2, axis=(-2, -1))
        scale = np.sum(a * a, axis=(-2, -1))
        if np.all(off <= (tol * tol) * np.maximum(scale, 1e-300)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                active = apq != 0.0
                if not np.any(active):
                    continue
                app = a[:, p, p]
                aqq = a[:, q, q]
                with np.errstate(divide="ignore", invalid="ignore"):
                    theta = np.where(active, (aqq - app) / (2.0 * apq), 0.0)
                    t = np.where(
                        active,
                        np.sign(theta + (theta == 0)) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)),
                        0.0,
                    )
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation
                ap = a[:, :, p].copy()
                aq = a[:, :, q].copy()
                a[:, :, p] = c[:, None] * ap - s[:, None] * aq
                a[:, :, q] = s[:, None] * ap + c[:, None] * aq
                rp = a[:, p, :].copy()
                rq = a[:, q, :].copy()
                a[:, p, :] = c[:, None] * rp - s[:, None] * rq
                a[:, q, :] = s[:, None] * rp + c[:, None] * rq
    w = np.diagonal(a, axis1=-2, axis2=-1)
    w = -np.sort(-w, axis=-1)
    return w[0] if squeeze else w


def batch_singular_values(mats: np.ndarray) -> np.ndarray:
    """Singular values of a stack ``(..., n, n)``, descending along the last axis."""
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1]
    if n == 2:
        return _sv_2x2(mats)
    lead = mats.shape[:-2]
    flat = mats.reshape(-1, n, n)
    gram = flat @ np.swapaxes(flat, -1, -2)
    ev = np.clip(jacobi_eigvalsh(gram), 0.0, None)
    sv = np.sqrt(ev)
    # the smallest value from the Gram matrix carries absolute, not relative,
    # error; recover it from the determinant instead
    det = np.abs(np.linalg.det(flat))
    head = np.prod(sv[:, :-1], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sv[:, -1] = np.where(head > 0, det / head, sv[:, -1])
    sv = -np.sort(-sv, axis=-1)
    return sv.reshape(*lead, n)


def singular_values(m) -> np.ndarray:
    """Singular values alpha_1 >= ... >= alpha_n > 0 of an invertible matrix."""
    m = as_matrix(m)
    return batch_singular_values(m)


# ---------------------------------------------------------------------------
# singular value function

def phi_from_spectrum(spectrum: np.ndarray, s: float) -> np.ndarray:
    """phi^s evaluated from precomputed singular values (last axis descending)."""
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    sv = np.asarray(spectrum, dtype=float)
    n = sv.shape[-1]
    if s == 0:
        return np.ones(sv.shape[:-1])
    with np.errstate(divide="ignore"):
        logs = np.log(sv)
    if s > n:
        return np.exp(np.sum(logs, axis=-1) * (s / n))
    m = int(np.ceil(s))
    out = (s - m + 1) * logs[..., m - 1]
    if m > 1:
        out = out + np.sum(logs[..., : m - 1], axis=-1)
    return np.exp(out)


def phi_s(m, s: float) -> float:
    """Singular value function phi^s(A).

    For m - 1 < s <= m this is alpha_1 ... alpha_{m-1} alpha_m^(s-m+1); above n it
    continues as |det A|^(s/n), and phi^0 = 1.
    """
    return float(phi_from_spectrum(singular_values(m), s))


def cover_bound(spectrum, m_index: int) -> float:
    """Upper bound 2^n prod_{j<m} alpha_j / alpha_m on the number of cubes of
    side alpha_m needed to cover an ellipsoid with semi-axes ``spectrum``."""
    sv = np.asarray(spectrum, dtype=float)
    n = sv.shape[-1]
    if not 1 <= m_index <= n:
        raise IndexError(f"m_index must lie in [1, {n}], got {m_index}")
    am = sv[m_index - 1]
    return float(2.0**n * np.prod(sv[: m_index - 1] / am))


# ---------------------------------------------------------------------------
# affine maps

@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> linear @ x + translation."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        lin = as_matrix(self.linear)
        t = np.array(self.translation, dtype=float).reshape(-1)
        if t.shape[0] != lin.shape[0]:
            raise DimensionMismatchError(
                f"translation has length {t.shape[0]}, matrix is {lin.shape[0]}x{lin.shape[0]}"
            )
        t.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    @property
    def spectrum(self) -> np.ndarray:
        return batch_singular_values(self.linear)

    @property
    def contraction(self) -> float:
        return float(self.spectrum[0])

    def is_contracting(self) -> bool:
        return self.contraction < 1.0

    def fixed_point(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.dim) - self.linear, self.translation)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.translation

    def __eq__(self, other):
        if not isinstance(other, AffineMap):
            return NotImplemented
        return np.array_equal(self.linear, other.linear) and np.array_equal(
            self.translation, other.translation
        )

    def allclose(self, other: "AffineMap", atol: float = 1e-12) -> bool:
        return np.allclose(self.linear, other.linear, rtol=0, atol=atol) and np.allclose(
            self.translation, other.translation, rtol=0, atol=atol
        )

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls(np.eye(n), np.zeros(n))


def compose(a: AffineMap, b: AffineMap) -> AffineMap:
    """The map x -> a(b(x))."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"cannot compose maps of dimension {a.dim} and {b.dim}")
    return AffineMap(a.linear @ b.linear, a.linear @ b.translation + a.translation)
