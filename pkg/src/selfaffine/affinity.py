"""Pressure sums over words of length k, their roots s_k, and the affinity
dimension estimate built from them."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .ifs import IFS, BudgetExceededError
from .linalg import batch_singular_values, phi_from_spectrum

DEFAULT_PRESSURE_BUDGET = 1 << 24
_CHUNK_LEVELS_MAX = 1 << 16
_CACHE_MAX = 1 << 22


class DegeneratePressureError(RuntimeError):
    """The pressure does not cross 1 inside the search bracket."""


def _all_products(linears: np.ndarray, length: int) -> np.ndarray:
    n = linears.shape[-1]
    prod = np.eye(n)[None]
    for _ in range(length):
        prod = np.einsum("wik,jkl->wjil", prod, linears).reshape(-1, n, n)
    return prod


def _check_budget(ifs: IFS, k: int, budget: int) -> int:
    if k < 1:
        raise ValueError(f"word length must be at least 1, got {k}")
    total = len(ifs) ** k
    if total > budget:
        raise BudgetExceededError(f"{len(ifs)}^{k} = {total} words exceeds the budget of {budget}")
    return total


def _chunk_plan(ifs: IFS, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Split words of length k into (prefix products, shared suffix products)."""
    big_n = len(ifs)
    suffix_len = k
    while big_n**suffix_len > _CHUNK_LEVELS_MAX and suffix_len > 1:
        suffix_len -= 1
    return _all_products(ifs.linears, k - suffix_len), _all_products(ifs.linears, suffix_len)


def level_spectra(ifs: IFS, k: int, budget: int = DEFAULT_PRESSURE_BUDGET) -> Iterator[np.ndarray]:
    """Singular values of S_w for all |w| = k, in lexicographic chunks."""
    _check_budget(ifs, k, budget)
    prefixes, suffixes = _chunk_plan(ifs, k)
    for p in prefixes:
        yield batch_singular_values(p @ suffixes)


def pressure_sum(ifs: IFS, k: int, s: float, budget: int = DEFAULT_PRESSURE_BUDGET, workers: int = 1) -> float:
    """Sum of phi^s(S_w) over all words of length k."""
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    _check_budget(ifs, k, budget)
    prefixes, suffixes = _chunk_plan(ifs, k)

    def part(p):
        return float(np.sum(phi_from_spectrum(batch_singular_values(p @ suffixes), s)))

    if workers <= 1:
        parts = [part(p) for p in prefixes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(part, prefixes))
    # fixed reduction order keeps the result independent of the worker count
    return math.fsum(parts)


@dataclass
class PressureProfile:
    k: int
    root: float
    evaluations: dict[float, float] = field(default_factory=dict)


def solve_sk(ifs: IFS, k: int, budget: int = DEFAULT_PRESSURE_BUDGET, workers: int = 1,
             ftol: float = 1e-10, xtol: float = 1e-12) -> PressureProfile:
    """Root s_k of sum_{|w|=k} phi^s(S_w) = 1 by bisection on [0, 2n]."""
    total = _check_budget(ifs, k, budget)
    if total <= _CACHE_MAX:
        spectra = np.concatenate(list(level_spectra(ifs, k, budget)))

        def pressure(s):
            return math.fsum(phi_from_spectrum(spectra, s))
    else:
        def pressure(s):
            return pressure_sum(ifs, k, s, budget, workers)

    profile = PressureProfile(k, 0.0)
    lo, hi = 0.0, 2.0 * ifs.dim
    f_lo = pressure(lo)
    profile.evaluations[lo] = f_lo
    if f_lo <= 1.0 + ftol:
        # a single map: the pressure starts at exactly 1
        return profile
    f_hi = pressure(hi)
    profile.evaluations[hi] = f_hi
    if f_hi >= 1.0:
        raise DegeneratePressureError(f"pressure at s = {hi} is {f_hi} >= 1 for k = {k}")
    mid = 0.5 * (lo + hi)
    while True:
        mid = 0.5 * (lo + hi)
        val = pressure(mid)
        profile.evaluations[mid] = val
        if abs(val - 1.0) < ftol or hi - lo < xtol:
            break
        if val > 1.0:
            lo = mid
        else:
            hi = mid
    profile.root = mid
    return profile


@dataclass
class AffinityEstimate:
    """s_k for k = 1..k_max.

    ``upper`` = min_k s_k is a certified upper bound for the affinity
    dimension; ``extrapolated`` is an Aitken delta-squared guess and is not
    certified in either direction.
    """

    upper: float
    sequence: list[tuple[int, float]]
    k_max: int
    convergence: float
    extrapolated: float

    def as_dict(self) -> dict:
        out = {
            "affinity_upper_bound": self.upper,
            "affinity_estimate": self.extrapolated,
            "k_max": self.k_max,
            "convergence": self.convergence,
        }
        for k, sk in self.sequence:
            out[f"s_{k}"] = sk
        return out


def aitken(x0: float, x1: float, x2: float) -> float:
    denom = x2 - 2.0 * x1 + x0
    if abs(denom) < 1e-14:
        return x2
    return x2 - (x2 - x1) ** 2 / denom


def affinity_estimate(ifs: IFS, k_max: int, budget: int = DEFAULT_PRESSURE_BUDGET, workers: int = 1) -> AffinityEstimate:
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    seq: list[tuple[int, float]] = []
    for k in range(1, k_max + 1):
        if len(ifs) ** k > budget:
            break
        seq.append((k, solve_sk(ifs, k, budget, workers).root))
    if not seq:
        raise BudgetExceededError(f"even k = 1 needs {len(ifs)} words, over the budget of {budget}")
    values = [v for _, v in seq]
    conv = abs(values[-1] - values[-2]) if len(values) > 1 else math.inf
    extra = aitken(*values[-3:]) if len(values) >= 3 else values[-1]
    return AffinityEstimate(
        upper=min(values),
        sequence=seq,
        k_max=seq[-1][0],
        convergence=conv,
        extrapolated=extra,
    )
