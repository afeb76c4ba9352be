import itertools
import math
from functools import reduce

import numpy as np
import pytest

from selfaffine.affinity import affinity_estimate, aitken, pressure_sum, solve_sk
from selfaffine.ifs import IFS, BudgetExceededError

from conftest import random_ifs

SQ5 = math.sqrt(5.0)
A1, A2 = (1 + SQ5) / 4, (SQ5 - 1) / 4
# 2 a1 a2^(s-1) = 1
S1_SHEARS = 1 + math.log(1 / (2 * A1)) / math.log(A2)
LOG3_2 = math.log(3) / math.log(2)


def brute_pressure(linears, k, s):
    total = 0.0
    for w in itertools.product(range(len(linears)), repeat=k):
        m = reduce(np.matmul, (linears[i] for i in w))
        sv = np.linalg.svd(m, compute_uv=False)
        if s <= 1:
            total += sv[0] ** s
        elif s <= 2:
            total += sv[0] * sv[1] ** (s - 1)
        else:
            total += (sv[0] * sv[1]) ** (s / 2)
    return total


def brute_root(linears, k):
    lo, hi = 0.0, 4.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if brute_pressure(linears, k, mid) > 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_pressure_examples(shears, sierpinski):
    assert pressure_sum(shears, 1, 2.0) == pytest.approx(0.5, rel=1e-14)
    assert pressure_sum(shears, 5, 0.0) == 32
    for k in (1, 3, 6):
        assert pressure_sum(sierpinski, k, 1.2) == pytest.approx(3**k * 0.5 ** (1.2 * k), rel=1e-12)


def test_pressure_budget(shears):
    with pytest.raises(BudgetExceededError):
        pressure_sum(shears, 10, 1.0, budget=512)


def test_sk_closed_forms(shears, sierpinski):
    for k in (1, 2, 5):
        assert solve_sk(sierpinski, k).root == pytest.approx(LOG3_2, abs=1e-9)
    assert solve_sk(shears, 1).root == pytest.approx(S1_SHEARS, abs=1e-9)


def test_single_map_root_is_zero():
    # phi^s < 1 for every s > 0, so only s = 0 balances a single map
    prof = solve_sk(IFS.from_arrays([np.diag([0.5, 0.25])]), 1)
    assert prof.root == 0.0


def test_root_correctness_random():
    rng = np.random.default_rng(11)
    for _ in range(10):
        ifs = random_ifs(rng, maps=3)
        for k in (1, 3):
            prof = solve_sk(ifs, k)
            assert 0 <= prof.root <= 4
            assert pressure_sum(ifs, k, prof.root) == pytest.approx(1.0, abs=1e-8)


def test_matches_bruteforce_k8(shears):
    assert solve_sk(shears, 8).root == pytest.approx(brute_root(shears.linears, 8), abs=1e-9)


def test_bruteforce_random_k4():
    rng = np.random.default_rng(3)
    ifs = random_ifs(rng, maps=3)
    assert solve_sk(ifs, 4).root == pytest.approx(brute_root(ifs.linears, 4), abs=1e-9)


def test_pressure_strictly_decreasing():
    rng = np.random.default_rng(4)
    for _ in range(10):
        ifs = random_ifs(rng)
        vals = [pressure_sum(ifs, 3, s) for s in np.linspace(0, 4, 17)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_subadditive_bracketing():
    rng = np.random.default_rng(9)
    for _ in range(5):
        ifs = random_ifs(rng)
        sk = {k: solve_sk(ifs, k).root for k in range(1, 7)}
        for k1 in range(1, 4):
            for k2 in range(1, 7 - k1):
                assert sk[k1 + k2] <= max(sk[k1], sk[k2]) + 1e-8


def test_similarity_sequence_constant():
    ifs = IFS.from_arrays([np.eye(2) * 0.5, np.eye(2) * 0.3], [[0, 0], [0.7, 0.7]])
    # 0.5^s + 0.3^s = 1
    lo, hi = 0.0, 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if 0.5**mid + 0.3**mid > 1 else (lo, mid)
    est = affinity_estimate(ifs, 5)
    for _, s in est.sequence:
        assert s == pytest.approx(lo, abs=1e-9)


def test_estimate_shears(shears):
    est = affinity_estimate(shears, 8)
    seq = [s for _, s in est.sequence]
    assert est.upper == min(seq)
    assert 1.0 < est.upper <= S1_SHEARS + 1e-12
    assert all(b <= a + 1e-6 for a, b in zip(seq, seq[1:]))
    assert est.convergence == pytest.approx(abs(seq[-1] - seq[-2]))


def test_estimate_stops_at_budget(shears):
    est = affinity_estimate(shears, 12, budget=1 << 6)
    assert est.k_max == 6


def test_aitken_geometric():
    # x_k = 1 + 0.5^k is extrapolated exactly
    assert aitken(1.5, 1.25, 1.125) == pytest.approx(1.0)
