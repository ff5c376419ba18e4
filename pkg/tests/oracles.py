"""Independent brute-force oracles shared by the unit and acceptance tests."""

from __future__ import annotations

import itertools

import numpy as np


def brute_force_assignment(costs: np.ndarray, allowed: np.ndarray) -> list[tuple[int, int]]:
    """Most pairs, then least cost, then the lexicographically smallest pair list.

    Every partial matching is the allowed part of some permutation of the
    padded square matrix, so enumerating permutations covers them all.
    """
    costs = np.asarray(costs, float)
    allowed = np.asarray(allowed, bool)
    r, c = costs.shape
    if r == 0 or c == 0:
        return []
    n = max(r, c)
    cost = np.zeros((n, n))
    ok = np.zeros((n, n), bool)
    cost[:r, :c] = np.where(allowed, costs, 0.0)
    ok[:r, :c] = allowed
    perms = np.array(list(itertools.permutations(range(n))))
    rows = np.arange(n)
    mask = ok[rows, perms]
    count = mask.sum(axis=1)
    total = np.where(mask, cost[rows, perms], 0.0).sum(axis=1)
    best = count == count.max()
    lo = total[best].min()
    best &= np.abs(total - lo) <= 1e-9 * max(1.0, abs(lo))
    candidates = set()
    for k in np.flatnonzero(best):
        candidates.add(tuple((i, int(perms[k, i])) for i in range(n) if mask[k, i]))
    return list(min(candidates))


def brute_force_gated(costs: np.ndarray, gate: float) -> list[tuple[int, int]]:
    costs = np.asarray(costs, float)
    return brute_force_assignment(costs, costs <= gate)


def random_instance(rng: np.random.Generator):
    r, c = int(rng.integers(1, 8)), int(rng.integers(1, 8))
    if rng.random() < 0.3:
        costs = rng.integers(0, 4, size=(r, c)).astype(float) / 4  # many ties
    else:
        costs = rng.random((r, c)) * 2
    gate = float(rng.choice([0.25, 0.5, 1.0, 1.5, 2.5]))
    return costs, gate


def exhaustive_idf1(overlap: np.ndarray, n_truth_obs: int, n_pred_obs: int) -> float:
    """Best IDF1 over every bijection between truth and predicted ids."""
    best = 0
    t, p = overlap.shape
    for perm in itertools.permutations(range(max(t, p)), min(t, p)):
        if t <= p:
            s = sum(overlap[i, perm[i]] for i in range(t))
        else:
            s = sum(overlap[perm[j], j] for j in range(p))
        best = max(best, s)
    total = n_truth_obs + n_pred_obs
    return 2 * best / total if total else 1.0
