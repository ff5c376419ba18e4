"""Exact minimum-cost bipartite assignment with gating and deterministic ties.

Forbidden pairs are inflated to a sentinel cost large enough that the solver
first maximises the number of allowed pairs and only then minimises their
total cost; sentinel pairs are dropped from the result. Among equal-cost
optima the lexicographically smallest sorted pair list is returned, which
keeps reruns byte-identical.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

Pair = tuple[int, int]


def _hungarian(cost: list[list[float]]) -> tuple[list[int], list[float], list[float]]:
    """Shortest-augmenting-path Hungarian method on a square matrix.

    Returns ``(row_to_col, u, v)`` where ``u``/``v`` are optimal dual
    potentials with ``cost[i][j] - u[i] - v[j] >= 0``.
    """
    n = len(cost)
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row (1-based) matched to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = cost[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = [0] * n
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _lex_min_tight(
    tight: list[set[int]],
    valid: list[set[int]],
    n_real_rows: int,
    match: list[int],
) -> list[int]:
    """Lexicographically smallest perfect matching inside the tight-edge graph."""
    n = len(tight)
    edges = [set(t) for t in tight]
    col_owner = [0] * n
    for r, c in enumerate(match):
        col_owner[c] = r
    fixed = [False] * n

    def augment(start_row: int, target_col: int) -> bool:
        # DFS for an alternating path from a free row to the single free column
        seen: set[int] = set()
        parent: dict[int, int] = {}
        stack = [start_row]
        while stack:
            r = stack.pop()
            for c in sorted(edges[r], reverse=True):
                if c in seen:
                    continue
                if c == target_col:
                    # flip the path back to start_row
                    cur_r, cur_c = r, c
                    while True:
                        prev_c = match[cur_r]
                        match[cur_r] = cur_c
                        col_owner[cur_c] = cur_r
                        if cur_r == start_row:
                            return True
                        cur_c = prev_c
                        cur_r = parent[cur_c]
                owner = col_owner[c]
                if fixed[owner]:
                    continue
                seen.add(c)
                parent[c] = r
                stack.append(owner)
        return False

    for r in range(n_real_rows):
        placed = False
        for c in sorted(valid[r] & edges[r]):
            if fixed[col_owner[c]] and col_owner[c] != r:
                continue
            if match[r] == c:
                fixed[r] = True
                placed = True
                break
            other = col_owner[c]
            old_c = match[r]
            saved = (list(match), list(col_owner))
            match[r] = c
            col_owner[c] = r
            match[other] = -1
            fixed[r] = True
            if augment(other, old_c):
                placed = True
                break
            fixed[r] = False
            match[:], col_owner[:] = saved
        if not placed:
            # row stays unmatched in the output; forbid its allowed columns
            edges[r] -= valid[r]
    return match


def solve_masked(costs: np.ndarray, allowed: np.ndarray) -> list[Pair]:
    """Core solver: ``allowed[i, j]`` marks pairs that may be matched."""
    costs = np.asarray(costs, dtype=float)
    allowed = np.asarray(allowed, dtype=bool)
    if costs.ndim != 2 or costs.shape != allowed.shape:
        raise ValueError("costs and mask must be matching 2-D arrays")
    n_rows, n_cols = costs.shape
    if n_rows == 0 or n_cols == 0 or not allowed.any():
        return []
    if not np.all(np.isfinite(costs[allowed])):
        raise ValueError("allowed costs must be finite")

    lo = float(costs[allowed].min())
    span = float(costs[allowed].max()) - lo
    sentinel = span * min(n_rows, n_cols) + 1.0
    n = max(n_rows, n_cols)
    square = [[0.0] * n for _ in range(n)]
    for i in range(n_rows):
        row = square[i]
        for j in range(n_cols):
            row[j] = float(costs[i, j]) - lo if allowed[i, j] else sentinel

    match, u, v = _hungarian(square)
    tol = 1e-9 * max(1.0, sentinel)
    tight = [{j for j in range(n) if square[i][j] - u[i] - v[j] <= tol} for i in range(n)]
    for i, j in enumerate(match):
        tight[i].add(j)
    valid = [
        {j for j in range(n_cols) if allowed[i, j]} if i < n_rows else set() for i in range(n)
    ]
    match = _lex_min_tight(tight, valid, n_rows, match)
    return sorted(
        (i, match[i]) for i in range(n_rows) if match[i] < n_cols and allowed[i, match[i]]
    )


def solve_assignment(costs: Sequence[Sequence[float]] | np.ndarray, gate: float) -> list[Pair]:
    """Gated minimum-cost matching; pairs with cost above ``gate`` never match."""
    arr = np.asarray(costs, dtype=float)
    if arr.size == 0:
        return []
    if arr.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if not np.all(np.isfinite(arr)):
        raise ValueError("cost matrix entries must be finite")
    return solve_masked(arr, arr <= gate)


def matching_cost(costs: np.ndarray, pairs: Sequence[Pair]) -> float:
    return float(sum(costs[i, j] for i, j in pairs))
