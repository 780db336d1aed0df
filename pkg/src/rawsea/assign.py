"""Exact minimum-cost assignment (Hungarian algorithm, O(n^3) form).

Authored here rather than delegated so the solver's behavior on sentinel and
padding cells is fully pinned down by this package's tests: rectangular
matrices are padded square, infinite cells are replaced by the padding value,
and any pairing that lands on such a cell is reported unmatched instead of
being returned as a real match.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np


def padding_value(costs: np.ndarray) -> float:
    """Strictly dominates every finite entry: 10 * max finite + 1."""
    finite = costs[np.isfinite(costs)]
    return 10.0 * float(finite.max()) + 1.0 if finite.size else 1.0


def pad_to_square(costs: np.ndarray) -> np.ndarray:
    """Square copy with sentinel and padding cells set to padding_value."""
    costs = np.asarray(costs, dtype=np.float64)
    n, m = costs.shape
    k = max(n, m)
    pad = padding_value(costs)
    sq = np.full((k, k), pad)
    sq[:n, :m] = np.where(np.isfinite(costs), costs, pad)
    return sq


def min_cost_assignment(square: np.ndarray) -> list[int]:
    """Column assigned to each row of a square all-finite cost matrix.

    Potentials-and-augmenting-paths formulation; exact for real costs, no
    iteration caps or tolerances involved.
    """
    a = np.asarray(square, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix must be all-finite; map sentinels first")

    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)    # p[j]: row matched to column j (1-based, 0 = none)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            row = a[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
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
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    cols = [0] * n
    for j in range(1, n + 1):
        cols[p[j] - 1] = j - 1
    return cols


class SolveResult(NamedTuple):
    matches: list            # (row, col, cost) over finite original cells
    unmatched_rows: list
    unmatched_cols: list


def solve(costs: np.ndarray) -> SolveResult:
    """Assignment on an n x m matrix whose +inf cells are forbidden pairings."""
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2 or costs.shape[0] < 1 or costs.shape[1] < 1:
        raise ValueError(f"need a non-empty 2-D matrix, got shape {costs.shape}")
    n, m = costs.shape
    cols = min_cost_assignment(pad_to_square(costs))
    matches = []
    for i in range(n):
        j = cols[i]
        if j < m and math.isfinite(costs[i, j]):
            matches.append((i, j, float(costs[i, j])))
    matched_rows = {i for i, _, _ in matches}
    matched_cols = {j for _, j, _ in matches}
    return SolveResult(
        matches=matches,
        unmatched_rows=[i for i in range(n) if i not in matched_rows],
        unmatched_cols=[j for j in range(m) if j not in matched_cols],
    )
