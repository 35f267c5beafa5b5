"""Independent reference solvers used only by the tests."""
from __future__ import annotations

from itertools import combinations

import numpy as np


def lip_bruteforce(values, dist) -> float:
    n = len(values)
    best = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                best = max(best, abs(values[i] - values[j]) / dist[i][j])
    return best


def lipschitz_polytope_vertices(dist: np.ndarray) -> np.ndarray:
    """Vertices of {f : f(0) = 0, f(i) - f(j) <= d(i, j)} by active-set enumeration.

    Unknowns are f(1..n-1); every choice of n-1 constraints whose system is
    nonsingular gives a candidate, kept if feasible. Returns an array of rows
    (f(0), ..., f(n-1)).
    """
    n = dist.shape[0]
    if n == 1:
        return np.zeros((1, 1))
    rows, rhs = [], []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a = np.zeros(n)
            a[i] += 1.0
            a[j] -= 1.0
            rows.append(a[1:])
            rhs.append(dist[i, j])
    A, b = np.array(rows), np.array(rhs)
    verts = []
    for act in combinations(range(len(A)), n - 1):
        M = A[list(act)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        f = np.linalg.solve(M, b[list(act)])
        if np.all(A @ f <= b + 1e-9):
            verts.append(np.concatenate([[0.0], f]))
    return np.unique(np.round(np.array(verts), 12), axis=0)


def dual_lp_value(masses: np.ndarray, vertices: np.ndarray) -> float:
    """max over Lipschitz-polytope vertices of <mu, f>."""
    return float((vertices @ masses).max())


def transport_lp_value(dist: np.ndarray, masses: np.ndarray) -> float:
    """Primal transport LP solved with scipy (balanced at the base point)."""
    from scipy.optimize import linprog

    n = dist.shape[0]
    bal = np.array(masses, dtype=float)
    bal[0] -= bal.sum()
    # variables x[i, j] >= 0, flow out minus flow in equals bal
    A = np.zeros((n, n * n))
    for i in range(n):
        for j in range(n):
            A[i, i * n + j] += 1.0
            A[j, i * n + j] -= 1.0
    res = linprog(dist.ravel(), A_eq=A, b_eq=bal, bounds=(0, None), method="highs")
    assert res.success
    return float(res.fun)


def tree_transport_value(n: int, merges, masses: np.ndarray) -> float:
    """W1 on the dendrogram tree: edge child->parent has length (h_parent - h_child) / 2
    and carries the net mass of the leaves below it."""
    bal = np.array(masses, dtype=float)
    bal[0] -= bal.sum()
    height = {i: 0.0 for i in range(n)}
    below = {i: bal[i] for i in range(n)}
    total = 0.0
    for i, (l, r, h) in enumerate(merges):
        node = n + i
        height[node] = h
        for child in (l, r):
            total += (h - height[child]) / 2 * abs(below[child])
        below[node] = below[l] + below[r]
    return total


def separation_constant_mp(digits: int = 40, terms: int = 200) -> tuple:
    """2 / prod_{j>=1} (1 - 2^-j) by mpmath partial product plus a tail bound."""
    import mpmath

    mpmath.mp.dps = digits
    p = mpmath.mpf(1)
    for j in range(1, terms + 1):
        p *= 1 - mpmath.mpf(2) ** (-j)
    partial = 2 / p
    # remaining factors prod_{j>terms} 1/(1-2^-j) <= exp(2 * 2^-terms)
    tail = partial * (mpmath.e ** (2 * mpmath.mpf(2) ** (-terms)) - 1)
    return partial, tail
