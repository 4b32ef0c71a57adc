"""Slow, obviously-correct reference implementations used only by the tests."""

from itertools import combinations

import numpy as np

EPS = 1e-12


def _on_segment(p, a, b):
    d = b - a
    L = d @ d
    if L <= EPS:
        return np.abs(p - a).max() <= 1e-10
    t = np.clip((p - a) @ d / L, 0.0, 1.0)
    return np.abs(a + t * d - p).max() <= 1e-10


def hull_contains_barycentric(points, p):
    """Membership in the hull of K <= 3 distributions via triangles and segments.

    Works in the first K - 1 coordinates, which determine a distribution.
    """
    Q = np.asarray(points, dtype=float)[:, :-1]
    x = np.asarray(p, dtype=float)[:-1]
    if Q.shape[1] == 1:
        return Q.min() - 1e-10 <= x[0] <= Q.max() + 1e-10
    if any(np.abs(q - x).max() <= 1e-10 for q in Q):
        return True
    if any(_on_segment(x, Q[i], Q[j]) for i, j in combinations(range(len(Q)), 2)):
        return True
    for i, j, k in combinations(range(len(Q)), 3):
        T = np.column_stack([Q[j] - Q[i], Q[k] - Q[i]])
        if abs(np.linalg.det(T)) <= EPS:
            continue
        lam = np.linalg.solve(T, x - Q[i])
        if lam.min() >= -1e-10 and lam.sum() <= 1 + 1e-10:
            return True
    return False


def auroc_pairwise(neg, pos):
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(neg) * len(pos))


def numeric_gradient(f, theta, h=1e-5):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def hull_case(rng):
    """Random (points, p) pair; about half the queries are convex combinations."""
    K = int(rng.integers(2, 4))
    m = int(rng.integers(1, 7))
    pts = rng.dirichlet(np.full(K, rng.uniform(0.3, 2.0)), size=m)
    if rng.random() < 0.5:
        p = rng.dirichlet(np.ones(m)) @ pts
    else:
        p = rng.dirichlet(np.ones(K))
    return pts, p / p.sum()
