"""Upper and lower Shannon entropy over credal sets.

Epistemic uncertainty is the gap ``EU = S_upper - S_lower`` between the largest
and smallest entropy attained inside the credal set. All entropies are in nats.

Interval (box) sets are handled exactly:

* the maximizer is ``p_k = clip(c, lower_k, upper_k)`` with the scalar ``c``
  chosen so that ``p`` sums to one (the feasible point closest to uniform);
* entropy is concave, so its minimum sits at a vertex of the box-simplex
  polytope. Every vertex has at most one coordinate strictly inside its
  bounds, so the vertices are enumerated as (free class, subset of the other
  classes at their upper bound) pairs.

Convex hulls use projected gradient ascent on the mixture weights for the upper
bound, and the minimum over generating points for the lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._validation import shannon_entropy
from .credal import HullCredalSet, IntervalCredalSet
from .exceptions import InputError

FEAS_TOL = 1e-9
BISECT_TOL = 1e-12
EXACT_LIMIT = 10
METHODS = ("exact_interval", "numeric", "brute_force")


@dataclass(frozen=True)
class EntropyBounds:
    upper: float
    lower: float
    eu: float
    method: str


def _check_feasible(lower, upper):
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape:
        raise InputError("lower and upper bounds must have the same shape")
    if np.any(lower > upper + FEAS_TOL):
        raise InputError("lower bound exceeds upper bound")
    bad = (lower.sum(axis=1) > 1 + FEAS_TOL) | (upper.sum(axis=1) < 1 - FEAS_TOL)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InputError(
            f"infeasible interval set at row {i}: sum(lower)={lower[i].sum():.12g}, "
            f"sum(upper)={upper[i].sum():.12g}"
        )
    return lower, upper


def max_entropy_points(lower, upper, tol=BISECT_TOL, max_iter=200):
    """Entropy maximizers for a batch of interval sets, shape ``(n, K)``."""
    lower, upper = _check_feasible(lower, upper)
    lo = np.zeros(lower.shape[0])
    hi = np.ones(lower.shape[0])
    c = 0.5 * (lo + hi)
    for _ in range(max_iter):
        c = 0.5 * (lo + hi)
        gap = np.clip(c[:, None], lower, upper).sum(axis=1) - 1.0
        if np.all(np.abs(gap) <= tol):
            break
        below = gap < 0
        lo = np.where(below, c, lo)
        hi = np.where(below, hi, c)
    return np.clip(c[:, None], lower, upper)


def _vertex_candidates(lower, upper):
    """Vertices of ``{p : lower <= p <= upper, sum(p) = 1}`` for one set (with repeats)."""
    K = lower.size
    if K == 1:
        return np.ones((1, 1))
    masks = np.array(list(product([False, True], repeat=K - 1)))
    out = []
    for f in range(K):
        others = np.delete(np.arange(K), f)
        vals = np.where(masks, upper[others], lower[others])
        free = 1.0 - vals.sum(axis=1)
        ok = (free >= lower[f] - FEAS_TOL) & (free <= upper[f] + FEAS_TOL)
        if not np.any(ok):
            continue
        pts = np.empty((int(ok.sum()), K))
        pts[:, others] = vals[ok]
        pts[:, f] = np.clip(free[ok], lower[f], upper[f])
        out.append(pts)
    return np.vstack(out)


def interval_extreme_points(c: IntervalCredalSet):
    """Distinct vertices of an interval credal set (deduplicated within 1e-12)."""
    lower, upper = _check_feasible(c.lower, c.upper)
    pts = _vertex_candidates(lower[0], upper[0])
    keys = np.round(pts / 1e-12).astype(np.int64) if pts.size else pts
    _, idx = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(idx)]


def _greedy_vertex(lower, upper):
    """One vertex: give leftover mass to classes in order of decreasing upper bound."""
    p = lower.copy()
    left = 1.0 - lower.sum()
    for k in np.argsort(-upper, kind="stable"):
        add = min(upper[k] - lower[k], left)
        p[k] += add
        left -= add
    return p


def upper_entropy_interval(c: IntervalCredalSet) -> float:
    """Maximum entropy over an interval credal set (clamp-and-bisect, exact)."""
    return float(shannon_entropy(max_entropy_points(c.lower, c.upper))[0])


def _lower_entropy_interval(lower, upper, exact_limit):
    if lower.size <= exact_limit:
        pts = _vertex_candidates(lower, upper)
        return float(shannon_entropy(pts).min()), "exact_interval"
    return float(shannon_entropy(_greedy_vertex(lower, upper))), "numeric"


def lower_entropy_interval(c: IntervalCredalSet, exact_limit: int = EXACT_LIMIT) -> float:
    """Minimum entropy over an interval credal set.

    Exact by vertex enumeration for up to ``exact_limit`` classes; above that
    a single greedy vertex gives an upper estimate of the minimum.
    """
    lower, upper = _check_feasible(c.lower, c.upper)
    return _lower_entropy_interval(lower[0], upper[0], exact_limit)[0]


def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = ind[u - css / ind > 0][-1]
    return np.maximum(v - css[rho - 1] / rho, 0.0)


def project_box_simplex(v, lower, upper):
    """Euclidean projection onto ``{lower <= p <= upper, sum(p) = 1}``.

    ``sum(clip(v - t, lower, upper))`` is piecewise linear and nonincreasing in
    ``t``; the root is located exactly between consecutive breakpoints.
    """
    bps = np.unique(np.concatenate([v - lower, v - upper]))
    vals = np.clip(v[None, :] - bps[:, None], lower, upper).sum(axis=1)
    # vals is nonincreasing in t; find the segment where it crosses 1
    j = np.searchsorted(-vals, -1.0)
    if j == 0:
        t = bps[0]
    elif j == bps.size:
        t = bps[-1]
    else:
        t0, t1, f0, f1 = bps[j - 1], bps[j], vals[j - 1], vals[j]
        t = t0 if f0 == f1 else t0 + (f0 - 1.0) * (t1 - t0) / (f0 - f1)
    return np.clip(v - t, lower, upper)


def _entropy_grad(p):
    return -(np.log(np.maximum(p, 1e-300)) + 1.0)


def _projected_ascent(f, grad, project, x0, tol, max_iter):
    """Projected gradient ascent with Armijo backtracking for a concave ``f``."""
    x = project(x0)
    fx = f(x)
    step = 1.0
    stalled = 0
    for _ in range(max_iter):
        g = grad(x)
        while True:
            x_new = project(x + step * g)
            d = x_new - x
            f_new = f(x_new)
            if f_new >= fx + 1e-4 * g @ d or step < 1e-16:
                break
            step *= 0.5
        if np.linalg.norm(d) / step <= tol or np.linalg.norm(d) == 0.0:
            x, fx = x_new, max(f_new, fx)
            break
        # near an active bound the step norm can stay above tol while f no longer moves
        stalled = stalled + 1 if f_new - fx <= 1e-15 * max(1.0, abs(fx)) else 0
        x, fx = x_new, f_new
        if stalled >= 5:
            break
        step *= 2.0
    return x, fx


def upper_entropy_interval_numeric(c: IntervalCredalSet, tol=1e-10, max_iter=10_000) -> float:
    """Maximum entropy over an interval set by projected gradient ascent.

    Slower than :func:`upper_entropy_interval`; kept as an independent check.
    """
    lower, upper = _check_feasible(c.lower, c.upper)
    lower, upper = lower[0], upper[0]
    _, fx = _projected_ascent(
        lambda p: float(shannon_entropy(p)),
        _entropy_grad,
        lambda v: project_box_simplex(v, lower, upper),
        0.5 * (lower + upper),
        tol, max_iter,
    )
    return fx


def upper_entropy_hull(h: HullCredalSet, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Maximum entropy over a convex hull, optimizing the mixture weights.

    Starts from uniform weights and stops when the projected-gradient step
    norm falls to ``tol`` or after ``max_iter`` iterations.
    """
    Q = h.points
    m = Q.shape[0]
    if m == 1:
        return float(shannon_entropy(Q[0]))
    _, fx = _projected_ascent(
        lambda w: float(shannon_entropy(w @ Q)),
        lambda w: Q @ _entropy_grad(w @ Q),
        project_simplex,
        np.full(m, 1.0 / m),
        tol, max_iter,
    )
    return fx


def lower_entropy_hull(h: HullCredalSet) -> float:
    """Minimum entropy over a convex hull: concavity puts it at a generating point."""
    return float(shannon_entropy(h.points).min())


def entropy_bounds_brute_force(c: IntervalCredalSet, step: float = 1e-3) -> EntropyBounds:
    """Grid search over the set for ``K <= 3`` (reference implementation).

    The first ``K - 1`` coordinates run over a grid of spacing ``step`` inside
    their bounds (endpoints included); the last is fixed by normalization.
    """
    lower, upper = _check_feasible(c.lower, c.upper)
    lower, upper = lower[0], upper[0]
    K = lower.size
    if K > 3:
        raise InputError("brute-force entropy bounds are limited to K <= 3")

    def axis(lo, hi):
        if hi <= lo:
            return np.array([lo])
        return np.unique(np.append(np.arange(lo, hi, step), hi))

    if K == 1:
        pts = np.ones((1, 1))
    elif K == 2:
        a = axis(max(lower[0], 1 - upper[1]), min(upper[0], 1 - lower[1]))
        pts = np.column_stack([a, 1 - a])
    else:
        rows = []
        for p0 in axis(lower[0], upper[0]):
            lo1 = max(lower[1], 1 - p0 - upper[2])
            hi1 = min(upper[1], 1 - p0 - lower[2])
            if hi1 < lo1 - FEAS_TOL:
                continue
            p1 = axis(lo1, max(lo1, hi1))
            rows.append(np.column_stack([np.full(p1.size, p0), p1, 1 - p0 - p1]))
        pts = np.vstack(rows)
    H = shannon_entropy(np.clip(pts, 0.0, 1.0))
    up, lo = float(H.max()), float(H.min())
    return EntropyBounds(upper=up, lower=lo, eu=up - lo, method="brute_force")


def epistemic_uncertainty(s, exact_limit: int = EXACT_LIMIT) -> EntropyBounds:
    """Entropy bounds and ``EU = upper - lower`` for an interval or hull credal set."""
    if isinstance(s, IntervalCredalSet):
        lower, upper = _check_feasible(s.lower, s.upper)
        up = upper_entropy_interval(s)
        lo, method = _lower_entropy_interval(lower[0], upper[0], exact_limit)
    elif isinstance(s, HullCredalSet):
        up = upper_entropy_hull(s)
        lo = lower_entropy_hull(s)
        method = "numeric"
    else:
        raise InputError(f"unsupported credal set type {type(s).__name__}")
    up = max(up, lo)
    return EntropyBounds(upper=up, lower=lo, eu=up - lo, method=method)


def interval_entropy_bounds(lower, upper, exact_limit: int = EXACT_LIMIT):
    """Batch entropy bounds for interval sets given as ``(n, K)`` arrays.

    Returns
    -------
    lower_entropy, upper_entropy : ndarray of shape (n,)
    """
    lower, upper = _check_feasible(lower, upper)
    s_up = shannon_entropy(max_entropy_points(lower, upper))
    s_lo = np.array([_lower_entropy_interval(lo, up, exact_limit)[0]
                     for lo, up in zip(lower, upper)])
    return s_lo, np.maximum(s_up, s_lo)


def hull_entropy_bounds(preds):
    """Batch entropy bounds for hull sets; ``preds`` has shape ``(m, n, K)``."""
    preds = np.asarray(preds, dtype=float)
    s_lo, s_up = [], []
    for i in range(preds.shape[1]):
        h = HullCredalSet(preds[:, i, :])
        s_lo.append(lower_entropy_hull(h))
        s_up.append(max(upper_entropy_hull(h), s_lo[-1]))
    return np.array(s_lo), np.array(s_up)
