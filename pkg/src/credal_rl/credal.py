"""Credal sets built from finite prediction sets, and the coverage/efficiency metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.optimize import linprog

from ._validation import check_distribution, check_distributions
from .exceptions import InputError, SolverError

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class IntervalCredalSet:
    """Box of per-class lower and upper probabilities intersected with the simplex."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != up.shape or lo.size == 0:
            raise InputError("lower and upper must be nonempty vectors of equal length")
        if np.any(lo < -MEMBERSHIP_TOL) or np.any(up > 1 + MEMBERSHIP_TOL) or np.any(lo > up + MEMBERSHIP_TOL):
            raise InputError("need 0 <= lower <= upper <= 1")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def n_classes(self):
        return self.lower.size

    @property
    def is_feasible(self):
        return self.lower.sum() <= 1 + MEMBERSHIP_TOL and self.upper.sum() >= 1 - MEMBERSHIP_TOL

    def to_dict(self):
        return {"kind": "interval", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class HullCredalSet:
    """Convex hull of finitely many distributions."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", check_distributions(self.points, name="hull points"))

    @property
    def n_classes(self):
        return self.points.shape[1]

    def to_dict(self):
        return {"kind": "hull", "points": self.points.tolist()}


CredalSet = Union[IntervalCredalSet, HullCredalSet]


def credal_set_from_dict(d) -> CredalSet:
    if d.get("kind") == "interval":
        return IntervalCredalSet(np.asarray(d["lower"]), np.asarray(d["upper"]))
    if d.get("kind") == "hull":
        return HullCredalSet(np.asarray(d["points"]))
    raise InputError(f"unknown credal set kind {d.get('kind')!r}")


def dump_credal_sets(sets: Sequence[CredalSet], path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([s.to_dict() for s in sets], fh)


def load_credal_sets(path):
    with open(path, encoding="utf-8") as fh:
        return [credal_set_from_dict(d) for d in json.load(fh)]


def interval_from_finite(points) -> IntervalCredalSet:
    """Componentwise min/max of a finite set of distributions."""
    P = check_distributions(points, name="credal sample")
    return IntervalCredalSet(P.min(axis=0), P.max(axis=0))


def intervals_from_predictions(preds):
    """Vectorized :func:`interval_from_finite` over instances.

    ``preds`` has shape ``(n_members, n_instances, K)``; returns lower and
    upper arrays of shape ``(n_instances, K)``.
    """
    preds = np.asarray(preds, dtype=float)
    if preds.ndim != 3 or preds.shape[0] == 0:
        raise InputError("predictions must have shape (n_members, n_instances, K)")
    return preds.min(axis=0), preds.max(axis=0)


def interval_contains(c: IntervalCredalSet, p, tol: float = MEMBERSHIP_TOL) -> bool:
    p = np.asarray(p, dtype=float)
    if p.shape != c.lower.shape:
        raise InputError(f"distribution has {p.size} classes, credal set has {c.n_classes}")
    return bool(np.all(c.lower - tol <= p) and np.all(p <= c.upper + tol))


def hull_contains(h: HullCredalSet, p, tol: float = MEMBERSHIP_TOL, max_iter: int = 10_000) -> bool:
    """Decide whether ``p`` is a convex combination of the hull points.

    Solves the linear program ``min sum(s+ + s-)`` subject to
    ``Q^T w + s+ - s- = p``, ``sum(w) = 1``, ``w, s+, s- >= 0``; ``p`` is a
    member when the optimal L1 residual is at most ``tol``.
    """
    p = check_distribution(p, atol=max(tol, 1e-9))
    Q = h.points
    m, K = Q.shape
    if p.size != K:
        raise InputError(f"distribution has {p.size} classes, credal set has {K}")
    # cheap exits before calling the solver
    if m == 1:
        return bool(np.abs(Q[0] - p).sum() <= tol)
    if np.any(p < Q.min(axis=0) - tol) or np.any(p > Q.max(axis=0) + tol):
        return False

    eye = np.eye(K)
    A_eq = np.vstack([
        np.hstack([Q.T, eye, -eye]),
        np.hstack([np.ones((1, m)), np.zeros((1, 2 * K))]),
    ])
    b_eq = np.append(p, 1.0)
    cost = np.concatenate([np.zeros(m), np.ones(2 * K)])
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs",
                  options={"maxiter": max_iter, "primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status == 1:
        raise SolverError(f"LP hit the iteration cap of {max_iter}")
    if res.status != 0:
        raise SolverError(f"LP solver failed: {res.message}")
    return bool(res.fun <= tol)


def contains(s: CredalSet, p, tol: float = MEMBERSHIP_TOL) -> bool:
    if isinstance(s, IntervalCredalSet):
        return interval_contains(s, p, tol)
    return hull_contains(s, p, tol)


def coverage(sets: Sequence[CredalSet], truths, tol: float = MEMBERSHIP_TOL) -> float:
    """Fraction of instances whose ground-truth distribution lies in its credal set."""
    truths = np.asarray(truths, dtype=float)
    if len(sets) == 0:
        raise InputError("coverage of an empty test set is undefined")
    if len(sets) != len(truths):
        raise InputError(f"{len(sets)} credal sets but {len(truths)} ground-truth distributions")
    return float(np.mean([contains(s, t, tol) for s, t in zip(sets, truths)]))


def interval_coverage(lower, upper, truths, tol: float = MEMBERSHIP_TOL) -> float:
    """Vectorized coverage for interval sets given as ``(n, K)`` bound arrays."""
    truths = np.asarray(truths, dtype=float)
    if truths.shape != np.shape(lower) or truths.shape != np.shape(upper):
        raise InputError("bounds and ground truths must share shape (n, K)")
    if truths.shape[0] == 0:
        raise InputError("coverage of an empty test set is undefined")
    inside = np.all((lower - tol <= truths) & (truths <= upper + tol), axis=1)
    return float(inside.mean())


def _bounds(s: CredalSet):
    if isinstance(s, IntervalCredalSet):
        return s.lower, s.upper
    return s.points.min(axis=0), s.points.max(axis=0)


def efficiency(sets: Sequence[CredalSet]) -> float:
    """One minus the mean (over instances) of the mean interval width (over classes).

    Hulls are measured by the per-class range of their points.
    """
    if len(sets) == 0:
        raise InputError("efficiency of an empty test set is undefined")
    K = {s.n_classes for s in sets}
    if len(K) != 1:
        raise InputError("all credal sets must have the same number of classes")
    widths = [np.mean(up - lo) for lo, up in map(_bounds, sets)]
    return float(1.0 - np.mean(widths))


def interval_efficiency(lower, upper) -> float:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.size == 0:
        raise InputError("efficiency of an empty test set is undefined")
    return float(1.0 - np.mean(upper - lower))
