"""Test-set metrics: coverage/efficiency reports, Pareto fronts and OoD AUROC."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from ._validation import check_distributions, shannon_entropy
from .credal import (
    MEMBERSHIP_TOL,
    HullCredalSet,
    hull_contains,
    interval_coverage,
    interval_efficiency,
    intervals_from_predictions,
)
from .exceptions import InputError
from .training import creens_prune_batch
from .uncertainty import hull_entropy_bounds, interval_entropy_bounds

SET_KINDS = ("interval", "hull")


@dataclass
class EvalReport:
    config_id: str
    alpha: Optional[float]
    coverage: float
    efficiency: float
    mean_eu: float
    per_member_accuracy: List[float] = field(default_factory=list)
    seed: int = 0
    set_kind: str = "interval"

    def __post_init__(self):
        for name in ("coverage", "efficiency"):
            v = getattr(self, name)
            if not (0.0 - 1e-12 <= v <= 1.0 + 1e-12) and not np.isnan(v):
                raise InputError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self):
        return asdict(self)

    def csv_row(self):
        acc = self.per_member_accuracy
        return {
            "config_id": self.config_id,
            "alpha": "" if self.alpha is None else self.alpha,
            "seed": self.seed,
            "set_kind": self.set_kind,
            "coverage": self.coverage,
            "efficiency": self.efficiency,
            "mean_eu": self.mean_eu,
            "member_accuracy_mean": float(np.mean(acc)) if acc else "",
            "member_accuracy_min": float(np.min(acc)) if acc else "",
            "member_accuracy_max": float(np.max(acc)) if acc else "",
        }


@dataclass
class OodReport:
    id_scores: List[float]
    ood_scores: List[float]
    auroc: float
    alpha: Optional[float] = None
    seed: int = 0

    def to_dict(self):
        return asdict(self)

    def csv_row(self):
        return {
            "alpha": "" if self.alpha is None else self.alpha,
            "seed": self.seed,
            "auroc": self.auroc,
            "mean_eu_id": float(np.mean(self.id_scores)),
            "mean_eu_ood": float(np.mean(self.ood_scores)),
            "n_id": len(self.id_scores),
            "n_ood": len(self.ood_scores),
        }


def reports_to_csv(reports, fh=None):
    """Write one flat CSV row per report; returns the text when ``fh`` is None."""
    out = fh or io.StringIO()
    rows = [r.csv_row() for r in reports]
    if rows:
        writer = csv.DictWriter(out, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return None if fh else out.getvalue()


def reports_to_json(reports):
    return json.dumps([r.to_dict() for r in reports])


def auroc(negatives, positives) -> float:
    """Probability that a positive outscores a negative, ties counting one half.

    Computed from average ranks (Mann-Whitney U).
    """
    neg = np.asarray(negatives, dtype=float).ravel()
    pos = np.asarray(positives, dtype=float).ravel()
    if neg.size == 0 or pos.size == 0:
        raise InputError("AUROC needs at least one negative and one positive score")
    ranks = rankdata(np.concatenate([neg, pos]))
    u = ranks[neg.size:].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (neg.size * pos.size))


def pareto_dominates(a, b) -> bool:
    """True when ``a`` is at least as good in coverage and efficiency, and better in one."""
    ge = a.coverage >= b.coverage and a.efficiency >= b.efficiency
    gt = a.coverage > b.coverage or a.efficiency > b.efficiency
    return ge and gt


def pareto_front(reports: Sequence) -> list:
    """Reports not dominated by any other report, in input order."""
    if len(reports) == 0:
        raise InputError("Pareto front of an empty collection is undefined")
    return [r for r in reports if not any(pareto_dominates(o, r) for o in reports if o is not r)]


def mean_distribution_entropy(dists) -> float:
    """Mean Shannon entropy (nats) over a list of distributions."""
    P = check_distributions(dists)
    return float(shannon_entropy(P).mean())


def credal_predictions(preds, set_kind="interval", creens_alpha=None):
    """Turn stacked member predictions ``(m, n, K)`` into per-instance credal sets.

    Returns ``(lower, upper)`` arrays for intervals, or the (possibly pruned)
    prediction stack for hulls.
    """
    if set_kind not in SET_KINDS:
        raise InputError(f"unknown set kind {set_kind!r}")
    if creens_alpha is not None:
        preds = creens_prune_batch(preds, creens_alpha)
    if set_kind == "interval":
        return intervals_from_predictions(preds)
    return preds


def epistemic_scores(preds, set_kind="interval", creens_alpha=None):
    """Per-instance EU for stacked predictions; returns (lower_S, upper_S, eu)."""
    sets = credal_predictions(preds, set_kind, creens_alpha)
    if set_kind == "interval":
        s_lo, s_up = interval_entropy_bounds(*sets)
    else:
        s_lo, s_up = hull_entropy_bounds(sets)
    return s_lo, s_up, s_up - s_lo


def evaluate_predictor(
    ensemble,
    X,
    ground_truth,
    hard_labels=None,
    set_kind="interval",
    creens_alpha=None,
    include_unconverged=True,
    config_id="run",
    seed=0,
    dataset_name="test data",
    tol=MEMBERSHIP_TOL,
) -> EvalReport:
    """Coverage, efficiency, mean EU and member accuracies on a test set.

    Efficiency is always measured on the per-class probability intervals, which
    for a hull are the intervals of its generating points.
    """
    if ground_truth is None:
        raise InputError(f"{dataset_name} has no ground-truth distributions; "
                         "coverage cannot be evaluated")
    truths = check_distributions(ground_truth, name="ground truth",
                                 n_classes=ensemble.n_classes)
    preds = ensemble.predict_members(X, include_unconverged)
    if preds.shape[1] != truths.shape[0]:
        raise InputError("features and ground truths disagree on length")
    sets = credal_predictions(preds, set_kind, creens_alpha)
    if set_kind == "interval":
        lower, upper = sets
        cov = interval_coverage(lower, upper, truths, tol)
        s_lo, s_up = interval_entropy_bounds(lower, upper)
    else:
        lower, upper = sets.min(axis=0), sets.max(axis=0)
        cov = float(np.mean([hull_contains(HullCredalSet(sets[:, i]), t, tol)
                             for i, t in enumerate(truths)]))
        s_lo, s_up = hull_entropy_bounds(sets)
    acc = []
    if hard_labels is not None:
        y = np.asarray(hard_labels)
        acc = [float(np.mean(p.argmax(axis=1) == y)) for p in preds]
    return EvalReport(
        config_id=config_id,
        alpha=ensemble.alpha if creens_alpha is None else creens_alpha,
        coverage=cov,
        efficiency=interval_efficiency(lower, upper),
        mean_eu=float(np.mean(s_up - s_lo)),
        per_member_accuracy=acc,
        seed=seed,
        set_kind=set_kind,
    )


def evaluate_ood(ensemble, X_id, X_ood, set_kind="interval", creens_alpha=None,
                 include_unconverged=True, seed=0) -> OodReport:
    """AUROC of EU scores separating in-distribution (negatives) from OoD (positives)."""
    eu_id = epistemic_scores(ensemble.predict_members(X_id, include_unconverged),
                             set_kind, creens_alpha)[2]
    eu_ood = epistemic_scores(ensemble.predict_members(X_ood, include_unconverged),
                              set_kind, creens_alpha)[2]
    return OodReport(
        id_scores=eu_id.tolist(),
        ood_scores=eu_ood.tolist(),
        auroc=auroc(eu_id, eu_ood),
        alpha=ensemble.alpha if creens_alpha is None else creens_alpha,
        seed=seed,
    )
