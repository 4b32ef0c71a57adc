"""Synthetic datasets with known conditional distributions, and CSV ingestion.

Training always uses hard labels sampled from the ground-truth conditional
distributions; the distributions themselves are kept for evaluation only.

CSV layout
----------
A header row, then one row per instance: ``n_features`` feature columns
followed by either a single integer label column (``label_mode="hard"``) or
``K`` columns of nonnegative annotation counts (``"counts"``) or
probabilities summing to one (``"probs"``).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ._validation import check_distributions, check_features, check_labels
from .exceptions import ConfigurationError, InputError, ParseError, ValidationError

LABEL_MODES = ("hard", "counts", "probs")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    hard_labels: np.ndarray
    n_classes: int
    ground_truth_dists: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = check_features(self.features)
        if X.shape[0] < 1:
            raise InputError("a dataset needs at least one instance")
        y = check_labels(self.hard_labels, self.n_classes, X.shape[0])
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "hard_labels", y)
        if self.ground_truth_dists is not None:
            P = check_distributions(self.ground_truth_dists, atol=1e-9,
                                    name="ground_truth_dists", n_classes=self.n_classes)
            if P.shape[0] != X.shape[0]:
                raise InputError("ground_truth_dists and features disagree on length")
            object.__setattr__(self, "ground_truth_dists", P)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def name(self):
        return self.meta.get("name", "dataset")

    def subset(self, idx):
        gt = None if self.ground_truth_dists is None else self.ground_truth_dists[idx]
        return replace(self, features=self.features[idx], hard_labels=self.hard_labels[idx],
                       ground_truth_dists=gt, meta=dict(self.meta))

    def to_dict(self):
        return {
            "features": self.features.tolist(),
            "hard_labels": self.hard_labels.tolist(),
            "n_classes": self.n_classes,
            "ground_truth_dists": (None if self.ground_truth_dists is None
                                   else self.ground_truth_dists.tolist()),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d):
        gt = d.get("ground_truth_dists")
        return cls(
            features=np.asarray(d["features"], dtype=float),
            hard_labels=np.asarray(d["hard_labels"], dtype=np.int64),
            n_classes=int(d["n_classes"]),
            ground_truth_dists=None if gt is None else np.asarray(gt, dtype=float),
            meta=dict(d.get("meta", {})),
        )

    def save_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def sample_hard_labels(dists, seed):
    """Draw one label per row of ``dists`` by inverse-CDF sampling.

    The result depends only on ``(seed, dists)``.
    """
    dists = np.asarray(dists, dtype=float)
    u = np.random.default_rng(seed).random(dists.shape[0])
    cdf = np.cumsum(dists, axis=1)
    cdf[:, -1] = 1.0
    labels = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(labels, dists.shape[1] - 1).astype(np.int64)


def _label_seed(seed):
    return np.random.SeedSequence([int(seed), 1]).generate_state(1)[0]


def gen_bernoulli(n: int, theta: float, seed: int) -> Dataset:
    """Coin flips with a constant feature; label 1 is "heads"."""
    if n < 1:
        raise ConfigurationError("n must be positive", field="n")
    if not 0.0 <= theta <= 1.0:
        raise ConfigurationError("theta must lie in [0, 1]", field="theta")
    gt = np.tile([1.0 - theta, theta], (n, 1))
    return Dataset(
        features=np.ones((n, 1)),
        hard_labels=sample_hard_labels(gt, _label_seed(seed)),
        n_classes=2,
        ground_truth_dists=gt,
        meta={"name": "bernoulli", "seed": int(seed), "n": int(n), "theta": float(theta)},
    )


def gaussian_mixture_posterior(X, means, sigma, priors):
    """Bayes posterior ``p(y | x)`` for isotropic Gaussian class conditionals."""
    X = np.asarray(X, dtype=float)
    means = np.asarray(means, dtype=float)
    sq = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    with np.errstate(divide="ignore"):
        log_joint = np.log(np.asarray(priors, dtype=float))[None, :] - sq / (2.0 * sigma**2)
    return np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))


def default_means(n_classes, n_features=2, radius=1.5):
    """Class means spread evenly on a circle in the first two coordinates."""
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    means = np.zeros((n_classes, n_features))
    means[:, 0] = radius * np.cos(angles)
    if n_features > 1:
        means[:, 1] = radius * np.sin(angles)
    return means


def gen_gaussian_mixture(n, n_classes=3, means=None, sigma=1.0, priors=None, seed=0) -> Dataset:
    """Sample a Gaussian mixture and attach exact posteriors as ground truth.

    A class ``y ~ priors`` picks the component, ``x ~ N(means[y], sigma^2 I)``,
    and the training label is re-drawn from the posterior ``p(. | x)``.
    """
    if means is None:
        means = default_means(n_classes)
    means = np.asarray(means, dtype=float)
    if means.ndim != 2 or means.shape[0] != n_classes:
        raise ConfigurationError(f"means must have shape ({n_classes}, D)", field="means")
    if priors is None:
        priors = np.full(n_classes, 1.0 / n_classes)
    priors = np.asarray(priors, dtype=float)
    if (priors.shape != (n_classes,) or np.any(priors < 0)
            or abs(priors.sum() - 1.0) > 1e-9):
        raise ConfigurationError("priors must be a distribution over the classes",
                                 field="priors")
    if not sigma > 0:
        raise ConfigurationError("sigma must be positive", field="sigma")
    if n < 1:
        raise ConfigurationError("n must be positive", field="n")

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    comp = rng.choice(n_classes, size=n, p=priors)
    X = means[comp] + sigma * rng.standard_normal((n, means.shape[1]))
    post = gaussian_mixture_posterior(X, means, sigma, priors)
    return Dataset(
        features=X,
        hard_labels=sample_hard_labels(post, _label_seed(seed)),
        n_classes=n_classes,
        ground_truth_dists=post,
        meta={
            "name": "gaussian_mixture", "seed": int(seed), "n": int(n),
            "means": means.tolist(), "sigma": float(sigma), "priors": priors.tolist(),
        },
    )


def shift_ood(data: Dataset, offset) -> Dataset:
    """Translate the features; the shifted copy carries no ground truth."""
    offset = np.asarray(offset, dtype=float)
    if offset.shape != (data.n_features,):
        raise InputError(f"offset must have length {data.n_features}, got shape {offset.shape}")
    meta = dict(data.meta)
    meta["ood_offset"] = offset.tolist()
    meta["name"] = f"{data.name}+shift"
    return replace(data, features=data.features + offset, ground_truth_dists=None, meta=meta)


def load_csv(path, n_features, n_classes, label_mode="hard", seed=0) -> Dataset:
    """Read a dataset in the CSV layout described in the module docstring."""
    if label_mode not in LABEL_MODES:
        raise ConfigurationError(f"unknown label mode {label_mode!r}", field="label_mode")
    n_label_cols = 1 if label_mode == "hard" else n_classes
    width = n_features + n_label_cols
    feats, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1)
        if len(header) != width:
            raise ParseError(f"header has {len(header)} columns, expected {width}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} columns, got {len(row)}", line=line)
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(str(exc), line=line) from None
            feats.append(values[:n_features])
            lab = values[n_features:]
            if label_mode == "hard":
                if lab[0] != int(lab[0]) or not 0 <= lab[0] < n_classes:
                    raise ParseError(f"label {lab[0]} is not a class index", line=line)
            elif label_mode == "counts":
                if any(c < 0 or c != int(c) for c in lab) or sum(lab) == 0:
                    raise ValidationError(f"line {line}: counts must be nonnegative "
                                          "integers with a positive total")
            elif any(p < 0 for p in lab) or abs(sum(lab) - 1.0) > 1e-6:
                raise ValidationError(f"line {line}: probabilities sum to "
                                      f"{sum(lab):.8g}, expected 1")
            labels.append(lab)
    if not feats:
        raise InputError(f"{path} contains no data rows")

    X = np.asarray(feats)
    L = np.asarray(labels)
    meta = {"name": str(path), "seed": int(seed), "label_mode": label_mode}
    if label_mode == "hard":
        return Dataset(X, L[:, 0].astype(np.int64), n_classes, None, meta)
    gt = L / L.sum(axis=1, keepdims=True)
    return Dataset(X, sample_hard_labels(gt, _label_seed(seed)), n_classes, gt, meta)


def write_csv(data: Dataset, path, label_mode="probs"):
    """Write ``data`` in the CSV layout; inverse of :func:`load_csv`."""
    if label_mode not in ("hard", "probs"):
        raise ConfigurationError("can only write 'hard' or 'probs' labels", field="label_mode")
    if label_mode == "probs" and data.ground_truth_dists is None:
        raise InputError("dataset has no ground-truth distributions to write")
    header = [f"x{j}" for j in range(data.n_features)]
    header += ["label"] if label_mode == "hard" else [f"p{k}" for k in range(data.n_classes)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(data.n_samples):
            tail = ([int(data.hard_labels[i])] if label_mode == "hard"
                    else [repr(float(v)) for v in data.ground_truth_dists[i]])
            w.writerow([repr(float(v)) for v in data.features[i]] + tail)


def train_test_split(data: Dataset, test_fraction=0.3, seed=0):
    """Deterministic random split into train and test parts."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError("must lie in (0, 1)", field="test_fraction")
    perm = np.random.default_rng(np.random.SeedSequence([int(seed), 2])).permutation(data.n_samples)
    n_test = max(1, int(round(test_fraction * data.n_samples)))
    if n_test >= data.n_samples:
        raise InputError("dataset too small to split")
    return data.subset(np.sort(perm[n_test:])), data.subset(np.sort(perm[:n_test]))
