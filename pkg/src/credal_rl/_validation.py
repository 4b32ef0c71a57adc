"""Input validation helpers and small numeric utilities."""

import numpy as np

from .exceptions import InputError, ValidationError

DIST_ATOL = 1e-9


def check_distribution(p, atol=DIST_ATOL, name="p"):
    """Return ``p`` as a 1-D float array after checking it lies on the simplex."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InputError(f"{name} must be a nonempty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InputError(f"{name} contains non-finite values")
    if np.any(p < -atol):
        raise ValidationError(f"{name} has negative components")
    if abs(p.sum() - 1.0) > atol:
        raise ValidationError(f"{name} sums to {p.sum():.12g}, expected 1")
    return p


def check_distributions(P, atol=DIST_ATOL, name="distributions", n_classes=None):
    """Validate a 2-D array whose rows are probability distributions."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.ndim != 2 or P.shape[0] == 0 or P.shape[1] == 0:
        raise InputError(f"{name} must be a nonempty (n, K) array, got shape {P.shape}")
    if n_classes is not None and P.shape[1] != n_classes:
        raise InputError(f"{name} has {P.shape[1]} classes, expected {n_classes}")
    if not np.all(np.isfinite(P)):
        raise InputError(f"{name} contains non-finite values")
    if np.any(P < -atol):
        raise ValidationError(f"{name} has negative entries")
    sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > atol)
    if bad.size:
        raise ValidationError(
            f"{name} row {bad[0]} sums to {sums[bad[0]]:.12g}, expected 1"
        )
    return P


def check_labels(y, n_classes, n_samples=None):
    y = np.asarray(y)
    if y.ndim != 1:
        raise InputError(f"labels must be 1-D, got shape {y.shape}")
    if n_samples is not None and y.shape[0] != n_samples:
        raise InputError(f"got {y.shape[0]} labels for {n_samples} samples")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InputError("hard labels must be integer class indices")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise InputError(f"labels must lie in [0, {n_classes})")
    return y


def check_features(X, n_features=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise InputError(f"features must be 2-D, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise InputError(f"expected {n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise InputError("features contain non-finite values")
    return X


def softmax(z):
    """Row-wise softmax with max-logit subtraction."""
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def shannon_entropy(p, axis=-1):
    """Shannon entropy in nats with the ``0 log 0 = 0`` convention."""
    p = np.asarray(p, dtype=float)
    safe = np.where(p > 0, p, 1.0)
    return -np.sum(np.where(p > 0, p * np.log(safe), 0.0), axis=axis)
