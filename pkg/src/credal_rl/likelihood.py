"""Log-likelihood and relative likelihood of probabilistic classifiers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from ._validation import check_features, check_labels, log_softmax
from .exceptions import ConfigurationError, InputError

logger = logging.getLogger(__name__)

NORMALIZATIONS = ("raw", "per_sample")


@dataclass(frozen=True)
class RelativeLikelihood:
    """Relative likelihood of a model against the maximum-likelihood anchor.

    ``log_gamma`` is the log-likelihood difference, divided by ``n_samples``
    when ``normalization == "per_sample"``. ``exceeds_mle`` flags the case
    where the anchor is beaten (it is only an estimate of the true MLE).
    """

    log_gamma: float
    gamma: float
    normalization: str
    n_samples: int
    exceeds_mle: bool = False


def log_likelihood(model, X, y) -> float:
    """Sum of ``log p(y_i | x_i)`` under ``model``, computed in log space.

    Returns ``-inf`` (with a warning) when some observed label gets zero mass.
    """
    X = check_features(X, model.n_features)
    if X.shape[0] == 0:
        raise InputError("cannot evaluate the likelihood of an empty dataset")
    y = check_labels(y, model.n_classes, X.shape[0])
    logp = log_softmax(model.logits(X))[np.arange(X.shape[0]), y]
    total = float(np.sum(logp))
    if total == -math.inf:
        logger.warning("log-likelihood underflowed to -inf: some label has zero probability")
    return total


def relative_likelihood_from_loglik(ll, ll_mle, n_samples, normalization="raw"):
    if normalization not in NORMALIZATIONS:
        raise ConfigurationError(f"unknown normalization {normalization!r}",
                                 field="normalization")
    diff = ll - ll_mle
    if normalization == "per_sample":
        diff /= n_samples
    exceeds = diff > 0
    if exceeds:
        logger.info("model beats the MLE estimate: log relative likelihood %.6g > 0", diff)
    return RelativeLikelihood(
        log_gamma=float(diff),
        gamma=float(np.exp(diff)),
        normalization=normalization,
        n_samples=int(n_samples),
        exceeds_mle=bool(exceeds),
    )


def relative_likelihood(model, mle, X, y, normalization="raw") -> RelativeLikelihood:
    """Estimated relative likelihood ``L(model) / L(mle)`` on ``(X, y)``.

    Values above one are kept as they are; the estimated MLE can be beaten.
    """
    if model.n_classes != mle.n_classes:
        raise InputError("model and MLE disagree on the number of classes")
    ll = log_likelihood(model, X, y)
    ll_mle = log_likelihood(mle, X, y)
    return relative_likelihood_from_loglik(ll, ll_mle, len(y), normalization)


def _xlogy(x, y):
    return 0.0 if x == 0 else x * math.log(y) if y > 0 else -math.inf


def bernoulli_log_likelihood(theta, heads, n):
    return _xlogy(heads, theta) + _xlogy(n - heads, 1.0 - theta)


def bernoulli_relative_likelihood(theta: float, heads: int, n: int) -> float:
    """Relative likelihood of a Bernoulli parameter given ``heads`` out of ``n``.

    Uses ``0**0 == 1``, so ``theta=0`` with zero heads has likelihood one.
    """
    if n < 1 or not 0 <= heads <= n:
        raise InputError("need n >= 1 and 0 <= heads <= n")
    if not 0.0 <= theta <= 1.0:
        raise InputError("theta must lie in [0, 1]")
    mle = heads / n
    log_gamma = bernoulli_log_likelihood(theta, heads, n) - bernoulli_log_likelihood(mle, heads, n)
    return math.exp(log_gamma) if log_gamma > -math.inf else 0.0


def bernoulli_alpha_cut(alpha: float, heads: int, n: int, xtol: float = 1e-12):
    """Interval of Bernoulli parameters whose relative likelihood is at least ``alpha``.

    The relative likelihood is unimodal with its peak at ``heads / n``, so each
    endpoint is the root of ``gamma(theta) - alpha`` on one side of the peak.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InputError("alpha must lie in [0, 1]")
    mle = heads / n
    if alpha == 0.0:
        return 0.0, 1.0

    def gap(t):
        return bernoulli_relative_likelihood(t, heads, n) - alpha

    lo = 0.0 if gap(0.0) >= 0 else (mle if mle == 0.0 else bisect(gap, 0.0, mle, xtol=xtol))
    hi = 1.0 if gap(1.0) >= 0 else (mle if mle == 1.0 else bisect(gap, mle, 1.0, xtol=xtol))
    return lo, hi
