"""scikit-learn compatible credal classifiers.

Each estimator trains a finite ensemble of networks in :meth:`fit`.
``predict_proba`` returns the point prediction (the maximum-likelihood
member, or the ensemble mean for the baselines), and :meth:`predict_credal`
returns per-instance credal sets built from all member predictions.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import LabelEncoder
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .evaluation import credal_predictions, epistemic_scores, evaluate_predictor
from .nn import OptimizerConfig
from .training import CrlConfig, train_crl_ensemble, train_deep_ensemble


class _CredalEnsembleBase(ClassifierMixin, BaseEstimator):
    _set_kind = "interval"

    def _crl_config(self, alpha=1.0):
        return CrlConfig(
            alpha=alpha,
            n_members=self.n_members,
            beta=getattr(self, "beta", 100.0),
            hidden_layer_sizes=tuple(self.hidden_layer_sizes),
            check_every=getattr(self, "check_every", "epoch"),
            gamma_tolerance=getattr(self, "gamma_tolerance", 0.0),
            normalization=self.normalization,
            optimizer=OptimizerConfig(
                kind=self.optimizer,
                learning_rate=self.learning_rate,
                momentum=self.momentum,
                weight_decay=self.weight_decay,
                batch_size=self.batch_size,
                max_epochs=self.max_epochs,
                seed=0 if self.random_state is None else int(self.random_state),
            ),
        )

    def fit(self, X, y):
        """Train the ensemble on features ``X`` and class labels ``y``.

        Returns
        -------
        self : object
        """
        X, y = check_X_y(X, y)
        self._encoder = LabelEncoder().fit(y)
        self.classes_ = self._encoder.classes_
        self.n_features_in_ = X.shape[1]
        n_classes = self.n_classes if getattr(self, "n_classes", None) else len(self.classes_)
        if n_classes < len(self.classes_):
            raise ValueError(f"n_classes={n_classes} but y has {len(self.classes_)} labels")
        self.ensemble_ = self._train(X, self._encoder.transform(y), n_classes)
        return self

    def _check(self, X):
        check_is_fitted(self, "ensemble_")
        return check_array(X)

    def predict_members(self, X):
        """Member predictions with shape ``(n_members, n_samples, n_classes)``."""
        X = self._check(X)
        return self.ensemble_.predict_members(X, self.include_unconverged)

    def predict_proba(self, X):
        X = self._check(X)
        return self.ensemble_.mle.predict_proba(X)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def predict_credal(self, X):
        """Per-instance credal sets.

        Interval estimators return ``(lower, upper)`` arrays of shape
        ``(n_samples, n_classes)``; hull estimators return the member
        predictions that span each hull, shape ``(m, n_samples, n_classes)``.
        """
        return credal_predictions(self.predict_members(X), self._set_kind, self._prune_alpha())

    def entropy_bounds(self, X):
        """Lower and upper entropy per instance, shape ``(n_samples, 2)``."""
        lo, up, _ = epistemic_scores(self.predict_members(X), self._set_kind, self._prune_alpha())
        return np.column_stack([lo, up])

    def epistemic_uncertainty(self, X):
        return epistemic_scores(self.predict_members(X), self._set_kind, self._prune_alpha())[2]

    def evaluate(self, X, ground_truth, y=None):
        """Coverage, efficiency and mean EU against known conditional distributions."""
        X = self._check(X)
        y_enc = None if y is None else self._encoder.transform(y)
        return evaluate_predictor(
            self.ensemble_, X, ground_truth, y_enc,
            set_kind=self._set_kind,
            creens_alpha=self._prune_alpha(),
            include_unconverged=self.include_unconverged,
            seed=0 if self.random_state is None else int(self.random_state),
        )

    def _prune_alpha(self):
        return None


class CredalRelativeLikelihoodClassifier(_CredalEnsembleBase):
    """Credal predictor from an ensemble of relative-likelihood thresholded networks.

    Parameters
    ----------
    alpha : float, default=0.8
        Lowest relative likelihood admitted into the ensemble. Lower values
        give larger credal sets (more coverage, less efficiency).
    n_members : int, default=20
        Ensemble size including the maximum-likelihood network.
    beta : float, default=100.0
        ToBias constant placed on one output bias of each fresh member.
    hidden_layer_sizes : tuple of int, default=(32, 32)
        Empty tuple gives multinomial logistic regression.
    check_every : {"epoch", "batch"}, default="epoch"
        How often the relative likelihood is checked while a member trains.
    normalization : {"raw", "per_sample"}, default="raw"
        ``per_sample`` divides the log-likelihood gap by the number of samples.
    include_unconverged : bool, default=True
        Keep members that never reached their threshold.
    random_state : int, default=0
        Master seed; member seeds derive from it.
    """

    def __init__(
        self,
        alpha=0.8,
        n_members=20,
        beta=100.0,
        hidden_layer_sizes=(32, 32),
        optimizer="adaptive_moment",
        learning_rate=0.01,
        momentum=0.9,
        weight_decay=0.0,
        batch_size=64,
        max_epochs=100,
        check_every="epoch",
        gamma_tolerance=0.0,
        normalization="raw",
        include_unconverged=True,
        n_classes=None,
        n_jobs=1,
        random_state=0,
    ):
        self.alpha = alpha
        self.n_members = n_members
        self.beta = beta
        self.hidden_layer_sizes = hidden_layer_sizes
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.check_every = check_every
        self.gamma_tolerance = gamma_tolerance
        self.normalization = normalization
        self.include_unconverged = include_unconverged
        self.n_classes = n_classes
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _train(self, X, y, n_classes):
        return train_crl_ensemble(self._crl_config(self.alpha), X, y, n_classes, n_jobs=self.n_jobs)


class CredalWrapperClassifier(_CredalEnsembleBase):
    """Interval credal sets from an independently trained deep ensemble."""

    def __init__(
        self,
        n_members=20,
        hidden_layer_sizes=(32, 32),
        optimizer="adaptive_moment",
        learning_rate=0.01,
        momentum=0.9,
        weight_decay=0.0,
        batch_size=64,
        max_epochs=100,
        normalization="raw",
        include_unconverged=True,
        n_classes=None,
        n_jobs=1,
        random_state=0,
    ):
        self.n_members = n_members
        self.hidden_layer_sizes = hidden_layer_sizes
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.normalization = normalization
        self.include_unconverged = include_unconverged
        self.n_classes = n_classes
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _train(self, X, y, n_classes):
        return train_deep_ensemble(self._crl_config(), X, y, n_classes, n_jobs=self.n_jobs)

    def predict_proba(self, X):
        return self.predict_members(X).mean(axis=0)


class CredalEnsemblingClassifier(CredalWrapperClassifier):
    """Convex-hull credal sets from the predictions closest to the ensemble mean.

    ``alpha`` is the fraction of member predictions discarded per instance.
    """

    _set_kind = "hull"

    def __init__(
        self,
        alpha=0.0,
        n_members=20,
        hidden_layer_sizes=(32, 32),
        optimizer="adaptive_moment",
        learning_rate=0.01,
        momentum=0.9,
        weight_decay=0.0,
        batch_size=64,
        max_epochs=100,
        normalization="raw",
        include_unconverged=True,
        n_classes=None,
        n_jobs=1,
        random_state=0,
    ):
        super().__init__(
            n_members=n_members,
            hidden_layer_sizes=hidden_layer_sizes,
            optimizer=optimizer,
            learning_rate=learning_rate,
            momentum=momentum,
            weight_decay=weight_decay,
            batch_size=batch_size,
            max_epochs=max_epochs,
            normalization=normalization,
            include_unconverged=include_unconverged,
            n_classes=n_classes,
            n_jobs=n_jobs,
            random_state=random_state,
        )
        self.alpha = alpha

    def _prune_alpha(self):
        return self.alpha
