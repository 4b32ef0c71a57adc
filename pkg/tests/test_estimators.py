import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from credal_rl.datasets import gen_gaussian_mixture
from credal_rl.estimators import (
    CredalEnsemblingClassifier,
    CredalRelativeLikelihoodClassifier,
    CredalWrapperClassifier,
)

FAST = dict(hidden_layer_sizes=(), optimizer="sgd_momentum", learning_rate=0.05,
            batch_size=64, max_epochs=15)


@pytest.fixture(scope="module")
def data():
    d = gen_gaussian_mixture(300, seed=0)
    names = np.array(["a", "b", "c"])
    return d.features, names[d.hard_labels], d.ground_truth_dists


def test_params_roundtrip_through_clone():
    est = CredalRelativeLikelihoodClassifier(alpha=0.3, n_members=4, **FAST)
    params = clone(est).get_params()
    assert params["alpha"] == 0.3 and params["n_members"] == 4
    assert CredalEnsemblingClassifier(alpha=0.2).get_params()["alpha"] == 0.2


def test_unfitted_estimator_raises(data):
    with pytest.raises(NotFittedError):
        CredalRelativeLikelihoodClassifier().predict(data[0])


def test_fit_predict_with_string_labels(data):
    X, y, truth = data
    est = CredalRelativeLikelihoodClassifier(alpha=0.5, n_members=4, check_every="batch",
                                             **FAST).fit(X, y)
    assert list(est.classes_) == ["a", "b", "c"] and est.n_features_in_ == 2
    assert set(est.predict(X)) <= {"a", "b", "c"}
    assert est.score(X, y) > 0.5
    np.testing.assert_allclose(est.predict_proba(X).sum(axis=1), 1.0)
    lower, upper = est.predict_credal(X)
    assert lower.shape == upper.shape == (300, 3) and np.all(lower <= upper)
    bounds = est.entropy_bounds(X)
    np.testing.assert_allclose(est.epistemic_uncertainty(X), bounds[:, 1] - bounds[:, 0])
    report = est.evaluate(X, truth, y)
    assert 0 <= report.coverage <= 1 and len(report.per_member_accuracy) == 4


def test_rejects_wrong_feature_count(data):
    X, y, _ = data
    est = CredalRelativeLikelihoodClassifier(n_members=2, **FAST).fit(X, y)
    with pytest.raises(Exception):
        est.predict(np.zeros((3, 5)))


def test_baselines(data):
    X, y, truth = data
    wra = CredalWrapperClassifier(n_members=3, **FAST).fit(X, y)
    np.testing.assert_allclose(wra.predict_proba(X), wra.predict_members(X).mean(axis=0))
    ens = CredalEnsemblingClassifier(alpha=0.5, n_members=4, **FAST).fit(X, y)
    hull = ens.predict_credal(X[:5])
    assert hull.shape == (2, 5, 3)
    assert ens.evaluate(X[:20], truth[:20]).set_kind == "hull"
