import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from credal_rl.exceptions import ConfigurationError, InputError, TrainingDivergenceError
from credal_rl.nn import (
    Optimizer,
    OptimizerConfig,
    epoch_permutation,
    forward,
    loss_and_grads,
    mlp_new,
    tobias_init,
    train_epoch,
)


def test_new_model_shapes_and_zero_bias():
    m = mlp_new([2, 3], seed=7)
    assert len(m.weights) == 1 and m.weights[0].shape == (2, 3)
    np.testing.assert_array_equal(m.biases[0], np.zeros(3))


def test_init_is_deterministic():
    a, b = mlp_new([4, 8, 3], 11), mlp_new([4, 8, 3], 11)
    np.testing.assert_array_equal(a.get_flat(), b.get_flat())
    assert not np.array_equal(a.get_flat(), mlp_new([4, 8, 3], 12).get_flat())


def test_single_layer_spec_rejected():
    with pytest.raises(ConfigurationError):
        mlp_new([5], 0)


def test_tobias_sets_bias_at_member_index_mod_k():
    m = tobias_init(mlp_new([2, 4, 3], 0), member_index=4, beta=100.0)
    np.testing.assert_array_equal(m.biases[-1], [0.0, 100.0, 0.0])


def test_tobias_member_zero_predicts_first_vertex():
    m = tobias_init(mlp_new([2, 3], 0), member_index=0, beta=100.0)
    p = forward(m, np.zeros(2))
    assert abs(p[0] - 1.0) <= 1e-20 and np.all(p[1:] <= 1e-20)


def test_tobias_beta_zero_is_identity():
    base = mlp_new([3, 5, 2], 9)
    np.testing.assert_array_equal(tobias_init(base, 3, 0.0).get_flat(), base.get_flat())


def test_zero_model_is_uniform():
    m = mlp_new([2, 4, 3], 0).with_flat(np.zeros(mlp_new([2, 4, 3], 0).n_params))
    np.testing.assert_allclose(forward(m, np.array([3.0, -1.0])), np.full(3, 1 / 3))


def test_extreme_logits_are_stable():
    m = mlp_new([1, 3], 0)
    m = m.with_flat(np.array([0.0, 0.0, 0.0, 100.0, 0.0, 0.0]))
    p = forward(m, np.array([0.0]))
    assert np.all(np.isfinite(p)) and abs(p[0] - 1) < 1e-20


def test_forward_sums_to_one(rng):
    m = mlp_new([5, 16, 16, 4], 3)
    P = forward(m, rng.normal(scale=10, size=(1000, 5)))
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(P >= 0)


def test_forward_rejects_wrong_width():
    with pytest.raises(InputError):
        forward(mlp_new([3, 2], 0), np.zeros((4, 2)))


def test_flat_roundtrip():
    m = mlp_new([3, 4, 2], 1)
    theta = np.arange(m.n_params, dtype=float)
    np.testing.assert_array_equal(m.with_flat(theta).get_flat(), theta)


def _numeric_grad(model, X, y, wd, h=1e-5):
    theta = model.get_flat()
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        lp = loss_and_grads(model.with_flat(theta + e), X, y, wd)[0]
        lm = loss_and_grads(model.with_flat(theta - e), X, y, wd)[0]
        g[i] = (lp - lm) / (2 * h)
    return g


@pytest.mark.parametrize("wd", [0.0, 0.1])
def test_gradient_matches_central_differences(rng, wd):
    model = mlp_new([2, 3, 2], 5)
    X = rng.normal(size=(8, 2))
    y = rng.integers(0, 2, size=8)
    _, gw, gb = loss_and_grads(model, X, y, wd)
    # same layout as get_flat: per layer, weights then biases
    analytic = np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(gw, gb)])
    numeric = _numeric_grad(model, X, y, wd)
    rel = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    assert rel.max() < 1e-4


def test_zero_learning_rate_leaves_parameters():
    m = mlp_new([2, 3], 0)
    X = np.random.default_rng(0).normal(size=(20, 2))
    y = np.arange(20) % 3
    cfg = OptimizerConfig(learning_rate=0.0, batch_size=4)
    out, loss = train_epoch(m, X, y, cfg, 0)
    np.testing.assert_array_equal(out.get_flat(), m.get_flat())
    assert np.isfinite(loss) and loss > 0


def test_separable_point_is_fit():
    m = mlp_new([1, 2], 0)
    X, y = np.array([[1.0]]), np.array([1])
    cfg = OptimizerConfig(kind="sgd_momentum", learning_rate=0.5, batch_size=1)
    opt = Optimizer(cfg, m)
    for epoch in range(200):
        m, loss = train_epoch(m, X, y, cfg, epoch, opt)
    assert loss < 0.01


def test_training_is_reproducible():
    X = np.random.default_rng(1).normal(size=(50, 2))
    y = (X[:, 0] > 0).astype(int)
    cfg = OptimizerConfig(batch_size=8, seed=42)
    a = train_epoch(mlp_new([2, 4, 2], 0), X, y, cfg, 3)[0]
    b = train_epoch(mlp_new([2, 4, 2], 0), X, y, cfg, 3)[0]
    np.testing.assert_array_equal(a.get_flat(), b.get_flat())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_batch_and_epoch():
    # the first step blows the weights up to ~1e298; the next forward pass overflows
    X = np.full((4, 2), 1e300)
    y = np.array([0, 1, 0, 1])
    cfg = OptimizerConfig(kind="sgd_momentum", learning_rate=1.0, batch_size=2)
    with pytest.raises(TrainingDivergenceError) as exc:
        train_epoch(mlp_new([2, 3], 0), X, y, cfg, 5)
    assert exc.value.batch == 1 and exc.value.epoch == 5


def test_on_batch_can_stop_early():
    calls = []
    X = np.zeros((10, 2))
    y = np.zeros(10, dtype=int)
    train_epoch(mlp_new([2, 2], 0), X, y, OptimizerConfig(batch_size=2), 0,
                on_batch=lambda m, b: calls.append(b) or b == 1)
    assert calls == [0, 1]


@pytest.mark.parametrize("field,value", [("kind", "rmsprop"), ("learning_rate", -1.0),
                                         ("momentum", 1.0), ("batch_size", 0),
                                         ("max_epochs", 0), ("weight_decay", -0.1)])
def test_optimizer_config_validation(field, value):
    with pytest.raises(ConfigurationError) as exc:
        OptimizerConfig(**{field: value})
    assert f"optimizer.{field}" in str(exc.value)


@given(st.integers(1, 200), st.integers(0, 2**32), st.integers(0, 50))
def test_epoch_permutation_is_a_permutation(n, seed, epoch):
    p = epoch_permutation(n, seed, epoch)
    np.testing.assert_array_equal(np.sort(p), np.arange(n))
    np.testing.assert_array_equal(p, epoch_permutation(n, seed, epoch))
