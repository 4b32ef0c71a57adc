"""Minimal dense network engine.

Feed-forward networks with ReLU hidden layers and a softmax output, trained
with mini-batch gradient steps on mean cross-entropy. Gradients are computed
by hand-written backpropagation; there is no autodiff machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from ._validation import check_features, check_labels, log_softmax, softmax
from .exceptions import ConfigurationError, InputError, TrainingDivergenceError

OPTIMIZER_KINDS = ("sgd_momentum", "adaptive_moment")


@dataclass(frozen=True)
class Mlp:
    """A feed-forward probabilistic classifier.

    ``weights[l]`` has shape ``(layer_sizes[l], layer_sizes[l + 1])`` so a
    batch ``X`` of shape ``(n, d)`` propagates as ``X @ W + b``.
    """

    layer_sizes: tuple
    weights: tuple
    biases: tuple
    activation: str = "relu"

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_features(self) -> int:
        return self.layer_sizes[0]

    def logits(self, X):
        X = check_features(X, self.n_features)
        return _forward_cache(self, X)[-1]

    def predict_proba(self, X):
        return softmax(self.logits(X))

    def get_flat(self):
        """All parameters as one vector, layer by layer, weights before biases."""
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def with_flat(self, theta):
        theta = np.asarray(theta, dtype=float)
        weights, biases, pos = [], [], 0
        for W, b in zip(self.weights, self.biases):
            weights.append(theta[pos:pos + W.size].reshape(W.shape).copy())
            pos += W.size
            biases.append(theta[pos:pos + b.size].copy())
            pos += b.size
        if pos != theta.size:
            raise InputError(f"expected {pos} parameters, got {theta.size}")
        return replace(self, weights=tuple(weights), biases=tuple(biases))

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self):
        return replace(
            self,
            weights=tuple(W.copy() for W in self.weights),
            biases=tuple(b.copy() for b in self.biases),
        )


@dataclass(frozen=True)
class OptimizerConfig:
    """Optimizer and mini-batch settings."""

    kind: str = "adaptive_moment"
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    batch_size: int = 64
    max_epochs: int = 100
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigurationError(
                f"unknown optimizer {self.kind!r}, expected one of {OPTIMIZER_KINDS}",
                field="optimizer.kind",
            )
        if not self.learning_rate >= 0 or not np.isfinite(self.learning_rate):
            raise ConfigurationError("must be a nonnegative finite number",
                                     field="optimizer.learning_rate")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError("must lie in [0, 1)", field="optimizer.momentum")
        if self.weight_decay < 0:
            raise ConfigurationError("must be nonnegative", field="optimizer.weight_decay")
        if int(self.batch_size) < 1:
            raise ConfigurationError("must be a positive integer", field="optimizer.batch_size")
        if int(self.max_epochs) < 1:
            raise ConfigurationError("must be a positive integer", field="optimizer.max_epochs")
        if int(self.seed) < 0 or int(self.seed) >= 2**64:
            raise ConfigurationError("must be a 64-bit unsigned integer", field="optimizer.seed")


def _check_layer_sizes(layer_sizes):
    try:
        sizes = tuple(int(s) for s in layer_sizes)
    except (TypeError, ValueError):
        raise ConfigurationError("layer sizes must be integers", field="layer_sizes")
    if len(sizes) < 2:
        raise ConfigurationError(
            f"need at least an input and an output layer, got {list(sizes)}",
            field="layer_sizes",
        )
    if any(s < 1 for s in sizes):
        raise ConfigurationError("layer sizes must be positive", field="layer_sizes")
    return sizes


def mlp_new(layer_sizes: Sequence[int], seed: int) -> Mlp:
    """Create a network with weights uniform in ``±1/sqrt(fan_in)`` and zero biases.

    The same ``(layer_sizes, seed)`` always yields bit-identical parameters.
    """
    sizes = _check_layer_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(layer_sizes=sizes, weights=tuple(weights), biases=tuple(biases))


def tobias_init(model: Mlp, member_index: int, beta: float = 100.0) -> Mlp:
    """Set output bias ``member_index mod K`` to ``beta``; everything else is kept."""
    if not np.isfinite(beta):
        raise ConfigurationError("beta must be finite", field="beta")
    biases = [b.copy() for b in model.biases]
    biases[-1][member_index % model.n_classes] = beta
    return replace(model,
                   weights=tuple(W.copy() for W in model.weights),
                   biases=tuple(biases))


def forward(model: Mlp, x):
    """Predictive distribution for one instance (1-D input) or a batch (2-D)."""
    x_arr = np.asarray(x, dtype=float)
    if x_arr.shape[-1:] != (model.n_features,):
        raise InputError(
            f"input has {x_arr.shape[-1] if x_arr.ndim else 0} features, "
            f"network expects {model.n_features}"
        )
    probs = model.predict_proba(x_arr)
    return probs[0] if x_arr.ndim == 1 else probs


def _forward_cache(model, X):
    """Activations of every layer; the last entry holds the logits."""
    acts = [X]
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def loss_and_grads(model: Mlp, X, y, weight_decay: float = 0.0):
    """Mean cross-entropy on ``(X, y)`` and its gradient w.r.t. every parameter.

    Returns
    -------
    loss : float
    grad_w, grad_b : list of ndarray
        Same shapes as ``model.weights`` and ``model.biases``.
    """
    acts = _forward_cache(model, X)
    logits = acts[-1]
    n = X.shape[0]
    logp = log_softmax(logits)
    loss = -logp[np.arange(n), y].mean()

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    if weight_decay:
        loss_reg = 0.5 * weight_decay * sum(
            np.sum(W * W) + np.sum(b * b) for W, b in zip(model.weights, model.biases)
        )
        loss = loss + loss_reg
        grad_w = [g + weight_decay * W for g, W in zip(grad_w, model.weights)]
        grad_b = [g + weight_decay * b for g, b in zip(grad_b, model.biases)]
    return float(loss), grad_w, grad_b


class Optimizer:
    """Stateful parameter update rule built from an :class:`OptimizerConfig`.

    State (momentum buffers, moment estimates) persists across epochs so a
    training loop should create one optimizer per network.
    """

    def __init__(self, config: OptimizerConfig, model: Mlp):
        self.config = config
        self.t = 0
        shapes = [p.shape for p in (*model.weights, *model.biases)]
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params, grads):
        """Update ``params`` in place."""
        cfg = self.config
        self.t += 1
        if cfg.kind == "sgd_momentum":
            for p, g, buf in zip(params, grads, self.m):
                buf *= cfg.momentum
                buf += g
                p -= cfg.learning_rate * buf
        else:
            c1 = 1.0 - cfg.beta1 ** self.t
            c2 = 1.0 - cfg.beta2 ** self.t
            for p, g, m, v in zip(params, grads, self.m, self.v):
                m *= cfg.beta1
                m += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * g * g
                p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def epoch_permutation(n: int, seed: int, epoch: int):
    """Shuffle order for one epoch; depends only on ``(seed, epoch)``."""
    return np.random.default_rng([int(seed), int(epoch)]).permutation(n)


def train_epoch(
    model: Mlp,
    X,
    y,
    config: OptimizerConfig,
    epoch: int,
    optimizer: Optional[Optimizer] = None,
    on_batch: Optional[Callable[[Mlp, int], bool]] = None,
):
    """Run one shuffled pass of mini-batch steps.

    Parameters
    ----------
    model : Mlp
        Left untouched; a trained copy is returned.
    X, y : array-like
        Features and hard class labels.
    config : OptimizerConfig
    epoch : int
        Combined with ``config.seed`` to fix the shuffle.
    optimizer : Optimizer, optional
        Carries state across epochs. A fresh one is made when omitted.
    on_batch : callable, optional
        Called as ``on_batch(model, batch_index)`` after every step; returning
        True ends the epoch early.

    Returns
    -------
    model : Mlp
    mean_loss : float
        Sample-weighted mean loss over the batches actually run.
    """
    X = check_features(X, model.n_features)
    y = check_labels(y, model.n_classes, X.shape[0])
    model = model.copy()
    if optimizer is None:
        optimizer = Optimizer(config, model)
    params = [*model.weights, *model.biases]

    order = epoch_permutation(X.shape[0], config.seed, epoch)
    bs = int(config.batch_size)
    total, seen = 0.0, 0
    for b, start in enumerate(range(0, X.shape[0], bs)):
        idx = order[start:start + bs]
        loss, gw, gb = loss_and_grads(model, X[idx], y[idx], config.weight_decay)
        grads = [*gw, *gb]
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            raise TrainingDivergenceError("non-finite loss or gradient", batch=b, epoch=epoch)
        if config.learning_rate:
            optimizer.step(params, grads)
        total += loss * idx.size
        seen += idx.size
        if on_batch is not None and on_batch(model, b):
            break
    # params alias the arrays held by the frozen model; the copy is already updated
    return model, total / seen
