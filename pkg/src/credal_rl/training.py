"""Training of relative-likelihood credal ensembles and the ensemble baselines.

The credal ensemble holds the maximum-likelihood network plus members that were
each trained from a ToBias initialization until their relative likelihood
first reached a target threshold. Thresholds are spread evenly over
``[alpha, 1)``; the maximum-likelihood network fills the slot at ``1``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from ._validation import check_features, check_labels
from .exceptions import ConfigurationError, InputError, TrainingDivergenceError
from .likelihood import NORMALIZATIONS, log_likelihood, relative_likelihood_from_loglik
from .nn import Mlp, Optimizer, OptimizerConfig, mlp_new, tobias_init, train_epoch

logger = logging.getLogger(__name__)

CHECK_GRANULARITIES = ("epoch", "batch")
FORMAT_NAME = "credal-rl-ensemble"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class CrlConfig:
    alpha: float = 0.8
    n_members: int = 20
    beta: float = 100.0
    hidden_layer_sizes: tuple = (32, 32)
    check_every: str = "epoch"
    gamma_tolerance: float = 0.0
    normalization: str = "raw"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"must lie in [0, 1], got {self.alpha}", field="alpha")
        if int(self.n_members) < 1:
            raise ConfigurationError("need at least one member", field="n_members")
        if not math.isfinite(self.beta):
            raise ConfigurationError("must be finite", field="beta")
        if self.check_every not in CHECK_GRANULARITIES:
            raise ConfigurationError(f"must be one of {CHECK_GRANULARITIES}", field="check_every")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigurationError(f"must be one of {NORMALIZATIONS}", field="normalization")
        if self.gamma_tolerance < 0:
            raise ConfigurationError("must be nonnegative", field="gamma_tolerance")
        if any(int(h) < 1 for h in self.hidden_layer_sizes):
            raise ConfigurationError("hidden layer sizes must be positive",
                                     field="hidden_layer_sizes")

    def layer_sizes(self, n_features, n_classes):
        return [int(n_features), *[int(h) for h in self.hidden_layer_sizes], int(n_classes)]

    def to_dict(self):
        d = asdict(self)
        d["hidden_layer_sizes"] = list(self.hidden_layer_sizes)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["optimizer"] = OptimizerConfig(**d.get("optimizer", {}))
        d["hidden_layer_sizes"] = tuple(d.get("hidden_layer_sizes", (32, 32)))
        return cls(**d)


@dataclass(frozen=True)
class TrainedMember:
    model: Mlp
    target_tau: float
    achieved_gamma: float
    epochs_run: int
    converged: bool
    member_index: int = 0
    seed: int = 0
    tobias: bool = True


@dataclass
class CrlEnsemble:
    """A finite set of trained networks whose predictions form credal sets.

    ``members[0]`` is the maximum-likelihood network for credal ensembles.
    ``alpha`` is None for ensembles that are not built from thresholds.
    """

    mle: Mlp
    members: List[TrainedMember]
    alpha: Optional[float]
    kind: str = "crerl"
    provenance: dict = field(default_factory=dict)

    @property
    def n_members(self):
        return len(self.members)

    @property
    def n_classes(self):
        return self.mle.n_classes

    def models(self, include_unconverged=True):
        return [m.model for m in self.members if include_unconverged or m.converged]

    def predict_members(self, X, include_unconverged=True):
        """Stacked member predictions with shape ``(n_members, n_samples, K)``."""
        X = check_features(X, self.mle.n_features)
        models = self.models(include_unconverged)
        if not models:
            raise InputError("no members left after excluding unconverged ones")
        return np.stack([m.predict_proba(X) for m in models])

    def to_dict(self):
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "alpha": self.alpha,
            "layer_sizes": list(self.mle.layer_sizes),
            "mle": self.mle.get_flat().tolist(),
            "members": [
                {
                    "member_index": m.member_index,
                    "seed": int(m.seed),
                    "target_tau": m.target_tau,
                    "achieved_gamma": m.achieved_gamma,
                    "epochs_run": m.epochs_run,
                    "converged": m.converged,
                    "tobias": m.tobias,
                    "params": m.model.get_flat().tolist(),
                }
                for m in self.members
            ],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_NAME:
            raise InputError("not a credal ensemble artifact")
        if d.get("version") != FORMAT_VERSION:
            raise InputError(f"unsupported artifact version {d.get('version')}")
        template = mlp_new(d["layer_sizes"], 0)
        members = [
            TrainedMember(
                model=template.with_flat(m["params"]),
                target_tau=float(m["target_tau"]),
                achieved_gamma=float(m["achieved_gamma"]),
                epochs_run=int(m["epochs_run"]),
                converged=bool(m["converged"]),
                member_index=int(m["member_index"]),
                seed=int(m["seed"]),
                tobias=bool(m.get("tobias", True)),
            )
            for m in d["members"]
        ]
        return cls(
            mle=template.with_flat(d["mle"]),
            members=members,
            alpha=None if d["alpha"] is None else float(d["alpha"]),
            kind=d.get("kind", "crerl"),
            provenance=d.get("provenance", {}),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def member_seed(master_seed: int, member_index: int) -> int:
    """Deterministic 64-bit seed for one ensemble member."""
    ss = np.random.SeedSequence([int(master_seed), int(member_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def compute_thresholds(alpha: float, n_members: int) -> List[float]:
    """Relative-likelihood targets for the non-MLE members.

    ``[alpha + i * (1 - alpha) / (M - 1) for i in 0..M-2]``; the M-th slot is
    the maximum-likelihood network itself.
    """
    if n_members <= 0:
        raise ConfigurationError("need at least one member", field="n_members")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError("must lie in [0, 1]", field="alpha")
    if n_members == 1:
        return []
    step = (1.0 - alpha) / (n_members - 1)
    return [alpha + i * step for i in range(n_members - 1)]


def _prepare(X, y, n_classes):
    X = check_features(X)
    if X.shape[0] == 0:
        raise InputError("cannot train on an empty dataset")
    y = np.asarray(y)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    return X, check_labels(y, n_classes, X.shape[0]), int(n_classes)


def train_mle(config: CrlConfig, X, y, n_classes=None, seed=None) -> Mlp:
    """Train with standard init for ``max_epochs``; keep the best-likelihood epoch."""
    X, y, K = _prepare(X, y, n_classes)
    seed = member_seed(config.optimizer.seed, 0) if seed is None else int(seed)
    opt = replace(config.optimizer, seed=seed)
    model = mlp_new(config.layer_sizes(X.shape[1], K), seed)
    optimizer = Optimizer(opt, model)
    best, best_ll = model, log_likelihood(model, X, y)
    for epoch in range(opt.max_epochs):
        model, _ = train_epoch(model, X, y, opt, epoch, optimizer)
        ll = log_likelihood(model, X, y)
        if ll > best_ll:
            best, best_ll = model, ll
    return best


def train_member(
    config: CrlConfig,
    X,
    y,
    mle: Mlp,
    tau: float,
    member_index: int,
    n_classes=None,
    seed=None,
    tobias: bool = True,
) -> TrainedMember:
    """Train one ToBias-initialized member until its relative likelihood reaches ``tau``.

    The relative likelihood is checked at init and then after every epoch or
    batch (``config.check_every``); training stops at the first checkpoint
    with ``gamma >= tau - gamma_tolerance``. If ``max_epochs`` run out first,
    the checkpoint with the highest relative likelihood is returned with
    ``converged=False``.
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError(f"must lie in [0, 1], got {tau}", field="tau")
    X, y, K = _prepare(X, y, n_classes or mle.n_classes)
    n = X.shape[0]
    seed = member_seed(config.optimizer.seed, member_index) if seed is None else int(seed)
    opt = replace(config.optimizer, seed=seed)
    model = mlp_new(config.layer_sizes(X.shape[1], K), seed)
    if tobias:
        model = tobias_init(model, member_index, config.beta)
    ll_mle = log_likelihood(mle, X, y)
    target = tau - config.gamma_tolerance

    def rel(m):
        return relative_likelihood_from_loglik(
            log_likelihood(m, X, y), ll_mle, n, config.normalization)

    r = rel(model)
    if r.gamma >= target:
        return TrainedMember(model, tau, r.gamma, 0, True, member_index, seed, tobias)

    optimizer = Optimizer(opt, model)
    # compare in log space: raw gamma underflows to 0 far from the MLE
    best = {"log_gamma": r.log_gamma, "gamma": r.gamma, "model": model}

    def record(m, r):
        # the model passed per batch is mutated by later steps, so keep a copy
        if r.log_gamma > best["log_gamma"]:
            best.update(log_gamma=r.log_gamma, gamma=r.gamma, model=m.copy())
        return r.gamma >= target

    callback = None
    if config.check_every == "batch":
        callback = lambda m, b: record(m, rel(m))  # noqa: E731
    for epoch in range(opt.max_epochs):
        try:
            model, _ = train_epoch(model, X, y, opt, epoch, optimizer, on_batch=callback)
        except TrainingDivergenceError as exc:
            raise TrainingDivergenceError("non-finite loss or gradient", batch=exc.batch,
                                          epoch=epoch, member_index=member_index) from exc
        if callback is None:
            record(model, rel(model))
        if best["gamma"] >= target:
            return TrainedMember(best["model"], tau, best["gamma"], epoch + 1, True,
                                 member_index, seed, tobias)
    logger.info("member %d peaked at gamma=%.4g below target %.4g after %d epochs",
                member_index, best["gamma"], tau, opt.max_epochs)
    return TrainedMember(best["model"], tau, best["gamma"], opt.max_epochs, False,
                         member_index, seed, tobias)


def _run_parallel(fn, jobs, n_jobs):
    if n_jobs == 1 or len(jobs) <= 1:
        return [fn(*args) for args in jobs]
    from joblib import Parallel, delayed
    # joblib returns results in submission order
    return Parallel(n_jobs=n_jobs)(delayed(fn)(*args) for args in jobs)


def train_crl_ensemble(config: CrlConfig, X, y, n_classes=None, n_jobs=1) -> CrlEnsemble:
    """Train the maximum-likelihood network, then one member per threshold.

    Members are independent once the MLE exists and may run in parallel;
    results are always ordered by member index.
    """
    X, y, K = _prepare(X, y, n_classes)
    mle = train_mle(config, X, y, K)
    opt = config.optimizer
    anchor = TrainedMember(mle, 1.0, 1.0, opt.max_epochs, True, 0,
                           member_seed(opt.seed, 0), tobias=False)
    thresholds = compute_thresholds(config.alpha, config.n_members)
    jobs = [(config, X, y, mle, tau, i + 1, K) for i, tau in enumerate(thresholds)]
    members = [anchor, *_run_parallel(train_member, jobs, n_jobs)]
    return CrlEnsemble(
        mle=mle,
        members=members,
        alpha=config.alpha,
        kind="crerl",
        provenance={"config": config.to_dict(), "thresholds": thresholds,
                    "member_seeds": [int(m.seed) for m in members]},
    )


def _train_full(config, X, y, K, index, seed):
    model = train_mle(config, X, y, K, seed=seed)
    return index, seed, model


def train_deep_ensemble(config: CrlConfig, X, y, n_classes=None, seeds: Sequence[int] = None,
                        n_jobs=1) -> CrlEnsemble:
    """Independently trained networks with standard initialization.

    This is the plain ensemble behind the credal-wrapper and credal-ensembling
    baselines. Relative likelihoods are reported against the best member.
    """
    X, y, K = _prepare(X, y, n_classes)
    if seeds is None:
        seeds = [member_seed(config.optimizer.seed, i) for i in range(config.n_members)]
    jobs = [(config, X, y, K, i, s) for i, s in enumerate(seeds)]
    trained = _run_parallel(_train_full, jobs, n_jobs)
    lls = [log_likelihood(m, X, y) for _, _, m in trained]
    best = int(np.argmax(lls))
    members = [
        TrainedMember(
            model=m,
            target_tau=1.0,
            achieved_gamma=relative_likelihood_from_loglik(
                ll, lls[best], X.shape[0], config.normalization).gamma,
            epochs_run=config.optimizer.max_epochs,
            converged=True,
            member_index=i,
            seed=int(s),
            tobias=False,
        )
        for (i, s, m), ll in zip(trained, lls)
    ]
    return CrlEnsemble(
        mle=trained[best][2],
        members=members,
        alpha=None,
        kind="crewra",
        provenance={"config": config.to_dict(), "member_seeds": [int(s) for s in seeds]},
    )


def creens_keep_count(n_preds: int, alpha: float) -> int:
    return max(1, math.ceil((1.0 - alpha) * n_preds - 1e-12))


def creens_prune(preds, alpha: float):
    """Keep the ``ceil((1 - alpha) * m)`` predictions closest to their mean.

    Distance is Euclidean; survivors keep their input order.
    """
    preds = np.asarray(preds, dtype=float)
    if preds.ndim != 2 or preds.shape[0] == 0:
        raise InputError("need a nonempty (m, K) array of predictions")
    if not 0.0 <= alpha < 1.0:
        raise ConfigurationError("must lie in [0, 1)", field="alpha")
    keep = creens_keep_count(preds.shape[0], alpha)
    dist = np.linalg.norm(preds - preds.mean(axis=0), axis=1)
    survivors = np.sort(np.argsort(dist, kind="stable")[:keep])
    return preds[survivors]


def creens_prune_batch(preds, alpha: float):
    """:func:`creens_prune` applied per instance to ``(m, n, K)`` predictions."""
    preds = np.asarray(preds, dtype=float)
    if preds.ndim != 3 or preds.shape[0] == 0:
        raise InputError("need a nonempty (m, n, K) array of predictions")
    if not 0.0 <= alpha < 1.0:
        raise ConfigurationError("must lie in [0, 1)", field="alpha")
    keep = creens_keep_count(preds.shape[0], alpha)
    dist = np.linalg.norm(preds - preds.mean(axis=0, keepdims=True), axis=2)
    order = np.sort(np.argsort(dist, axis=0, kind="stable")[:keep], axis=0)
    return np.take_along_axis(preds, order[:, :, None], axis=0)
