"""Experiment configuration and the per-point runners behind the CLI sweeps.

A sweep point is one ``(alpha, seed)`` pair. Each point regenerates its data
from the seed, trains one ensemble, and returns a report, so points are
independent and can run in separate processes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .datasets import (
    LABEL_MODES,
    Dataset,
    default_means,
    gen_bernoulli,
    gen_gaussian_mixture,
    load_csv,
    shift_ood,
    train_test_split,
)
from .evaluation import SET_KINDS, EvalReport, OodReport, evaluate_ood, evaluate_predictor
from .exceptions import ConfigurationError
from .likelihood import NORMALIZATIONS
from .nn import OptimizerConfig
from .training import (
    CHECK_GRANULARITIES,
    CrlConfig,
    CrlEnsemble,
    train_crl_ensemble,
    train_deep_ensemble,
)

METHODS = ("crerl", "crewra", "creens")
GENERATORS = ("gaussian_mixture", "bernoulli", "csv")

# independent random streams derived from one run seed
_TRAIN_STREAM, _TEST_STREAM, _OOD_STREAM = 10, 11, 12


def stream_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([int(seed), stream]).generate_state(1)[0])


def _reject_unknown(d, cls, prefix):
    known = {f.name for f in fields(cls)}
    for key in d:
        if key not in known:
            raise ConfigurationError("unknown key", field=f"{prefix}{key}")


@dataclass(frozen=True)
class DatasetSpec:
    """Where the data comes from.

    ``gaussian_mixture`` places class means on a circle of ``radius``;
    ``bernoulli`` is a single coin with bias ``theta``; ``csv`` reads ``path``
    and splits it by ``test_fraction``.
    """

    generator: str = "gaussian_mixture"
    n_train: int = 1000
    n_test: int = 1000
    n_classes: int = 3
    n_features: int = 2
    radius: float = 1.5
    sigma: float = 1.0
    theta: float = 0.6
    path: Optional[str] = None
    label_mode: str = "hard"
    test_fraction: float = 0.3

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ConfigurationError(f"must be one of {GENERATORS}", field="dataset.generator")
        for name in ("n_train", "n_test", "n_classes", "n_features"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError("must be a positive integer", field=f"dataset.{name}")
        if self.generator == "gaussian_mixture" and self.n_classes < 2:
            raise ConfigurationError("need at least two classes", field="dataset.n_classes")
        if not self.sigma > 0:
            raise ConfigurationError("must be positive", field="dataset.sigma")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigurationError("must lie in [0, 1]", field="dataset.theta")
        if self.generator == "csv" and not self.path:
            raise ConfigurationError("required for csv data", field="dataset.path")
        if self.label_mode not in LABEL_MODES:
            raise ConfigurationError(f"must be one of {LABEL_MODES}", field="dataset.label_mode")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError("must lie in (0, 1)", field="dataset.test_fraction")

    def _sample(self, n, seed) -> Dataset:
        if self.generator == "bernoulli":
            return gen_bernoulli(n, self.theta, seed)
        means = default_means(self.n_classes, self.n_features, self.radius)
        return gen_gaussian_mixture(n, self.n_classes, means, self.sigma, seed=seed)

    def load(self, seed: int):
        """Return ``(train, test)`` for a run seed."""
        if self.generator == "csv":
            data = load_csv(self.path, self.n_features, self.n_classes, self.label_mode,
                            seed=stream_seed(seed, _TRAIN_STREAM))
            return train_test_split(data, self.test_fraction, seed)
        return (self._sample(self.n_train, stream_seed(seed, _TRAIN_STREAM)),
                self._sample(self.n_test, stream_seed(seed, _TEST_STREAM)))

    def shifted(self, seed: int, offset) -> Dataset:
        """Out-of-distribution sample: a fresh draw (or the CSV test split) moved by ``offset``."""
        if self.generator == "csv":
            base = self.load(seed)[1]
        else:
            base = self._sample(self.n_test, stream_seed(seed, _OOD_STREAM))
        return shift_ood(base, offset)


@dataclass(frozen=True)
class ShiftSpec:
    """OoD shift: an explicit ``offset`` vector, or ``sigmas`` noise scales along the diagonal."""

    sigmas: float = 10.0
    offset: Optional[tuple] = None

    def vector(self, n_features: int, sigma: float):
        if self.offset is not None:
            v = np.asarray(self.offset, dtype=float)
            if v.shape != (n_features,):
                raise ConfigurationError(f"needs {n_features} entries", field="shift.offset")
            return v
        return np.full(n_features, self.sigmas * sigma / math.sqrt(n_features))


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "crerl"
    alphas: tuple = (0.8,)
    seeds: tuple = (0,)
    n_members: int = 10
    beta: float = 100.0
    hidden_layer_sizes: tuple = (32,)
    check_every: str = "epoch"
    gamma_tolerance: float = 0.0
    normalization: str = "raw"
    set_kind: Optional[str] = None
    include_unconverged: bool = True
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    shift: ShiftSpec = field(default_factory=ShiftSpec)
    out: str = "runs"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"must be one of {METHODS}", field="method")
        if len(self.alphas) == 0:
            raise ConfigurationError("need at least one value", field="alphas")
        for i, a in enumerate(self.alphas):
            upper_ok = a < 1.0 if self.method == "creens" else a <= 1.0
            if not (isinstance(a, (int, float)) and 0.0 <= a and upper_ok):
                bound = "[0, 1)" if self.method == "creens" else "[0, 1]"
                raise ConfigurationError(f"must lie in {bound}, got {a!r}", field=f"alphas[{i}]")
        if len(self.seeds) == 0:
            raise ConfigurationError("need at least one seed", field="seeds")
        for i, s in enumerate(self.seeds):
            if not isinstance(s, int) or s < 0:
                raise ConfigurationError(f"must be a nonnegative integer, got {s!r}",
                                         field=f"seeds[{i}]")
        if int(self.n_members) < 1:
            raise ConfigurationError("must be a positive integer", field="n_members")
        if self.check_every not in CHECK_GRANULARITIES:
            raise ConfigurationError(f"must be one of {CHECK_GRANULARITIES}", field="check_every")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigurationError(f"must be one of {NORMALIZATIONS}", field="normalization")
        if self.set_kind is not None and self.set_kind not in SET_KINDS:
            raise ConfigurationError(f"must be one of {SET_KINDS}", field="set_kind")

    @property
    def resolved_set_kind(self):
        if self.set_kind is not None:
            return self.set_kind
        return "hull" if self.method == "creens" else "interval"

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError("config must be a mapping at the top level")
        d = dict(d)
        _reject_unknown(d, cls, "")
        for key, sub in (("optimizer", OptimizerConfig), ("dataset", DatasetSpec),
                         ("shift", ShiftSpec)):
            if key in d:
                if not isinstance(d[key], dict):
                    raise ConfigurationError("must be a mapping", field=key)
                _reject_unknown(d[key], sub, f"{key}.")
                d[key] = sub(**d[key])
        if isinstance(d.get("shift"), ShiftSpec) and d["shift"].offset is not None:
            d["shift"] = ShiftSpec(d["shift"].sigmas, tuple(d["shift"].offset))
        for key in ("alphas", "seeds", "hidden_layer_sizes"):
            if key in d:
                if not isinstance(d[key], (list, tuple)):
                    raise ConfigurationError("must be a list", field=key)
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    def to_dict(self):
        d = asdict(self)
        for key in ("alphas", "seeds", "hidden_layer_sizes"):
            d[key] = list(d[key])
        if d["shift"]["offset"] is not None:
            d["shift"]["offset"] = list(d["shift"]["offset"])
        return d

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring the output directory."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def crl_config(self, alpha: float, seed: int) -> CrlConfig:
        opt = asdict(self.optimizer)
        opt["seed"] = int(seed)
        return CrlConfig(
            alpha=float(alpha),
            n_members=self.n_members,
            beta=self.beta,
            hidden_layer_sizes=tuple(self.hidden_layer_sizes),
            check_every=self.check_every,
            gamma_tolerance=self.gamma_tolerance,
            normalization=self.normalization,
            optimizer=OptimizerConfig(**opt),
        )

    def sweep_points(self):
        """``(alpha, seed)`` pairs; the wrapper baseline has no alpha to sweep."""
        alphas = [None] if self.method == "crewra" else [float(a) for a in self.alphas]
        return [(a, s) for a in alphas for s in self.seeds]


def train_point(cfg: ExperimentConfig, alpha, seed: int):
    """Train one ensemble; returns ``(ensemble, train, test)``."""
    train, test = cfg.dataset.load(seed)
    if cfg.method == "crerl":
        ens = train_crl_ensemble(cfg.crl_config(alpha, seed), train.features,
                                 train.hard_labels, train.n_classes)
    else:
        ens = train_deep_ensemble(cfg.crl_config(1.0, seed), train.features,
                                  train.hard_labels, train.n_classes)
    ens.provenance.update({"data_seed": int(seed), "config_hash": cfg.config_hash()})
    return ens, train, test


def _prune_alpha(cfg, alpha):
    return alpha if cfg.method == "creens" else None


def evaluate_point(cfg: ExperimentConfig, alpha, seed: int) -> EvalReport:
    ens, _, test = train_point(cfg, alpha, seed)
    return evaluate_predictor(
        ens, test.features, test.ground_truth_dists, test.hard_labels,
        set_kind=cfg.resolved_set_kind,
        creens_alpha=_prune_alpha(cfg, alpha),
        include_unconverged=cfg.include_unconverged,
        config_id=cfg.config_hash()[:12],
        seed=seed,
        dataset_name=test.name,
    )


def ood_for_ensemble(cfg: ExperimentConfig, ens: CrlEnsemble, alpha, seed: int) -> OodReport:
    _, test = cfg.dataset.load(seed)
    sigma = cfg.dataset.sigma if cfg.dataset.generator == "gaussian_mixture" else 1.0
    shifted = cfg.dataset.shifted(seed, cfg.shift.vector(test.n_features, sigma))
    return evaluate_ood(ens, test.features, shifted.features,
                        set_kind=cfg.resolved_set_kind,
                        creens_alpha=_prune_alpha(cfg, alpha),
                        include_unconverged=cfg.include_unconverged,
                        seed=seed)


def ood_point(cfg: ExperimentConfig, alpha, seed: int) -> OodReport:
    ens, _, _ = train_point(cfg, alpha, seed)
    return ood_for_ensemble(cfg, ens, alpha, seed)


def aggregate(reports, metrics):
    """Mean and population standard deviation of ``metrics`` per alpha, sorted by alpha."""
    groups = {}
    for r in reports:
        groups.setdefault(r.alpha, []).append(r)
    rows = []
    for alpha in sorted(groups, key=lambda a: -1.0 if a is None else a):
        rs = groups[alpha]
        row = {"alpha": alpha, "n_seeds": len(rs)}
        for m in metrics:
            vals = np.array([getattr(r, m) for r in rs], dtype=float)
            row[m] = float(vals.mean())
            row[f"{m}_std"] = float(vals.std())
        rows.append(row)
    return rows


def trend_violations(means, stds, increasing: bool):
    """Adjacent steps that go the wrong way.

    Returns ``(i, step, std)`` for each offending step ``i -> i + 1``, where
    ``std`` is the larger of the two points' standard deviations.
    """
    out = []
    for i in range(len(means) - 1):
        step = means[i + 1] - means[i]
        if (step < 0) if increasing else (step > 0):
            out.append((i, float(step), float(max(stds[i], stds[i + 1]))))
    return out
