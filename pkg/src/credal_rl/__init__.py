"""Credal-set classifiers from relative-likelihood ensembles of small networks."""

from .credal import (
    HullCredalSet,
    IntervalCredalSet,
    contains,
    coverage,
    efficiency,
    hull_contains,
    interval_contains,
    interval_from_finite,
)
from .datasets import (
    Dataset,
    gen_bernoulli,
    gen_gaussian_mixture,
    load_csv,
    shift_ood,
    train_test_split,
    write_csv,
)
from .estimators import (
    CredalEnsemblingClassifier,
    CredalRelativeLikelihoodClassifier,
    CredalWrapperClassifier,
)
from .evaluation import (
    EvalReport,
    OodReport,
    auroc,
    evaluate_ood,
    evaluate_predictor,
    pareto_front,
)
from .exceptions import (
    ConfigurationError,
    CredalError,
    InputError,
    ParseError,
    SolverError,
    TrainingDivergenceError,
    ValidationError,
)
from .experiments import ExperimentConfig
from .likelihood import (
    bernoulli_alpha_cut,
    bernoulli_relative_likelihood,
    log_likelihood,
    relative_likelihood,
)
from .nn import Mlp, OptimizerConfig, forward, mlp_new, tobias_init
from .training import (
    CrlConfig,
    CrlEnsemble,
    TrainedMember,
    compute_thresholds,
    creens_prune,
    train_crl_ensemble,
    train_deep_ensemble,
    train_member,
    train_mle,
)
from .uncertainty import (
    EntropyBounds,
    epistemic_uncertainty,
    lower_entropy_interval,
    upper_entropy_interval,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
