"""Acceptance suite: seven end-to-end checks, each printing one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest

from credal_rl.credal import HullCredalSet, IntervalCredalSet, hull_contains
from credal_rl.datasets import gen_bernoulli, gen_gaussian_mixture
from credal_rl.evaluation import auroc, evaluate_predictor
from credal_rl.experiments import (
    ExperimentConfig,
    aggregate,
    ood_for_ensemble,
    train_point,
    trend_violations,
)
from credal_rl.likelihood import bernoulli_alpha_cut, bernoulli_relative_likelihood
from credal_rl.nn import OptimizerConfig, loss_and_grads, mlp_new
from credal_rl.training import CrlConfig, CrlEnsemble, TrainedMember, train_member, train_mle
from credal_rl.uncertainty import (
    entropy_bounds_brute_force,
    lower_entropy_interval,
    upper_entropy_interval,
    upper_entropy_interval_numeric,
)

from conftest import random_interval
from oracles import auroc_pairwise, hull_case, hull_contains_barycentric, numeric_gradient

ALPHAS = [0.0, 0.25, 0.5, 0.75, 1.0]
SEEDS = [0, 1, 2]

# Softmax regression on the mixture: its posterior is exactly softmax-linear,
# so the likelihood has a unique maximum and raw relative likelihoods are
# informative at every threshold.
PARETO_CONFIG = {
    "method": "crerl", "alphas": ALPHAS, "seeds": SEEDS, "n_members": 10,
    "hidden_layer_sizes": [], "check_every": "batch", "normalization": "raw",
    "optimizer": {"kind": "sgd_momentum", "learning_rate": 0.05, "momentum": 0.9,
                  "batch_size": 128, "max_epochs": 200},
    "dataset": {"generator": "gaussian_mixture", "n_train": 2000, "n_test": 2000,
                "n_classes": 3, "radius": 1.5, "sigma": 1.0},
}

# One hidden layer on well separated classes, so that members disagree away
# from the data; per-sample normalization keeps thresholds reachable.
OOD_CONFIG = {
    "method": "crerl", "alphas": [0.25, 1.0], "seeds": SEEDS, "n_members": 10,
    "hidden_layer_sizes": [32], "check_every": "batch", "normalization": "per_sample",
    "optimizer": {"kind": "adaptive_moment", "learning_rate": 0.01, "batch_size": 128,
                  "max_epochs": 100},
    "dataset": {"generator": "gaussian_mixture", "n_train": 1000, "n_test": 2000,
                "n_classes": 3, "radius": 4.0, "sigma": 1.0},
    "shift": {"sigmas": 10.0},
}


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def pareto_sweep():
    start = time.perf_counter()
    cfg = ExperimentConfig.from_dict(PARETO_CONFIG)
    ensembles, reports = [], []
    for alpha, seed in cfg.sweep_points():
        ens, _, test = train_point(cfg, alpha, seed)
        ensembles.append(ens)
        reports.append(evaluate_predictor(ens, test.features, test.ground_truth_dists,
                                          test.hard_labels, seed=seed))
    return ensembles, reports, time.perf_counter() - start


@pytest.fixture(scope="module")
def ood_sweep():
    start = time.perf_counter()
    shifted = ExperimentConfig.from_dict(OOD_CONFIG)
    still = ExperimentConfig.from_dict({**OOD_CONFIG, "shift": {"sigmas": 0.0}})
    ensembles, far, zero = [], {}, {}
    for alpha, seed in shifted.sweep_points():
        ens, _, _ = train_point(shifted, alpha, seed)
        ensembles.append(ens)
        far.setdefault(alpha, []).append(ood_for_ensemble(shifted, ens, alpha, seed).auroc)
        zero.setdefault(alpha, []).append(ood_for_ensemble(still, ens, alpha, seed).auroc)
    return ensembles, far, zero, time.perf_counter() - start


def test_criterion_1_bernoulli_alpha_cuts(verdict):
    start = time.perf_counter()
    g = bernoulli_relative_likelihood(0.5, 6, 10)
    ok = abs(g - 0.8176) <= 1e-4
    lo9, hi9 = bernoulli_alpha_cut(0.9, 6, 10)
    lo8, hi8 = bernoulli_alpha_cut(0.8, 6, 10)
    ok &= not (lo9 <= 0.5 <= hi9) and lo8 <= 0.5 <= hi8

    # independent grid oracle in closed form
    grid = np.linspace(0.0, 1.0, 100_001)
    with np.errstate(divide="ignore"):
        loglik = 6 * np.log(grid) + 4 * np.log1p(-grid)
    gamma = np.exp(loglik - (6 * math.log(0.6) + 4 * math.log(0.4)))
    worst = 0.0
    for alpha in (0.5, 0.8, 0.9):
        lo, hi = bernoulli_alpha_cut(alpha, 6, 10)
        inside = grid[gamma >= alpha]
        ok &= inside.min() - 1e-5 <= lo <= inside.min() and inside.max() <= hi <= inside.max() + 1e-5
        worst = max(worst, abs(lo - inside.min()), abs(hi - inside.max()))
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1.0
    verdict(1, "Bernoulli relative likelihood and alpha-cuts", ok,
            f"gamma(0.5)={g:.6f}, cut(0.9)=[{lo9:.5f},{hi9:.5f}], cut(0.8)=[{lo8:.5f},{hi8:.5f}], "
            f"max endpoint gap to 1e-5 grid={worst:.2e}, {elapsed:.3f}s")


def test_criterion_2_untrained_and_point_limits(verdict):
    start = time.perf_counter()
    details, ok = [], True
    cases = [("mixture K=3", gen_gaussian_mixture(400, 3, seed=1), 3),
             ("mixture K=4", gen_gaussian_mixture(400, 4, seed=2), 5),
             ("coin K=2", gen_bernoulli(400, 0.3, seed=3), 2)]
    for name, data, M in cases:
        cfg = CrlConfig(alpha=0.0, n_members=M, hidden_layer_sizes=(8,),
                        optimizer=OptimizerConfig(max_epochs=20, batch_size=64))
        X, y, K = data.features, data.hard_labels, data.n_classes
        mle = train_mle(cfg, X, y, K)
        members = [TrainedMember(mle, 1.0, 1.0, 20, True, 0, tobias=False)]
        members += [train_member(cfg, X, y, mle, 0.0, i, K) for i in range(1, M + 1)]
        untrained = CrlEnsemble(mle, members, alpha=0.0)
        r = evaluate_predictor(untrained, X, data.ground_truth_dists)
        point = evaluate_predictor(CrlEnsemble(mle, members[:1], alpha=1.0), X,
                                   data.ground_truth_dists)
        ok &= r.coverage >= 0.999 and r.efficiency <= 0.001 and point.efficiency == 1.0
        ok &= all(m.epochs_run == 0 for m in members[1:])
        details.append(f"{name}: cov={r.coverage:.3f} eff={r.efficiency:.2e} single eff={point.efficiency}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10.0
    verdict(2, "alpha=0 untrained limit and single-model limit", ok,
            "; ".join(details) + f", {elapsed:.2f}s")


def test_criterion_3_pareto_trend(verdict, pareto_sweep):
    _, reports, elapsed = pareto_sweep
    agg = aggregate(reports, ("coverage", "efficiency"))
    cov = [a["coverage"] for a in agg]
    eff = [a["efficiency"] for a in agg]
    bad = (trend_violations(cov, [a["coverage_std"] for a in agg], increasing=False)
           + trend_violations(eff, [a["efficiency_std"] for a in agg], increasing=True))
    ok = len(bad) <= 1 and all(abs(step) <= sd for _, step, sd in bad) and elapsed < 300
    verdict(3, "coverage/efficiency trend over alpha", ok,
            f"alphas={ALPHAS} coverage={np.round(cov, 4).tolist()} "
            f"efficiency={np.round(eff, 4).tolist()} violations={bad}, {elapsed:.1f}s")


def test_criterion_4_entropy_bounds(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_up = worst_lo = 0.0
    n_grid, ok = 0, True
    for _ in range(1000):
        K = int(rng.integers(2, 11))
        c = IntervalCredalSet(*random_interval(rng, K))
        up, lo = upper_entropy_interval(c), lower_entropy_interval(c)
        ok &= lo <= up
        worst_up = max(worst_up, abs(up - upper_entropy_interval_numeric(c)))
        if K <= 3:
            n_grid += 1
            step = 1e-3
            grid = entropy_bounds_brute_force(c, step)
            # the grid misses the true vertex by at most one step per coordinate
            ok &= lo <= grid.lower + 1e-12
            ok &= grid.lower - lo <= K * (step * abs(math.log(step)) + step)
            worst_lo = max(worst_lo, grid.lower - lo)
    elapsed = time.perf_counter() - start
    ok &= worst_up <= 1e-6 and elapsed < 60
    verdict(4, "entropy bounds vs numeric and grid oracles", ok,
            f"max |upper - projected gradient|={worst_up:.2e} over 1000 sets; "
            f"max grid gap on lower={worst_lo:.2e} over {n_grid} sets, {elapsed:.1f}s")


def test_criterion_5_ood_ordering(verdict, ood_sweep):
    _, far, zero, elapsed = ood_sweep
    gap = float(np.mean(far[1.0]) - np.mean(far[0.25]))
    zeros = [a for v in zero.values() for a in v]
    ok = gap >= 0.05 and all(0.45 <= a <= 0.55 for a in zeros) and elapsed < 300
    verdict(5, "OoD AUROC grows with alpha; zero shift is chance", ok,
            f"AUROC alpha=1: {np.round(far[1.0], 3).tolist()}, alpha=0.25: "
            f"{np.round(far[0.25], 3).tolist()}, mean gap={gap:.3f}; zero shift "
            f"{np.round(zeros, 3).tolist()}, {elapsed:.1f}s")


def test_criterion_6_oracle_equivalences(verdict):
    rng = np.random.default_rng(6)
    hull_mismatch = 0
    for _ in range(500):
        pts, p = hull_case(rng)
        hull_mismatch += hull_contains(HullCredalSet(pts), p) != hull_contains_barycentric(pts, p)
    auc_mismatch = 0
    for _ in range(100):
        neg = np.round(rng.normal(size=rng.integers(1, 40)), 1)
        pos = np.round(rng.normal(0.7, size=rng.integers(1, 40)), 1)
        auc_mismatch += abs(auroc(neg, pos) - auroc_pairwise(neg, pos)) > 1e-12

    model = mlp_new([2, 3, 2], 6)
    X = rng.normal(size=(10, 2))
    y = rng.integers(0, 2, size=10)
    _, gw, gb = loss_and_grads(model, X, y)
    analytic = np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(gw, gb)])
    numeric = numeric_gradient(lambda t: loss_and_grads(model.with_flat(t), X, y)[0],
                               model.get_flat())
    rel = float(np.max(np.abs(analytic - numeric)
                       / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))))
    ok = hull_mismatch == 0 and auc_mismatch == 0 and rel < 1e-4
    verdict(6, "hull membership, AUROC and gradient oracles", ok,
            f"hull mismatches={hull_mismatch}/500, AUROC mismatches={auc_mismatch}/100, "
            f"gradient max relative error={rel:.2e}")


def test_criterion_7_early_stopping_contract(verdict, pareto_sweep, ood_sweep):
    ensembles = pareto_sweep[0] + ood_sweep[0]
    below, unsorted, checked = [], 0, 0
    for ens in ensembles:
        # member 0 is the likelihood maximizer itself, outside the threshold schedule
        early = [m for m in ens.members[1:] if m.converged]
        checked += len(early)
        below += [(m.target_tau, m.achieved_gamma) for m in early
                  if m.achieved_gamma < m.target_tau]
        g = [m.achieved_gamma for m in early]
        unsorted += sum(g[i + 1] < g[i] - 0.05 for i in range(len(g) - 1))
        anchor = ens.members[0]
        below += [] if anchor.achieved_gamma >= anchor.target_tau else [(1.0, anchor.achieved_gamma)]
    ok = not below and unsorted == 0 and checked > 0
    verdict(7, "converged members reach their thresholds in order", ok,
            f"{checked} converged members in {len(ensembles)} ensembles, "
            f"below target={below}, order violations beyond 0.05={unsorted}")
