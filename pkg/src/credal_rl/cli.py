"""``credal-rl`` command line: train, pareto, ood, uq, report.

Every command reads one YAML config (see README), writes into ``--out``
(default: the config's ``out`` key), stamps each output with the config
hash, and refuses to overwrite existing outputs without ``--force``.

Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .evaluation import EvalReport, OodReport, epistemic_scores, pareto_front
from .exceptions import ConfigurationError, CredalError
from .experiments import (
    ExperimentConfig,
    aggregate,
    evaluate_point,
    ood_for_ensemble,
    ood_point,
    train_point,
    trend_violations,
)
from .training import CrlEnsemble

logger = logging.getLogger("credal_rl")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class OverwriteRefused(ConfigurationError):
    pass


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML: {exc}") from None
    return ExperimentConfig.from_dict(raw or {})


def _now():
    return datetime.now(timezone.utc).isoformat()


def _point_tag(alpha, seed):
    a = "none" if alpha is None else f"{alpha:g}"
    return f"a{a}_s{seed}"


def _claim(paths, force):
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise OverwriteRefused(f"refusing to overwrite {', '.join(existing)} (use --force)")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def _run_points(fn, cfg, points, workers, tmp_dir):
    """Run ``fn`` for every point, each writing its own JSON file; return them in order."""
    tmp_dir.mkdir(parents=True, exist_ok=True)
    paths = [tmp_dir / f"{_point_tag(a, s)}.json" for a, s in points]
    jobs = [(fn, cfg.to_dict(), a, s, str(p)) for (a, s), p in zip(points, paths)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_point_worker, jobs))
    else:
        for job in jobs:
            _point_worker(job)
    results = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            results.append(json.load(fh)["report"])
    return results


def _point_worker(job):
    fn, cfg_dict, alpha, seed, path = job
    cfg = ExperimentConfig.from_dict(cfg_dict)
    report = fn(cfg, alpha, seed)
    _write_json(path, {"config_hash": cfg.config_hash(), "alpha": alpha, "seed": seed,
                       "report": report.to_dict()})


def _member_summary(ens):
    return [
        {"member_index": m.member_index, "seed": m.seed, "target_tau": m.target_tau,
         "achieved_gamma": m.achieved_gamma, "converged": m.converged,
         "epochs_run": m.epochs_run}
        for m in ens.members
    ]


def _train_worker(job):
    cfg_dict, alpha, seed, path = job
    cfg = ExperimentConfig.from_dict(cfg_dict)
    ens, _, _ = train_point(cfg, alpha, seed)
    ens.save(path)
    return {"file": Path(path).name, "alpha": alpha, "seed": seed,
            "thresholds": ens.provenance.get("thresholds"), "members": _member_summary(ens)}


def cmd_train(cfg, out, workers, force):
    points = cfg.sweep_points()
    paths = [out / f"ensemble_{_point_tag(a, s)}.json" for a, s in points]
    manifest_path = out / "manifest.json"
    _claim([*paths, manifest_path], force)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg.to_dict(), a, s, str(p)) for (a, s), p in zip(points, paths)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            artifacts = list(pool.map(_train_worker, jobs))
    else:
        artifacts = [_train_worker(j) for j in jobs]
    _write_json(manifest_path, {
        "command": "train",
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "seeds": list(cfg.seeds),
        "artifacts": artifacts,
        "created_at": _now(),
    })
    for art in artifacts:
        n_conv = sum(m["converged"] for m in art["members"])
        print(f"{art['file']}: {len(art['members'])} members, {n_conv} converged")
    return [manifest_path, *paths]


PARETO_COLUMNS = ["row_type", "alpha", "seed", "n_seeds", "coverage", "coverage_std",
                  "efficiency", "efficiency_std", "mean_eu", "mean_eu_std", "set_kind",
                  "config_hash"]


def cmd_pareto(cfg, out, workers, force):
    if cfg.dataset.generator == "csv" and cfg.dataset.label_mode == "hard":
        raise ConfigurationError("hard-label CSV data has no ground-truth distributions; "
                                 "coverage needs label_mode counts or probs",
                                 field="dataset.label_mode")
    csv_path, json_path = out / "pareto.csv", out / "pareto.json"
    _claim([csv_path, json_path], force)
    h = cfg.config_hash()
    raw = _run_points(evaluate_point, cfg, cfg.sweep_points(), workers, out / "points")
    reports = [EvalReport(**r) for r in raw]
    agg = aggregate(reports, ("coverage", "efficiency", "mean_eu"))
    rows = [{"row_type": "detail", **r.csv_row(), "n_seeds": 1, "config_hash": h}
            for r in reports]
    rows += [{"row_type": "aggregate", "seed": "", "set_kind": cfg.resolved_set_kind,
              "config_hash": h, **{k: ("" if v is None else v) for k, v in a.items()}}
             for a in agg]
    _write_csv(csv_path, rows, PARETO_COLUMNS)
    _write_json(json_path, {"command": "pareto", "config_hash": h, "created_at": _now(),
                            "reports": raw, "aggregate": agg})
    for a in agg:
        print(f"alpha={a['alpha']}: coverage {a['coverage']:.4f} +- {a['coverage_std']:.4f}, "
              f"efficiency {a['efficiency']:.4f} +- {a['efficiency_std']:.4f}")
    return [csv_path, json_path]


OOD_COLUMNS = ["row_type", "alpha", "seed", "n_seeds", "auroc", "auroc_std", "mean_eu_id",
               "mean_eu_ood", "n_id", "n_ood", "config_hash"]


def cmd_ood(cfg, out, workers, force, artifact=None):
    csv_path, json_path = out / "ood.csv", out / "ood.json"
    _claim([csv_path, json_path], force)
    h = cfg.config_hash()
    if artifact is not None:
        ens = _load_artifact(artifact)
        seed = int(ens.provenance.get("data_seed", cfg.seeds[0]))
        raw = [ood_for_ensemble(cfg, ens, ens.alpha, seed).to_dict()]
    else:
        raw = _run_points(ood_point, cfg, cfg.sweep_points(), workers, out / "points_ood")
    reports = [OodReport(**r) for r in raw]
    rows = [{"row_type": "detail", **r.csv_row(), "n_seeds": 1, "config_hash": h}
            for r in reports]
    agg = aggregate(reports, ("auroc",))
    rows += [{"row_type": "aggregate", "seed": "", "config_hash": h,
              **{k: ("" if v is None else v) for k, v in a.items()}} for a in agg]
    _write_csv(csv_path, rows, OOD_COLUMNS)
    _write_json(json_path, {"command": "ood", "config_hash": h, "created_at": _now(),
                            "shift": cfg.to_dict()["shift"], "reports": raw, "aggregate": agg})
    for a in agg:
        print(f"alpha={a['alpha']}: AUROC {a['auroc']:.4f} +- {a['auroc_std']:.4f}")
    return [csv_path, json_path]


def _load_artifact(path):
    if not Path(path).is_file():
        raise CredalError(f"artifact not found: {path}")
    return CrlEnsemble.load(path)


def cmd_uq(cfg, out, force, artifact):
    if artifact is None:
        raise ConfigurationError("uq needs --artifact")
    csv_path = out / "uq.csv"
    _claim([csv_path], force)
    ens = _load_artifact(artifact)
    seed = int(ens.provenance.get("data_seed", cfg.seeds[0]))
    _, test = cfg.dataset.load(seed)
    prune = ens.alpha if cfg.method == "creens" else None
    preds = ens.predict_members(test.features, cfg.include_unconverged)
    lo, up, eu = epistemic_scores(preds, cfg.resolved_set_kind, prune)
    h = cfg.config_hash()
    rows = [{"instance_id": i, "lower_entropy": lo[i], "upper_entropy": up[i], "eu": eu[i],
             "config_hash": h} for i in range(len(eu))]
    _write_csv(csv_path, rows, ["instance_id", "lower_entropy", "upper_entropy", "eu",
                                "config_hash"])
    print(f"{len(rows)} instances, mean EU {float(np.mean(eu)):.4f}")
    return [csv_path]


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_report(cfg, out, force):
    """Summarize existing pareto/ood outputs in ``out``: trends and the Pareto front."""
    report_path = out / "report.json"
    _claim([report_path], force)
    summary = {"command": "report", "config_hash": cfg.config_hash(), "created_at": _now()}
    found = False
    if (out / "pareto.csv").exists():
        found = True
        agg = [r for r in _read_csv(out / "pareto.csv") if r["row_type"] == "aggregate"]
        pts = [EvalReport(config_id=r["config_hash"][:12],
                          alpha=float(r["alpha"]) if r["alpha"] else None,
                          coverage=float(r["coverage"]), efficiency=float(r["efficiency"]),
                          mean_eu=float(r["mean_eu"])) for r in agg]
        cov = [p.coverage for p in pts]
        eff = [p.efficiency for p in pts]
        cov_sd = [float(r["coverage_std"]) for r in agg]
        eff_sd = [float(r["efficiency_std"]) for r in agg]
        summary["pareto"] = {
            "alphas": [p.alpha for p in pts],
            "front_alphas": [p.alpha for p in pareto_front(pts)],
            "coverage_increases": trend_violations(cov, cov_sd, increasing=False),
            "efficiency_decreases": trend_violations(eff, eff_sd, increasing=True),
        }
        print("pareto front at alpha:", summary["pareto"]["front_alphas"])
    if (out / "ood.csv").exists():
        found = True
        agg = [r for r in _read_csv(out / "ood.csv") if r["row_type"] == "aggregate"]
        summary["ood"] = {r["alpha"] or "none": float(r["auroc"]) for r in agg}
        print("AUROC by alpha:", summary["ood"])
    if not found:
        raise CredalError(f"no pareto.csv or ood.csv in {out}")
    _write_json(report_path, summary)
    return [report_path]


def build_parser():
    parser = argparse.ArgumentParser(prog="credal-rl",
                                     description="Credal relative-likelihood ensembles")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("train", "train ensembles and write artifacts plus a manifest"),
                        ("pareto", "coverage/efficiency sweep over alphas and seeds"),
                        ("ood", "EU-based out-of-distribution AUROC"),
                        ("uq", "per-instance entropy bounds for one artifact"),
                        ("report", "summarize pareto/ood outputs")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default: the config's 'out')")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("ood", "uq"):
            p.add_argument("--artifact", type=Path, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigurationError("must be at least 1", field="--workers")
        cfg = load_config(args.config)
        out = Path(args.out if args.out is not None else cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "train":
            cmd_train(cfg, out, args.workers, args.force)
        elif args.command == "pareto":
            cmd_pareto(cfg, out, args.workers, args.force)
        elif args.command == "ood":
            cmd_ood(cfg, out, args.workers, args.force, args.artifact)
        elif args.command == "uq":
            cmd_uq(cfg, out, args.force, args.artifact)
        else:
            cmd_report(cfg, out, args.force)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CredalError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
