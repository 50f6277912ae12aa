"""Command-line pipeline: weight, train, iptts, eval, simulate.

Every subcommand writes its outputs under ``--out`` and echoes the fully
resolved configuration to ``config.json`` there; re-running with the
same inputs and config reproduces every output byte for byte (no
timestamps, no unseeded randomness).  Flags may also be supplied as a
JSON file via ``--config``; explicit flags win over file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .classifier import LinearModel, TrainConfig, TrainingError, train_weighted
from .corpus import (
    DataFormatError,
    Dataset,
    build_signatures,
    load_dataset,
    load_lexicon,
    quantile_boundaries,
    tokenize,
)
from .iptts import (
    DEFAULT_SLOT_LEXICON,
    DEFAULT_TEMPLATES,
    TemplateError,
    TestSuite,
    generate,
    load_slot_lexicon,
    load_templates,
    verify_balance,
)
from .metrics import (
    GroupedPredictions,
    auc,
    fairness_report,
    frequency_table,
    write_frequency_csv,
)
from .synthbias import (
    AssumptionError,
    DiscreteWorld,
    check_posterior,
    check_theorem1,
    check_theorem2,
    exact_weights,
    random_classifier,
    random_eo_joint,
    reference_world,
)
from .weighting import (
    WeightConfig,
    WeightedDataset,
    read_weights_csv,
    weigh,
    weights_for,
    write_weights_csv,
)

_NEAR_UNIFORM_TOL = 0.05


def _write_json(obj: object, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge CLI flags over config-file values over defaults."""
    file_cfg: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key, default)
        resolved[key] = value
    return resolved


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg[k] is None]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(command: str, cfg: dict, out: Path) -> None:
    _write_json({"command": command, **cfg}, out / "config.json")


def _parse_buckets(spec: str | None, dataset: Dataset) -> list[int] | None:
    if spec is None:
        return None
    if spec.startswith("auto"):
        n = int(spec.split(":", 1)[1]) if ":" in spec else 4
        counts = [len(tokenize(s.text)) for s in dataset.samples]
        return list(quantile_boundaries(counts, n))
    return [int(b) for b in spec.split(",")]


# -- weight ----------------------------------------------------------------

_WEIGHT_DEFAULTS = {
    "data": None,
    "format": None,
    "lexicon": None,
    "length_buckets": None,
    "folds": 5,
    "alpha": 1.0,
    "prior_q1": "empirical",
    "normalize": True,
    "clip": None,
    "seed": 0,
}


def cmd_weight(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _WEIGHT_DEFAULTS)
    _require(cfg, "data", "lexicon")
    out = _outdir(args)
    dataset = load_dataset(cfg["data"], cfg["format"])
    lexicon = load_lexicon(cfg["lexicon"])
    buckets = _parse_buckets(cfg["length_buckets"], dataset)
    dataset = build_signatures(dataset, lexicon, buckets)
    prior = cfg["prior_q1"]
    wconfig = WeightConfig(
        folds=int(cfg["folds"]),
        alpha=float(cfg["alpha"]),
        prior_q1=prior if prior == "empirical" else float(prior),
        seed=int(cfg["seed"]),
        normalize=bool(cfg["normalize"]),
        clip=tuple(cfg["clip"]) if cfg["clip"] else None,
    )
    weighted = weigh(dataset, wconfig)
    _echo_config("weight", {**cfg, "resolved_length_buckets": buckets}, out)
    write_weights_csv(weighted, out / "weights.csv")
    w = weighted.weights
    max_dev = float(np.max(np.abs(w - 1.0)))
    audit = {
        "n_samples": len(dataset),
        "positive_rate": float(np.mean(dataset.labels)),
        "n_signatures": len(set(dataset.signatures or ())),
        "weight_min": float(w.min()),
        "weight_max": float(w.max()),
        "weight_mean": float(w.mean()),
        "max_abs_dev_from_uniform": max_dev,
        "near_uniform": max_dev <= _NEAR_UNIFORM_TOL,
        "fold_sizes": np.bincount(weighted.folds, minlength=wconfig.folds).tolist(),
    }
    if audit["near_uniform"]:
        audit["note"] = (
            "weights are near-uniform: the observed per-identity label "
            "rates already match the overall rate, so weighting will "
            "barely change training"
        )
    _write_json(audit, out / "audit.json")
    print(f"wrote {out / 'weights.csv'} ({len(dataset)} rows)")
    return 0


# -- train -------------------------------------------------------------------

_TRAIN_DEFAULTS = {
    "train": None,
    "valid": None,
    "weights": None,
    "valid_weights": None,
    "learning_rate": 0.1,
    "epochs": 30,
    "l2": 1e-4,
    "batch_size": 64,
    "min_count": 2,
    "seed": 0,
    "seeds": 1,
}


def _weighted_split(path: str, weights_csv: str | None, fmt: str | None = None) -> WeightedDataset:
    ds = load_dataset(path, fmt)
    if weights_csv is None:
        return WeightedDataset.uniform(ds)
    return WeightedDataset(dataset=ds, weights=weights_for(ds, read_weights_csv(weights_csv)))


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _TRAIN_DEFAULTS)
    _require(cfg, "train", "valid")
    out = _outdir(args)
    train_wd = _weighted_split(cfg["train"], cfg["weights"])
    valid_wd = _weighted_split(cfg["valid"], cfg["valid_weights"])
    _echo_config("train", cfg, out)
    n_seeds = int(cfg["seeds"])
    base_seed = int(cfg["seed"])
    for s in range(base_seed, base_seed + n_seeds):
        tconfig = TrainConfig(
            learning_rate=float(cfg["learning_rate"]),
            epochs=int(cfg["epochs"]),
            l2=float(cfg["l2"]),
            batch_size=int(cfg["batch_size"]),
            seed=s,
            min_count=int(cfg["min_count"]),
        )
        model = train_weighted(train_wd, valid_wd, tconfig)
        dest = out if n_seeds == 1 else out / f"seed_{s}"
        dest.mkdir(parents=True, exist_ok=True)
        model.save(dest / "model.json")
        _write_json(
            {
                "best_epoch": model.best_epoch,
                "epochs": [
                    {
                        "epoch": h.epoch,
                        "learning_rate": h.learning_rate,
                        "train_loss": h.train_loss,
                        "valid_loss": h.valid_loss,
                    }
                    for h in model.history
                ],
            },
            dest / "training_log.json",
        )
        print(f"seed {s}: best epoch {model.best_epoch}, wrote {dest / 'model.json'}")
    return 0


# -- iptts -------------------------------------------------------------------

_IPTTS_DEFAULTS = {"templates": None, "slots": None, "seed": 0}


def cmd_iptts(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _IPTTS_DEFAULTS)
    out = _outdir(args)
    templates = load_templates(cfg["templates"]) if cfg["templates"] else DEFAULT_TEMPLATES
    slots = load_slot_lexicon(cfg["slots"]) if cfg["slots"] else DEFAULT_SLOT_LEXICON
    suite = generate(templates, slots)
    balance = verify_balance(suite)
    _echo_config("iptts", cfg, out)
    suite.write_csv(out / "suite.csv")
    _write_json(
        {
            "total": balance.total,
            "positives": balance.positives,
            "positive_rate": f"{balance.positives}/{balance.total}",
            "per_term": {t: {"rows": n, "positives": k} for t, (n, k) in balance.per_term.items()},
            "violations": list(balance.violations),
            "balanced": balance.ok,
        },
        out / "balance.json",
    )
    print(f"wrote {out / 'suite.csv'} ({balance.total} rows, {balance.positives} positive)")
    if not balance.ok:
        print(f"error: label balance violated for terms {balance.violations}", file=sys.stderr)
        return 1
    return 0


# -- eval --------------------------------------------------------------------

_EVAL_DEFAULTS = {
    "model": None,
    "suite": None,
    "test": None,
    "lexicon": None,
    "weights": None,
    "threshold": 0.5,
}


def _eval_one(
    model: LinearModel, suite: TestSuite, test_ds: Dataset | None, threshold: float
) -> dict:
    scores = model.score_texts(suite.texts)
    auc_iptts = auc(scores, suite.labels)
    auc_orig = None
    if test_ds is not None:
        auc_orig = auc(model.score_texts(test_ds.texts), test_ds.labels)
    preds = GroupedPredictions.from_scores(
        scores, suite.labels, [(r.identity,) for r in suite.rows], threshold
    )
    report = fairness_report(preds, suite.identities, auc_orig=auc_orig, auc_iptts=auc_iptts)
    return report.to_dict()


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _EVAL_DEFAULTS)
    _require(cfg, "model", "suite")
    out = _outdir(args)
    model_paths = cfg["model"] if isinstance(cfg["model"], list) else [cfg["model"]]
    suite = TestSuite.read_csv(cfg["suite"])
    test_ds = load_dataset(cfg["test"]) if cfg["test"] else None
    threshold = float(cfg["threshold"])
    _echo_config("eval", cfg, out)

    reports = []
    for i, path in enumerate(model_paths):
        report = _eval_one(LinearModel.load(path), suite, test_ds, threshold)
        reports.append(report)
        name = "report.json" if len(model_paths) == 1 else f"report_{i}.json"
        _write_json(report, out / name)
        print(
            f"{Path(path).name}: fped={report['fped']:.4f} fned={report['fned']:.4f} "
            f"auc_iptts={report['auc_iptts']:.4f}"
        )
    if len(model_paths) > 1:
        agg = {}
        for key in ("fped", "fned", "auc_orig", "auc_iptts"):
            values = [r[key] for r in reports]
            if any(v is None for v in values):
                agg[key] = None
            else:
                agg[key] = {
                    "mean": float(np.mean(values)),
                    "std": float(np.std(values)),
                    "values": values,
                }
        agg["n_models"] = len(model_paths)
        _write_json(agg, out / "aggregate.json")
        print(f"aggregate over {len(model_paths)} models: fped mean {agg['fped']['mean']:.4f}")

    if test_ds is not None and cfg["lexicon"]:
        lexicon = load_lexicon(cfg["lexicon"])
        signed = build_signatures(test_ds, lexicon)
        write_frequency_csv(frequency_table(signed, lexicon.terms), out / "frequency.csv")
        if cfg["weights"]:
            w = weights_for(signed, read_weights_csv(cfg["weights"]))
            write_frequency_csv(
                frequency_table(signed, lexicon.terms, w), out / "frequency_weighted.csv"
            )
    return 0


# -- simulate ------------------------------------------------------------------

_SIM_DEFAULTS = {
    "world": None,
    "checks": "theorem1,theorem2,weights,posterior",
    "n": 20000,
    "mc_seeds": 3,
    "mc_tol": 0.01,
    "seed": 0,
}


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _SIM_DEFAULTS)
    out = _outdir(args)
    world = DiscreteWorld.load(cfg["world"]) if cfg["world"] else reference_world()
    checks = [c.strip() for c in cfg["checks"].split(",") if c.strip()]
    unknown = set(checks) - {"theorem1", "theorem2", "weights", "posterior"}
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    _echo_config("simulate", cfg, out)
    rng = np.random.default_rng(int(cfg["seed"]))
    reports = []
    if "theorem1" in checks:
        for i in range(5):
            reports.append(check_theorem1(random_eo_joint(rng)).to_dict())
    if "theorem2" in checks:
        clf = random_classifier(rng, world)
        seeds = [int(cfg["seed"]) + i for i in range(int(cfg["mc_seeds"]))]
        for loss in ("zero_one", "logistic"):
            rep = check_theorem2(
                world, clf, loss, n_samples=int(cfg["n"]), seeds=seeds, mc_tol=float(cfg["mc_tol"])
            ).to_dict()
            rep["loss"] = loss
            reports.append(rep)
    if "weights" in checks:
        weights = exact_weights(world)
        reports.append(
            {
                "name": "exact_weights",
                "passed": True,
                "weights": {f"y={y},z={z!r}": w for (y, z), w in sorted(weights.items())},
            }
        )
    if "posterior" in checks:
        reports.append(check_posterior(world).to_dict())
    ok = all(r.get("passed", False) for r in reports)
    _write_json({"passed": ok, "checks": reports}, out / "theorems.json")
    for r in reports:
        status = "pass" if r.get("passed") else "FAIL"
        print(f"{status}: {r['name']}" + (f" [{r['loss']}]" if "loss" in r else ""))
    if not ok:
        print("error: at least one check failed; see theorems.json", file=sys.stderr)
        return 1
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textdebias",
        description="Instance-weighting toolkit for de-biasing binary text classifiers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", required=True, help="output directory (created if missing)")
        p.add_argument("--config", help="JSON file of option values; explicit flags win")
        p.add_argument("--seed", type=int, help="random seed (default 0)")

    p = sub.add_parser("weight", help="estimate P(y|z) and write per-sample weights")
    common(p)
    p.add_argument("--data", help="labeled corpus (CSV id,text,label or JSONL)")
    p.add_argument("--format", choices=["csv", "jsonl"], help="override format inference")
    p.add_argument("--lexicon", help="identity phrase list (one per line)")
    p.add_argument(
        "--length-buckets",
        dest="length_buckets",
        help="comma-separated boundaries like 10,25,60 or auto[:N] for quantiles",
    )
    p.add_argument("--folds", type=int, help="cross-fitting folds (default 5)")
    p.add_argument("--alpha", type=float, help="Laplace smoothing (default 1.0)")
    p.add_argument(
        "--prior-q1",
        dest="prior_q1",
        help="target positive rate: 'empirical' (default) or a float in (0,1)",
    )
    p.add_argument(
        "--no-normalize",
        dest="normalize",
        action="store_const",
        const=False,
        help="keep raw q/p weights instead of rescaling to mean 1",
    )
    p.add_argument("--clip", nargs=2, type=float, metavar=("LO", "HI"), help="clip raw weights")
    p.set_defaults(func=cmd_weight)

    p = sub.add_parser("train", help="train the weighted bag-of-words classifier")
    common(p)
    p.add_argument("--train", help="training split (CSV/JSONL)")
    p.add_argument("--valid", help="validation split (CSV/JSONL)")
    p.add_argument("--weights", help="weights CSV for the training split (omit for uniform)")
    p.add_argument(
        "--valid-weights", dest="valid_weights", help="weights CSV for the validation split"
    )
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--seeds", type=int, help="train N models with seeds seed..seed+N-1")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("iptts", help="generate a balanced identity template suite")
    common(p)
    p.add_argument("--templates", help="templates JSON (default: built-in 8)")
    p.add_argument("--slots", help="slot lexicon JSON (default: built-in example lists)")
    p.set_defaults(func=cmd_iptts)

    p = sub.add_parser("eval", help="score a model on a suite and report error-rate gaps")
    common(p)
    p.add_argument("--model", action="append", help="model JSON (repeat to aggregate)")
    p.add_argument("--suite", help="template suite CSV")
    p.add_argument("--test", help="held-out corpus CSV/JSONL for AUC and frequency audit")
    p.add_argument("--lexicon", help="identity lexicon for the frequency audit")
    p.add_argument("--weights", help="weights CSV for a weighted frequency audit")
    p.add_argument("--threshold", type=float, help="decision threshold (default 0.5)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="verify the weighting identities on a discrete world")
    common(p)
    p.add_argument("--world", help="world JSON (default: built-in two-group reference world)")
    p.add_argument("--checks", help="comma list: theorem1,theorem2,weights,posterior")
    p.add_argument("--n", type=int, help="Monte Carlo sample size (default 20000)")
    p.add_argument("--mc-seeds", dest="mc_seeds", type=int, help="number of sampling replicates")
    p.add_argument("--mc-tol", dest="mc_tol", type=float, help="sampling tolerance (default 0.01)")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        DataFormatError,
        TemplateError,
        AssumptionError,
        TrainingError,
        ValueError,
        RuntimeError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
