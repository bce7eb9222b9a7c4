"""Command-line entry point.

Subcommands: validate, stats, agreement, aggregate, simulate, experiment.
Every run writes a manifest with its fully resolved configuration under
--out, and all randomness flows from --seed through named derived streams
(see seeds.derive_seed), so a run is reproducible from its manifest alone.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import agreement as agreement_mod
from . import corpus as corpus_mod
from . import evaluation, probe, simulator
from .aggregate import AggregationError, aggregate, aggregate_to_csv
from .corpus import CANONICAL_DIMENSIONS, Dimension
from .seeds import derive_seed

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


def _load_corpus_file(path: str) -> corpus_mod.Corpus:
    with open(path, "r", encoding="utf-8") as handle:
        return corpus_mod.load_corpus(handle)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _write_json(path: Path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _load_json_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        obj = json.load(handle)
    if not isinstance(obj, dict):
        raise ValueError("--config file must hold a JSON object")
    return obj


def _merged(file_config: dict, args: argparse.Namespace, keys: dict[str, str]) -> dict:
    """Resolve parameters: defaults < config file < explicit flags."""
    resolved = {}
    for flag_attr, config_key in keys.items():
        flag_value = getattr(args, flag_attr)
        if flag_value is not None:
            resolved[config_key] = flag_value
        elif config_key in file_config:
            resolved[config_key] = file_config[config_key]
    return resolved


def _parse_dimensions(selector: str) -> list[Dimension]:
    if selector == "all":
        return list(CANONICAL_DIMENSIONS)
    dims = []
    for code in selector.split(","):
        dims.append(Dimension.from_code(code.strip()))
    return dims


def cmd_validate(args: argparse.Namespace) -> int:
    # file-level problems (bad JSON, broken references, domain violations)
    # still produce a report: the report is the command's contract
    try:
        corpus = _load_corpus_file(args.corpus)
    except corpus_mod.CorpusFormatError as exc:
        issues = [
            corpus_mod.ValidationIssue(
                severity="error", code="format", message=str(exc), entity_id=""
            )
        ]
    else:
        issues = corpus_mod.validate(corpus)
    out = Path(args.out)
    _write_json(
        out / "validation_report.json",
        [dataclasses.asdict(issue) for issue in issues],
    )
    warnings = sum(1 for i in issues if i.severity == "warning")
    errors = sum(1 for i in issues if i.severity == "error")
    if warnings:
        print(f"{warnings} warning(s)", file=sys.stderr)
    if errors:
        print(f"{errors} error(s); see {out / 'validation_report.json'}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = _load_corpus_file(args.corpus)
    stats = corpus_mod.descriptive_stats(corpus)
    out = Path(args.out)
    _write_text(out / "stats.csv", corpus_mod.stats_to_csv(stats))
    _write_json(out / "manifest.json", {"command": "stats", "corpus": args.corpus})
    return EXIT_OK


def cmd_agreement(args: argparse.Namespace) -> int:
    corpus = _load_corpus_file(args.corpus)
    metric = agreement_mod.DistanceMetric(args.metric)
    report = agreement_mod.agreement_report(corpus, metric)
    out = Path(args.out)
    _write_text(out / "agreement.csv", agreement_mod.report_to_csv(report))
    _write_json(
        out / "manifest.json",
        {"command": "agreement", "corpus": args.corpus, "metric": metric.value},
    )
    return EXIT_OK


def cmd_aggregate(args: argparse.Namespace) -> int:
    corpus = _load_corpus_file(args.corpus)
    dims = _parse_dimensions(args.dimension)
    labels = {d: aggregate(corpus, d) for d in dims}
    out = Path(args.out)
    _write_text(out / "aggregate.csv", aggregate_to_csv(labels))
    _write_json(
        out / "manifest.json",
        {
            "command": "aggregate",
            "corpus": args.corpus,
            "dimensions": [d.code for d in dims],
        },
    )
    return EXIT_OK


def _simulator_config(args: argparse.Namespace) -> simulator.SimulatorConfig:
    file_config = _load_json_config(args.config)
    if args.preset == "realistic":
        config = simulator.realistic_config()
    else:
        config = simulator.SimulatorConfig()
    scalars = _merged(
        file_config,
        args,
        {
            "n_projects": "n_projects",
            "verbatims_per_project": "verbatims_per_project",
            "n_annotators": "n_annotators",
            "noise_sigma": "noise_sigma",
            "sign_flip_prob": "sign_flip_prob",
        },
    )
    # file may also override nested fields by name
    for key in ("marker_levels", "filler_tokens", "filler_vocab"):
        if key in file_config:
            scalars[key] = file_config[key]
    if "annotator_thresholds" in file_config:
        scalars["annotator_thresholds"] = tuple(file_config["annotator_thresholds"])
    if "dimensions" in file_config:
        behaviors = {}
        for code, fields in file_config["dimensions"].items():
            behaviors[Dimension.from_code(code)] = simulator.DimensionBehavior(**fields)
        scalars["dimensions"] = behaviors
    if args.seed is not None:
        scalars["seed"] = args.seed
    elif "seed" in file_config:
        scalars["seed"] = file_config["seed"]
    return dataclasses.replace(config, **scalars)


def _simulator_config_payload(config: simulator.SimulatorConfig) -> dict:
    return {
        "n_projects": config.n_projects,
        "verbatims_per_project": config.verbatims_per_project,
        "n_annotators": config.n_annotators,
        "dimensions": {
            d.code: dataclasses.asdict(config.dimensions[d]) for d in CANONICAL_DIMENSIONS
        },
        "annotator_thresholds": list(config.thresholds()),
        "noise_sigma": config.noise_sigma,
        "sign_flip_prob": config.sign_flip_prob,
        "marker_levels": config.marker_levels,
        "filler_tokens": config.filler_tokens,
        "filler_vocab": config.filler_vocab,
        "seed": config.seed,
    }


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _simulator_config(args)
    corpus, ground_truth = simulator.generate(config)
    out = Path(args.out)
    _write_text(out / "corpus.jsonl", corpus_mod.save_corpus(corpus))
    _write_text(out / "ground_truth.jsonl", simulator.ground_truth_to_jsonl(ground_truth))
    _write_json(
        out / "manifest.json",
        {
            "command": "simulate",
            "preset": args.preset,
            "config": _simulator_config_payload(config),
            "n_verbatims": len(corpus.verbatims),
            "n_records": len(corpus.records),
        },
    )
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    file_config = _load_json_config(args.config)
    master_seed = args.seed if args.seed is not None else int(file_config.get("seed", 0))
    corpus = _load_corpus_file(args.corpus)

    train_kwargs = _merged(
        file_config,
        args,
        {
            "learning_rate": "learning_rate",
            "epochs": "epochs",
            "l2_lambda": "l2_lambda",
            "batch_size": "batch_size",
            "early_stop_tol": "early_stop_tol",
        },
    )
    featurizer_kwargs = _merged(
        file_config,
        args,
        {"ngram_min": "ngram_min", "ngram_max": "ngram_max", "buckets": "buckets"},
    )
    fold_count = args.folds if args.folds is not None else int(file_config.get("folds", 5))
    dims = _parse_dimensions(args.dimension)

    if args.features == "embeddings":
        if not args.embeddings:
            print("--embeddings FILE is required with --features embeddings", file=sys.stderr)
            return EXIT_USAGE
        with open(args.embeddings, "r", encoding="utf-8") as handle:
            table = probe.load_embeddings(handle)
        features = table.vectors
        feature_config: dict = {"source": "embeddings", "path": args.embeddings, "d": table.d}
        feature_hash = None
    else:
        featurizer = probe.FeaturizerConfig(**featurizer_kwargs)
        features = probe.featurize_corpus(corpus, featurizer)
        feature_config = {"source": "hash", **dataclasses.asdict(featurizer)}
        feature_hash = f"{probe.HASH_NAME}/v{probe.FEATURIZER_VERSION}"

    fold_plan = evaluation.make_folds(
        corpus.projects, fold_count, derive_seed(master_seed, "folds")
    )

    # compute everything before writing anything, so failures leave no
    # partial output directory behind
    results: dict[Dimension, evaluation.CrossValidationResult] = {}
    grids: dict[Dimension, evaluation.ConfusionGrid] = {}
    reports: dict[Dimension, evaluation.ThresholdReport] = {}
    for dimension in dims:
        train_config = probe.TrainConfig(
            seed=derive_seed(master_seed, "train", dimension.code), **train_kwargs
        )
        result = evaluation.cross_validate(corpus, features, dimension, train_config, fold_plan)
        results[dimension] = result
        ms = {outcome.true_label.m for outcome in result.predictions.values()}
        if len(ms) != 1:
            raise evaluation.EvaluationError(
                f"dimension {dimension.code}: annotator counts {sorted(ms)} are not uniform; "
                "confusion grids need a single m"
            )
        grids[dimension] = evaluation.confusion_grid(result.predictions, ms.pop())
        reports[dimension] = evaluation.threshold_report(result.predictions)

    out = Path(args.out)
    for dimension in dims:
        _write_text(out / f"confusion_{dimension.code}.csv", evaluation.grid_to_csv(grids[dimension]))
        _write_json(
            out / f"confusion_{dimension.code}.json",
            evaluation.grid_to_json_payload(grids[dimension]),
        )
    _write_text(out / "threshold_report.csv", evaluation.threshold_reports_to_csv(reports))
    manifest = {
        "command": "experiment",
        "corpus": args.corpus,
        "seed": master_seed,
        "features": feature_config,
        "feature_hash": feature_hash,
        "train": dataclasses.asdict(
            probe.TrainConfig(seed=0, **train_kwargs)
        )
        | {"seed": "derived per dimension/fold from the master seed"},
        "folds": {
            "count": fold_count,
            "seed": derive_seed(master_seed, "folds"),
            "plan": fold_plan.folds,
        },
        "dimensions": {
            d.code: {
                "skipped": results[d].skipped,
                "n_predicted": len(results[d].predictions),
                "folds": [
                    {
                        "fold_index": fp.fold_index,
                        "train_projects": fp.train_projects,
                        "test_projects": fp.test_projects,
                        "n_train": fp.n_train,
                        "n_test": fp.n_test,
                        "leakage": sorted(set(fp.train_projects) & set(fp.test_projects)),
                    }
                    for fp in results[d].folds
                ],
            }
            for d in dims
        },
    }
    _write_json(out / "manifest.json", manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annotgrad",
        description="Multi-annotator appraisal corpus analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, corpus_required=True):
        if corpus_required:
            p.add_argument("--corpus", required=True, help="corpus JSONL file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--config", default=None, help="JSON config file (flags override)")

    p = sub.add_parser("validate", help="check corpus invariants")
    add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="descriptive annotation statistics")
    add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("agreement", help="alpha per dimension and modality")
    add_common(p)
    p.add_argument("--metric", choices=["nominal", "interval"], default="nominal")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("aggregate", help="per-verbatim soft labels")
    add_common(p)
    p.add_argument("--dimension", default="all", help="F,P,U,L or all")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("simulate", help="generate a synthetic corpus + ground truth")
    add_common(p, corpus_required=False)
    p.add_argument("--preset", choices=["default", "realistic"], default="default")
    p.add_argument("--n-projects", dest="n_projects", type=int, default=None)
    p.add_argument(
        "--verbatims-per-project", dest="verbatims_per_project", type=int, default=None
    )
    p.add_argument("--n-annotators", dest="n_annotators", type=int, default=None)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=None)
    p.add_argument("--sign-flip-prob", dest="sign_flip_prob", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="grouped cross-validation of the probe")
    add_common(p)
    p.add_argument("--features", choices=["hash", "embeddings"], default="hash")
    p.add_argument("--embeddings", default=None, help="embedding JSONL file")
    p.add_argument("--dimension", default="all", help="F,P,U,L or all")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--l2-lambda", dest="l2_lambda", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--early-stop-tol", dest="early_stop_tol", type=float, default=None)
    p.add_argument("--ngram-min", dest="ngram_min", type=int, default=None)
    p.add_argument("--ngram-max", dest="ngram_max", type=int, default=None)
    p.add_argument("--buckets", type=int, default=None)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        corpus_mod.CorpusError,
        AggregationError,
        agreement_mod.InsufficientDataError,
        probe.ProbeError,
        evaluation.EvaluationError,
        simulator.SimulatorError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
