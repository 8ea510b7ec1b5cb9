"""Command-line interface.

Subcommands: ``simulate`` (emit a synthetic CSV), ``train`` (fit a forest
and write a model file), ``select`` (run feature selection, write the
selected indices and the per-feature weights), ``predict`` (model file +
CSV -> predictions), ``evaluate`` (replicated benchmark with reports).

Every run prints its fully resolved configuration, including derived
stage seeds, so any result line can be reproduced from the log alone.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .core import compute_lambda, normalize_importance
from .data import (
    CsvSchema,
    SyntheticSpec,
    load_csv,
    load_feature_matrix,
    simulate_dataset,
    write_csv,
)
from .errors import CsvParseError, FeatureCountMismatchError, GuidedForestError
from .evaluate import (
    METHODS,
    EvalSettings,
    SplitPlan,
    render_report_text,
    run_benchmark,
    write_report_csv,
)
from .forest import (
    ForestConfig,
    build_forest,
    feature_set,
    importance,
    load_forest,
    oob_error,
    predict,
    resolve_gamma,
    resolve_mtry,
    save_forest,
)
from .pipeline import (
    grf_fit,
    grrf_fit,
    read_weights_file,
    select_with_custom_weights,
)
from .rng import STREAM_FINAL, STREAM_GUIDE, STREAM_SELECTOR, derive_seed


def _print_config(section: str, **kv) -> None:
    parts = " ".join(f"{k}={v}" for k, v in kv.items() if v is not None)
    print(f"config [{section}] {parts}")


def _parse_label_col(text: str | None) -> str | int | None:
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        return text


def _schema(args) -> CsvSchema:
    return CsvSchema(label_column=_parse_label_col(args.label_col), delimiter=args.delimiter)


def _add_io_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="input", required=True, help="input CSV path")
    p.add_argument("--label-col", default=None, help="label column name or index (default: last)")
    p.add_argument("--delimiter", default=",", help="CSV delimiter (default: ,)")


def _add_forest_flags(p: argparse.ArgumentParser, trees_default: int = 1000) -> None:
    p.add_argument("--trees", type=int, default=trees_default, help="trees per forest")
    p.add_argument("--gamma", type=float, default=None, help="guidance strength in [0, 1]")
    p.add_argument("--mtry", type=int, default=None, help="features sampled per node")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--min-leaf", type=int, default=1, help="minimum rows per leaf")
    p.add_argument("--max-depth", type=int, default=None, help="maximum tree depth")


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    return max(1, min(os.cpu_count() or 1, args.trees))


def _cmd_simulate(args) -> int:
    spec = SyntheticSpec(
        n_rows=args.rows,
        n_features=args.features,
        relevant_features=tuple(args.relevant),
        value_range=(args.low, args.high),
        seed=args.seed,
    )
    _print_config(
        "simulate",
        rows=spec.n_rows,
        features=spec.n_features,
        relevant=f"{spec.relevant_features[0]},{spec.relevant_features[1]}",
        range=f"[{args.low},{args.high}]",
        seed=spec.seed,
        out=args.out,
    )
    data = simulate_dataset(spec)
    write_csv(data, args.out)
    print(f"wrote {data.n_rows} rows x {data.n_features} features to {args.out}")
    return 0


def _cmd_train(args) -> int:
    data = load_csv(args.input, _schema(args))
    config = ForestConfig(
        n_trees=args.trees,
        mode=args.mode,
        gamma=args.gamma,
        mtry=args.mtry,
        master_seed=args.seed,
        min_leaf_size=args.min_leaf,
        max_depth=args.max_depth,
        rrf_penalty=args.rrf_penalty,
    )
    workers = _workers(args)
    gamma = resolve_gamma(config)
    _print_config(
        "train",
        input=args.input,
        rows=data.n_rows,
        features=data.n_features,
        classes=data.n_classes,
        mode=config.mode,
        trees=config.n_trees,
        gamma=gamma,
        mtry=resolve_mtry(config, data.n_features),
        master_seed=config.master_seed,
        workers=workers,
        weights=args.weights,
    )

    if args.mode in ("rf", "rrf"):
        forest = build_forest(data, config, n_workers=workers)
    elif args.weights is not None:
        weights = read_weights_file(args.weights, data.n_features)
        forest = build_forest(data, config, weights=weights, n_workers=workers)
    else:
        # derive weights from a guide forest, as the selection pipeline does
        guide_seed = derive_seed(config.master_seed, STREAM_GUIDE)
        _print_config("train.guide", mode="rf", master_seed=guide_seed, trees=config.n_trees)
        guide = build_forest(data, replace(config, mode="rf", gamma=None, master_seed=guide_seed),
                             n_workers=workers)
        weights = compute_lambda(normalize_importance(importance(guide)), gamma)
        forest = build_forest(data, config, weights=weights, n_workers=workers)

    save_forest(forest, args.out)
    used = feature_set(forest)
    print(f"trained {forest.config.mode} with {forest.n_trees} trees; "
          f"{len(used)} features used; model written to {args.out}")
    oob = oob_error(forest, data)
    print(f"oob error (diagnostic, not part of any selection protocol): {oob:.4f}")
    return 0


def _cmd_select(args) -> int:
    data = load_csv(args.input, _schema(args))
    config = ForestConfig(
        n_trees=args.trees,
        mtry=args.mtry,
        master_seed=args.seed,
        min_leaf_size=args.min_leaf,
        max_depth=args.max_depth,
    )
    workers = _workers(args)
    out_prefix = args.out if args.out is not None else str(Path(args.input).with_suffix(""))
    gamma = args.gamma if args.gamma is not None else (0.1 if args.mode == "grrf" else 1.0)
    _print_config(
        "select",
        input=args.input,
        rows=data.n_rows,
        features=data.n_features,
        classes=data.n_classes,
        mode=("custom-weights" if args.weights else args.mode),
        trees=config.n_trees,
        gamma=gamma,
        mtry=resolve_mtry(config, data.n_features),
        master_seed=config.master_seed,
        guide_seed=derive_seed(config.master_seed, STREAM_GUIDE),
        selector_seed=derive_seed(config.master_seed, STREAM_SELECTOR),
        workers=workers,
    )

    if args.weights is not None:
        weights = read_weights_file(args.weights, data.n_features)
        result = select_with_custom_weights(data, weights, config, n_workers=workers)
    elif args.mode == "grrf":
        result, _ = grrf_fit(data, gamma, config, n_workers=workers)
    else:
        result, _ = grf_fit(data, gamma, config, n_workers=workers)

    features_path = Path(f"{out_prefix}.features.txt")
    weights_path = Path(f"{out_prefix}.weights.txt")
    features_path.write_text(
        "".join(f"{i}\n" for i in result.selected_features), encoding="utf-8"
    )
    weights_path.write_text(
        "".join(f"{w!r}\n" for w in result.weights.values), encoding="utf-8"
    )
    print(f"selected {len(result.selected_features)} of {data.n_features} features")
    print(f"wrote feature indices to {features_path} and weights to {weights_path}")
    return 0


def _cmd_predict(args) -> int:
    forest = load_forest(args.model)
    _print_config(
        "predict",
        model=args.model,
        mode=forest.config.mode,
        trees=forest.n_trees,
        seed=forest.config.master_seed,
        input=args.input,
    )
    schema = _schema(args)
    rows = None
    actual = None
    try:
        # a file whose every column is numeric and matches the model width
        # carries no label column
        matrix, _ = load_feature_matrix(args.input, schema)
        if matrix.shape[1] == forest.n_features:
            rows = matrix
    except CsvParseError:
        pass
    if rows is None:
        data = load_csv(args.input, schema)
        if data.n_features != forest.n_features:
            raise FeatureCountMismatchError(
                f"{args.input} has {data.n_features} feature columns, "
                f"model expects {forest.n_features}"
            )
        rows = data.values
        actual = data.decoded_labels()

    preds = predict(forest, rows)
    if forest.label_names is not None:
        rendered = [forest.label_names[int(p)] for p in preds]
    else:
        rendered = [str(int(p)) for p in preds]
    if args.out is not None:
        Path(args.out).write_text("".join(f"{p}\n" for p in rendered), encoding="utf-8")
        print(f"wrote {len(rendered)} predictions to {args.out}")
    else:
        for p in rendered:
            print(p)
    if actual is not None:
        wrong = sum(1 for p, a in zip(rendered, actual) if p != a)
        print(f"misclassified {wrong} of {len(actual)} labeled rows")
    return 0


def _cmd_evaluate(args) -> int:
    datasets = []
    for path in args.input or []:
        datasets.append((Path(path).stem, load_csv(path, _schema(args))))
    if args.synthetic:
        spec = SyntheticSpec(seed=args.synthetic_seed)
        datasets.append(("synthetic", simulate_dataset(spec)))
    if not datasets:
        print("error: no datasets; pass --in and/or --synthetic", file=sys.stderr)
        return 1

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    plan = SplitPlan(
        replicate_count=args.replicates,
        train_fraction=args.train_fraction,
        stratified=not args.no_stratify,
        base_seed=args.seed,
    )
    settings = EvalSettings(
        n_trees=args.trees,
        gamma=args.gamma if args.gamma is not None else 1.0,
        grrf_gamma=args.grrf_gamma,
        mtry=args.mtry,
        min_leaf_size=args.min_leaf,
        max_depth=args.max_depth,
    )
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    _print_config(
        "evaluate",
        datasets=",".join(name for name, _ in datasets),
        methods=",".join(methods),
        baseline=args.baseline,
        replicates=plan.replicate_count,
        train_fraction=f"{plan.train_fraction:.6g}",
        stratified=plan.stratified,
        base_seed=plan.base_seed,
        trees=settings.n_trees,
        gamma=settings.gamma,
        grrf_gamma=settings.grrf_gamma,
        workers=workers,
    )

    report = run_benchmark(datasets, methods, plan, args.baseline, settings, n_workers=workers)
    text = render_report_text(report)
    print(text)
    if args.out is not None:
        Path(f"{args.out}.txt").write_text(text, encoding="utf-8")
        write_report_csv(report, f"{args.out}.csv")
        print(f"wrote {args.out}.txt and {args.out}.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guidedforest",
        description="Decision forests with importance-guided feature selection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic classification CSV")
    p.add_argument("--rows", type=int, default=500)
    p.add_argument("--features", type=int, default=500)
    p.add_argument("--relevant", type=int, nargs=2, default=(0, 20), metavar=("I", "J"))
    p.add_argument("--low", type=float, default=-1.0)
    p.add_argument("--high", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="fit a forest and write a model file")
    _add_io_flags(p)
    _add_forest_flags(p)
    p.add_argument("--mode", choices=["rf", "grf", "rrf", "grrf"], default="rf")
    p.add_argument("--weights", default=None, help="per-feature weight file for guided modes")
    p.add_argument("--rrf-penalty", type=float, default=0.8,
                   help="constant penalty for unused features in rrf mode")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("select", help="run feature selection")
    _add_io_flags(p)
    _add_forest_flags(p)
    p.add_argument("--mode", choices=["grf", "grrf"], default="grf")
    p.add_argument("--weights", default=None,
                   help="skip the guide forest and use this per-feature weight file")
    p.add_argument("--out", default=None, help="output prefix (default: input stem)")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("predict", help="predict labels for a CSV with a trained model")
    _add_io_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="replicated benchmark with significance report")
    p.add_argument("--in", dest="input", action="append", help="dataset CSV (repeatable)")
    p.add_argument("--label-col", default=None)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--synthetic", action="store_true", help="include the synthetic dataset")
    p.add_argument("--synthetic-seed", type=int, default=0)
    p.add_argument("--methods", default="rf,grf,grf-rf,grrf,grrf-rf",
                   help=f"comma list from: {', '.join(METHODS)}")
    p.add_argument("--baseline", default="grf-rf")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--train-fraction", type=float, default=2.0 / 3.0)
    p.add_argument("--no-stratify", action="store_true")
    _add_forest_flags(p)
    p.add_argument("--grrf-gamma", type=float, default=0.1)
    p.add_argument("--out", default=None, help="report path prefix")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except GuidedForestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
