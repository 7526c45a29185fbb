"""Command-line entry point: generate, fit, predict, benchmark, export.

Exit codes: 0 success, 2 usage error, 3 data or input error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .benchmark import (
    BenchmarkConfig,
    aggregate,
    format_table,
    param_legend,
    rows_to_csv,
    run_benchmark,
    summary_to_csv,
)
from .core import (
    CubtError,
    Dataset,
    DimensionError,
    Params,
    StageError,
    apply_scaling,
    column_scaling,
)
from .datagen import MODELS, BadSigma, ModelSpec, UnknownModel, generate, load_european_jobs
from .evaluation import mce
from .io import dump_json, export_dot, load_tree, read_dataset_csv, save_tree, write_dataset_csv
from .pipeline import fit_cubt

log = logging.getLogger("cubt")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

PARAM_FIELDS = ("minsize", "mindev", "mindist", "delta", "k", "eta_quantile", "seed", "standardize")


class UsageError(Exception):
    pass


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    # Defaults stay None so a --config file can fill them in; Params supplies the rest.
    p.add_argument("--minsize", type=int, help="minimum node size to attempt a split (default 1)")
    p.add_argument("--mindev", type=float, help="split stops below mindev * root deviance (default 0.8)")
    p.add_argument("--mindist", type=float, help="prune siblings with dissimilarity <= mindist (default 0)")
    p.add_argument("--delta", type=float, help="trimming fraction of the leaf dissimilarity (default 0.2)")
    p.add_argument("--k", type=int, help="number of clusters, when known")
    p.add_argument("--eta-quantile", dest="eta_quantile", type=float, help="quantile fixing eta when k is unknown")
    p.add_argument("--seed", type=int, help="seed recorded with the run (default 0)")
    p.add_argument("--standardize", action="store_true", default=None, help="scale columns to unit variance first")
    p.add_argument("--min-child-size", dest="min_child_size", action="store_true", default=None,
                   help="also require both children to hold at least minsize points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubt", description="Clustering with unsupervised binary trees.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a labelled simulation sample as CSV")
    g.add_argument("--model", required=True, choices=MODELS)
    g.add_argument("--sigma", type=float)
    g.add_argument("--count", type=int, help="observations per group")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output CSV path")

    f = sub.add_parser("fit", help="grow, prune and join a clustering tree")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("data", nargs="?", help="dataset CSV (optional header, optional final 'label' column)")
    src.add_argument("--european-jobs", dest="european_jobs", nargs="?", const="", metavar="PATH",
                     help="use the bundled employment table, or the copy at PATH")
    _add_param_flags(f)
    f.add_argument("--config", help="JSON file with parameter values; explicit flags win")
    f.add_argument("--out-dir", required=True)

    pr = sub.add_parser("predict", help="route new observations through a fitted tree")
    pr.add_argument("tree", help="tree.json written by fit")
    pr.add_argument("data", help="dataset CSV")
    pr.add_argument("--out", required=True, help="labels CSV path")

    b = sub.add_parser("benchmark", help="replicated simulation study")
    b.add_argument("--config", help="BenchmarkConfig JSON; other flags override it")
    b.add_argument("--case", action="append", metavar="MODEL[:SIGMA]", help="e.g. M1:0.11 or M3 (repeatable)")
    b.add_argument("--replicates", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--workers", type=int)
    b.add_argument("--out-dir", required=True)

    e = sub.add_parser("export", help="render a tree or summarize benchmark rows")
    e.add_argument("source", help="tree.json, or runs.csv with --format table")
    e.add_argument("--format", choices=("dot", "json", "table"), default="dot")
    e.add_argument("--out", help="output path (default stdout)")
    return parser


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def resolve_params(args) -> Params:
    """Merge ``--config`` values with explicit flags into a validated Params."""
    values = {}
    if getattr(args, "config", None):
        payload = _load_json(args.config)
        payload = payload.get("params", payload)
        unknown = set(payload) - set(PARAM_FIELDS) - {"min_child_size"}
        if unknown:
            raise UsageError(f"unknown parameter(s) in config: {sorted(unknown)}")
        values.update(payload)
    for name in PARAM_FIELDS + ("min_child_size",):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if values.get("k") is not None and values.get("eta_quantile") is not None:
        raise UsageError("--k and --eta-quantile are mutually exclusive")
    if values.get("k") is None and values.get("eta_quantile") is None:
        raise UsageError("one of --k or --eta-quantile is required")
    try:
        return Params(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _load_fit_data(args) -> Dataset:
    if args.european_jobs is not None:
        return load_european_jobs(args.european_jobs or None)
    return read_dataset_csv(args.data)


def cmd_generate(args) -> int:
    try:
        data = generate(ModelSpec(args.model, args.sigma, args.count, args.seed))
    except (UnknownModel, BadSigma, ValueError) as exc:
        raise UsageError(str(exc)) from None
    write_dataset_csv(data, args.out)
    print(f"wrote {data.n} rows x {data.p} columns to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    params = resolve_params(args)
    data = _load_fit_data(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = fit_cubt(data, params)
    for msg in result.warnings:
        log.warning(msg)

    summary = {"params": params.to_dict(), **result.to_dict()}
    if data.row_names is not None:
        summary["row_clusters"] = {
            name: int(c) for name, c in zip(data.row_names, result.assignments)
        }
    error = None
    if data.labels is not None:
        error = mce(data.labels, result.assignments)
        summary["mce"] = error
    extra = {"feature_names": list(data.column_names) if data.column_names else None}
    if params.standardize:
        mean, std = column_scaling(data)
        extra["scaling"] = {"mean": mean.tolist(), "std": std.tolist()}

    dump_json(summary, out / "result.json")
    # Subtrees inside one cluster are collapsed; routing is unchanged.
    tree = result.tree.simplified()
    save_tree(tree, out / "tree.json", extra=extra)
    (out / "tree.dot").write_text(export_dot(tree, data.column_names), encoding="utf-8")
    dump_json({"command": "fit", "params": params.to_dict()}, out / "config.json")

    print(f"k_found: {result.k_found}")
    if error is not None:
        print(f"mce: {error:.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    tree, payload = load_tree(args.tree)
    if tree.stage != "joined":
        raise StageError(f"predict needs a joined tree, got stage {tree.stage!r}")
    data = read_dataset_csv(args.data)
    if data.p != tree.n_features:
        raise DimensionError(f"tree was fit on {tree.n_features} features, data has {data.p}")
    x = data.values
    scaling = payload.get("scaling")
    if scaling:
        x = apply_scaling(x, scaling["mean"], scaling["std"])
    labels = tree.predict(x)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("cluster\n")
        fh.writelines(f"{int(c)}\n" for c in labels)
    print(f"wrote {labels.size} labels to {args.out}")
    if data.labels is not None:
        print(f"mce: {mce(data.labels, labels):.6g}")
    return EXIT_OK


def _parse_case(text: str):
    model, _, sigma = text.partition(":")
    if model not in MODELS:
        raise UsageError(f"unknown model {model!r}; expected one of {MODELS}")
    return (model, float(sigma) if sigma else None)


def resolve_benchmark_config(args) -> BenchmarkConfig:
    config = BenchmarkConfig.from_dict(_load_json(args.config)) if args.config else BenchmarkConfig()
    if args.case:
        config.cases = [_parse_case(c) for c in args.case]
    for name in ("replicates", "seed", "workers"):
        value = getattr(args, name)
        if value is not None:
            setattr(config, name, value)
    if config.replicates < 1 or config.workers < 1:
        raise UsageError("replicates and workers must be positive")
    return config


def cmd_benchmark(args) -> int:
    config = resolve_benchmark_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_benchmark(config)
    summary = aggregate(rows)
    (out / "runs.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    (out / "summary.csv").write_text(summary_to_csv(summary), encoding="utf-8")
    dump_json(param_legend(config), out / "params.json")
    # workers only affects scheduling, so it is left out of the persisted config
    dump_json(dict(config.to_dict(), workers=1), out / "config.json")
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(format_table(summary))
    if failed:
        print(f"{failed} run(s) failed; see the status column of runs.csv", file=sys.stderr)
    return EXIT_OK


def cmd_export(args) -> int:
    if args.format == "table":
        with open(args.source, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        text = format_table(aggregate(rows)) + "\n"
    else:
        tree, payload = load_tree(args.source)
        if args.format == "dot":
            text = export_dot(tree, payload.get("feature_names"))
        else:
            text = json.dumps(tree.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "benchmark": cmd_benchmark,
    "export": cmd_export,
}


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=os.environ.get("CUBT_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cubt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CubtError, OSError, ValueError) as exc:
        # CubtError covers DataError, KTooLarge, StageError and friends
        print(f"cubt {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
