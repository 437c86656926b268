"""``faircorpus`` command line.

Exit codes: 0 success, 1 usage error, 2 data error (manifest, fetch, parse,
transform, selection input), 3 any other runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import FairCorpusError
from .fairness import deltas_from_csv
from .frame import Table, train_test_split
from .harness import (
    METHODS,
    BenchmarkPlan,
    plan_seeds,
    resolve_scenarios,
    run_benchmark,
    scenario_meta,
    write_outputs,
)
from .ingest import fetch, load_dataset, resolve_cache_dir
from .manifest import PREDICATES, annotation_to_json, enumerate_scenarios, filter_registry, load_registry
from .profile import profile_dataset
from .select import DeltaMatrix, SelectionConstraints, dataset_of, select_collection
from .transform import TransformConfig, transform_pipeline

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
log = logging.getLogger("faircorpus")

IMPUTE_MODES = {"median": "impute", "drop-rows": "drop_rows", "drop-cols": "drop_cols"}
TARGET_MODES = {"auto": "auto", "preferable": "preferable", "majority": "majority_minority"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- helpers --------------------------------------------------------------

def _registry(args):
    return load_registry(args.manifest, strict=not args.lenient)


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _scenario(registry, dataset_id: str, scenario_id: str | None):
    annotation = registry.get(dataset_id)
    if scenario_id is None:
        return annotation, enumerate_scenarios(annotation)[0]
    if "::" not in scenario_id:
        scenario_id = f"{dataset_id}::{scenario_id}"
    return annotation, registry.find_scenario(scenario_id)


def _transform_config(args) -> TransformConfig:
    return TransformConfig(
        feature_scope=args.scope,
        missing=IMPUTE_MODES[args.impute],
        target_mode=TARGET_MODES[args.target],
        sensitive_mode=args.sensitive,
        encoding=args.encode,
        max_cardinality=args.max_cardinality,
        binarized_preset=args.binarize,
    )


def _add_transform_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="scenario id or '+'-joined attributes (default: first scenario)")
    p.add_argument("--binarize", action="store_true", help="binarized preset (intersect, majority/minority, one-hot, impute)")
    p.add_argument("--scope", choices=("essential", "all"), default="essential")
    p.add_argument("--impute", choices=tuple(IMPUTE_MODES), default="median")
    p.add_argument("--target", choices=tuple(TARGET_MODES), default="auto")
    p.add_argument("--sensitive", choices=("separate", "intersect"), default="separate")
    p.add_argument("--encode", choices=("onehot", "none"), default="onehot")
    p.add_argument("--max-cardinality", type=int, default=200)


# --- subcommands ----------------------------------------------------------

def cmd_corpus(args) -> int:
    registry = _registry(args)
    if args.action == "show":
        if not args.dataset_id:
            raise UsageError("corpus show needs a dataset id")
        annotation = registry.get(args.dataset_id)
        doc = annotation_to_json(annotation)
        doc["scenarios"] = [s.scenario_id for s in enumerate_scenarios(annotation)]
        _emit(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", args.out)
        return EXIT_OK
    for name in args.filter or ():
        registry = filter_registry(registry, PREDICATES[name])
    rows = [("dataset_id", "dataset_name", "license", "license_permissive", "country", "is_accessible", "n_scenarios")]
    for a in registry:
        rows.append(
            (a.dataset_id, a.dataset_name, a.license or "", str(a.license_permissive).lower(),
             ";".join(a.countries) or "n/a", a.is_accessible, str(len(enumerate_scenarios(a))))
        )
    _emit("".join("\t".join(r) + "\n" for r in rows), args.out)
    return EXIT_OK


def cmd_fetch(args) -> int:
    registry = _registry(args)
    artifact = fetch(registry.get(args.dataset_id), args.cache_dir)
    doc = {
        "dataset_id": args.dataset_id,
        "source_url": artifact.source_url,
        "fetched_at": artifact.fetched_at,
        "from_cache": artifact.from_cache,
        "n_bytes": len(artifact.data),
        "sha256": hashlib.sha256(artifact.data).hexdigest(),
        "cache_dir": str(resolve_cache_dir(args.cache_dir)),
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_prepare(args) -> int:
    registry = _registry(args)
    table = load_dataset(registry.get(args.dataset_id), args.cache_dir)
    _emit(table.to_csv(), args.out)
    return EXIT_OK


def _transformed(args, registry) -> tuple[Table, object]:
    annotation, scenario = _scenario(registry, args.dataset_id, args.scenario)
    table = load_dataset(annotation, args.cache_dir)
    return transform_pipeline(table, annotation, scenario, _transform_config(args))


def cmd_transform(args) -> int:
    registry = _registry(args)
    table, report = _transformed(args, registry)
    _emit(table.to_csv(), args.out)
    sidecar = Path(args.report) if args.report else (Path(args.out).with_suffix(".report.json") if args.out else None)
    if sidecar is not None:
        sidecar.write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_split(args) -> int:
    registry = _registry(args)
    if args.binarize or args.scenario:
        table, _ = _transformed(args, registry)
    else:
        table = load_dataset(registry.get(args.dataset_id), args.cache_dir)
    train, test = train_test_split(table, args.test_size, args.seed)
    Path(args.out_train).write_text(train.to_csv(), encoding="utf-8")
    Path(args.out_test).write_text(test.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_profile(args) -> int:
    registry = _registry(args)
    annotation = registry.get(args.dataset_id)
    scenarios = enumerate_scenarios(annotation) if args.scenario == "all" else [_scenario(registry, args.dataset_id, args.scenario)[1]]
    pre = load_dataset(annotation, args.cache_dir)
    out = {}
    for scenario in scenarios:
        post, _ = transform_pipeline(pre, annotation, scenario, TransformConfig.binarized())
        out[scenario.scenario_id] = profile_dataset(pre, post, annotation, scenario, args.seed, args.trees).to_dict()
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    registry = _registry(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise UsageError(f"unknown methods {unknown}; available: {sorted(METHODS)}")
    if "baseline" not in methods:
        methods.insert(0, "baseline")
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    plan = BenchmarkPlan(
        scenarios=resolve_scenarios(registry, args.scenarios),
        methods=methods,
        seeds=plan_seeds(args.seeds),
        test_fraction=args.test_size,
        timeout=args.timeout if args.timeout > 0 else None,
    )
    runs, deltas = run_benchmark(plan, registry, args.cache_dir)
    paths = write_outputs(args.out_dir, runs, deltas)
    if args.figures:
        from .report import plot_delta_histogram

        plot_delta_histogram(deltas, Path(args.out_dir) / "deltas.png")
    failed = sum(r.status != "ok" for r in runs)
    log.info("%d runs (%d not ok) -> %s", len(runs), failed, paths["runs"].parent)
    return EXIT_OK


def cmd_select(args) -> int:
    if args.k is None and args.tau is None:
        raise UsageError("select needs --k and/or --tau")
    text = Path(args.deltas).read_text(encoding="utf-8")
    matrix = DeltaMatrix.from_records(deltas_from_csv(text))
    registry = _registry(args)
    meta = dict(scenario_meta(registry))
    for sid in matrix.scenario_ids:
        meta.setdefault(sid, {"dataset_id": dataset_of(sid), "countries": ()})
    predicate = None
    if args.filter:
        known = {a.dataset_id: a for a in registry}
        checks = [PREDICATES[name] for name in args.filter]

        def predicate(sid):
            # datasets missing from the manifest cannot be vetted and are left out
            a = known.get(meta[sid]["dataset_id"])
            return a is not None and all(check(a) for check in checks)

    constraints = SelectionConstraints(k=args.k, tau=args.tau, group_keys=("dataset", *args.constraint), predicate=predicate)
    collection = select_collection(matrix, meta, constraints)
    _emit(collection.to_json(), args.out)
    if args.figures and args.out and args.out != "-":
        from .report import plot_insertion_correlations

        plot_insertion_correlations(collection, Path(args.out).with_suffix(".png"))
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faircorpus", description="Fairness benchmarking over an annotated dataset corpus.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--manifest", help="manifest JSON (default: the packaged fixture corpus)")
    parser.add_argument("--cache-dir", help="download cache (default: $FAIRCORPUS_CACHE or the user cache dir)")
    parser.add_argument("--lenient", action="store_true", help="keep unknown manifest keys instead of rejecting them")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("corpus", help="list or show manifest entries")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("dataset_id", nargs="?")
    p.add_argument("--filter", action="append", choices=sorted(PREDICATES))
    p.add_argument("--out")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("fetch", help="download a dataset into the cache")
    p.add_argument("dataset_id")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("prepare", help="fetch, parse and hook-process a dataset to CSV")
    p.add_argument("dataset_id")
    p.add_argument("--out")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("transform", help="run the preparation pipeline for one scenario")
    p.add_argument("dataset_id")
    _add_transform_flags(p)
    p.add_argument("--out")
    p.add_argument("--report", help="report sidecar path (default: <out>.report.json)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("split", help="seeded train/test split")
    p.add_argument("dataset_id")
    _add_transform_flags(p)
    p.add_argument("--test-size", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=80539)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("profile", help="computed metadata per scenario")
    p.add_argument("dataset_id")
    p.add_argument("--scenario", default="all", help="scenario id, '+'-joined attributes, or 'all'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("bench", help="scenarios x methods x seeds benchmark")
    p.add_argument("--scenarios", default="all", help="'all' or comma-separated dataset/scenario ids")
    p.add_argument("--methods", default="baseline,dir,group_thresholds_eod,group_thresholds_dpd")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--test-size", type=float, default=0.3)
    p.add_argument("--timeout", type=float, default=300.0, help="per-run wall-clock limit in seconds (0 = none)")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("select", help="greedy de-correlated scenario collection")
    p.add_argument("--deltas", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--constraint", action="append", default=[], choices=("country",))
    p.add_argument("--filter", action="append", choices=sorted(PREDICATES))
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"faircorpus: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FairCorpusError, KeyError, ValueError, FileNotFoundError, csv.Error) as exc:
        print(f"faircorpus: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"faircorpus: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
