"""Command-line entry points.

Subcommands cover the pipeline stages individually (ingest, synth,
prototypes, distances, train, predict, locate, features, bench) plus `eval`,
which runs the whole experiment from a JSON config file with flag overrides.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import bench_distances, bench_rows_json
from .classifier import (
    GbdtHyperParams,
    build_feature_matrix,
    load_model,
    predict_matrix,
    sort_prototypes,
    train_classifier,
)
from .dataset import SplitSpec, load_dataset, split_dataset, synthesize_multitab, write_synthesis_manifest
from .engine import DistanceEngine
from .errors import ConfigError, TsawfError
from .experiment import ExperimentConfig, run_experiment
from .features import schema_json, summary_features, SCHEMA
from .locator import locate, write_location_csv
from .measures import parse_measures
from .prototypes import Strategy, load_prototypes, save_prototypes, select_all_prototypes
from .trace import read_trace, write_trace


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", required=True, help="dataset root directory")
    parser.add_argument("--time-scale", type=float, default=1.0,
                        help="multiply timestamps on ingestion (e.g. 1000 for seconds)")
    parser.add_argument("--time-slack", type=float, default=0.0,
                        help="tolerated timestamp decrease in ms before rejecting a file")


def _load(args):
    return load_dataset(args.dataset, time_scale=args.time_scale, time_slack=args.time_slack)


def _measures_arg(value: str):
    items = json.loads(value) if value.strip().startswith("[") else value.split(",")
    return parse_measures(items)


def cmd_ingest(args) -> int:
    dataset = _load(args)
    lengths = [len(t) for traces in dataset.monitored.values() for t in traces]
    report = {
        "root": dataset.meta.root,
        "classes": dataset.n_classes,
        "monitored_traces": dataset.meta.n_monitored,
        "unmonitored_traces": dataset.meta.n_unmonitored,
        "monitored_length_min": int(min(lengths)),
        "monitored_length_max": int(max(lengths)),
        "monitored_length_mean": float(np.mean(lengths)),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    dataset = _load(args)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed & (2**64 - 1)]))
    samples = synthesize_multitab(dataset, args.tabs, args.count_per_class, args.overlap, rng)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for s in samples:
        write_trace(s.trace, outdir / f"{s.sample_id}.trace")
    write_synthesis_manifest(samples, outdir / "manifest.jsonl", args.seed)
    print(f"wrote {len(samples)} samples to {outdir}")
    return 0


def cmd_prototypes(args) -> int:
    dataset = _load(args)
    train = dataset
    if args.train_fraction is not None:
        train, _ = split_dataset(dataset, SplitSpec(args.train_fraction, args.seed))
    protos = select_all_prototypes(
        train.monitored, Strategy(args.strategy), args.count, args.seed
    )
    save_prototypes(protos, args.out, seed=args.seed)
    print(f"wrote {len(protos)} prototypes to {args.out}")
    return 0


def _samples_from_dir(path: Path, time_scale: float, time_slack: float):
    files = sorted(Path(path).glob("*.trace"))
    if not files:
        raise ConfigError(f"no .trace files under {path}")
    manifest = Path(path) / "manifest.jsonl"
    labels = {}
    if manifest.exists():
        for line in manifest.read_text(encoding="utf-8").splitlines():
            record = json.loads(line)
            labels[record["sample_id"]] = record["class"]
    traces = []
    for f in files:
        label = labels.get(f.stem)
        trace = read_trace(f, time_scale=time_scale, time_slack=time_slack, label=label)
        traces.append(trace.relabel(label, source_id=f.stem))
    return traces


def cmd_distances(args) -> int:
    samples = _samples_from_dir(Path(args.samples), args.time_scale, args.time_slack)
    protos = sort_prototypes(load_prototypes(args.prototypes))
    engine = DistanceEngine(_measures_arg(args.measures), stride=args.stride, jobs=args.jobs)
    matrix = build_feature_matrix(
        samples, protos, engine, layout=args.feature_layout,
        jobs=args.jobs, cache_dir=args.cache_dir,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        out,
        values=matrix.values,
        labels=matrix.labels,
        sample_ids=np.array(matrix.sample_ids),
        schema_hash=np.array(matrix.schema_hash),
        columns=np.array(
            [json.dumps([c.class_id, c.cluster_rank, c.measure]) for c in matrix.columns]
        ),
    )
    print(f"wrote {matrix.values.shape[0]}x{matrix.values.shape[1]} distance rows to {out}")
    return 0


def _load_matrix(path):
    from .classifier import FeatureColumn, FeatureMatrix

    with np.load(path, allow_pickle=False) as payload:
        columns = tuple(FeatureColumn(*json.loads(c)) for c in payload["columns"].tolist())
        return FeatureMatrix(
            values=payload["values"],
            labels=payload["labels"],
            sample_ids=tuple(payload["sample_ids"].tolist()),
            columns=columns,
            schema_hash=str(payload["schema_hash"]),
        )


def cmd_train(args) -> int:
    matrix = _load_matrix(args.distances)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed & (2**64 - 1), 3]))
    gbdt = GbdtHyperParams(**json.loads(args.gbdt_params)) if args.gbdt_params else None
    model = train_classifier(
        args.classifier, matrix, rng=rng, open_world=args.open_world,
        quantile=args.quantile, gbdt_params=gbdt,
    )
    Path(args.out).write_text(model.to_json(), encoding="utf-8")
    print(f"wrote {args.classifier} model to {args.out}")
    return 0


def cmd_predict(args) -> int:
    matrix = _load_matrix(args.distances)
    model = load_model(Path(args.model).read_text(encoding="utf-8"))
    predicted = predict_matrix(model, matrix)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "true_class", "predicted_class"])
        for sid, t, p in zip(matrix.sample_ids, matrix.labels.tolist(), predicted.tolist()):
            writer.writerow([sid, t, p])
    print(f"wrote predictions for {len(predicted)} samples to {args.out}")
    return 0


def cmd_locate(args) -> int:
    samples = _samples_from_dir(Path(args.samples), args.time_scale, args.time_slack)
    protos = load_prototypes(args.prototypes)
    engine = DistanceEngine([args.measure], stride=args.stride, jobs=args.jobs)

    labels: dict[str, int] = {}
    with open(args.labels, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            labels[row["sample_id"]] = int(row["predicted_class"])

    results = []
    for trace in samples:
        if trace.source_id not in labels:
            raise ConfigError(f"label CSV has no row for sample {trace.source_id}")
        results.append(locate(trace, labels[trace.source_id], protos, engine=engine))
    write_location_csv(results, args.out)
    print(f"wrote {len(results)} locations to {args.out}")
    return 0


def cmd_features(args) -> int:
    if args.schema:
        print(schema_json())
        return 0
    if args.trace:
        trace = read_trace(args.trace, time_scale=args.time_scale, time_slack=args.time_slack)
        vector = summary_features(trace)
        print(json.dumps(
            {spec.name: float(vector[spec.index]) for spec in SCHEMA},
            indent=2, sort_keys=True,
        ))
        return 0
    raise ConfigError("features: pass --schema or --trace PATH")


def cmd_eval(args) -> int:
    overrides = {
        "dataset": args.dataset,
        "output": args.output,
        "seed": args.seed,
        "jobs": args.jobs,
    }
    if args.config:
        config = ExperimentConfig.from_file(args.config, overrides)
    else:
        missing = [k for k in ("dataset", "output") if overrides.get(k) is None]
        if missing:
            raise ConfigError(f"eval without --config requires {missing}")
        config = ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    report = run_experiment(config)
    for cell in report.cells:
        print(f"tabs={cell.tabs} overlap={cell.overlap:.2f} accuracy={cell.accuracy:.4f}")
    print(f"report written to {Path(config.output) / 'report.json'}")
    return 0


def cmd_bench(args) -> int:
    sizes = [(int(n), int(m)) for n, m in
             (pair.split(":") for pair in args.sizes.split(","))]
    rows = bench_distances(_measures_arg(args.measures), sizes, repeats=args.repeats, seed=args.seed)
    payload = bench_rows_json(rows)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    print(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsawf",
        description="Website fingerprinting via time-series similarity search",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a dataset and print a summary report")
    _add_dataset_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="synthesize multi-tab samples")
    _add_dataset_args(p)
    p.add_argument("--tabs", type=int, required=True)
    p.add_argument("--count-per-class", type=int, required=True)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prototypes", help="select and save per-class prototypes")
    _add_dataset_args(p)
    p.add_argument("--strategy", default="feature_cluster",
                   choices=[s.value for s in Strategy])
    p.add_argument("--count", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=None,
                   help="split first and select from the training side only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prototypes)

    p = sub.add_parser("distances", help="distance feature matrix for a sample directory")
    p.add_argument("--samples", required=True, help="directory of .trace files")
    p.add_argument("--prototypes", required=True, help="prototype bundle directory")
    p.add_argument("--measures", default="matrix_profile",
                   help="comma list or JSON array of measure configs")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--feature-layout", default="full", choices=["full", "class_min"])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--time-scale", type=float, default=1.0)
    p.add_argument("--time-slack", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output .npz path")
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("train", help="train a classifier on a distance matrix")
    p.add_argument("--distances", required=True, help=".npz from the distances subcommand")
    p.add_argument("--classifier", default="gbdt",
                   choices=["threshold", "gbdt", "decision_tree", "random_forest"])
    p.add_argument("--open-world", action="store_true")
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--gbdt-params", default=None, help="JSON hyperparameter overrides")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels for a distance matrix")
    p.add_argument("--distances", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("locate", help="locate the labeled website inside each sample")
    p.add_argument("--samples", required=True, help="directory of .trace files")
    p.add_argument("--prototypes", required=True)
    p.add_argument("--labels", required=True,
                   help="CSV with sample_id,predicted_class (from predict or an external attack)")
    p.add_argument("--measure", default="euclidean")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--time-scale", type=float, default=1.0)
    p.add_argument("--time-slack", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("features", help="feature schema or a trace's feature vector")
    p.add_argument("--schema", action="store_true")
    p.add_argument("--trace", default=None)
    p.add_argument("--time-scale", type=float, default=1.0)
    p.add_argument("--time-slack", type=float, default=0.0)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("eval", help="run a full experiment from a config file")
    p.add_argument("--config", default=None, help="JSON experiment config")
    p.add_argument("--dataset", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time the distance measures")
    p.add_argument("--measures", default="matrix_profile,euclidean")
    p.add_argument("--sizes", default="30000:3000",
                   help="comma list of n:m pairs, e.g. 30000:3000,8192:256")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TsawfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except AssertionError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
