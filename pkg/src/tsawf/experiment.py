"""End-to-end experiment runs: split, prototypes, distances, train, predict,
locate, report.

A run is fully determined by its config and seeds: rerunning with the same
config reproduces the prediction CSVs and the report byte for byte (wall
clock timings live in a separate file). Intermediate artifacts (prototype
bundle, distance caches, models, per-sample CSVs) are persisted under the
output directory, so an interrupted run resumes from what it already has.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from .classifier import (
    FeatureMatrix,
    GbdtHyperParams,
    build_feature_matrix,
    load_model,
    predict_matrix,
    sort_prototypes,
    train_classifier,
)
from .dataset import (
    Dataset,
    MultiTabSample,
    SplitSpec,
    load_dataset,
    split_dataset,
    synthesize_multitab,
)
from .engine import DistanceEngine, hash_prototypes, hash_traces
from .errors import ConfigError
from .locator import DEFAULT_N_GRID, locate_sample, location_curve, write_location_csv
from .measures import parse_measures
from .prototypes import Strategy, load_prototypes, save_prototypes, select_all_prototypes
from .trace import Trace


@dataclass
class ExperimentConfig:
    dataset: str
    output: str
    seed: int = 0
    train_fraction: float = 0.9
    time_scale: float = 1.0
    time_slack: float = 0.0
    prototype_strategy: str = "feature_cluster"
    prototype_count: int = 2
    measures: list = field(default_factory=lambda: ["matrix_profile"])
    stride: int = 1
    classifier: str = "gbdt"
    open_world: bool = False
    threshold_quantile: float = 0.95
    feature_layout: str = "full"
    gbdt: dict = field(default_factory=dict)
    tab_counts: list = field(default_factory=lambda: [1])
    overlaps: list = field(default_factory=lambda: [0.0])
    synth_train_per_class: int = 20
    synth_test_per_class: int = 5
    locate_measure: str = "euclidean"
    locate_n_grid: list = field(default_factory=lambda: list(DEFAULT_N_GRID))
    jobs: int = 1

    def __post_init__(self):
        parse_measures(self.measures)  # fail fast on bad measure configs
        Strategy(self.prototype_strategy)
        if self.prototype_count < 1:
            raise ConfigError("prototype_count must be >= 1")
        if not self.tab_counts or any(t < 1 for t in self.tab_counts):
            raise ConfigError(f"tab_counts must be >= 1, got {self.tab_counts}")
        if any(not 0.0 <= o < 1.0 for o in self.overlaps):
            raise ConfigError(f"overlaps must be in [0,1), got {self.overlaps}")
        GbdtHyperParams(**self.gbdt)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path, overrides: Optional[dict] = None) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if overrides:
            data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)


@dataclass
class CellResult:
    tabs: int
    overlap: float
    n_train: int
    n_test: int
    accuracy: float
    confusion: dict
    location: Optional[dict] = None


@dataclass
class EvalReport:
    config: dict
    cells: list
    timings: dict = field(default_factory=dict)

    def to_json(self, include_timings: bool = False) -> str:
        payload = {
            "config": self.config,
            "cells": [asdict(c) for c in self.cells],
        }
        if include_timings:
            payload["timings"] = self.timings
        return json.dumps(payload, indent=2, sort_keys=True)


def _seed_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), *key]))


def _overlap_key(overlap: float) -> int:
    return int(round(overlap * 10000))


def _cells(config: ExperimentConfig) -> list[tuple[int, float]]:
    cells = []
    for tabs in sorted(set(config.tab_counts)):
        if tabs == 1:
            cells.append((1, 0.0))  # a single tab cannot overlap anything
        else:
            for overlap in sorted(set(config.overlaps)):
                cells.append((tabs, float(overlap)))
    return cells


def _single_tab_pool(split: Dataset, open_world: bool) -> list[Trace]:
    pool: list[Trace] = []
    for cid in split.class_ids:
        pool.extend(split.monitored[cid])
    if open_world:
        pool.extend(split.unmonitored)
    return pool


def _accuracy_and_confusion(truth: np.ndarray, predicted: np.ndarray) -> tuple[float, dict]:
    accuracy = float((truth == predicted).mean()) if truth.size else 0.0
    confusion: dict[str, dict[str, int]] = {}
    for t, p in zip(truth.tolist(), predicted.tolist()):
        confusion.setdefault(str(t), {}).setdefault(str(p), 0)
        confusion[str(t)][str(p)] += 1
    return accuracy, confusion


def _write_predictions(path, sample_ids: Sequence[str], truth, predicted) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "true_class", "predicted_class"])
        for sid, t, p in zip(sample_ids, truth.tolist(), predicted.tolist()):
            writer.writerow([sid, t, p])


def read_predictions(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    ids = [r["sample_id"] for r in rows]
    truth = np.array([int(r["true_class"]) for r in rows], dtype=np.int64)
    predicted = np.array([int(r["predicted_class"]) for r in rows], dtype=np.int64)
    return ids, truth, predicted


def _cache_dir(config: ExperimentConfig) -> Path:
    env = os.environ.get("TSAWF_CACHE_DIR", "").strip()
    return Path(env) if env else Path(config.output) / "cache"


def write_manifest(config: ExperimentConfig, outdir: Path, extra: Optional[dict] = None) -> None:
    manifest = {
        "tool_version": __version__,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "kernel_backend": kernels.backend_name(),
        "config": config.to_dict(),
        "stride": config.stride,
        "stride_note": (
            "stride 1 evaluates every window offset and keeps packet-level "
            "match resolution; larger strides trade resolution for speed"
        ),
        "seed_derivation": {
            "split": [config.seed, "per-class"],
            "prototypes": [config.seed, 1, "per-class"],
            "synthesis": [config.seed, 2, "tabs", "overlap*10000", "train=0/test=1"],
            "classifier": [config.seed, 3, "tabs", "overlap*10000"],
        },
        "merged_time_origin": "re-zeroed to 0",
        "feature_standardization": "per-class z-score before clustering",
    }
    if extra:
        manifest.update(extra)
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def run_experiment(config: ExperimentConfig) -> EvalReport:
    outdir = Path(config.output)
    outdir.mkdir(parents=True, exist_ok=True)
    cache_dir = _cache_dir(config)
    timings: dict[str, float] = {}

    def timed(name: str, fn):
        start = time.perf_counter()
        result = fn()
        timings[name] = time.perf_counter() - start
        return result

    dataset = timed(
        "load",
        lambda: load_dataset(
            config.dataset, time_scale=config.time_scale, time_slack=config.time_slack
        ),
    )
    train, test = timed(
        "split", lambda: split_dataset(dataset, SplitSpec(config.train_fraction, config.seed))
    )

    proto_dir = outdir / "prototypes"
    if (proto_dir / "manifest.json").exists():
        prototypes = load_prototypes(proto_dir)
    else:
        prototypes = timed(
            "prototypes",
            lambda: select_all_prototypes(
                train.monitored,
                Strategy(config.prototype_strategy),
                config.prototype_count,
                config.seed,
            ),
        )
        save_prototypes(prototypes, proto_dir, seed=config.seed)
    prototypes = sort_prototypes(prototypes)

    write_manifest(
        config,
        outdir,
        extra={
            "prototype_bundle_hash": hash_prototypes(prototypes),
            "dataset_counts": {
                "classes": dataset.n_classes,
                "monitored": dataset.meta.n_monitored,
                "unmonitored": dataset.meta.n_unmonitored,
            },
        },
    )

    engine = DistanceEngine(config.measures, stride=config.stride, jobs=config.jobs)
    locate_engine = DistanceEngine([config.locate_measure], stride=config.stride, jobs=config.jobs)

    cells: list[CellResult] = []
    for tabs, overlap in _cells(config):
        tag = f"t{tabs}_o{_overlap_key(overlap)}"
        okey = _overlap_key(overlap)

        if tabs == 1:
            train_traces = _single_tab_pool(train, config.open_world)
            test_traces = _single_tab_pool(test, config.open_world)
            test_samples: Optional[list[MultiTabSample]] = None
        else:
            train_mts = timed(
                f"synth_train_{tag}",
                lambda: synthesize_multitab(
                    train, tabs, config.synth_train_per_class, overlap,
                    _seed_rng(config.seed, 2, tabs, okey, 0),
                ),
            )
            test_samples = timed(
                f"synth_test_{tag}",
                lambda: synthesize_multitab(
                    test, tabs, config.synth_test_per_class, overlap,
                    _seed_rng(config.seed, 2, tabs, okey, 1),
                ),
            )
            train_traces = [s.trace.relabel(s.monitored_class, s.sample_id) for s in train_mts]
            test_traces = [s.trace.relabel(s.monitored_class, s.sample_id) for s in test_samples]

        train_matrix = timed(
            f"distances_train_{tag}",
            lambda: build_feature_matrix(
                train_traces, prototypes, engine,
                layout=config.feature_layout, jobs=config.jobs, cache_dir=cache_dir,
            ),
        )
        test_matrix = timed(
            f"distances_test_{tag}",
            lambda: build_feature_matrix(
                test_traces, prototypes, engine,
                layout=config.feature_layout, jobs=config.jobs, cache_dir=cache_dir,
            ),
        )

        model_path = outdir / f"model_{tag}.json"
        if model_path.exists():
            model = load_model(model_path.read_text(encoding="utf-8"))
        else:
            model = timed(
                f"train_{tag}",
                lambda: train_classifier(
                    config.classifier,
                    train_matrix,
                    rng=_seed_rng(config.seed, 3, tabs, okey),
                    open_world=config.open_world,
                    quantile=config.threshold_quantile,
                    gbdt_params=GbdtHyperParams(**config.gbdt),
                ),
            )
            model_path.write_text(model.to_json(), encoding="utf-8")

        pred_path = outdir / f"predictions_{tag}.csv"
        if pred_path.exists():
            _, truth, predicted = read_predictions(pred_path)
        else:
            predicted = timed(f"predict_{tag}", lambda: predict_matrix(model, test_matrix))
            truth = test_matrix.labels
            _write_predictions(pred_path, test_matrix.sample_ids, truth, predicted)
        accuracy, confusion = _accuracy_and_confusion(truth, predicted)

        location = None
        if tabs > 1:
            loc_path = outdir / f"locations_{tag}.csv"
            results = timed(
                f"locate_{tag}",
                lambda: [
                    locate_sample(s, int(p), prototypes, engine=locate_engine)
                    for s, p in zip(test_samples, predicted)
                ],
            )
            write_location_csv(results, loc_path)
            location = location_curve(results, config.locate_n_grid)

        cells.append(
            CellResult(
                tabs=tabs,
                overlap=overlap,
                n_train=len(train_traces),
                n_test=len(test_traces),
                accuracy=accuracy,
                confusion=confusion,
                location=location,
            )
        )

    report = EvalReport(config=config.to_dict(), cells=cells, timings=timings)
    (outdir / "report.json").write_text(report.to_json(include_timings=False), encoding="utf-8")
    (outdir / "timings.json").write_text(
        json.dumps(timings, indent=2, sort_keys=True), encoding="utf-8"
    )
    return report
