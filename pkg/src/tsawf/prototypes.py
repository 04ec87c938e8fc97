"""Per-class prototype selection: random, or k-means on raw/summary features.

Prototypes are always member traces of the class (a k-means centroid in
feature space is not itself a trace, so the member nearest each centroid is
chosen). Clusters are ranked by descending size.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch, InsufficientData, InvalidLength
from .features import features_matrix, standardize
from .trace import DirectionalSplit, Trace, read_trace, split_directions, to_signed_series, write_trace


class Strategy(str, enum.Enum):
    RANDOM = "random"
    RAW_CLUSTER = "raw_cluster"
    FEATURE_CLUSTER = "feature_cluster"


@dataclass(frozen=True)
class Prototype:
    trace: Trace
    class_id: int
    strategy: Strategy
    cluster_rank: int
    split: DirectionalSplit


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    iterations: int


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[int(rng.integers(n))]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            j = int(rng.choice(n, p=d2 / total))
        else:
            j = int(rng.integers(n))
        centroids[i] = points[j]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(
    points,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> KMeansResult:
    """Lloyd iterations with k-means++ seeding.

    Stops when no centroid moves more than ``tol`` or after ``max_iter``
    rounds. An empty cluster is repaired by reseeding its centroid to the
    point farthest from its current assignment. Inertia is checked to be
    non-increasing across iterations.
    """
    try:
        X = np.asarray(points, dtype=np.float64)
    except ValueError:
        raise DimensionMismatch("points must be a 2-d array of equal-length vectors") from None
    if X.ndim != 2:
        raise DimensionMismatch("points must be a 2-d array of equal-length vectors")
    n = X.shape[0]
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if n < k:
        raise InsufficientData(f"need at least k={k} points, got {n}")

    centroids = _kmeans_pp(X, k, rng)
    prev_inertia = np.inf
    assignments = np.zeros(n, dtype=np.int64)
    inertia = 0.0
    iterations = 0

    for iterations in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignments = d2.argmin(axis=1)

        for _ in range(k):  # bounded repair passes
            empty = [c for c in range(k) if not np.any(assignments == c)]
            if not empty:
                break
            current = d2[np.arange(n), assignments]
            if current.max() == 0.0:
                break  # all points coincide with their centroids; nothing to repair
            far = int(current.argmax())
            centroids[empty[0]] = X[far]
            d2[:, empty[0]] = ((X - centroids[empty[0]]) ** 2).sum(axis=1)
            assignments = d2.argmin(axis=1)

        inertia = float(d2[np.arange(n), assignments].sum())
        assert inertia <= prev_inertia * (1 + 1e-12) + 1e-12, "k-means inertia increased"
        prev_inertia = inertia

        new_centroids = centroids.copy()
        for c in range(k):
            members = assignments == c
            if np.any(members):
                new_centroids[c] = X[members].mean(axis=0)
        movement = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if movement < tol:
            break

    return KMeansResult(centroids, assignments, inertia, iterations)


def pad_raw(traces: Sequence[Trace], length: int) -> np.ndarray:
    """Signed series truncated or zero-padded to a common length."""
    if length < 1:
        raise InvalidLength(f"pad length must be >= 1, got {length}")
    out = np.zeros((len(traces), length))
    for i, tr in enumerate(traces):
        s = to_signed_series(tr)
        take = min(s.size, length)
        out[i, :take] = s[:take]
    return out


def select_prototypes(
    class_traces: Sequence[Trace],
    strategy: Strategy,
    count: int,
    rng: np.random.Generator,
) -> list[Prototype]:
    """Pick ``count`` distinct prototypes for one class.

    ``random`` samples uniformly without replacement. The clustering
    strategies run k-means (on the zero-padded signed series at the class
    median length, or on z-scored summary features) and return the member
    trace nearest each centroid, ranked by descending cluster size.
    """
    strategy = Strategy(strategy)
    if count < 1:
        raise ConfigError(f"prototype count must be >= 1, got {count}")
    if len(class_traces) < count:
        raise InsufficientData(
            f"need at least {count} traces to pick {count} prototypes, got {len(class_traces)}"
        )
    class_id = class_traces[0].label
    if class_id is None:
        raise ConfigError("class traces must carry a class label")

    if strategy is Strategy.RANDOM:
        chosen = rng.choice(len(class_traces), size=count, replace=False)
        picks = [(rank, int(i)) for rank, i in enumerate(chosen)]
    else:
        if strategy is Strategy.RAW_CLUSTER:
            median_len = int(np.median([len(t) for t in class_traces]))
            X = pad_raw(class_traces, max(median_len, 1))
        else:
            X = standardize(features_matrix(class_traces))
        result = kmeans(X, count, rng)
        sizes = np.bincount(result.assignments, minlength=count)
        cluster_order = sorted(range(count), key=lambda c: (-sizes[c], c))
        picks = []
        for rank, c in enumerate(cluster_order):
            members = np.flatnonzero(result.assignments == c)
            if members.size == 0:
                raise InsufficientData(
                    f"class {class_id}: cluster {c} is empty; too few distinct traces"
                )
            d2 = ((X[members] - result.centroids[c]) ** 2).sum(axis=1)
            picks.append((rank, int(members[int(d2.argmin())])))

    return [
        Prototype(
            trace=class_traces[i],
            class_id=int(class_id),
            strategy=strategy,
            cluster_rank=rank,
            split=split_directions(class_traces[i]),
        )
        for rank, i in picks
    ]


def select_all_prototypes(
    train: dict[int, Sequence[Trace]],
    strategy: Strategy,
    count: int,
    seed: int,
) -> list[Prototype]:
    """Prototypes for every class, with an independent rng stream per class."""
    protos: list[Prototype] = []
    seed_u = seed & (2**64 - 1)
    for cid in sorted(train):
        rng = np.random.default_rng(np.random.SeedSequence([seed_u, 1, cid]))
        protos.extend(select_prototypes(list(train[cid]), strategy, count, rng))
    return protos


def save_prototypes(protos: Sequence[Prototype], outdir, seed: Optional[int] = None) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for p in sorted(protos, key=lambda p: (p.class_id, p.cluster_rank)):
        fname = f"class{p.class_id:04d}_rank{p.cluster_rank}.trace"
        write_trace(p.trace, outdir / fname)
        entries.append(
            {
                "file": fname,
                "class_id": p.class_id,
                "strategy": p.strategy.value,
                "cluster_rank": p.cluster_rank,
                "source_id": p.trace.source_id,
            }
        )
    manifest = {
        "version": 1,
        "seed": seed,
        "count": max((p.cluster_rank for p in protos), default=-1) + 1,
        "prototypes": entries,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_prototypes(outdir) -> list[Prototype]:
    outdir = Path(outdir)
    manifest = json.loads((outdir / "manifest.json").read_text(encoding="utf-8"))
    protos = []
    for entry in manifest["prototypes"]:
        trace = read_trace(outdir / entry["file"], label=entry["class_id"])
        trace = trace.relabel(entry["class_id"], source_id=entry["source_id"] or trace.source_id)
        protos.append(
            Prototype(
                trace=trace,
                class_id=entry["class_id"],
                strategy=Strategy(entry["strategy"]),
                cluster_rank=entry["cluster_rank"],
                split=split_directions(trace),
            )
        )
    return protos
