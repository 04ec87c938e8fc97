"""Dataset loading, stratified splitting, and multi-tab trace synthesis.

On disk a dataset is a directory tree::

    root/
      monitored/<class_id>/<sample>.trace     class ids dense 0..C-1
      unmonitored/<sample>.trace              optional (closed-world sets)

Multi-tab samples are synthesized by merging one monitored trace with a
number of unmonitored traces on a shared timeline, optionally overlapping
adjacent traces, while recording where the monitored trace landed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DatasetLoadError,
    InsufficientData,
    InvalidOverlap,
    MalformedLayout,
    MissingDirectory,
    TsawfError,
)
from .trace import UNMONITORED, Trace, read_trace

# Sentinel stratum key for the unmonitored pool when deriving split seeds.
_UNMON_STRATUM = 2**32


@dataclass(frozen=True)
class DatasetMeta:
    root: str
    n_classes: int
    n_monitored: int
    n_unmonitored: int


@dataclass(frozen=True)
class Dataset:
    monitored: dict[int, list[Trace]]
    unmonitored: list[Trace]
    meta: DatasetMeta

    @property
    def class_ids(self) -> list[int]:
        return sorted(self.monitored)

    @property
    def n_classes(self) -> int:
        return len(self.monitored)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0,1), got {self.train_fraction}")


@dataclass(frozen=True)
class MultiTabSample:
    """A merged trace holding exactly one monitored website access."""

    trace: Trace
    monitored_class: int
    true_start_index: int
    true_start_time: float
    tab_count: int
    overlap_fraction: float
    sample_id: str
    monitored_slot: int
    constituent_source_ids: tuple[str, ...]


def _dataset_meta(root, monitored, unmonitored) -> DatasetMeta:
    return DatasetMeta(
        root=str(root),
        n_classes=len(monitored),
        n_monitored=sum(len(v) for v in monitored.values()),
        n_unmonitored=len(unmonitored),
    )


def load_dataset(root, *, time_scale: float = 1.0, time_slack: float = 0.0) -> Dataset:
    """Load every trace under the standard directory layout.

    All files are parsed even after the first failure so the raised
    :class:`DatasetLoadError` lists every bad file at once. Class directories
    must be named with dense integer ids 0..C-1.
    """
    root = Path(root)
    mon_root = root / "monitored"
    if not mon_root.is_dir():
        raise MissingDirectory(f"missing directory: {mon_root}")

    class_dirs = [p for p in mon_root.iterdir() if p.is_dir()]
    if not class_dirs:
        raise MissingDirectory(f"no class directories under {mon_root}")
    try:
        ids = sorted(int(p.name) for p in class_dirs)
    except ValueError as exc:
        raise MalformedLayout(f"non-integer class directory under {mon_root}: {exc}") from None
    if ids != list(range(len(ids))):
        raise MalformedLayout(f"class ids must be dense 0..C-1, got {ids}")

    failures: list[tuple[str, TsawfError]] = []

    def _read(path: Path, label: Optional[int]) -> Optional[Trace]:
        try:
            return read_trace(path, time_scale=time_scale, time_slack=time_slack, label=label)
        except TsawfError as exc:
            failures.append((str(path), exc))
            return None

    monitored: dict[int, list[Trace]] = {}
    for cid in ids:
        files = sorted((mon_root / str(cid)).glob("*.trace"))
        if not files:
            raise MalformedLayout(f"class directory {mon_root / str(cid)} holds no .trace files")
        monitored[cid] = [t for t in (_read(f, cid) for f in files) if t is not None]

    unmonitored: list[Trace] = []
    unmon_root = root / "unmonitored"
    if unmon_root.is_dir():
        files = sorted(unmon_root.glob("*.trace"))
        unmonitored = [t for t in (_read(f, UNMONITORED) for f in files) if t is not None]

    if failures:
        raise DatasetLoadError(failures)
    return Dataset(monitored, unmonitored, _dataset_meta(root, monitored, unmonitored))


def merge_traces(
    traces: Sequence[Trace], overlap_fraction: float, rng: np.random.Generator
) -> tuple[Trace, list[int]]:
    """Merge traces onto one timeline in the given tab order.

    Trace i+1 starts at ``end(i) - u`` where ``u`` is drawn uniformly from
    [0, overlap_fraction * duration(i)] (u is exactly 0 when the fraction is
    0, consuming no randomness). Events are sorted by absolute time with ties
    broken by (tab order, original index), and the merged timeline is
    re-zeroed to start at 0. Returns the merged trace and, per constituent,
    the merged position of its first packet.
    """
    if not 0.0 <= overlap_fraction < 1.0:
        raise InvalidOverlap(f"overlap fraction must be in [0,1), got {overlap_fraction}")
    if len(traces) == 0:
        raise InsufficientData("merge_traces needs at least one trace")

    offsets = np.empty(len(traces))
    offsets[0] = 0.0
    for i, tr in enumerate(traces[:-1]):
        end = offsets[i] + float(tr.times[-1])
        if overlap_fraction > 0.0:
            u = rng.uniform(0.0, overlap_fraction * tr.duration)
        else:
            u = 0.0
        offsets[i + 1] = end - u

    times = np.concatenate([tr.times + offsets[i] for i, tr in enumerate(traces)])
    dirs = np.concatenate([tr.dirs for tr in traces])
    tabs = np.concatenate(
        [np.full(len(tr), i, dtype=np.int64) for i, tr in enumerate(traces)]
    )
    within = np.concatenate([np.arange(len(tr), dtype=np.int64) for tr in traces])

    # lexsort: last key is primary
    order = np.lexsort((within, tabs, times))
    times = times[order]
    times = times - times[0]
    dirs = dirs[order]

    position = np.empty(order.size, dtype=np.int64)
    position[order] = np.arange(order.size)
    first_flat = np.cumsum([0] + [len(tr) for tr in traces[:-1]])
    start_indices = [int(position[f]) for f in first_flat]

    merged = Trace(
        times,
        dirs,
        label=None,
        source_id="+".join(tr.source_id or "?" for tr in traces),
    )
    return merged, start_indices


def synthesize_multitab(
    dataset: Dataset,
    tabs: int,
    count_per_class: int,
    overlap: float,
    rng: np.random.Generator,
) -> list[MultiTabSample]:
    """Build merged samples holding exactly one monitored trace each.

    For every class, ``count_per_class`` samples are produced: one monitored
    trace drawn uniformly from the class pool, merged with ``tabs - 1``
    unmonitored traces, the monitored tab placed at a uniformly random slot.
    Randomness is spawned per sample so parallel and serial synthesis agree.
    """
    if tabs < 1:
        raise ConfigError(f"tabs must be >= 1, got {tabs}")
    if count_per_class < 1:
        raise ConfigError(f"count_per_class must be >= 1, got {count_per_class}")
    if tabs > 1 and not dataset.unmonitored:
        raise InsufficientData("multi-tab synthesis needs a non-empty unmonitored pool")

    class_ids = dataset.class_ids
    children = rng.spawn(len(class_ids) * count_per_class)
    samples: list[MultiTabSample] = []
    k = 0
    for cid in class_ids:
        pool = dataset.monitored[cid]
        if not pool:
            raise InsufficientData(f"class {cid} has no traces")
        for i in range(count_per_class):
            sub = children[k]
            k += 1
            mon = pool[int(sub.integers(len(pool)))]
            if tabs > 1:
                n_unmon = len(dataset.unmonitored)
                picks = sub.choice(n_unmon, size=tabs - 1, replace=n_unmon < tabs - 1)
                others = [dataset.unmonitored[int(j)] for j in picks]
            else:
                others = []
            slot = int(sub.integers(tabs))
            ordered = others[:slot] + [mon] + others[slot:]
            merged, starts = merge_traces(ordered, overlap, sub)
            sample_id = f"c{cid}_{i:04d}_{tabs}tab"
            merged = merged.relabel(cid, source_id=f"synth/{sample_id}")
            samples.append(
                MultiTabSample(
                    trace=merged,
                    monitored_class=cid,
                    true_start_index=starts[slot],
                    true_start_time=float(merged.times[starts[slot]]),
                    tab_count=tabs,
                    overlap_fraction=overlap,
                    sample_id=sample_id,
                    monitored_slot=slot,
                    constituent_source_ids=tuple(tr.source_id for tr in ordered),
                )
            )
    return samples


def write_synthesis_manifest(samples: Sequence[MultiTabSample], path, seed) -> None:
    """One JSON record per sample, in synthesis order.

    Merged timelines are re-zeroed to start at 0; true_start_time is relative
    to that re-zeroed origin.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "sample_id": s.sample_id,
                        "class": s.monitored_class,
                        "tab_count": s.tab_count,
                        "overlap": s.overlap_fraction,
                        "seed": seed,
                        "true_start_index": s.true_start_index,
                        "true_start_time": s.true_start_time,
                        "constituent_source_ids": list(s.constituent_source_ids),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def _split_pool(
    traces: list[Trace], fraction: float, seed_key: Sequence[int]
) -> tuple[list[Trace], list[Trace]]:
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_key)))
    order = rng.permutation(len(traces))
    n_train = int(len(traces) * fraction)
    n_train = min(n_train, len(traces) - 1)  # keep at least one test trace
    train_idx = sorted(order[:n_train].tolist())
    test_idx = sorted(order[n_train:].tolist())
    return [traces[i] for i in train_idx], [traces[i] for i in test_idx]


def split_dataset(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified train/test split, deterministic for a fixed seed.

    Each class (and the unmonitored pool) is split independently at
    ``train_fraction`` with floor rounding and at least one test trace. A
    single-trace unmonitored pool goes entirely to the training side.
    """
    seed_u = spec.seed & (2**64 - 1)
    train_mon: dict[int, list[Trace]] = {}
    test_mon: dict[int, list[Trace]] = {}
    for cid in dataset.class_ids:
        traces = dataset.monitored[cid]
        if len(traces) < 2:
            raise InsufficientData(f"class {cid} needs >= 2 traces to split, has {len(traces)}")
        train_mon[cid], test_mon[cid] = _split_pool(traces, spec.train_fraction, (seed_u, cid))

    if len(dataset.unmonitored) >= 2:
        train_un, test_un = _split_pool(
            dataset.unmonitored, spec.train_fraction, (seed_u, _UNMON_STRATUM)
        )
    else:
        train_un, test_un = list(dataset.unmonitored), []

    root = dataset.meta.root
    return (
        Dataset(train_mon, train_un, _dataset_meta(root, train_mon, train_un)),
        Dataset(test_mon, test_un, _dataset_meta(root, test_mon, test_un)),
    )
