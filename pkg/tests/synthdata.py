"""Synthetic trace generators shared by the unit and acceptance tests.

Timestamps are snapped to a dyadic grid (multiples of 2**-10 ms). Sums and
differences of grid-aligned values of this magnitude are exact in float64,
so merging traces onto a shared timeline and re-basing windows cannot smear
a verbatim planted match away from distance zero.
"""

from __future__ import annotations

import numpy as np

from tsawf.dataset import Dataset, DatasetMeta
from tsawf.trace import UNMONITORED, Trace

GRID = 1.0 / 1024


def snap(values: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(values, dtype=np.float64) / GRID) * GRID


def make_template(rng: np.random.Generator, n_events: int = 400, n_phases: int = 8,
                  label: int | None = None, source_id: str = "template") -> Trace:
    """A class template: bursty phase-structured timing, Markov directions.

    Each class gets its own random rate profile (phases of very different
    mean inter-arrival) and direction persistence, so cumulative-time shapes
    differ across classes far more than the within-class jitter.
    """
    phase_means = rng.uniform(0.2, 40.0, size=n_phases)
    bounds = np.sort(rng.choice(np.arange(1, n_events), size=n_phases - 1, replace=False))
    segments = np.split(np.arange(n_events), bounds)
    iat = np.concatenate(
        [rng.exponential(phase_means[i], size=len(seg)) for i, seg in enumerate(segments)]
    )
    times = np.concatenate(([0.0], np.cumsum(iat)))[:n_events]
    times = np.sort(snap(times))
    times = times - times[0]

    p_stay = rng.uniform(0.55, 0.95)
    dirs = np.empty(n_events, dtype=np.int8)
    dirs[0] = 1  # traces open with an outgoing request
    flips = rng.random(n_events - 1) >= p_stay
    for i in range(1, n_events):
        dirs[i] = -dirs[i - 1] if flips[i - 1] else dirs[i - 1]
    return Trace(times, dirs, label=label, source_id=source_id)


def perturb(template: Trace, rng: np.random.Generator, jitter_frac: float = 0.05,
            delete_frac: float = 0.02, source_id: str = "sample") -> Trace:
    """Jitter timestamps and delete a small random subset of events.

    Jitter sigma is ``jitter_frac`` of the template's mean inter-arrival.
    """
    sigma = jitter_frac * float(np.diff(template.times).mean()) if len(template) > 1 else 0.0
    times = snap(template.times + rng.normal(0.0, sigma, size=len(template)))
    dirs = template.dirs.copy()
    order = np.argsort(times, kind="stable")
    times = times[order]
    dirs = dirs[order]
    if delete_frac > 0 and len(template) > 2:
        keep = rng.random(len(template)) >= delete_frac
        if keep.sum() < 2:
            keep[:2] = True
        times = times[keep]
        dirs = dirs[keep]
    times = times - times[0]
    return Trace(times, dirs, label=template.label, source_id=source_id)


def random_walk_trace(rng: np.random.Generator, n_events: int = 300,
                      source_id: str = "unmon") -> Trace:
    """Filler trace whose log inter-arrival rate random-walks across events.

    The drifting rate produces bursts and lulls of the same flavor as the
    class templates, so merged traces contain stretches that can spuriously
    match a prototype.
    """
    lo, hi = np.log(0.2), np.log(40.0)
    log_rate = np.empty(n_events)
    log_rate[0] = rng.uniform(lo, hi)
    steps = rng.normal(0.0, 0.15, size=n_events - 1)
    for i in range(1, n_events):
        log_rate[i] = min(hi, max(lo, log_rate[i - 1] + steps[i - 1]))
    iat = rng.exponential(np.exp(log_rate))
    times = snap(np.cumsum(iat))
    times = np.sort(times)
    times = times - times[0]

    p_stay = rng.uniform(0.55, 0.95)
    dirs = np.empty(n_events, dtype=np.int8)
    dirs[0] = 1
    flips = rng.random(n_events - 1) >= p_stay
    for i in range(1, n_events):
        dirs[i] = -dirs[i - 1] if flips[i - 1] else dirs[i - 1]
    return Trace(times, dirs, label=UNMONITORED, source_id=source_id)


def make_class_dataset(
    seed: int,
    n_classes: int = 10,
    samples_per_class: int = 30,
    n_events: int = 400,
    jitter_frac: float = 0.05,
    delete_frac: float = 0.02,
    n_unmonitored: int = 0,
    unmon_events: int = 300,
) -> Dataset:
    """In-memory dataset drawn from per-class templates."""
    root_rng = np.random.default_rng(np.random.SeedSequence([seed]))
    template_rng, sample_rng, unmon_rng = root_rng.spawn(3)

    monitored: dict[int, list[Trace]] = {}
    for cid in range(n_classes):
        template = make_template(
            template_rng, n_events=n_events, label=cid, source_id=f"mon/{cid}/template"
        )
        monitored[cid] = [
            perturb(
                template, sample_rng, jitter_frac, delete_frac,
                source_id=f"mon/{cid}/{i:03d}",
            )
            for i in range(samples_per_class)
        ]
    unmonitored = [
        random_walk_trace(unmon_rng, n_events=unmon_events, source_id=f"unmon/{i:03d}")
        for i in range(n_unmonitored)
    ]
    meta = DatasetMeta(
        root=f"synthetic(seed={seed})",
        n_classes=n_classes,
        n_monitored=n_classes * samples_per_class,
        n_unmonitored=n_unmonitored,
    )
    return Dataset(monitored, unmonitored, meta)


def write_dataset(dataset: Dataset, root) -> None:
    """Materialize an in-memory dataset in the on-disk layout."""
    from pathlib import Path

    from tsawf.trace import write_trace

    root = Path(root)
    for cid, traces in dataset.monitored.items():
        class_dir = root / "monitored" / str(cid)
        class_dir.mkdir(parents=True, exist_ok=True)
        for i, trace in enumerate(traces):
            write_trace(trace, class_dir / f"{i:04d}.trace")
    if dataset.unmonitored:
        unmon_dir = root / "unmonitored"
        unmon_dir.mkdir(parents=True, exist_ok=True)
        for i, trace in enumerate(dataset.unmonitored):
            write_trace(trace, unmon_dir / f"{i:04d}.trace")
