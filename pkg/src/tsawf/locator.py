"""Pinpointing where the predicted website sits inside a multi-tab trace.

Given a class label (from the built-in classifier or any external attack's
output) the locator slides each prototype of that class over the sample and
reports the packet index of the best-matching window. Location accuracy is
the fraction of samples located within n packets of the truth; a sample
whose predicted class is wrong counts as a failure at every n.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .dataset import MultiTabSample
from .engine import DistanceEngine
from .errors import ConfigError, MissingTruth, NoPrototype
from .measures import Measure
from .prototypes import Prototype
from .trace import Trace

#: Default grid of n values for the location-accuracy curve.
DEFAULT_N_GRID = (0, 10, 100, 1000, 2000, 4000, 10000)


@dataclass(frozen=True)
class LocationResult:
    sample_id: str
    predicted_class: int
    predicted_index: int
    predicted_time: float
    true_class: Optional[int] = None
    true_index: Optional[int] = None
    true_time: Optional[float] = None

    @property
    def abs_error_packets(self) -> Optional[int]:
        if self.true_index is None:
            return None
        return abs(self.predicted_index - self.true_index)

    @property
    def abs_error_ms(self) -> Optional[float]:
        if self.true_time is None:
            return None
        return abs(self.predicted_time - self.true_time)


def locate(
    sample: Trace,
    predicted_class: int,
    prototypes: Sequence[Prototype],
    measure=None,
    engine: Optional[DistanceEngine] = None,
) -> LocationResult:
    """Best-match packet index of the predicted class inside the sample.

    Prototypes of the predicted class are tried in cluster-rank order; the
    one with the smallest combined distance wins and its argmin packet index
    is the guess. The default measure is raw (non-normalized) sliding
    euclidean, which keeps a verbatim planted trace at distance zero.
    """
    if engine is None:
        engine = DistanceEngine([measure if measure is not None else "euclidean"])
    elif len(engine.measures) != 1:
        raise ConfigError("locate needs an engine configured with exactly one measure")
    if engine.measures[0].kind == "dtw":
        raise ConfigError("dtw cannot slide over multi-tab traces at packet resolution")

    candidates = sorted(
        (p for p in prototypes if p.class_id == predicted_class),
        key=lambda p: p.cluster_rank,
    )
    if not candidates:
        raise NoPrototype(f"no prototype for class {predicted_class}")

    best: Optional[tuple[float, int, float]] = None
    for proto in candidates:
        dv = engine.compute_dist(proto, sample)
        distance = float(dv.distances[0])
        if best is None or distance < best[0]:
            index = int(dv.argmin_packet_indices[0])
            best = (distance, index, float(sample.times[index]))
    return LocationResult(
        sample_id=sample.source_id,
        predicted_class=predicted_class,
        predicted_index=best[1],
        predicted_time=best[2],
    )


def locate_sample(
    sample: MultiTabSample,
    predicted_class: int,
    prototypes: Sequence[Prototype],
    measure=None,
    engine: Optional[DistanceEngine] = None,
) -> LocationResult:
    """:func:`locate` on a synthesized sample, with the truth attached."""
    result = locate(sample.trace, predicted_class, prototypes, measure, engine)
    return replace(
        result,
        sample_id=sample.sample_id,
        true_class=sample.monitored_class,
        true_index=sample.true_start_index,
        true_time=sample.true_start_time,
    )


def location_accuracy(results: Sequence[LocationResult], n: int) -> float:
    """Fraction located within n packets, conditioned on a correct class.

    A result whose predicted class differs from the true class is a failure
    at every n, so the curve saturates at the correct-class prediction rate.
    """
    if not results:
        raise MissingTruth("no location results")
    hits = 0
    for r in results:
        if r.true_index is None or r.true_class is None:
            raise MissingTruth(f"sample {r.sample_id} carries no ground truth")
        if r.predicted_class == r.true_class and r.abs_error_packets <= n:
            hits += 1
    return hits / len(results)


def location_curve(results: Sequence[LocationResult], grid=DEFAULT_N_GRID) -> dict:
    """Conditional and unconditional accuracy over a grid of n values."""
    conditional = [location_accuracy(results, n) for n in grid]
    unconditional = [
        sum(1 for r in results if r.abs_error_packets <= n) / len(results) for n in grid
    ]
    return {
        "n": list(grid),
        "conditional": conditional,
        "unconditional": unconditional,
    }


def write_location_csv(results: Sequence[LocationResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "sample_id",
                "true_class",
                "predicted_class",
                "true_index",
                "predicted_index",
                "abs_error",
                "abs_error_ms",
            ]
        )
        for r in results:
            writer.writerow(
                [
                    r.sample_id,
                    "" if r.true_class is None else r.true_class,
                    r.predicted_class,
                    "" if r.true_index is None else r.true_index,
                    r.predicted_index,
                    "" if r.abs_error_packets is None else r.abs_error_packets,
                    "" if r.abs_error_ms is None else repr(r.abs_error_ms),
                ]
            )
