"""Fixed-length summary-statistic feature vectors over traces.

The vector covers packet counts and direction fractions, duration,
inter-arrival statistics and timestamp deciles (overall and per direction),
same-direction burst statistics, head/tail outgoing concentration, and
packets-per-second over 1-second bins. Statistics that are undefined on a
degenerate trace (single packet, or a direction with no packets) are
substituted with 0 and a companion indicator feature is set.

Every feature carries a kind tag: ``time`` features scale linearly when all
timestamps are multiplied by a constant, ``count`` features are invariant to
that, ``rate`` features (packets per second) are neither, ``indicator``
features are 0/1 flags.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .trace import Trace

SCHEMA_VERSION = 1

_IAT_STATS = ("mean", "std", "min", "max", "median")
_SCOPES = ("all", "out", "in")
_DECILES = tuple(range(10, 100, 10))


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    index: int
    kind: str  # time | count | rate | indicator


def _build_schema() -> tuple[FeatureSpec, ...]:
    specs: list[FeatureSpec] = []

    def add(name: str, kind: str) -> None:
        specs.append(FeatureSpec(name, len(specs), kind))

    add("n_packets", "count")
    add("n_outgoing", "count")
    add("n_incoming", "count")
    add("frac_outgoing", "count")
    add("frac_incoming", "count")
    add("duration", "time")
    for scope in _SCOPES:
        for stat in _IAT_STATS:
            add(f"iat_{stat}_{scope}", "time")
    for scope in _SCOPES:
        for q in _DECILES:
            add(f"time_p{q}_{scope}", "time")
    add("burst_count", "count")
    add("burst_mean_len", "count")
    add("burst_max_len", "count")
    add("out_in_first30", "count")
    add("out_in_last30", "count")
    add("pps_mean", "rate")
    add("pps_std", "rate")
    add("single_packet", "indicator")
    add("no_outgoing", "indicator")
    add("no_incoming", "indicator")
    return tuple(specs)


SCHEMA: tuple[FeatureSpec, ...] = _build_schema()
N_FEATURES = len(SCHEMA)
_INDEX = {spec.name: spec.index for spec in SCHEMA}


def feature_index(name: str) -> int:
    return _INDEX[name]


def schema_json() -> str:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "n_features": N_FEATURES,
        "features": [
            {"name": s.name, "index": s.index, "kind": s.kind} for s in SCHEMA
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def _iat_stats(times: np.ndarray) -> list[float]:
    if times.size < 2:
        return [0.0] * len(_IAT_STATS)
    d = np.diff(times)
    return [
        float(d.mean()),
        float(d.std()),
        float(d.min()),
        float(d.max()),
        float(np.median(d)),
    ]


def _deciles(times: np.ndarray) -> list[float]:
    if times.size == 0:
        return [0.0] * len(_DECILES)
    return [float(v) for v in np.percentile(times, _DECILES)]


def _burst_lengths(dirs: np.ndarray) -> np.ndarray:
    # maximal runs of consecutive same-direction packets
    boundaries = np.flatnonzero(np.r_[True, dirs[1:] != dirs[:-1], True])
    return np.diff(boundaries)


def summary_features(trace: Trace) -> np.ndarray:
    """Compute the feature vector for one trace (see module docstring)."""
    times = trace.times
    dirs = trace.dirs
    n = times.size
    out_times = times[dirs > 0]
    in_times = times[dirs < 0]

    v = np.zeros(N_FEATURES)
    v[_INDEX["n_packets"]] = n
    v[_INDEX["n_outgoing"]] = out_times.size
    v[_INDEX["n_incoming"]] = in_times.size
    v[_INDEX["frac_outgoing"]] = out_times.size / n
    v[_INDEX["frac_incoming"]] = in_times.size / n
    v[_INDEX["duration"]] = times[-1] - times[0]

    for scope, ts in zip(_SCOPES, (times, out_times, in_times)):
        for stat, value in zip(_IAT_STATS, _iat_stats(ts)):
            v[_INDEX[f"iat_{stat}_{scope}"]] = value
        for q, value in zip(_DECILES, _deciles(ts)):
            v[_INDEX[f"time_p{q}_{scope}"]] = value

    bursts = _burst_lengths(dirs)
    v[_INDEX["burst_count"]] = bursts.size
    v[_INDEX["burst_mean_len"]] = bursts.mean()
    v[_INDEX["burst_max_len"]] = bursts.max()

    v[_INDEX["out_in_first30"]] = int((dirs[:30] > 0).sum())
    v[_INDEX["out_in_last30"]] = int((dirs[-30:] > 0).sum())

    duration = times[-1] - times[0]
    n_bins = max(1, int(np.ceil(duration / 1000.0)))
    counts, _ = np.histogram(times - times[0], bins=n_bins, range=(0.0, n_bins * 1000.0))
    v[_INDEX["pps_mean"]] = counts.mean()
    v[_INDEX["pps_std"]] = counts.std()

    v[_INDEX["single_packet"]] = 1.0 if n < 2 else 0.0
    v[_INDEX["no_outgoing"]] = 1.0 if out_times.size == 0 else 0.0
    v[_INDEX["no_incoming"]] = 1.0 if in_times.size == 0 else 0.0
    return v


def features_matrix(traces) -> np.ndarray:
    return np.vstack([summary_features(t) for t in traces])


def standardize(matrix: np.ndarray) -> np.ndarray:
    """Per-column z-score; zero-variance columns map to 0."""
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (matrix - mean) / std
