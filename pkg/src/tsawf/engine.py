"""Sliding best-match search between prototypes and traces.

The central operation slides a prototype's direction component over the
matching component of a target trace at stride 1 and records, per measure,
the minimum distance and the window offset where it occurred. The outgoing
and incoming components are searched independently and their minima summed.

The euclidean-family measures run on a MASS-style FFT fast path (sliding dot
products assembled from cumulative sums and one or three FFT correlations)
with a per-offset naive kernel as the slow reference path; both are exposed
so they can be cross-checked. Offsets where the FFT expansion is dominated
by floating-point cancellation (true distance tiny relative to the term
magnitudes) are recomputed directly, so a verbatim planted match scores an
exact 0.

Raw (non-normalized) sliding comparisons re-base each window by subtracting
the window's first value, and compare against the prototype component
re-based the same way; absolute time offsets inherited from earlier tabs in
a merged trace would otherwise dominate the distance.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from . import kernels
from .errors import ConfigError, InvalidLength, LengthMismatch, WindowTooLarge
from .measures import (
    Measure,
    WeightVector,
    default_word_length,
    make_weights,
    measures_config_json,
    parse_measures,
    sax_encode,
)
from .prototypes import Prototype
from .trace import DirectionalSplit, Trace, split_directions

# relative threshold below which an FFT-assembled squared distance is
# considered cancellation-dominated and recomputed directly
_CANCEL_TOL = 1e-12

# naive kernels win below this many multiply-adds (m * window count)
_FFT_CUTOVER = 4096


def _corr(fft_t: np.ndarray, length: int, q: np.ndarray, n: int) -> np.ndarray:
    """Sliding dot products of q against every window of the transformed t."""
    fq = rfft(q[::-1], length)
    full = irfft(fft_t * fq, length)
    return full[q.size - 1 : n]


def _sliding_sums(t: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    cs1 = np.concatenate(([0.0], np.cumsum(t)))
    cs2 = np.concatenate(([0.0], np.cumsum(t * t)))
    return cs1[m:] - cs1[:-m], cs2[m:] - cs2[:-m]


def _exact_at(
    s_hat: np.ndarray,
    s_const: bool,
    t: np.ndarray,
    w: Optional[np.ndarray],
    offs: np.ndarray,
    normalized: bool,
    rebase: bool,
) -> np.ndarray:
    """Direct per-window distances at the given offsets (no FFT expansion)."""
    m = s_hat.size
    windows = np.lib.stride_tricks.sliding_window_view(t, m)[offs]
    w_arr = w if w is not None else np.ones(m)
    if normalized:
        mu = windows.mean(axis=1)
        sig = windows.std(axis=1)
        const = sig == 0.0
        flat = np.sqrt(w_arr.sum())
        if s_const:
            return np.where(const, 0.0, flat)
        z = (windows - mu[:, None]) / np.where(const, 1.0, sig)[:, None]
        diff = z - s_hat
        vals = np.sqrt(np.einsum("ij,j,ij->i", diff, w_arr, diff))
        vals[const] = flat
        return vals
    diff = windows - s_hat
    if rebase:
        diff = diff - t[offs][:, None]
    return np.sqrt(np.einsum("ij,j,ij->i", diff, w_arr, diff))


def _fft_profile(
    s_hat: np.ndarray,
    s_const: bool,
    t: np.ndarray,
    w: Optional[np.ndarray],
    normalized: bool,
    rebase: bool,
) -> np.ndarray:
    m = s_hat.size
    n = t.size
    width = n - m + 1
    length = next_fast_len(n)
    fft_t = rfft(t, length)

    T1, T2 = _sliding_sums(t, m)
    if w is None:
        w_sum = float(m)
        T1w, T2w = T1, T2
        QT = _corr(fft_t, length, s_hat, n)
        SWS = float(s_hat.sum())
        SW2 = float((s_hat * s_hat).sum())
    else:
        w_sum = float(w.sum())
        T1w = _corr(fft_t, length, w, n)
        fft_t2 = rfft(t * t, length)
        T2w = _corr(fft_t2, length, w, n)
        QT = _corr(fft_t, length, w * s_hat, n)
        SWS = float((w * s_hat).sum())
        SW2 = float((w * s_hat * s_hat).sum())

    if normalized:
        mu = T1 / m
        meansq = T2 / m
        var = meansq - mu * mu
        # cancellation-prone variances: recompute with the two-pass formula
        shaky = var < 1e-10 * np.maximum(meansq, 1e-300)
        if np.any(shaky):
            idx = np.flatnonzero(shaky)
            windows = np.lib.stride_tricks.sliding_window_view(t, m)[idx]
            var[idx] = windows.var(axis=1)
        var = np.maximum(var, 0.0)
        sig = np.sqrt(var)
        const_w = sig == 0.0
        inv_sig = 1.0 / np.where(const_w, 1.0, sig)
        c = mu
        d2 = (
            (T2w - 2.0 * c * T1w + c * c * w_sum) * inv_sig * inv_sig
            - 2.0 * (QT - c * SWS) * inv_sig
            + SW2
        )
        bound = (
            (T2w + 2.0 * np.abs(c) * np.sqrt(w_sum * T2w) + c * c * w_sum) * inv_sig * inv_sig
            + 2.0 * (np.sqrt(SW2 * T2w) + np.abs(c) * abs(SWS)) * inv_sig
            + SW2
        )
    else:
        d2 = T2w - 2.0 * QT + SW2
        bound = T2w + 2.0 * np.sqrt(np.maximum(SW2 * T2w, 0.0)) + SW2
        if rebase:
            c = t[:width]
            d2 = d2 - 2.0 * c * (T1w - SWS) + c * c * w_sum
            bound = bound + 2.0 * np.abs(c) * (np.sqrt(w_sum * T2w) + abs(SWS)) + c * c * w_sum

    vals = np.sqrt(np.maximum(d2, 0.0))
    if normalized:
        flat = np.sqrt(w_sum)
        if s_const:
            vals = np.where(const_w, 0.0, flat)
        else:
            vals[const_w] = flat

    bad = d2 < _CANCEL_TOL * bound
    if normalized:
        bad &= ~const_w
        if s_const:
            bad[:] = False
    if np.any(bad):
        idx = np.flatnonzero(bad)
        vals[idx] = _exact_at(s_hat, s_const, t, w, idx, normalized, rebase)
    return vals


@dataclass(frozen=True)
class SlidingMatch:
    distance: float
    offset: int
    profile: Optional[np.ndarray] = None


def sliding_profile(
    s,
    t,
    *,
    normalized: bool = False,
    weights: Optional[Union[WeightVector, np.ndarray]] = None,
    rebase: bool = False,
    stride: int = 1,
    use_fft: Optional[bool] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Distance from s to every length-len(s) window of t.

    Returns (profile, offsets). ``use_fft`` selects the fast path explicitly;
    by default small problems run on the naive kernel, everything else on the
    FFT path. Both paths agree within 1e-6 relative at every offset.
    """
    s = np.ascontiguousarray(s, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    if s.size == 0 or t.size == 0:
        raise InvalidLength("sliding search needs non-empty inputs")
    if s.size > t.size:
        raise WindowTooLarge(f"window of {s.size} cannot slide over series of {t.size}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")

    if isinstance(weights, WeightVector):
        w = weights.values
    elif weights is not None:
        w = np.ascontiguousarray(weights, dtype=np.float64)
    else:
        w = None
    if w is not None and w.size != s.size:
        raise LengthMismatch(f"weights length {w.size} does not match window {s.size}")

    m = s.size
    width = t.size - m + 1
    offsets = np.arange(0, width, stride, dtype=np.int64)
    if use_fft is None:
        use_fft = m * offsets.size > _FFT_CUTOVER

    if normalized:
        sig_s = float(s.std())
        s_const = sig_s == 0.0
        s_hat = np.zeros_like(s) if s_const else (s - s.mean()) / sig_s
    else:
        s_const = False
        s_hat = s

    if use_fft:
        profile = _fft_profile(s_hat, s_const, t, w, normalized, rebase)[::stride]
    else:
        w_arr = w if w is not None else np.ones(m)
        if normalized:
            profile = kernels.profile_znorm(s_hat, s_const, t, w_arr, stride)
        else:
            profile = kernels.profile_raw(s_hat, t, w_arr, bool(rebase), stride)
    return profile, offsets


def sliding_min_euclidean(
    s, t, normalized: bool = False, *, return_profile: bool = False
) -> SlidingMatch:
    """Best-match euclidean distance of s against all windows of t."""
    profile, offsets = sliding_profile(s, t, normalized=normalized)
    i = int(np.argmin(profile))
    return SlidingMatch(
        distance=float(profile[i]),
        offset=int(offsets[i]),
        profile=profile if return_profile else None,
    )


def _cbd_profile(s: np.ndarray, t: np.ndarray, measure: Measure, stride: int):
    m = s.size
    word_length = measure.word_length or default_word_length(m)
    x = sax_encode(s, word_length, measure.alphabet).encode("ascii")
    cx = len(zlib.compress(x, 9))
    offsets = np.arange(0, t.size - m + 1, stride, dtype=np.int64)
    out = np.empty(offsets.size)
    for i, j in enumerate(offsets):
        y = sax_encode(t[j : j + m], word_length, measure.alphabet).encode("ascii")
        cy = len(zlib.compress(y, 9))
        value = len(zlib.compress(x + y, 9)) / (cx + cy)
        if measure.symmetric:
            value = 0.5 * (value + len(zlib.compress(y + x, 9)) / (cx + cy))
        out[i] = value
    return out, offsets


def _dtw_profile(s_rebased: np.ndarray, t: np.ndarray, measure: Measure, stride: int):
    m = s_rebased.size
    band = -1 if measure.window is None else int(measure.window)
    offsets = np.arange(0, t.size - m + 1, stride, dtype=np.int64)
    out = np.empty(offsets.size)
    for i, j in enumerate(offsets):
        window = t[j : j + m] - t[j]
        out[i] = kernels.dtw_core(s_rebased, window, band)
    return out, offsets


@dataclass(frozen=True)
class ComponentMatch:
    """Best match of one prototype component inside one target component.

    ``offset`` is the window start within the target component, or None when
    either side of the pair is empty. ``swapped`` marks the degenerate case
    where the prototype component was longer than the target's and the two
    sides traded roles; the match then covers the whole target component.
    """

    distance: float
    offset: Optional[int]
    swapped: bool = False


@dataclass(frozen=True)
class MatchResult:
    measure: str
    outgoing: ComponentMatch
    incoming: ComponentMatch
    combined_distance: float
    argmin_packet_index: int


@dataclass(frozen=True)
class DistanceVector:
    """Per-measure combined minima for one (prototype, trace) pair."""

    measures: tuple[str, ...]
    distances: np.ndarray
    argmin_packet_indices: np.ndarray
    matches: tuple[MatchResult, ...]

    def __len__(self) -> int:
        return len(self.measures)


class DistanceEngine:
    """Applies a fixed measure list to (prototype, trace) pairs.

    All measure computations are pure; instances hold only configuration and
    an immutable weight cache, so one engine can serve many worker threads.
    """

    def __init__(self, measures, *, stride: int = 1, jobs: int = 1):
        self.measures = parse_measures(measures)
        if stride < 1:
            raise ConfigError(f"stride must be >= 1, got {stride}")
        self.stride = stride
        self.jobs = max(1, jobs)
        self._weights: dict[tuple, WeightVector] = {}

    @property
    def measure_kinds(self) -> tuple[str, ...]:
        return tuple(m.kind for m in self.measures)

    def config_hash(self) -> str:
        payload = measures_config_json(self.measures) + f"|stride={self.stride}"
        return hashlib.sha256(payload.encode()).hexdigest()

    def _weights_for(self, measure: Measure, length: int) -> WeightVector:
        key = (measure.weight_scheme, measure.weight_base, length)
        if key not in self._weights:
            self._weights[key] = make_weights(
                measure.weight_scheme, length, base=measure.weight_base
            )
        return self._weights[key]

    def _component_best(
        self, measure: Measure, s_times: np.ndarray, t_times: np.ndarray
    ) -> ComponentMatch:
        if s_times.size == 0 or t_times.size == 0:
            return ComponentMatch(0.0, None)
        swapped = False
        s, t = s_times, t_times
        if s.size > t.size:
            s, t = t, s
            swapped = True

        kind = measure.kind
        if kind in ("matrix_profile", "euclidean", "weighted_euclidean"):
            weights = self._weights_for(measure, s.size) if kind == "weighted_euclidean" else None
            query = s if measure.normalized else s - s[0]
            profile, offsets = sliding_profile(
                query,
                t,
                normalized=bool(measure.normalized),
                weights=weights,
                rebase=not measure.normalized,
                stride=self.stride,
            )
        elif kind == "cbd":
            profile, offsets = _cbd_profile(s - s[0], t, measure, self.stride)
        else:
            profile, offsets = _dtw_profile(s - s[0], t, measure, self.stride)

        i = int(np.argmin(profile))
        distance = float(profile[i])
        offset = 0 if swapped else int(offsets[i])
        return ComponentMatch(distance, offset, swapped)

    def compute_dist(self, prototype: Prototype, trace: Union[Trace, DirectionalSplit]) -> DistanceVector:
        """Algorithm-1 best match of one prototype against one trace."""
        split = trace if isinstance(trace, DirectionalSplit) else split_directions(trace)
        matches = []
        for measure in self.measures:
            out = self._component_best(
                measure, prototype.split.outgoing_times, split.outgoing_times
            )
            inc = self._component_best(
                measure, prototype.split.incoming_times, split.incoming_times
            )
            combined = out.distance + inc.distance
            if out.offset is not None:
                packet_index = int(split.outgoing_indices[out.offset])
            elif inc.offset is not None:
                packet_index = int(split.incoming_indices[inc.offset])
            else:
                packet_index = 0
            matches.append(MatchResult(measure.kind, out, inc, combined, packet_index))
        return DistanceVector(
            measures=self.measure_kinds,
            distances=np.array([m.combined_distance for m in matches]),
            argmin_packet_indices=np.array(
                [m.argmin_packet_index for m in matches], dtype=np.int64
            ),
            matches=tuple(matches),
        )

    def compute_matrix(
        self,
        prototypes: Sequence[Prototype],
        traces: Sequence[Trace],
        jobs: Optional[int] = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Distances and argmin packet indices, shape (samples, prototypes, measures)."""
        jobs = jobs or self.jobs
        n_measures = len(self.measures)
        dist = np.empty((len(traces), len(prototypes), n_measures))
        argmin = np.empty((len(traces), len(prototypes), n_measures), dtype=np.int64)

        def one_sample(i: int) -> None:
            split = split_directions(traces[i])
            for p, proto in enumerate(prototypes):
                dv = self.compute_dist(proto, split)
                dist[i, p, :] = dv.distances
                argmin[i, p, :] = dv.argmin_packet_indices

        if jobs == 1 or len(traces) <= 1:
            for i in range(len(traces)):
                one_sample(i)
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                list(pool.map(one_sample, range(len(traces))))
        return dist, argmin

    def compute_matrix_cached(
        self,
        prototypes: Sequence[Prototype],
        traces: Sequence[Trace],
        cache_dir,
        jobs: Optional[int] = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Like :meth:`compute_matrix` but persisted under a content-hash key."""
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        key = matrix_cache_key(hash_traces(traces), hash_prototypes(prototypes), self.config_hash())
        npz_path = cache_dir / f"dist_{key}.npz"
        if npz_path.exists():
            with np.load(npz_path) as payload:
                return payload["dist"].copy(), payload["argmin"].copy()
        dist, argmin = self.compute_matrix(prototypes, traces, jobs=jobs)
        tmp = npz_path.with_suffix(".tmp.npz")
        np.savez_compressed(tmp, dist=dist, argmin=argmin)
        tmp.replace(npz_path)
        sidecar = {
            "key": key,
            "n_samples": len(traces),
            "n_prototypes": len(prototypes),
            "measures": [m.to_config() for m in self.measures],
            "stride": self.stride,
        }
        (cache_dir / f"dist_{key}.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8"
        )
        return dist, argmin


def compute_dist(
    prototype: Prototype, trace: Trace, measures, stride: int = 1
) -> DistanceVector:
    """One-shot convenience wrapper around :class:`DistanceEngine`."""
    return DistanceEngine(measures, stride=stride).compute_dist(prototype, trace)


def hash_traces(traces: Sequence[Trace]) -> str:
    digest = hashlib.sha256()
    for tr in traces:
        digest.update(tr.source_id.encode())
        digest.update(str(tr.label).encode())
        digest.update(tr.times.tobytes())
        digest.update(tr.dirs.tobytes())
    return digest.hexdigest()


def hash_prototypes(prototypes: Sequence[Prototype]) -> str:
    digest = hashlib.sha256()
    for p in prototypes:
        digest.update(f"{p.class_id}|{p.cluster_rank}|{p.strategy.value}".encode())
        digest.update(p.trace.times.tobytes())
        digest.update(p.trace.dirs.tobytes())
    return digest.hexdigest()


def matrix_cache_key(traces_hash: str, protos_hash: str, engine_hash: str) -> str:
    return hashlib.sha256(f"{traces_hash}|{protos_hash}|{engine_hash}".encode()).hexdigest()[:32]
