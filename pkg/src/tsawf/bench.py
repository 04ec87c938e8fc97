"""Wall-clock benchmarks of the distance measures.

Times the sliding search per measure over a grid of (series length, window
length) pairs. For the euclidean family both the FFT fast path and the
per-offset naive kernel are timed and the speedup reported; when numba is
available the numpy fallback kernel is timed alongside it. CBD and DTW have
no FFT formulation, so they run their window loops on a capped number of
offsets (the applied stride is reported).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .engine import _cbd_profile, _dtw_profile, sliding_profile
from .measures import Measure, make_weights, parse_measures

# window-loop measures evaluate at most this many offsets per bench cell
_MAX_LOOP_WINDOWS = 256


@dataclass
class BenchRow:
    measure: str
    n: int
    m: int
    seconds: float
    naive_seconds: Optional[float] = None
    numpy_kernel_seconds: Optional[float] = None
    speedup_fft_vs_naive: Optional[float] = None
    stride: int = 1
    slowest: bool = False


def _time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return float(best)


def bench_distances(
    measures,
    sizes: Optional[list[tuple[int, int]]] = None,
    repeats: int = 3,
    seed: int = 0,
) -> list[BenchRow]:
    measures = parse_measures(measures)
    sizes = sizes or [(30000, 3000)]
    rng = np.random.default_rng(seed)
    kernels.warmup()

    rows: list[BenchRow] = []
    for n, m in sizes:
        t = np.cumsum(rng.exponential(5.0, size=n))
        s = t[n // 3 : n // 3 + m].copy()
        for measure in measures:
            kind = measure.kind
            if kind in ("matrix_profile", "euclidean", "weighted_euclidean"):
                weights = (
                    make_weights(measure.weight_scheme, m, base=measure.weight_base)
                    if kind == "weighted_euclidean"
                    else None
                )
                kwargs = dict(
                    normalized=bool(measure.normalized),
                    weights=weights,
                    rebase=not measure.normalized,
                )
                fast = _time(lambda: sliding_profile(s, t, use_fft=True, **kwargs), repeats)
                naive = _time(lambda: sliding_profile(s, t, use_fft=False, **kwargs), repeats)
                numpy_kernel = None
                if kernels.NUMBA_ENABLED:
                    w_arr = weights.values if weights is not None else np.ones(m)
                    if measure.normalized:
                        sig = s.std()
                        s_hat = (s - s.mean()) / sig if sig > 0 else np.zeros_like(s)
                        numpy_kernel = _time(
                            lambda: kernels.profile_znorm_numpy(s_hat, sig == 0, t, w_arr, 1),
                            repeats,
                        )
                    else:
                        numpy_kernel = _time(
                            lambda: kernels.profile_raw_numpy(s - s[0], t, w_arr, True, 1),
                            repeats,
                        )
                rows.append(
                    BenchRow(
                        measure=kind,
                        n=n,
                        m=m,
                        seconds=fast,
                        naive_seconds=naive,
                        numpy_kernel_seconds=numpy_kernel,
                        speedup_fft_vs_naive=naive / fast if fast > 0 else None,
                    )
                )
            else:
                width = n - m + 1
                stride = max(1, width // _MAX_LOOP_WINDOWS)
                if kind == "cbd":
                    seconds = _time(lambda: _cbd_profile(s - s[0], t, measure, stride), repeats)
                else:
                    seconds = _time(lambda: _dtw_profile(s - s[0], t, measure, stride), repeats)
                # scale to the full stride-1 cost for an apples-to-apples column
                full = seconds * (width / max(1, len(range(0, width, stride))))
                rows.append(BenchRow(measure=kind, n=n, m=m, seconds=full, stride=stride))

    if rows:
        slowest = max(range(len(rows)), key=lambda i: rows[i].seconds)
        rows[slowest].slowest = True
    return rows


def bench_rows_json(rows: list[BenchRow]) -> str:
    return json.dumps(
        {"backend": kernels.backend_name(), "rows": [asdict(r) for r in rows]},
        indent=2,
        sort_keys=True,
    )
