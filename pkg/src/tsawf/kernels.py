"""Hot inner loops: per-offset sliding distance profiles and the DTW recursion.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
fallback with identical semantics. The numba path is used when available;
set ``TSAWF_DISABLE_NUMBA=1`` to force the numpy path (``tsawf bench``
compares the two). The numba kernels deliberately avoid fastmath so their
arithmetic stays IEEE-754 compliant and bit-comparable to plain Python.

Profile conventions shared by all backends:

* offsets are ``0, stride, 2*stride, ...`` up to ``len(t) - len(s)``;
* raw mode compares window values (optionally re-based by subtracting the
  window's first value) against ``s`` as given;
* normalized mode z-normalizes each window with its own mean and population
  std and compares against the pre-z-normalized query; a zero-variance
  window scores 0 against a zero-variance query and sqrt(sum(w)) otherwise.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLE = os.environ.get("TSAWF_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and not _DISABLE

# elements per window-matrix chunk in the numpy fallbacks
_CHUNK = 1 << 22


def _offsets(n: int, m: int, stride: int) -> np.ndarray:
    return np.arange(0, n - m + 1, stride, dtype=np.int64)


# ---------------------------------------------------------------------------
# numpy fallbacks


def profile_raw_numpy(
    s: np.ndarray, t: np.ndarray, w: np.ndarray, rebase: bool, stride: int
) -> np.ndarray:
    m = s.size
    offs = _offsets(t.size, m, stride)
    out = np.empty(offs.size)
    windows = np.lib.stride_tricks.sliding_window_view(t, m)
    step = max(1, _CHUNK // m)
    for lo in range(0, offs.size, step):
        sel = offs[lo : lo + step]
        block = windows[sel]
        if rebase:
            block = block - t[sel][:, None]
        diff = block - s
        out[lo : lo + sel.size] = np.sqrt(np.einsum("ij,j,ij->i", diff, w, diff))
    return out


def profile_znorm_numpy(
    s_hat: np.ndarray, s_const: bool, t: np.ndarray, w: np.ndarray, stride: int
) -> np.ndarray:
    m = s_hat.size
    offs = _offsets(t.size, m, stride)
    out = np.empty(offs.size)
    windows = np.lib.stride_tricks.sliding_window_view(t, m)
    flat = math.sqrt(w.sum())
    step = max(1, _CHUNK // m)
    for lo in range(0, offs.size, step):
        sel = offs[lo : lo + step]
        block = windows[sel]
        mu = block.mean(axis=1)
        sig = block.std(axis=1)
        const = sig == 0.0
        if s_const:
            out[lo : lo + sel.size] = np.where(const, 0.0, flat)
            continue
        z = (block - mu[:, None]) / np.where(const, 1.0, sig)[:, None]
        diff = z - s_hat
        vals = np.sqrt(np.einsum("ij,j,ij->i", diff, w, diff))
        vals[const] = flat
        out[lo : lo + sel.size] = vals
    return out


def dtw_numpy(a: np.ndarray, b: np.ndarray, band: int) -> float:
    n, m = a.size, b.size
    w = band if band >= 0 else n + m
    w = max(w, abs(n - m))
    prev = np.full(m + 1, np.inf)
    cur = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[:] = np.inf
        jlo = max(1, i - w)
        jhi = min(m, i + w)
        ai = a[i - 1]
        for j in range(jlo, jhi + 1):
            d = (ai - b[j - 1]) ** 2
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = d + best
        prev, cur = cur, prev
    return math.sqrt(prev[m])


# ---------------------------------------------------------------------------
# numba kernels

if HAVE_NUMBA:

    @njit(nogil=True)
    def _nb_profile_raw(s, t, w, rebase, stride):
        m = s.size
        width = t.size - m + 1
        count = (width + stride - 1) // stride
        out = np.empty(count)
        for idx in range(count):
            j = idx * stride
            base = t[j] if rebase else 0.0
            acc = 0.0
            for k in range(m):
                d = (t[j + k] - base) - s[k]
                acc += w[k] * d * d
            out[idx] = math.sqrt(acc)
        return out

    @njit(nogil=True)
    def _nb_profile_znorm(s_hat, s_const, t, w, stride):
        m = s_hat.size
        width = t.size - m + 1
        count = (width + stride - 1) // stride
        sw = 0.0
        for k in range(m):
            sw += w[k]
        flat = math.sqrt(sw)
        out = np.empty(count)
        for idx in range(count):
            j = idx * stride
            mu = 0.0
            for k in range(m):
                mu += t[j + k]
            mu /= m
            var = 0.0
            for k in range(m):
                dv = t[j + k] - mu
                var += dv * dv
            var /= m
            if var <= 0.0:
                out[idx] = 0.0 if s_const else flat
                continue
            if s_const:
                out[idx] = flat
                continue
            sig = math.sqrt(var)
            acc = 0.0
            for k in range(m):
                d = (t[j + k] - mu) / sig - s_hat[k]
                acc += w[k] * d * d
            out[idx] = math.sqrt(acc)
        return out

    @njit(nogil=True)
    def _nb_dtw(a, b, band):
        n = a.size
        m = b.size
        w = band if band >= 0 else n + m
        diff = n - m if n > m else m - n
        if w < diff:
            w = diff
        prev = np.full(m + 1, np.inf)
        cur = np.full(m + 1, np.inf)
        prev[0] = 0.0
        for i in range(1, n + 1):
            for j in range(m + 1):
                cur[j] = np.inf
            jlo = i - w if i - w > 1 else 1
            jhi = i + w if i + w < m else m
            ai = a[i - 1]
            for j in range(jlo, jhi + 1):
                d = (ai - b[j - 1]) ** 2
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if cur[j - 1] < best:
                    best = cur[j - 1]
                cur[j] = d + best
            tmp = prev
            prev = cur
            cur = tmp
        return math.sqrt(prev[m])

    def profile_raw_numba(s, t, w, rebase, stride):
        return _nb_profile_raw(s, t, w, bool(rebase), stride)

    def profile_znorm_numba(s_hat, s_const, t, w, stride):
        return _nb_profile_znorm(s_hat, bool(s_const), t, w, stride)

    def dtw_numba(a, b, band):
        return float(_nb_dtw(a, b, band))

else:  # pragma: no cover
    profile_raw_numba = None
    profile_znorm_numba = None
    dtw_numba = None


if NUMBA_ENABLED:
    profile_raw = profile_raw_numba
    profile_znorm = profile_znorm_numba
    dtw_core = dtw_numba
else:
    profile_raw = profile_raw_numpy
    profile_znorm = profile_znorm_numpy
    dtw_core = dtw_numpy


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def warmup() -> None:
    """Trigger JIT compilation so benchmarks do not time the compiler."""
    if not NUMBA_ENABLED:
        return
    s = np.array([0.0, 1.0])
    t = np.array([0.0, 1.0, 2.0, 3.0])
    w = np.ones(2)
    profile_raw(s, t, w, True, 1)
    profile_raw(s, t, w, False, 1)
    profile_znorm(s, False, t, w, 1)
    dtw_core(s, t, -1)
