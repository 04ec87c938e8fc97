"""Similarity measures and their parameters.

Five measure kinds are supported, in this canonical order:

* ``matrix_profile``: sliding euclidean with per-window z-normalization;
* ``euclidean``: sliding euclidean on raw values;
* ``weighted_euclidean``: raw sliding euclidean with position weights that
  emphasize the start of the match;
* ``cbd``: compression-based dissimilarity of SAX symbolizations;
* ``dtw``: dynamic time warping with an optional Sakoe-Chiba band.
"""

from __future__ import annotations

import enum
import json
import string
import zlib
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.stats import norm

from . import kernels
from .errors import ConfigError, InvalidLength, LengthMismatch

MEASURE_ORDER = ("matrix_profile", "euclidean", "weighted_euclidean", "cbd", "dtw")


class WeightScheme(str, enum.Enum):
    EXPONENTIAL = "exponential"
    LINEAR = "linear"
    LOGARITHMIC = "logarithmic"
    REFLECTED_LOGARITHMIC = "reflected_logarithmic"


@dataclass(frozen=True)
class WeightVector:
    scheme: WeightScheme
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


def make_weights(scheme: Union[WeightScheme, str], length: int, base: float = 0.5) -> WeightVector:
    """Build a non-increasing, non-negative weight vector of the given length.

    ``linear`` uses (l - k) / sum(1..l) for positions k = 1..l, so the last
    weight is exactly 0. ``logarithmic`` uses log(l - k + 1) normalized to
    sum 1 (the +1 avoids log 0 at the last position). ``reflected_logarithmic``
    uses -log(k / sum(1..l)) normalized to sum 1 (negated so the weights come
    out positive and decreasing). ``exponential`` uses base**(k-1), 0.5 by
    default. For length 1 the two normalized schemes degenerate to [1.0].
    """
    scheme = WeightScheme(scheme)
    if length < 1:
        raise InvalidLength(f"weight vector length must be >= 1, got {length}")
    if not 0.0 < base < 1.0:
        raise ConfigError(f"exponential base must be in (0,1), got {base}")
    k = np.arange(1, length + 1, dtype=np.float64)
    total = length * (length + 1) / 2.0
    if scheme is WeightScheme.LINEAR:
        values = (length - k) / total
    elif scheme is WeightScheme.EXPONENTIAL:
        values = base ** (k - 1)
    elif scheme is WeightScheme.LOGARITHMIC:
        raw = np.log(length - k + 1)
        s = raw.sum()
        values = raw / s if s > 0 else np.full(length, 1.0 / length)
    else:
        raw = -np.log(k / total)
        s = raw.sum()
        values = raw / s if s > 0 else np.full(length, 1.0 / length)
    return WeightVector(scheme, values)


def euclidean(a, b, weights: Optional[WeightVector] = None) -> float:
    """Point-wise (optionally weighted) euclidean distance. Never normalizes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size != b.size:
        raise LengthMismatch(f"length mismatch: {a.size} vs {b.size}")
    d = a - b
    if weights is None:
        return float(np.sqrt((d * d).sum()))
    w = weights.values
    if w.size != a.size:
        raise LengthMismatch(f"weights length {w.size} does not match inputs {a.size}")
    return float(np.sqrt((w * d * d).sum()))


def dtw(a, b, window: Optional[int] = None) -> float:
    """DTW distance with squared local cost and a final square root.

    ``window`` is the Sakoe-Chiba half-width; None means unconstrained. For
    inputs of different lengths the band is widened to the length difference
    so an alignment always exists.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise InvalidLength("dtw inputs must be non-empty")
    if window is not None and window < 0:
        raise ConfigError(f"dtw window must be >= 0, got {window}")
    band = -1 if window is None else int(window)
    return float(kernels.dtw_core(a, b, band))


@lru_cache(maxsize=32)
def _breakpoints(alphabet: int) -> np.ndarray:
    return norm.ppf(np.linspace(1.0 / alphabet, 1.0 - 1.0 / alphabet, alphabet - 1))


def _paa(z: np.ndarray, segments: int) -> np.ndarray:
    """Piecewise aggregate approximation with fractional segment boundaries."""
    n = z.size
    if segments == n:
        return z.copy()
    edges = np.linspace(0.0, n, segments + 1)
    cum = np.concatenate(([0.0], np.cumsum(z)))
    out = np.empty(segments)
    for k in range(segments):
        lo, hi = edges[k], edges[k + 1]
        ilo = int(np.floor(lo))
        ihi = int(np.ceil(hi))
        acc = cum[ihi] - cum[ilo]
        acc -= (lo - ilo) * z[ilo]
        if ihi > hi:
            acc -= (ihi - hi) * z[ihi - 1]
        out[k] = acc / (hi - lo)
    return out


def sax_encode(x, word_length: int, alphabet: int) -> str:
    """Symbolic aggregate approximation of a series.

    The series is z-normalized, reduced to ``word_length`` segment means,
    and quantized with standard-normal breakpoints into letters 'a'..; a
    constant (zero variance) series maps to the middle letter repeated.
    """
    if word_length < 1:
        raise ConfigError(f"word_length must be >= 1, got {word_length}")
    if not 2 <= alphabet <= 26:
        raise ConfigError(f"alphabet size must be in [2, 26], got {alphabet}")
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise InvalidLength("cannot symbolize an empty series")
    letters = string.ascii_lowercase
    sd = x.std()
    if sd == 0.0:
        return letters[alphabet // 2] * word_length
    z = (x - x.mean()) / sd
    paa = _paa(z, word_length)
    idx = np.searchsorted(_breakpoints(alphabet), paa, side="right")
    return "".join(letters[i] for i in idx)


def _compressed_size(data: bytes, level: int) -> int:
    return len(zlib.compress(data, level))


def default_word_length(series_length: int) -> int:
    return max(4, series_length // 8)


def cbd(
    a,
    b,
    *,
    word_length: Optional[int] = None,
    alphabet: int = 8,
    symmetric: bool = False,
    level: int = 9,
) -> float:
    """Compression-based dissimilarity C(x||y) / (C(x) + C(y)).

    x and y are the SAX words of the two series and C is the deflate-
    compressed byte length. Values land around 0.5 for identical inputs and
    approach (or slightly exceed) 1 for unrelated ones. The measure is not
    symmetric in general; ``symmetric=True`` averages both concatenation
    orders.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise InvalidLength("cbd inputs must be non-empty")
    wl_a = word_length if word_length is not None else default_word_length(a.size)
    wl_b = word_length if word_length is not None else default_word_length(b.size)
    x = sax_encode(a, wl_a, alphabet).encode("ascii")
    y = sax_encode(b, wl_b, alphabet).encode("ascii")
    cx = _compressed_size(x, level)
    cy = _compressed_size(y, level)
    value = _compressed_size(x + y, level) / (cx + cy)
    if symmetric:
        value = 0.5 * (value + _compressed_size(y + x, level) / (cx + cy))
    return float(value)


@dataclass(frozen=True)
class Measure:
    """One enabled similarity measure plus its parameters.

    ``normalized`` controls per-window z-normalization for the euclidean
    family; it defaults to True for matrix_profile and False otherwise (both
    flags can be overridden). The remaining fields apply to single kinds:
    weight_scheme/weight_base to weighted_euclidean, alphabet/word_length/
    symmetric to cbd, window to dtw.
    """

    kind: str
    normalized: Optional[bool] = None
    weight_scheme: WeightScheme = WeightScheme.REFLECTED_LOGARITHMIC
    weight_base: float = 0.5
    alphabet: int = 8
    word_length: Optional[int] = None
    symmetric: bool = False
    window: Optional[int] = None

    def __post_init__(self):
        if self.kind not in MEASURE_ORDER:
            raise ConfigError(
                f"unknown measure {self.kind!r}; expected one of {MEASURE_ORDER}"
            )
        if self.normalized is None:
            object.__setattr__(self, "normalized", self.kind == "matrix_profile")
        object.__setattr__(self, "weight_scheme", WeightScheme(self.weight_scheme))
        if not 2 <= self.alphabet <= 26:
            raise ConfigError(f"cbd alphabet must be in [2, 26], got {self.alphabet}")
        if self.word_length is not None and self.word_length < 1:
            raise ConfigError(f"cbd word_length must be >= 1, got {self.word_length}")
        if self.window is not None and self.window < 0:
            raise ConfigError(f"dtw window must be >= 0 or unbounded, got {self.window}")
        if not 0.0 < self.weight_base < 1.0:
            raise ConfigError(f"weight base must be in (0,1), got {self.weight_base}")

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, "normalized": self.normalized}
        if self.kind == "weighted_euclidean":
            cfg["weight_scheme"] = self.weight_scheme.value
            cfg["weight_base"] = self.weight_base
        if self.kind == "cbd":
            cfg["alphabet"] = self.alphabet
            cfg["word_length"] = self.word_length
            cfg["symmetric"] = self.symmetric
        if self.kind == "dtw":
            cfg["window"] = self.window
        return cfg

    @classmethod
    def from_config(cls, config: Union[str, dict, "Measure"]) -> "Measure":
        if isinstance(config, Measure):
            return config
        if isinstance(config, str):
            return cls(kind=config)
        if isinstance(config, dict):
            cfg = dict(config)
            if "weight_scheme" in cfg:
                cfg["weight_scheme"] = WeightScheme(cfg["weight_scheme"])
            return cls(**cfg)
        raise ConfigError(f"cannot build a measure from {config!r}")


def parse_measures(configs) -> list[Measure]:
    """Parse and order measure configs; duplicates of a kind are rejected."""
    measures = [Measure.from_config(c) for c in configs]
    if not measures:
        raise ConfigError("at least one measure must be enabled")
    kinds = [m.kind for m in measures]
    if len(set(kinds)) != len(kinds):
        raise ConfigError(f"duplicate measure kinds in {kinds}")
    return sorted(measures, key=lambda m: MEASURE_ORDER.index(m.kind))


def measures_config_json(measures) -> str:
    return json.dumps([m.to_config() for m in measures], sort_keys=True)
