"""Packet-trace time series: parsing, serialization, and the directional split.

A trace is an ordered list of packets, each with an arrival time in
milliseconds since the start of the recording and a direction (outgoing from
the client, or incoming). The on-disk text form encodes one packet per line,
either as a single signed value (sign is direction, magnitude is time) or as
an explicit ``<time> <dir>`` pair.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyTrace, MalformedLine, NonMonotonicTime

#: Label assigned to traces that are not in the monitored set.
UNMONITORED = -1


class Direction(enum.IntEnum):
    OUTGOING = 1
    INCOMING = -1


@dataclass(frozen=True)
class PacketEvent:
    """A single packet: time in ms since trace start, plus direction."""

    time: float
    direction: Direction

    def __post_init__(self):
        if not (self.time >= 0 and math.isfinite(self.time)):
            raise ValueError(f"packet time must be finite and >= 0, got {self.time}")


@dataclass(frozen=True)
class Trace:
    """An ordered packet trace.

    ``times`` holds ms-since-start arrival times (non-decreasing), ``dirs``
    holds +1 for outgoing / -1 for incoming packets. Instances are immutable
    and safe to share across threads; the backing arrays are write-protected.
    """

    times: np.ndarray
    dirs: np.ndarray
    label: Optional[int] = None
    source_id: str = ""

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        dirs = np.ascontiguousarray(self.dirs, dtype=np.int8)
        if times.ndim != 1 or dirs.ndim != 1 or times.size != dirs.size:
            raise ValueError("times and dirs must be 1-d arrays of equal length")
        if times.size == 0:
            raise EmptyTrace("a trace must contain at least one packet")
        if not np.all(np.isfinite(times)):
            raise ValueError("packet times must be finite")
        if times[0] < 0:
            raise ValueError("packet times must be >= 0")
        if times.size > 1 and np.any(np.diff(times) < 0):
            raise ValueError("packet times must be non-decreasing")
        if not np.all(np.abs(dirs) == 1):
            raise ValueError("directions must be +1 or -1")
        times.setflags(write=False)
        dirs.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "dirs", dirs)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def events(self) -> tuple[PacketEvent, ...]:
        return tuple(
            PacketEvent(float(t), Direction(int(d)))
            for t, d in zip(self.times, self.dirs)
        )

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def relabel(self, label: Optional[int], source_id: Optional[str] = None) -> "Trace":
        return replace(
            self, label=label, source_id=self.source_id if source_id is None else source_id
        )


@dataclass(frozen=True)
class DirectionalSplit:
    """Per-direction component series with back-references to packet indices.

    The two components partition the source trace: every original index
    appears in exactly one of them, each component is strictly increasing in
    original index and non-decreasing in time.
    """

    outgoing_times: np.ndarray
    outgoing_indices: np.ndarray
    incoming_times: np.ndarray
    incoming_indices: np.ndarray

    def component(self, direction: Direction) -> tuple[np.ndarray, np.ndarray]:
        if direction == Direction.OUTGOING:
            return self.outgoing_times, self.outgoing_indices
        return self.incoming_times, self.incoming_indices

    def __len__(self) -> int:
        return int(self.outgoing_times.size + self.incoming_times.size)


def parse_trace(
    text: str,
    *,
    time_scale: float = 1.0,
    time_slack: float = 0.0,
    label: Optional[int] = None,
    source_id: str = "",
) -> Trace:
    """Parse the text form of a trace.

    Two line formats are auto-detected from the first data line and must not
    be mixed within one file:

    * one signed decimal per line: ``-2.4`` is an incoming packet at 2.4 ms
      (a value of exactly 0 is treated as outgoing at time 0, since the sign
      of zero carries no direction);
    * two whitespace-separated fields ``<time> <dir>`` with dir in
      {1, +1, -1}.

    Empty lines and ``#`` comments are skipped. Timestamps must be
    non-decreasing; a decrease larger than ``time_slack`` (ms, after scaling)
    raises :class:`NonMonotonicTime`, smaller decreases are tolerated and the
    events are re-sorted by time (stable). ``time_scale`` multiplies every
    timestamp, for datasets recorded in units other than milliseconds.
    """
    times: list[float] = []
    dirs: list[int] = []
    fmt: Optional[str] = None
    running_max: Optional[float] = None
    needs_resort = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fmt is None:
            fmt = "a" if len(fields) == 1 else "b"
        if fmt == "a":
            if len(fields) != 1:
                raise MalformedLine(line_no, "expected a single signed value")
            try:
                value = float(fields[0])
            except ValueError:
                raise MalformedLine(line_no, f"not a number: {fields[0]!r}") from None
            if not math.isfinite(value):
                raise MalformedLine(line_no, "non-finite value")
            time = abs(value) * time_scale
            direction = -1 if value < 0 else 1
        else:
            if len(fields) != 2:
                raise MalformedLine(line_no, "expected '<time> <dir>'")
            try:
                time = float(fields[0])
            except ValueError:
                raise MalformedLine(line_no, f"not a number: {fields[0]!r}") from None
            if not math.isfinite(time) or time < 0:
                raise MalformedLine(line_no, "time must be finite and >= 0")
            if fields[1] not in ("1", "+1", "-1"):
                raise MalformedLine(line_no, f"direction must be 1, +1 or -1, got {fields[1]!r}")
            direction = -1 if fields[1] == "-1" else 1
            time *= time_scale

        if running_max is not None and time < running_max:
            decrease = running_max - time
            if decrease > time_slack:
                raise NonMonotonicTime(line_no, decrease)
            needs_resort = True
        running_max = time if running_max is None else max(running_max, time)
        times.append(time)
        dirs.append(direction)

    if not times:
        raise EmptyTrace("no data lines in trace")

    times_arr = np.asarray(times, dtype=np.float64)
    dirs_arr = np.asarray(dirs, dtype=np.int8)
    if needs_resort:
        order = np.argsort(times_arr, kind="stable")
        times_arr = times_arr[order]
        dirs_arr = dirs_arr[order]
    return Trace(times_arr, dirs_arr, label=label, source_id=source_id)


def format_trace(trace: Trace) -> str:
    """Serialize a trace to the text form (inverse of :func:`parse_trace`).

    Uses the single-value format except when the trace contains an incoming
    packet at time exactly 0, which that format cannot express; then the
    two-field format is emitted instead.
    """
    needs_two_field = bool(np.any((trace.times == 0.0) & (trace.dirs < 0)))
    lines = []
    if needs_two_field:
        for t, d in zip(trace.times, trace.dirs):
            lines.append(f"{float(t)!r} {int(d)}")
    else:
        for t, d in zip(trace.times, trace.dirs):
            lines.append(repr(float(t)) if d > 0 else "-" + repr(float(t)))
    return "\n".join(lines) + "\n"


def read_trace(
    path, *, time_scale: float = 1.0, time_slack: float = 0.0, label: Optional[int] = None
) -> Trace:
    path = Path(path)
    return parse_trace(
        path.read_text(encoding="utf-8"),
        time_scale=time_scale,
        time_slack=time_slack,
        label=label,
        source_id=str(path),
    )


def write_trace(trace: Trace, path) -> None:
    Path(path).write_text(format_trace(trace), encoding="utf-8")


def split_directions(trace: Trace) -> DirectionalSplit:
    """Partition a trace into its outgoing and incoming components.

    The partition is stable: each component keeps the original packet order
    and carries the original packet indices for mapping matches back to
    positions in the full trace.
    """
    indices = np.arange(len(trace), dtype=np.int64)
    out_mask = trace.dirs > 0
    split = DirectionalSplit(
        outgoing_times=trace.times[out_mask],
        outgoing_indices=indices[out_mask],
        incoming_times=trace.times[~out_mask],
        incoming_indices=indices[~out_mask],
    )
    for arr in (
        split.outgoing_times,
        split.outgoing_indices,
        split.incoming_times,
        split.incoming_indices,
    ):
        arr.setflags(write=False)
    return split


def to_signed_series(trace: Trace) -> np.ndarray:
    """The signed-magnitude view: time_i for outgoing, -time_i for incoming."""
    return trace.times * trace.dirs
