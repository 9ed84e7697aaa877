"""Event-file parsing and discretization of timestamps into analysis periods.

Two input layouts are understood:

* ``undirected-list``: ``date,node_a,node_b`` rows (date resolution), and
* ``call-record``: ``timestamp,caller,callee,duration,tower`` rows with
  timestamps in seconds.

Periods are either fixed width or "equalized-day": the day is cut into m
subintervals holding equal shares of the calibration events, so intraday
rush hours do not masquerade as anomalies.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass
from datetime import date
from typing import Iterable, NamedTuple, Optional

__all__ = [
    "EdgeEvent",
    "ParseError",
    "ParseResult",
    "PeriodScheme",
    "parse_events",
    "equalized_day_bins",
    "fixed_width_scheme",
    "discretize",
]

DAY_SECONDS = 86400.0
_EPOCH_ORDINAL = date(1970, 1, 1).toordinal()


class EdgeEvent(NamedTuple):
    timestamp: float
    src: str
    dst: str
    directed: bool
    duration: Optional[float] = None
    category: Optional[str] = None


class ParseError(NamedTuple):
    line: int
    message: str


@dataclass
class ParseResult:
    events: list[EdgeEvent]
    errors: list[ParseError]


class MalformedInputError(ValueError):
    """Raised when the malformed-row fraction exceeds the configured limit."""

    def __init__(self, message: str, errors: list[ParseError]):
        super().__init__(message)
        self.errors = errors


def _date_to_seconds(text: str) -> float:
    d = date.fromisoformat(text)
    return (d.toordinal() - _EPOCH_ORDINAL) * DAY_SECONDS


def _parse_row(row: list[str], fmt: str) -> EdgeEvent:
    if fmt == "undirected-list":
        if len(row) != 3:
            raise ValueError(f"expected 3 fields, got {len(row)}")
        ts = _date_to_seconds(row[0].strip())
        a, b = row[1].strip(), row[2].strip()
        if not a or not b:
            raise ValueError("empty node name")
        return EdgeEvent(ts, a, b, directed=False)
    if fmt == "call-record":
        if len(row) != 5:
            raise ValueError(f"expected 5 fields, got {len(row)}")
        ts = float(row[0])
        caller, callee = row[1].strip(), row[2].strip()
        if not caller or not callee:
            raise ValueError("empty node name")
        duration = float(row[3]) if row[3].strip() else None
        tower = row[4].strip() or None
        return EdgeEvent(ts, caller, callee, directed=True, duration=duration, category=tower)
    raise ValueError(f"unknown format {fmt!r}")


def parse_events(
    path,
    fmt: str,
    *,
    header: bool = False,
    max_bad_fraction: float = 0.01,
) -> ParseResult:
    """Parse an event CSV, collecting malformed rows instead of dying on them.

    Raises MalformedInputError if more than ``max_bad_fraction`` of the data
    rows fail to parse, and OSError if the file itself is unreadable.
    """
    events: list[EdgeEvent] = []
    errors: list[ParseError] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if header and line_no == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                events.append(_parse_row(row, fmt))
            except ValueError as exc:
                errors.append(ParseError(line_no, str(exc)))
    total = len(events) + len(errors)
    if total and len(errors) / total > max_bad_fraction:
        raise MalformedInputError(
            f"{len(errors)} of {total} rows malformed "
            f"(limit {max_bad_fraction:.1%}); first: line {errors[0].line}: {errors[0].message}",
            errors,
        )
    return ParseResult(events, errors)


@dataclass(frozen=True)
class PeriodScheme:
    """Maps timestamps to period indices.

    kind "fixed": consecutive windows of ``width`` seconds from ``origin``.
    kind "equalized": each day from ``origin`` is split at ``boundaries``
    (seconds within the day, strictly increasing) into m left-closed bins;
    the period index is day * m + bin.
    """

    kind: str
    origin: float = 0.0
    width: float = 0.0
    boundaries: tuple = ()

    def __post_init__(self):
        if self.kind == "fixed":
            if not self.width > 0.0:
                raise ValueError("fixed-width scheme needs width > 0")
        elif self.kind == "equalized":
            bounds = self.boundaries
            if any(not (0.0 < b < DAY_SECONDS) for b in bounds):
                raise ValueError("equalized boundaries must fall inside the day")
            if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
                raise ValueError("equalized boundaries must be strictly increasing")
        else:
            raise ValueError(f"unknown scheme kind {self.kind!r}")

    @property
    def bins_per_day(self) -> int:
        return len(self.boundaries) + 1

    def period_of(self, timestamp: float) -> int:
        rel = timestamp - self.origin
        if rel < 0.0:
            raise ValueError(f"timestamp {timestamp} precedes the scheme origin {self.origin}")
        if self.kind == "fixed":
            return int(rel // self.width)
        day, tod = divmod(rel, DAY_SECONDS)
        return int(day) * self.bins_per_day + bisect_right(self.boundaries, tod)


def fixed_width_scheme(width: float, origin: float = 0.0) -> PeriodScheme:
    return PeriodScheme("fixed", origin=origin, width=width)


def equalized_day_bins(
    events: Iterable[EdgeEvent], m: int, origin: float = 0.0
) -> PeriodScheme:
    """Cut the day into m bins of equal empirical event frequency.

    Sorts the times-of-day of the calibration events and places the j-th
    boundary at the first value of bin j+1, i.e. at sorted[ceil(j*T/m)] for
    j = 1..m-1 (0-based).  Bins are left-closed, right-open.
    """
    if m < 1:
        raise ValueError("need at least one bin")
    tods = sorted((e.timestamp - origin) % DAY_SECONDS for e in events)
    total = len(tods)
    if total < m:
        raise ValueError(f"degenerate binning: {total} events cannot fill {m} bins")
    if m == 1:
        return PeriodScheme("equalized", origin=origin, boundaries=())
    boundaries = []
    for j in range(1, m):
        idx = -(-j * total // m)  # ceil(j*T/m)
        boundaries.append(tods[idx])
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])) or not (
        0.0 < boundaries[0] and boundaries[-1] < DAY_SECONDS
    ):
        raise ValueError("degenerate binning: tied cut values collapse a bin")
    return PeriodScheme("equalized", origin=origin, boundaries=tuple(boundaries))


def discretize(
    events: Iterable[EdgeEvent], scheme: PeriodScheme
) -> list[list[EdgeEvent]]:
    """Group events into periods, materializing empty periods in between.

    Returns a list indexed by period (0-based); every event lands in exactly
    one group and silent periods appear as empty lists so zero increments can
    be scored.
    """
    groups: dict[int, list[EdgeEvent]] = {}
    top = -1
    for event in events:
        idx = scheme.period_of(event.timestamp)
        groups.setdefault(idx, []).append(event)
        top = max(top, idx)
    return [groups.get(i, []) for i in range(top + 1)]
