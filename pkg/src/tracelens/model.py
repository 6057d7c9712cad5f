"""Core domain types: metrics, node identities, time series and periods.

Nothing here touches the filesystem or computes statistics. All types are
immutable once built; the numpy arrays inside a :class:`TimeSeries` are
flagged read-only.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConfigError, InvalidPeriod, MalformedNodeId, OverlappingPeriods

log = logging.getLogger(__name__)

# --------------------------------------------------------------------------
# metrics

_KNOWN_METRICS = {
    "load1": "",
    "power_watts": "W",
    "ram_utilization_pct": "%",
    "ambient_temp_celsius": "°C",
}


@dataclass(frozen=True, order=True)
class MetricKind:
    """A metric token: one of the four built-ins, or ``custom:<label>``."""

    name: str
    label: str | None = None

    def __post_init__(self):
        if self.name == "custom":
            if not self.label:
                raise ConfigError("custom metric needs a non-empty label")
        elif self.name not in _KNOWN_METRICS:
            raise ConfigError(f"unknown metric {self.name!r}")
        elif self.label is not None:
            raise ConfigError(f"metric {self.name!r} takes no label")

    @classmethod
    def custom(cls, label: str) -> MetricKind:
        return cls("custom", label)

    @classmethod
    def parse(cls, token: str) -> MetricKind:
        token = token.strip()
        if token.startswith("custom:"):
            return cls.custom(token[len("custom:"):])
        return cls(token)

    @property
    def token(self) -> str:
        return f"custom:{self.label}" if self.name == "custom" else self.name

    @property
    def unit(self) -> str:
        return _KNOWN_METRICS.get(self.name, "")

    @property
    def slug(self) -> str:
        """Filesystem-safe form of :attr:`token`."""
        return re.sub(r"[^A-Za-z0-9_.-]+", "_", self.token)

    def __str__(self):
        return self.token


LOAD1 = MetricKind("load1")
POWER = MetricKind("power_watts")
RAM = MetricKind("ram_utilization_pct")
TEMPERATURE = MetricKind("ambient_temp_celsius")
BUILTIN_METRICS = (LOAD1, POWER, RAM, TEMPERATURE)

# --------------------------------------------------------------------------
# nodes


class NodeClass(enum.Enum):
    GENERIC = "generic"
    ML = "ml"

    @classmethod
    def parse(cls, text: str) -> NodeClass:
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown node class {text!r} (expected generic|ml)") from None

    def __str__(self):
        return self.value


_NODE_RE = re.compile(r"[rR](\d+)[nN](\d+)")


@dataclass(frozen=True)
class NodeRef:
    rack: int
    node: int
    raw: str = ""

    def __post_init__(self):
        if self.rack < 0 or self.node < 0:
            raise MalformedNodeId(f"negative rack/node in {self!r}")
        if not self.raw:
            object.__setattr__(self, "raw", format_node_id(self))

    # identity is (rack, node); "R30N1" and "r30n1" are the same machine
    def __eq__(self, other):
        if not isinstance(other, NodeRef):
            return NotImplemented
        return (self.rack, self.node) == (other.rack, other.node)

    def __hash__(self):
        return hash((self.rack, self.node))

    def __lt__(self, other):
        return self.sort_key < other.sort_key

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.rack, self.node)

    @property
    def canonical(self) -> str:
        return format_node_id(self)

    def __str__(self):
        return self.canonical


def parse_node_id(raw: str) -> NodeRef:
    """Parse ids like ``r30n1`` (case-insensitive, no other shapes)."""
    m = _NODE_RE.fullmatch(raw) if isinstance(raw, str) else None
    if m is None:
        raise MalformedNodeId(repr(raw))
    return NodeRef(int(m.group(1)), int(m.group(2)), raw)


def format_node_id(ref: NodeRef) -> str:
    return f"r{ref.rack}n{ref.node}"


# --------------------------------------------------------------------------
# series


class Sample(NamedTuple):
    timestamp: float
    value: float | None  # None marks a missing observation


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class TimeSeries:
    """Samples of one metric on one node, strictly increasing in time.

    Missing observations are tracked by the boolean ``present`` mask; the
    matching slot in ``values`` holds 0.0 and must never be read as data.
    Use :meth:`from_unsorted` for raw input that may be unordered or carry
    duplicate timestamps.
    """

    __slots__ = ("node", "metric", "timestamps", "values", "present")

    def __init__(self, node: NodeRef, metric: MetricKind, timestamps, values, present=None):
        ts = np.array(timestamps, dtype=np.float64)
        vals = np.array(values, dtype=np.float64)
        if ts.ndim != 1 or ts.shape != vals.shape:
            raise ValueError("timestamps and values must be 1-d arrays of equal length")
        if present is None:
            mask = np.ones(len(ts), dtype=bool)
        else:
            mask = np.array(present, dtype=bool)
            if mask.shape != ts.shape:
                raise ValueError("present mask length differs from timestamps")
        if not np.all(np.isfinite(ts)):
            raise ValueError("timestamps must be finite")
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(vals[mask])):
            raise ValueError("present values must be finite")
        vals[~mask] = 0.0
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "timestamps", _readonly(ts))
        object.__setattr__(self, "values", _readonly(vals))
        object.__setattr__(self, "present", _readonly(mask))

    def __setattr__(self, name, value):
        raise AttributeError("TimeSeries is immutable")

    @classmethod
    def from_unsorted(cls, node, metric, timestamps, values, present=None) -> TimeSeries:
        """Sort by time and collapse duplicate timestamps to their mean."""
        ts = np.asarray(timestamps, dtype=np.float64)
        vals = np.asarray(values, dtype=np.float64)
        mask = np.ones(len(ts), dtype=bool) if present is None else np.asarray(present, dtype=bool)
        order = np.argsort(ts, kind="stable")
        ts, vals, mask = ts[order], vals[order], mask[order]
        if len(ts) > 1 and np.any(ts[1:] == ts[:-1]):
            uniq, first, counts = np.unique(ts, return_index=True, return_counts=True)
            log.warning(
                "%s %s: %d duplicate timestamps collapsed to their mean",
                node, metric, int(np.sum(counts - 1)),
            )
            w = np.where(mask, vals, 0.0)
            sums = np.add.reduceat(w, first)
            n_present = np.add.reduceat(mask.astype(np.int64), first)
            new_mask = n_present > 0
            new_vals = np.where(new_mask, sums / np.maximum(n_present, 1), 0.0)
            ts, vals, mask = uniq, new_vals, new_mask
        return cls(node, metric, ts, vals, mask)

    @classmethod
    def from_samples(cls, node, metric, samples: Iterable[tuple[float, float | None]]) -> TimeSeries:
        samples = list(samples)
        ts = [s[0] for s in samples]
        mask = [s[1] is not None for s in samples]
        vals = [0.0 if s[1] is None else s[1] for s in samples]
        return cls.from_unsorted(node, metric, ts, vals, mask)

    def __len__(self):
        return len(self.timestamps)

    def __repr__(self):
        return f"TimeSeries({self.node}, {self.metric}, n={len(self)}, missing={self.n_missing})"

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.node == other.node
            and self.metric == other.metric
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.present, other.present)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def samples(self) -> tuple[Sample, ...]:
        return tuple(
            Sample(float(t), float(v) if p else None)
            for t, v, p in zip(self.timestamps, self.values, self.present)
        )

    @property
    def n_missing(self) -> int:
        return int(len(self) - np.count_nonzero(self.present))

    def present_values(self) -> np.ndarray:
        return self.values[self.present]

    def present_timestamps(self) -> np.ndarray:
        return self.timestamps[self.present]

    def between(self, start: float | None = None, end: float | None = None) -> TimeSeries:
        """Samples with ``start <= t < end``; either bound may be open."""
        keep = np.ones(len(self), dtype=bool)
        if start is not None:
            keep &= self.timestamps >= start
        if end is not None:
            keep &= self.timestamps < end
        return TimeSeries(self.node, self.metric, self.timestamps[keep], self.values[keep], self.present[keep])


# --------------------------------------------------------------------------
# time and periods

_OFFSET_RE = re.compile(r"([+-])(\d{2}):?(\d{2})")


def parse_utc_offset(text: str) -> timezone:
    """``+01:00`` -> fixed-offset tzinfo. ``Z`` and ``UTC`` are accepted."""
    text = text.strip()
    if text.upper() in ("Z", "UTC"):
        return timezone.utc
    m = _OFFSET_RE.fullmatch(text)
    if not m:
        raise ConfigError(f"bad UTC offset {text!r} (expected +HH:MM)")
    sign = -1 if m.group(1) == "-" else 1
    hours, minutes = int(m.group(2)), int(m.group(3))
    if hours > 23 or minutes > 59:
        raise ConfigError(f"bad UTC offset {text!r}")
    return timezone(sign * timedelta(hours=hours, minutes=minutes))


def format_utc_offset(tz: timezone) -> str:
    secs = int(tz.utcoffset(None).total_seconds())
    sign = "-" if secs < 0 else "+"
    secs = abs(secs)
    return f"{sign}{secs // 3600:02d}:{secs % 3600 // 60:02d}"


DEFAULT_TZ = parse_utc_offset("+01:00")


def offset_seconds(tz: timezone) -> int:
    return int(tz.utcoffset(None).total_seconds())


def local_epoch(when: date | datetime | str, tz: timezone = DEFAULT_TZ) -> int:
    """Epoch seconds of a wall-clock date/time in the fixed offset ``tz``.

    Strings are ISO dates (``2020-02-27``) or date-times (``2020-02-27T12:00``).
    """
    if isinstance(when, str):
        try:
            when = datetime.fromisoformat(when.strip())
        except ValueError:
            raise ConfigError(f"bad date {when!r} (expected YYYY-MM-DD[THH:MM[:SS]])") from None
    if not isinstance(when, datetime):
        when = datetime(when.year, when.month, when.day)
    if when.tzinfo is None:
        when = when.replace(tzinfo=tz)
    return int(when.timestamp())


def format_local(ts: float, tz: timezone = DEFAULT_TZ) -> str:
    return datetime.fromtimestamp(ts, tz).strftime("%Y-%m-%dT%H:%M:%S")


@dataclass(frozen=True)
class Period:
    """Half-open interval ``[start, end)`` in epoch seconds."""

    label: str
    start: float
    end: float

    def __post_init__(self):
        if not self.start < self.end:
            raise InvalidPeriod(f"{self.label}: start must precede end")

    def contains(self, t) -> np.ndarray | bool:
        return (t >= self.start) & (t < self.end)

    def overlaps(self, other: Period) -> bool:
        return not (self.end <= other.start or other.end <= self.start)


@dataclass(frozen=True)
class PeriodPair:
    a: Period
    b: Period

    def __post_init__(self):
        if self.a.overlaps(self.b):
            raise OverlappingPeriods(f"{self.a.label} and {self.b.label} overlap")

    def swapped(self) -> PeriodPair:
        return PeriodPair(self.b, self.a)

    @property
    def span(self) -> Period:
        return Period(
            f"{self.a.label}+{self.b.label}",
            min(self.a.start, self.b.start),
            max(self.a.end, self.b.end),
        )


DEFAULT_SPLIT_DATE = "2020-02-27"
DEFAULT_SPAN = ("2020-01-01", "2020-08-13")


def split_pair(
    split: date | str = DEFAULT_SPLIT_DATE,
    tz: timezone = DEFAULT_TZ,
    start: date | str = DEFAULT_SPAN[0],
    end: date | str = DEFAULT_SPAN[1],
) -> PeriodPair:
    """Non-covid ``[start, split)`` versus covid ``[split, end)`` at local midnight."""
    s, m, e = local_epoch(start, tz), local_epoch(split, tz), local_epoch(end, tz)
    return PeriodPair(Period("non-covid", s, m), Period("covid", m, e))


def default_pair(tz: timezone = DEFAULT_TZ) -> PeriodPair:
    return split_pair(DEFAULT_SPLIT_DATE, tz)
