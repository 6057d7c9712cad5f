"""Numeric kernels: resampling, period splits, summary statistics, ECDF, box
statistics, Gaussian KDE, seasonal profiles and rack pooling.

Conventions
-----------
* Quantiles use linear interpolation between closest ranks (position
  ``p * (n - 1)`` in the sorted sample, "type 7").
* Standard deviation in summaries is the population form (ddof=0).
* KDE bandwidth follows Scott's rule with the ddof=1 sample std.
* Missing observations never enter a computation; callers pass present
  values only.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from datetime import timezone
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .catalog import Catalog
from .errors import DegenerateDistribution, EmptyInput, EmptyPeriodWarning, MixedMetrics, UnknownNode
from .model import DEFAULT_TZ, Period, PeriodPair, TimeSeries, offset_seconds

DAY = 86400
HOUR = 3600
# 1970-01-01 was a Thursday; shifting by 3 days puts Monday at index 0
_EPOCH_WEEKDAY_SHIFT = 3


def _as_values(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("no values")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite; drop missing samples first")
    return x


def quantile_sorted(s: np.ndarray, p: float) -> float:
    """Type-7 quantile of an already sorted, non-empty array."""
    pos = p * (len(s) - 1)
    lo = math.floor(pos)
    frac = pos - lo
    if frac == 0.0:
        return float(s[lo])
    return float(s[lo] + frac * (s[lo + 1] - s[lo]))


# --------------------------------------------------------------------------
# resampling and period splits


def resample(series: TimeSeries, interval_s: float) -> TimeSeries:
    """Mean of present samples per ``[k*interval, (k+1)*interval)`` bucket.

    Each output sample sits at its bucket start. Buckets without any present
    sample are omitted rather than zero-filled.
    """
    if not interval_s > 0:
        raise ValueError("interval_s must be positive")
    starts, means = kernels.bucket_mean(
        np.ascontiguousarray(series.timestamps),
        np.ascontiguousarray(series.values),
        np.ascontiguousarray(series.present, dtype=np.uint8),
        float(interval_s),
    )
    return TimeSeries(series.node, series.metric, starts, means)


class PeriodSplit(NamedTuple):
    a: TimeSeries
    b: TimeSeries

    @property
    def a_empty(self) -> bool:
        return len(self.a) == 0

    @property
    def b_empty(self) -> bool:
        return len(self.b) == 0


def split_periods(series: TimeSeries, pair: PeriodPair) -> PeriodSplit:
    """Samples inside each half-open period of ``pair``.

    Emits :class:`EmptyPeriodWarning` when a side gets no samples.
    """
    out = PeriodSplit(
        series.between(pair.a.start, pair.a.end),
        series.between(pair.b.start, pair.b.end),
    )
    for side, period in ((out.a, pair.a), (out.b, pair.b)):
        if len(side) == 0:
            warnings.warn(
                f"{series.node} {series.metric}: no samples in period {period.label!r}",
                EmptyPeriodWarning,
                stacklevel=2,
            )
    return out


# --------------------------------------------------------------------------
# distribution summaries


@dataclass(frozen=True)
class StatsSummary:
    count: int
    mean: float
    std: float
    min: float
    q1: float
    median: float
    q3: float
    max: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def summary_stats(values) -> StatsSummary:
    x = _as_values(values)
    s = np.sort(x)
    mean = float(np.mean(x))
    std = math.sqrt(float(np.mean((x - mean) ** 2)))
    return StatsSummary(
        count=len(x),
        mean=mean,
        std=std,
        min=float(s[0]),
        q1=quantile_sorted(s, 0.25),
        median=quantile_sorted(s, 0.5),
        q3=quantile_sorted(s, 0.75),
        max=float(s[-1]),
    )


@dataclass(frozen=True, eq=False)
class EcdfCurve:
    x: np.ndarray
    p: np.ndarray

    def __len__(self):
        return len(self.x)


def ecdf(values) -> EcdfCurve:
    """Sorted unique values with the fraction of the sample at or below each."""
    x = _as_values(values)
    uniq, counts = np.unique(x, return_counts=True)
    p = np.cumsum(counts) / len(x)
    uniq.flags.writeable = False
    p.flags.writeable = False
    return EcdfCurve(uniq, p)


@dataclass(frozen=True, eq=False)
class BoxStats:
    q1: float
    median: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    outliers: np.ndarray  # sorted ascending

    @property
    def fences(self) -> tuple[float, float]:
        return (self.q1 - 1.5 * self.iqr, self.q3 + 1.5 * self.iqr)


def box_stats(values) -> BoxStats:
    """Tukey box: whiskers are the most extreme points within 1.5 IQR."""
    s = np.sort(_as_values(values))
    q1, med, q3 = (quantile_sorted(s, p) for p in (0.25, 0.5, 0.75))
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = (s >= lo) & (s <= hi)
    kept = s[inside]
    outliers = s[~inside]
    outliers.flags.writeable = False
    return BoxStats(q1, med, q3, iqr, float(kept[0]), float(kept[-1]), outliers)


# --------------------------------------------------------------------------
# kernel density

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

KDE_GRID_POINTS = 200
KDE_PAD_BANDWIDTHS = 3.0


@dataclass(frozen=True, eq=False)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    max_density: float
    bandwidth: float

    @property
    def peak_x(self) -> float:
        return float(self.grid[int(np.argmax(self.density))])

    def integral(self) -> float:
        return float(_trapezoid(self.density, self.grid))


def scott_bandwidth(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) * len(x) ** (-0.2)


def kde(values, grid_points: int = KDE_GRID_POINTS) -> DensityCurve:
    """Gaussian KDE with Scott's bandwidth on an evenly spaced grid.

    The grid spans the data plus three bandwidths beyond the edge cells. Each
    grid value is the estimate averaged over the grid cell centred on it, so
    the curve keeps unit mass even when the bandwidth is narrower than the
    grid spacing (heavy-tailed inputs).
    """
    x = np.sort(_as_values(values))
    if len(x) < 2:
        raise DegenerateDistribution("need at least two values")
    if x[0] == x[-1]:
        raise DegenerateDistribution("all values are equal")
    h = scott_bandwidth(x)
    if not h > 0:
        raise DegenerateDistribution("zero bandwidth")
    # pad so even the outermost cells (which trapezoid integration half-weights)
    # end three bandwidths clear of the data: pad = 3h + step/2
    span = x[-1] - x[0]
    pad = (KDE_PAD_BANDWIDTHS * h * (grid_points - 1) + span / 2) / (grid_points - 2)
    grid = np.linspace(x[0] - pad, x[-1] + pad, grid_points)
    step = grid[1] - grid[0]
    edges = np.empty(grid_points + 1)
    edges[:-1] = grid - step / 2
    edges[-1] = grid[-1] + step / 2
    cdf = kernels.gauss_cdf_mean(np.ascontiguousarray(x), edges, h)
    density = np.maximum(np.diff(cdf) / step, 0.0)
    grid.flags.writeable = False
    density.flags.writeable = False
    return DensityCurve(grid, density, float(density.max()), h)


# --------------------------------------------------------------------------
# seasonal profiles


class ProfileKind(enum.Enum):
    HOURLY = "hourly"
    WEEKLY = "weekly"
    SEASON = "season"

    def __str__(self):
        return self.value


class AggMode(enum.Enum):
    SUM = "sum"
    MEAN = "mean"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Profile:
    """Per-bin aggregate over nodes; ``None`` marks a bin no node reached.

    For season profiles ``origin`` is the epoch of local midnight of bin 0.
    The band is the interquartile range of the per-node bin means (scaled by
    the contributing node count under ``sum``), widened where needed so it
    always contains the aggregate.
    """

    kind: ProfileKind
    agg: AggMode
    bin_values: tuple[float | None, ...]
    bin_counts: tuple[int, ...]
    band_low: tuple[float | None, ...]
    band_high: tuple[float | None, ...]
    node_counts: tuple[int, ...]
    origin: float | None = None

    def __len__(self):
        return len(self.bin_values)

    @property
    def present(self) -> list[bool]:
        return [c > 0 for c in self.bin_counts]


def local_days(timestamps: np.ndarray, tz: timezone) -> np.ndarray:
    return np.floor((timestamps + offset_seconds(tz)) / DAY).astype(np.int64)


def bin_index(timestamps: np.ndarray, kind: ProfileKind, tz: timezone, first_day: int = 0) -> np.ndarray:
    local = timestamps + offset_seconds(tz)
    hour = np.floor(local / HOUR).astype(np.int64) % 24
    if kind is ProfileKind.HOURLY:
        return hour
    day = np.floor(local / DAY).astype(np.int64)
    if kind is ProfileKind.WEEKLY:
        return ((day + _EPOCH_WEEKDAY_SHIFT) % 7) * 24 + hour
    return day - first_day


def profile(
    series_set: Sequence[TimeSeries],
    kind: ProfileKind | str,
    agg: AggMode | str = AggMode.SUM,
    tz: timezone = DEFAULT_TZ,
    span: Period | None = None,
) -> Profile:
    """Seasonal profile aggregated across nodes.

    Each node's present samples are averaged per bin (hour of day, weekday x
    hour starting Monday 00:00, or calendar day); the per-node bin means are
    then summed (``agg="sum"``) or averaged (``agg="mean"``) over the nodes
    that reached the bin. Season bins cover ``span`` when given, else the
    days the data touches.
    """
    kind = ProfileKind(kind) if isinstance(kind, str) else kind
    agg = AggMode(agg) if isinstance(agg, str) else agg
    if not series_set:
        raise EmptyInput("no series to profile")
    if len({s.metric for s in series_set}) > 1:
        raise MixedMetrics(", ".join(sorted({s.metric.token for s in series_set})))

    by_node: dict = {}
    for s in series_set:
        by_node.setdefault(s.node, []).append(s)
    nodes = sorted(by_node)

    origin = None
    first_day = 0
    if kind is ProfileKind.HOURLY:
        nbins = 24
    elif kind is ProfileKind.WEEKLY:
        nbins = 168
    else:
        if span is not None:
            first_day = int(local_days(np.array([span.start]), tz)[0])
            last_day = int(local_days(np.array([span.end]), tz)[0] - (1 if _is_midnight(span.end, tz) else 0))
        else:
            ts = [s.present_timestamps() for s in series_set]
            ts = np.concatenate(ts) if ts else np.empty(0)
            if ts.size == 0:
                raise EmptyInput("no present samples to profile")
            days = local_days(np.array([ts.min(), ts.max()]), tz)
            first_day, last_day = int(days[0]), int(days[1])
        nbins = last_day - first_day + 1
        origin = float(first_day * DAY - offset_seconds(tz))

    means = np.zeros((len(nodes), nbins))
    counts = np.zeros((len(nodes), nbins), dtype=np.int64)
    for i, node in enumerate(nodes):
        sums = np.zeros(nbins)
        for s in by_node[node]:
            ts = s.present_timestamps()
            vals = s.present_values()
            idx = bin_index(ts, kind, tz, first_day)
            inside = (idx >= 0) & (idx < nbins)
            idx, vals = idx[inside], vals[inside]
            sums += np.bincount(idx, weights=vals, minlength=nbins)
            counts[i] += np.bincount(idx, minlength=nbins)
        hit = counts[i] > 0
        means[i, hit] = sums[hit] / counts[i, hit]

    bin_values: list[float | None] = []
    band_low: list[float | None] = []
    band_high: list[float | None] = []
    node_counts: list[int] = []
    for b in range(nbins):
        contrib = [means[i, b] for i in range(len(nodes)) if counts[i, b] > 0]
        k = len(contrib)
        node_counts.append(k)
        if k == 0:
            bin_values.append(None)
            band_low.append(None)
            band_high.append(None)
            continue
        total = 0.0
        for v in contrib:  # fixed node order keeps the result reproducible
            total += v
        value = total if agg is AggMode.SUM else total / k
        srt = np.sort(np.array(contrib))
        scale = k if agg is AggMode.SUM else 1
        lo = quantile_sorted(srt, 0.25) * scale
        hi = quantile_sorted(srt, 0.75) * scale
        bin_values.append(value)
        band_low.append(min(lo, value))
        band_high.append(max(hi, value))
    return Profile(
        kind=kind,
        agg=agg,
        bin_values=tuple(bin_values),
        bin_counts=tuple(int(c) for c in counts.sum(axis=0)),
        band_low=tuple(band_low),
        band_high=tuple(band_high),
        node_counts=tuple(node_counts),
        origin=origin,
    )


def _is_midnight(t: float, tz: timezone) -> bool:
    return (t + offset_seconds(tz)) % DAY == 0


# --------------------------------------------------------------------------
# grouping


def pooled_values(series_set: Sequence[TimeSeries]) -> np.ndarray:
    """Present values of every series, concatenated in (node, time) order."""
    ordered = sorted(series_set, key=lambda s: s.node.sort_key)
    parts = [s.present_values() for s in ordered]
    return np.concatenate(parts) if parts else np.empty(0)


def group_by_rack(series_set: Sequence[TimeSeries], catalog: Catalog) -> dict[int, np.ndarray]:
    """Present values pooled per rack (keys ascending)."""
    groups: dict[int, list[TimeSeries]] = {}
    for s in series_set:
        if s.node not in catalog:
            raise UnknownNode(s.node.canonical)
        groups.setdefault(s.node.rack, []).append(s)
    return {rack: pooled_values(groups[rack]) for rack in sorted(groups)}
