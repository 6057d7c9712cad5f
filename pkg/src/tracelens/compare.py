"""Two-period comparison of pooled metric values per group."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .analysis import (
    BoxStats,
    DensityCurve,
    StatsSummary,
    box_stats,
    kde,
    pooled_values,
    resample,
    summary_stats,
)
from .catalog import Catalog
from .errors import DegenerateDistribution, EmptyInput, MixedMetrics, UnknownNode, WrongGrouping
from .model import MetricKind, NodeClass, PeriodPair, TimeSeries
from .render.tables import TableDoc

log = logging.getLogger(__name__)


class Grouping(enum.Enum):
    WHOLE = "whole"
    BY_CLASS = "by_class"
    BY_RACK = "by_rack"
    BY_NODE = "by_node"


@dataclass(frozen=True, eq=False)
class GroupComparison:
    """One group's two sides. A side with no present values is ``None``."""

    group: str
    node_class: NodeClass | None
    a: StatsSummary | None
    b: StatsSummary | None
    box_a: BoxStats | None = None
    box_b: BoxStats | None = None
    density_a: DensityCurve | None = None
    density_b: DensityCurve | None = None

    @property
    def sides(self) -> str:
        """``both``, ``a-only``, ``b-only`` or ``none``."""
        if self.a is not None and self.b is not None:
            return "both"
        if self.a is not None:
            return "a-only"
        return "b-only" if self.b is not None else "none"

    @property
    def one_sided(self) -> bool:
        return self.sides != "both"

    @property
    def delta_mean(self) -> float | None:
        return self.b.mean - self.a.mean if self.sides == "both" else None

    @property
    def delta_median(self) -> float | None:
        return self.b.median - self.a.median if self.sides == "both" else None

    @property
    def delta_mean_pct(self) -> float | None:
        if self.sides != "both" or self.a.mean == 0:
            return None
        return 100.0 * (self.b.mean - self.a.mean) / abs(self.a.mean)

    def swapped(self) -> GroupComparison:
        return GroupComparison(
            self.group, self.node_class, self.b, self.a,
            self.box_b, self.box_a, self.density_b, self.density_a,
        )


@dataclass(frozen=True)
class ComparisonReport:
    metric: MetricKind
    pair: PeriodPair
    grouping: Grouping
    per_group: Mapping[str, GroupComparison]

    def __getitem__(self, group: str) -> GroupComparison:
        return self.per_group[group]


def group_key(series: TimeSeries, catalog: Catalog, grouping: Grouping) -> str:
    if grouping is Grouping.WHOLE:
        return "all"
    if grouping is Grouping.BY_CLASS:
        return catalog.class_of(series.node).value
    if grouping is Grouping.BY_RACK:
        return f"r{series.node.rack}"
    return series.node.canonical


def compare(
    series_set: Sequence[TimeSeries],
    catalog: Catalog,
    pair: PeriodPair,
    grouping: Grouping | str = Grouping.BY_CLASS,
    interval_s: float | None = None,
    densities: bool = True,
) -> ComparisonReport:
    """Pool each group's present values per period and summarize both sides.

    ``interval_s`` resamples every series first. Groups whose data misses a
    period are kept with that side set to ``None``. Densities are skipped
    when ``densities`` is false or a side is degenerate.
    """
    grouping = Grouping(grouping)
    if not series_set:
        raise EmptyInput("no series to compare")
    metrics = {s.metric for s in series_set}
    if len(metrics) > 1:
        raise MixedMetrics(", ".join(sorted(m.token for m in metrics)))
    (metric,) = metrics

    members: dict[str, list[TimeSeries]] = {}
    for s in series_set:
        if s.node not in catalog:
            raise UnknownNode(s.node.canonical)
        if interval_s:
            s = resample(s, interval_s)
        members.setdefault(group_key(s, catalog, grouping), []).append(s)

    per_group = {}
    for key in _group_order(members, catalog, grouping):
        group = members[key]
        classes = {catalog.class_of(s.node) for s in group}
        node_class = classes.pop() if len(classes) == 1 else None
        sides = []
        for period in (pair.a, pair.b):
            vals = pooled_values([s.between(period.start, period.end) for s in group])
            sides.append(_side(vals, densities))
        (a, box_a, dens_a), (b, box_b, dens_b) = sides
        gc = GroupComparison(key, node_class, a, b, box_a, box_b, dens_a, dens_b)
        if gc.one_sided:
            log.warning("group %s has data only for: %s", key, gc.sides)
        per_group[key] = gc
    return ComparisonReport(metric, pair, grouping, MappingProxyType(per_group))


def _side(vals: np.ndarray, densities: bool):
    if vals.size == 0:
        return None, None, None
    density = None
    if densities:
        try:
            density = kde(vals)
        except DegenerateDistribution:
            pass
    return summary_stats(vals), box_stats(vals), density


def _group_order(members: Mapping[str, list], catalog: Catalog, grouping: Grouping) -> list[str]:
    if grouping is Grouping.BY_CLASS:
        return [c.value for c in NodeClass if c.value in members]
    if grouping is Grouping.BY_RACK:
        return [f"r{r}" for r in catalog.rack_order() if f"r{r}" in members]
    if grouping is Grouping.BY_NODE:
        return sorted(members, key=lambda k: min(s.node.sort_key for s in members[k]))
    return list(members)


# --------------------------------------------------------------------------
# tables

STAT_COLUMNS = ("count", "mean", "std", "median", "q1", "q3", "max")


def _stat_cells(s: StatsSummary | None) -> list:
    if s is None:
        return [0] + [None] * (len(STAT_COLUMNS) - 1)
    return [s.count, s.mean, s.std, s.median, s.q1, s.q3, s.max]


def rack_table(report: ComparisonReport, decimals: int = 3) -> TableDoc:
    """One row per rack per period, generic racks before ML racks."""
    if report.grouping is not Grouping.BY_RACK:
        raise WrongGrouping(f"rack_table needs a by_rack report, got {report.grouping.value}")
    rows = []
    for key, gc in report.per_group.items():
        for period, stats in ((report.pair.a, gc.a), (report.pair.b, gc.b)):
            rack = int(key[1:])
            cls = gc.node_class.value if gc.node_class else ""
            rows.append([rack, cls, period.label, *_stat_cells(stats)])
    headers = ("rack", "class", "period", *STAT_COLUMNS)
    return TableDoc(headers, rows, (None, None, None, None) + (decimals,) * (len(STAT_COLUMNS) - 1))


def stats_table(report: ComparisonReport, decimals: int = 3) -> TableDoc:
    """Summary per group per period, with the b-minus-a deltas on the b row."""
    rows = []
    for key, gc in report.per_group.items():
        for i, (period, stats) in enumerate(((report.pair.a, gc.a), (report.pair.b, gc.b))):
            deltas = [gc.delta_mean, gc.delta_median, gc.delta_mean_pct] if i else [None] * 3
            rows.append([key, period.label, *_stat_cells(stats), stats.min if stats else None, *deltas])
    headers = ("group", "period", *STAT_COLUMNS, "min", "delta_mean", "delta_median", "delta_mean_pct")
    return TableDoc(headers, rows, (None, None, None) + (decimals,) * (len(headers) - 3))
