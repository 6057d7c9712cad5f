"""tracelens: two-period characterization of datacenter node metric traces."""

__version__ = "0.1.0"

from .analysis import (
    AggMode,
    BoxStats,
    DensityCurve,
    EcdfCurve,
    Profile,
    ProfileKind,
    StatsSummary,
    box_stats,
    ecdf,
    group_by_rack,
    kde,
    profile,
    resample,
    split_periods,
    summary_stats,
)
from .catalog import Catalog, Selection, default_catalog, dump_catalog, load_catalog, resolve
from .compare import ComparisonReport, GroupComparison, Grouping, compare, rack_table, stats_table
from .errors import TracelensError
from .ingest import CoverageReport, coverage, parse_prometheus_matrix, read_store, write_store
from .model import (
    MetricKind,
    NodeClass,
    NodeRef,
    Period,
    PeriodPair,
    Sample,
    TimeSeries,
    default_pair,
    parse_node_id,
    split_pair,
)
from .render import ChartSpec, TableDoc, emit_table, render_chart

__all__ = [
    "AggMode", "BoxStats", "Catalog", "ChartSpec", "ComparisonReport", "CoverageReport",
    "DensityCurve", "EcdfCurve", "GroupComparison", "Grouping", "MetricKind", "NodeClass",
    "NodeRef", "Period", "PeriodPair", "Profile", "ProfileKind", "Sample", "Selection",
    "StatsSummary", "TableDoc", "TimeSeries", "TracelensError", "box_stats", "compare",
    "coverage", "default_catalog", "default_pair", "dump_catalog", "ecdf", "emit_table",
    "group_by_rack", "kde", "load_catalog", "parse_node_id", "parse_prometheus_matrix",
    "profile", "rack_table", "read_store", "render_chart", "resample", "resolve",
    "split_pair", "split_periods", "stats_table", "summary_stats", "write_store",
]
