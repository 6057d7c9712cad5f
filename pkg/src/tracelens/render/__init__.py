"""SVG charts and CSV/Markdown tables."""

from .svg import (
    BarDatum,
    ChartKind,
    ChartSeries,
    ChartSpec,
    VLine,
    nice_ticks,
    profile_ticks,
    render_chart,
    sig3,
)
from .tables import TableDoc, emit_table, format_cell

__all__ = [
    "BarDatum",
    "ChartKind",
    "ChartSeries",
    "ChartSpec",
    "TableDoc",
    "VLine",
    "emit_table",
    "format_cell",
    "nice_ticks",
    "profile_ticks",
    "render_chart",
    "sig3",
]
