"""Tabular documents and their CSV / Markdown serializations."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence, Union

from ..errors import RaggedRows

Cell = Union[str, int, float, None]


@dataclass(frozen=True)
class TableDoc:
    """Headers plus rows of raw cells.

    ``decimals`` fixes how many places each float column prints with (one
    entry per column; ``None`` means "not a float column"). Raw cells are
    kept so callers can compare numbers without reparsing strings.
    """

    headers: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]
    decimals: tuple[int | None, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "headers", tuple(self.headers))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        width = len(self.headers)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise RaggedRows(f"row {i} has {len(row)} cells, header has {width}")
        if self.decimals is None:
            object.__setattr__(self, "decimals", (3,) * width)
        elif len(self.decimals) != width:
            raise RaggedRows("decimals must give one entry per column")
        else:
            object.__setattr__(self, "decimals", tuple(self.decimals))

    def column(self, name: str) -> list[Cell]:
        i = self.headers.index(name)
        return [r[i] for r in self.rows]

    def formatted_rows(self) -> list[list[str]]:
        return [[format_cell(c, d) for c, d in zip(row, self.decimals)] for row in self.rows]


def format_cell(cell: Cell, decimals: int | None = 3) -> str:
    if cell is None:
        return ""
    if isinstance(cell, bool):
        return str(cell).lower()
    if isinstance(cell, float):
        return f"{cell:.{decimals if decimals is not None else 3}f}"
    return str(cell)


def emit_table(doc: TableDoc, fmt: str = "csv") -> str:
    """Render as ``csv`` (RFC 4180 quoting, LF line ends) or ``markdown``."""
    rows = doc.formatted_rows()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(doc.headers)
        w.writerows(rows)
        return buf.getvalue()
    if fmt in ("markdown", "md"):
        return _markdown(doc.headers, rows, doc.decimals)
    raise ValueError(f"unknown table format {fmt!r}")


def _md_cell(text: str) -> str:
    return text.replace("\\", "\\\\").replace("|", "\\|").replace("\n", " ")


def _markdown(headers: Sequence[str], rows: list[list[str]], decimals) -> str:
    lines = ["| " + " | ".join(_md_cell(h) for h in headers) + " |"]
    lines.append("|" + "|".join("---:" if d is not None else "---" for d in decimals) + "|")
    for row in rows:
        lines.append("| " + " | ".join(_md_cell(c) for c in row) + " |")
    return "\n".join(lines) + "\n"
