"""Self-contained SVG 1.1 charts: curves, violins, boxes, bars and ECDFs.

Output is a pure function of (spec, size): coordinates are printed with
fixed precision and nothing depends on time, locale or dict ordering.
Data geometry lives in ``<g class="data">`` inside the ``plot-area``
rectangle; annotations (boundary rules, max-PDF labels) live in
``<g class="annotations">``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from ..analysis import BoxStats, DensityCurve, EcdfCurve, Profile, ProfileKind
from ..errors import EmptySpec, PayloadMismatch

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
MIN_SIZE = (200, 150)
ECDF_MAX_POINTS = 2000
_WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class ChartKind(enum.Enum):
    CURVE = "curve"
    VIOLIN = "violin"
    BOX = "box"
    BAR = "bar"
    ECDF = "ecdf"


@dataclass(frozen=True)
class BarDatum:
    category: str
    mean: float
    std: float = 0.0


@dataclass(frozen=True)
class ChartSeries:
    """One labelled payload.

    Payload types per kind: curve -> Profile, violin -> DensityCurve (or a
    float for a degenerate sample, drawn as a tick), box -> BoxStats,
    bar -> sequence of BarDatum, ecdf -> EcdfCurve. ``box`` optionally adds
    the inner box to a violin.
    """

    label: str
    payload: object
    box: BoxStats | None = None


@dataclass(frozen=True)
class VLine:
    """Vertical rule at ``x`` in data units (categorical charts: i - 0.5
    sits between categories i-1 and i)."""

    x: float
    label: str = ""


@dataclass(frozen=True)
class ChartSpec:
    kind: ChartKind
    title: str
    x_label: str
    y_label: str
    series: tuple[ChartSeries, ...]
    annotations: tuple[VLine, ...] = ()
    x_ticks: tuple[tuple[float, str], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if self.x_ticks is not None:
            object.__setattr__(self, "x_ticks", tuple(self.x_ticks))


_PAYLOAD_TYPES = {
    ChartKind.CURVE: (Profile,),
    ChartKind.VIOLIN: (DensityCurve, float, int),
    ChartKind.BOX: (BoxStats,),
    ChartKind.ECDF: (EcdfCurve,),
}


def validate(spec: ChartSpec) -> None:
    if not spec.series:
        raise EmptySpec(spec.title or spec.kind.value)
    for s in spec.series:
        if spec.kind is ChartKind.BAR:
            ok = isinstance(s.payload, (list, tuple)) and all(isinstance(d, BarDatum) for d in s.payload)
        else:
            ok = isinstance(s.payload, _PAYLOAD_TYPES[spec.kind]) and not isinstance(s.payload, bool)
        if not ok:
            raise PayloadMismatch(f"{type(s.payload).__name__} in a {spec.kind.value} chart ({s.label})")
        if s.box is not None and spec.kind is not ChartKind.VIOLIN:
            raise PayloadMismatch("inner boxes are only drawn on violins")


def sig3(x: float) -> str:
    """Three significant digits: 0.394, 1.20e+03, 0.00123."""
    if x == 0:
        return "0.00"
    text = f"{x:#.3g}"
    return text.rstrip(".") if "e" not in text else text


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


# --------------------------------------------------------------------------
# axes


@dataclass
class _Scale:
    lo: float
    hi: float
    px_lo: float
    px_hi: float

    def __call__(self, v):
        return self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round-numbered ticks whose first/last enclose [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("non-finite axis bound")
    if hi < lo:
        lo, hi = hi, lo
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.floor(lo / step)
    last = math.ceil(hi / step)
    return [k * step for k in range(first, last + 1)]


def _tick_text(v: float, ticks: Sequence[float]) -> str:
    step = abs(ticks[1] - ticks[0]) if len(ticks) > 1 else 1.0
    if max(abs(ticks[0]), abs(ticks[-1])) >= 1e6 or step < 1e-4:
        return f"{v:.3g}"
    places = 0
    while places < 6 and abs(step * 10**places - round(step * 10**places)) > 1e-9:
        places += 1
    text = f"{v:.{places}f}"
    return "0" if text.strip("-0.") == "" else text


def profile_ticks(profile: Profile, tz: timezone) -> tuple[tuple[float, str], ...]:
    """Readable x ticks for a profile's bin axis."""
    if profile.kind is ProfileKind.HOURLY:
        return tuple((h, f"{h:02d}:00") for h in range(0, 24, 3))
    if profile.kind is ProfileKind.WEEKLY:
        return tuple((d * 24, _WEEKDAYS[d]) for d in range(7))
    n = len(profile)
    start = datetime.fromtimestamp(profile.origin or 0, tz)
    if n <= 21:
        every = 1 if n <= 10 else 2
        return tuple(
            (i, (start + timedelta(days=i)).strftime("%m-%d")) for i in range(0, n, every)
        )
    ticks = []
    for i in range(n):
        day = start + timedelta(days=i)
        if day.day == 1 or (n <= 62 and day.day in (8, 15, 22)):
            ticks.append((i, day.strftime("%b %d")))
    return tuple(ticks) or ((0, start.strftime("%b %d")),)


# --------------------------------------------------------------------------
# document assembly


@dataclass
class _Canvas:
    width: int
    height: int
    left: float = 72.0
    right: float = 18.0
    top: float = 40.0
    bottom: float = 56.0
    data: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    axes: list[str] = field(default_factory=list)

    @property
    def x0(self):
        return self.left

    @property
    def x1(self):
        return self.width - self.right

    @property
    def y0(self):
        return self.height - self.bottom

    @property
    def y1(self):
        return self.top


def _text(x, y, content, cls, anchor="middle", extra=""):
    return (
        f'<text class="{cls}" x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{extra}>'
        f"{escape(content)}</text>"
    )


def _draw_axes(c: _Canvas, xs: _Scale | None, ys: _Scale, yticks, xticks_labels) -> None:
    for t in yticks:
        y = ys(t)
        c.axes.append(f'<line class="grid" x1="{_f(c.x0)}" y1="{_f(y)}" x2="{_f(c.x1)}" y2="{_f(y)}"/>')
        c.axes.append(_text(c.x0 - 6, y + 4, _tick_text(t, yticks), "tick", "end"))
    for x, label in xticks_labels:
        c.axes.append(f'<line class="tick-mark" x1="{_f(x)}" y1="{_f(c.y0)}" x2="{_f(x)}" y2="{_f(c.y0 + 5)}"/>')
        c.axes.append(_text(x, c.y0 + 18, label, "tick"))
    c.axes.append(
        f'<line class="axis" x1="{_f(c.x0)}" y1="{_f(c.y0)}" x2="{_f(c.x1)}" y2="{_f(c.y0)}"/>'
    )
    c.axes.append(
        f'<line class="axis" x1="{_f(c.x0)}" y1="{_f(c.y0)}" x2="{_f(c.x0)}" y2="{_f(c.y1)}"/>'
    )


def _legend(c: _Canvas, labels: Sequence[str]) -> list[str]:
    out = []
    y = c.top - 20
    x = c.x1
    for i, label in reversed(list(enumerate(labels))):
        width = 7 * len(label) + 24
        x -= width
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect class="legend-key" x="{_f(x)}" y="{_f(y - 8)}" width="10" height="10" fill="{color}"/>')
        out.append(_text(x + 14, y + 1, label, "legend", "start"))
    return out


_STYLE = (
    "text{font-family:sans-serif;font-size:11px;fill:#222}"
    ".title{font-size:14px;font-weight:bold}"
    ".grid{stroke:#e5e5e5;stroke-width:1}"
    ".axis{stroke:#444;stroke-width:1}"
    ".tick-mark{stroke:#444}"
    ".vline{stroke:#2ca02c;stroke-width:1.5;stroke-dasharray:5,3}"
    ".plot-area{fill:none;stroke:none}"
)


def render_chart(spec: ChartSpec, width: int = 720, height: int = 420) -> str:
    """Render ``spec`` to an SVG document string."""
    if width < MIN_SIZE[0] or height < MIN_SIZE[1]:
        raise ValueError(f"chart size must be at least {MIN_SIZE[0]}x{MIN_SIZE[1]}")
    validate(spec)
    c = _Canvas(width, height)
    draw = {
        ChartKind.CURVE: _draw_curve,
        ChartKind.VIOLIN: _draw_violin,
        ChartKind.BOX: _draw_box,
        ChartKind.BAR: _draw_bar,
        ChartKind.ECDF: _draw_ecdf,
    }[spec.kind]
    draw(c, spec)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{escape(spec.title)}</title>",
        f"<style>{_STYLE}</style>",
        f'<rect class="background" x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<rect class="plot-area" x="{_f(c.x0)}" y="{_f(c.y1)}" width="{_f(c.x1 - c.x0)}" '
        f'height="{_f(c.y0 - c.y1)}"/>',
        _text(c.left, 18, spec.title, "title", "start"),
        _text((c.x0 + c.x1) / 2, height - 12, spec.x_label, "x-label"),
        _text(16, (c.y0 + c.y1) / 2, spec.y_label, "y-label", "middle",
              f' transform="rotate(-90 16 {_f((c.y0 + c.y1) / 2)})"'),
        '<g class="axes">', *c.axes, "</g>",
        '<g class="data">', *c.data, "</g>",
        '<g class="annotations">', *c.notes, "</g>",
        '<g class="legend">', *_legend(c, [s.label for s in spec.series]), "</g>",
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def _vlines(c: _Canvas, spec: ChartSpec, xs: _Scale) -> None:
    for a in spec.annotations:
        x = xs(a.x)
        c.notes.append(
            f'<line class="vline" x1="{_f(x)}" y1="{_f(c.y0)}" x2="{_f(x)}" y2="{_f(c.y1)}"/>'
        )
        if a.label:
            c.notes.append(_text(x + 4, c.y1 + 12, a.label, "vline-label", "start"))


def _y_scale(c: _Canvas, lo: float, hi: float) -> tuple[_Scale, list[float]]:
    ticks = nice_ticks(lo, hi)
    return _Scale(ticks[0], ticks[-1], c.y0, c.y1), ticks


# --------------------------------------------------------------------------
# curve


def _draw_curve(c: _Canvas, spec: ChartSpec) -> None:
    vals = []
    nbins = 1
    for s in spec.series:
        p: Profile = s.payload
        nbins = max(nbins, len(p))
        for v, lo, hi in zip(p.bin_values, p.band_low, p.band_high):
            if v is not None:
                vals += [v, lo, hi]
    if not vals:
        vals = [0.0]
    ys, yticks = _y_scale(c, min(vals), max(vals))
    # a calendar-day bin covers [i, i+1): plot it mid-day so day boundaries line up
    day_bins = all(s.payload.kind is ProfileKind.SEASON for s in spec.series)
    off = 0.5 if day_bins else 0.0
    xs = _Scale(0, nbins if day_bins else max(nbins - 1, 1), c.x0, c.x1)
    if spec.x_ticks is not None:
        xt = [(xs(x), label) for x, label in spec.x_ticks]
    else:
        xt = [(xs(t), _tick_text(t, nice_ticks(0, nbins - 1))) for t in nice_ticks(0, nbins - 1) if t <= nbins - 1]
    _draw_axes(c, xs, ys, yticks, xt)

    for i, s in enumerate(spec.series):
        color = PALETTE[i % len(PALETTE)]
        p = s.payload
        for seg in _segments(p.bin_values):
            upper = " ".join(f"{_f(xs(b + off))},{_f(ys(p.band_high[b]))}" for b in seg)
            lower = " ".join(f"{_f(xs(b + off))},{_f(ys(p.band_low[b]))}" for b in reversed(seg))
            c.data.append(f'<polygon class="band" points="{upper} {lower}" fill="{color}" fill-opacity="0.18" stroke="none"/>')
        d = " ".join(
            ("M" if j == 0 else "L") + f"{_f(xs(b + off))},{_f(ys(p.bin_values[b]))}"
            for seg in _segments(p.bin_values)
            for j, b in enumerate(seg)
        )
        if d:
            c.data.append(f'<path class="curve" d="{d}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        for seg in _segments(p.bin_values):
            if len(seg) == 1:  # isolated bin: a path of one point draws nothing
                b = seg[0]
                c.data.append(f'<circle class="point" cx="{_f(xs(b + off))}" cy="{_f(ys(p.bin_values[b]))}" r="2" fill="{color}"/>')
    _vlines(c, spec, xs)


def _segments(values: Sequence[float | None]) -> list[list[int]]:
    segs, cur = [], []
    for i, v in enumerate(values):
        if v is None:
            if cur:
                segs.append(cur)
            cur = []
        else:
            cur.append(i)
    if cur:
        segs.append(cur)
    return segs


# --------------------------------------------------------------------------
# categorical charts


def _cat_scale(c: _Canvas, n: int) -> _Scale:
    return _Scale(-0.5, n - 0.5, c.x0, c.x1)


def _draw_violin(c: _Canvas, spec: ChartSpec) -> None:
    lo, hi = math.inf, -math.inf
    for s in spec.series:
        if isinstance(s.payload, DensityCurve):
            lo, hi = min(lo, float(s.payload.grid[0])), max(hi, float(s.payload.grid[-1]))
        else:
            lo, hi = min(lo, float(s.payload)), max(hi, float(s.payload))
        if s.box is not None:
            lo, hi = min(lo, s.box.whisker_low), max(hi, s.box.whisker_high)
    ys, yticks = _y_scale(c, lo, hi)
    n = len(spec.series)
    xs = _cat_scale(c, n)
    _draw_axes(c, xs, ys, yticks, [(xs(i), s.label) for i, s in enumerate(spec.series)])
    half = 0.4 * (xs(1) - xs(0))
    for i, s in enumerate(spec.series):
        color = PALETTE[i % len(PALETTE)]
        cx = xs(i)
        if not isinstance(s.payload, DensityCurve):
            y = ys(float(s.payload))
            c.data.append(f'<line class="degenerate" x1="{_f(cx - half)}" y1="{_f(y)}" x2="{_f(cx + half)}" y2="{_f(y)}" stroke="{color}" stroke-width="2"/>')
            continue
        dc = s.payload
        w = dc.density / dc.max_density * half
        right = [f"{_f(cx + wi)},{_f(ys(g))}" for g, wi in zip(dc.grid, w)]
        left = [f"{_f(cx - wi)},{_f(ys(g))}" for g, wi in zip(dc.grid[::-1], w[::-1])]
        c.data.append(
            f'<polygon class="violin" points="{" ".join(right + left)}" fill="{color}" '
            f'fill-opacity="0.45" stroke="{color}"/>'
        )
        if s.box is not None:
            b = s.box
            c.data.append(f'<line class="whisker" x1="{_f(cx)}" y1="{_f(ys(b.whisker_low))}" x2="{_f(cx)}" y2="{_f(ys(b.whisker_high))}" stroke="#222"/>')
            bw = min(max(half * 0.05, 2.0), 6.0)
            top, bottom = ys(b.q3), ys(b.q1)
            c.data.append(f'<rect class="inner-box" x="{_f(cx - bw)}" y="{_f(top)}" width="{_f(2 * bw)}" height="{_f(bottom - top)}" fill="#222"/>')
            c.data.append(f'<circle class="median" cx="{_f(cx)}" cy="{_f(ys(b.median))}" r="{_f(bw * 0.7)}" fill="#ffffff"/>')
        peak = int(np.argmax(dc.density))
        py = ys(float(dc.grid[peak]))
        c.notes.append(
            f'<line class="peak-mark" x1="{_f(cx + w[peak])}" y1="{_f(py)}" x2="{_f(cx + half + 2)}" y2="{_f(py)}" stroke="#666" stroke-dasharray="2,2"/>'
        )
        c.notes.append(_text(cx + half + 4, py + 4, sig3(dc.max_density), "max-pdf", "start"))


def _draw_box(c: _Canvas, spec: ChartSpec) -> None:
    lo = min(min([s.payload.whisker_low, *s.payload.outliers.tolist()]) for s in spec.series)
    hi = max(max([s.payload.whisker_high, *s.payload.outliers.tolist()]) for s in spec.series)
    ys, yticks = _y_scale(c, lo, hi)
    n = len(spec.series)
    xs = _cat_scale(c, n)
    _draw_axes(c, xs, ys, yticks, [(xs(i), s.label) for i, s in enumerate(spec.series)])
    half = 0.3 * (xs(1) - xs(0))
    for i, s in enumerate(spec.series):
        color = PALETTE[i % len(PALETTE)]
        b: BoxStats = s.payload
        cx = xs(i)
        top, bottom = ys(b.q3), ys(b.q1)
        c.data.append(f'<line class="whisker" x1="{_f(cx)}" y1="{_f(ys(b.whisker_high))}" x2="{_f(cx)}" y2="{_f(top)}" stroke="#222"/>')
        c.data.append(f'<line class="whisker" x1="{_f(cx)}" y1="{_f(bottom)}" x2="{_f(cx)}" y2="{_f(ys(b.whisker_low))}" stroke="#222"/>')
        for w in (b.whisker_low, b.whisker_high):
            c.data.append(f'<line class="cap" x1="{_f(cx - half / 2)}" y1="{_f(ys(w))}" x2="{_f(cx + half / 2)}" y2="{_f(ys(w))}" stroke="#222"/>')
        c.data.append(f'<rect class="box" x="{_f(cx - half)}" y="{_f(top)}" width="{_f(2 * half)}" height="{_f(bottom - top)}" fill="{color}" fill-opacity="0.45" stroke="#222"/>')
        c.data.append(f'<line class="median" x1="{_f(cx - half)}" y1="{_f(ys(b.median))}" x2="{_f(cx + half)}" y2="{_f(ys(b.median))}" stroke="#222" stroke-width="2"/>')
        # one marker per distinct pixel row: millions of outliers stay drawable
        seen = set()
        for v in b.outliers:
            y = _f(ys(float(v)))
            if y not in seen:
                seen.add(y)
                c.data.append(f'<circle class="outlier" cx="{_f(cx)}" cy="{y}" r="2.5" fill="none" stroke="{color}"/>')


def _draw_bar(c: _Canvas, spec: ChartSpec) -> None:
    cats: list[str] = []
    for s in spec.series:
        for d in s.payload:
            if d.category not in cats:
                cats.append(d.category)
    vals = [0.0]
    for s in spec.series:
        for d in s.payload:
            vals += [d.mean - d.std, d.mean + d.std]
    ys, yticks = _y_scale(c, min(vals), max(vals))
    xs = _cat_scale(c, max(len(cats), 1))
    _draw_axes(c, xs, ys, yticks, [(xs(i), cat) for i, cat in enumerate(cats)])
    k = len(spec.series)
    slot = 0.8 * (xs(1) - xs(0)) / k
    base = ys(0.0)
    for j, s in enumerate(spec.series):
        color = PALETTE[j % len(PALETTE)]
        for d in s.payload:
            i = cats.index(d.category)
            x = xs(i) - 0.4 * (xs(1) - xs(0)) + j * slot
            top = ys(d.mean)
            y, h = (top, base - top) if top <= base else (base, top - base)
            c.data.append(f'<rect class="bar" x="{_f(x)}" y="{_f(y)}" width="{_f(slot * 0.9)}" height="{_f(h)}" fill="{color}"/>')
            mx = x + slot * 0.45
            e_lo, e_hi = ys(d.mean - d.std), ys(d.mean + d.std)
            c.data.append(f'<line class="error-bar" x1="{_f(mx)}" y1="{_f(e_lo)}" x2="{_f(mx)}" y2="{_f(e_hi)}" stroke="#222"/>')
            for ey in (e_lo, e_hi):
                c.data.append(f'<line class="error-cap" x1="{_f(mx - 3)}" y1="{_f(ey)}" x2="{_f(mx + 3)}" y2="{_f(ey)}" stroke="#222"/>')
    _vlines(c, spec, xs)


def _draw_ecdf(c: _Canvas, spec: ChartSpec) -> None:
    lo = min(float(s.payload.x[0]) for s in spec.series)
    hi = max(float(s.payload.x[-1]) for s in spec.series)
    xticks = nice_ticks(lo, hi)
    xs = _Scale(xticks[0], xticks[-1], c.x0, c.x1)
    ys = _Scale(0.0, 1.0, c.y0, c.y1)
    yticks = [0.0, 0.25, 0.5, 0.75, 1.0]
    _draw_axes(c, xs, ys, yticks, [(xs(t), _tick_text(t, xticks)) for t in xticks])
    for i, s in enumerate(spec.series):
        color = PALETTE[i % len(PALETTE)]
        e: EcdfCurve = s.payload
        idx = np.arange(len(e.x))
        if len(idx) > ECDF_MAX_POINTS:
            idx = np.unique(np.linspace(0, len(e.x) - 1, ECDF_MAX_POINTS).round().astype(int))
        pts = [f"M{_f(xs(float(e.x[idx[0]])))},{_f(ys(0.0))}"]
        prev = 0.0
        for j in idx:
            x = _f(xs(float(e.x[j])))
            pts.append(f"L{x},{_f(ys(prev))}")
            prev = float(e.p[j])
            pts.append(f"L{x},{_f(ys(prev))}")
        c.data.append(f'<path class="ecdf" d="{" ".join(pts)}" fill="none" stroke="{color}" stroke-width="1.6"/>')
    _vlines(c, spec, xs)
