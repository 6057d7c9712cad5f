import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracelens.analysis import box_stats, ecdf, kde, profile
from tracelens.errors import DegenerateDistribution, EmptySpec, PayloadMismatch, RaggedRows
from tracelens.model import POWER, NodeRef, TimeSeries, local_epoch
from tracelens.render import (
    BarDatum,
    ChartKind,
    ChartSeries,
    ChartSpec,
    TableDoc,
    VLine,
    emit_table,
    nice_ticks,
    render_chart,
    sig3,
)

NS = "{http://www.w3.org/2000/svg}"


def parse(svg):
    return ET.fromstring(svg.encode("utf-8"))


def by_class(root, cls):
    return [e for e in root.iter() if e.get("class") == cls]


def sample(seed=0, n=500, loc=100.0, scale=10.0):
    return np.random.default_rng(seed).normal(loc, scale, n)


def violin_spec(*arrays):
    return ChartSpec(
        ChartKind.VIOLIN, "v", "period", "W",
        [ChartSeries(f"s{i}", kde(a), box_stats(a)) for i, a in enumerate(arrays)],
    )


def test_sig3():
    assert sig3(0.398942) == "0.399"
    assert sig3(0.0012345) == "0.00123"
    assert sig3(12.0) == "12.0"
    assert sig3(1234.5) == "1.23e+03"
    assert sig3(100.0) == "100"


def test_violin_max_pdf_annotation():
    x = sample()
    d = kde(x)
    root = parse(render_chart(violin_spec(x)))
    texts = by_class(root, "max-pdf")
    assert len(texts) == 1
    assert texts[0].text == sig3(d.max_density)
    assert float(texts[0].text) == pytest.approx(d.max_density, rel=5e-3)
    assert len(by_class(root, "median")) == 1
    assert len(by_class(root, "violin")) == 1


def test_violin_degenerate_tick():
    spec = ChartSpec(ChartKind.VIOLIN, "v", "", "", [ChartSeries("flat", 5.0), ChartSeries("x", kde(sample()))])
    root = parse(render_chart(spec))
    assert len(by_class(root, "degenerate")) == 1


def hourly_profile():
    ts = local_epoch("2020-03-02") + np.arange(0, 3 * 86400, 900)
    s = [TimeSeries(NodeRef(30, i), POWER, ts, 100 + 10 * np.sin(ts / 7000.0) + i) for i in range(4)]
    return profile(s, "hourly")


def test_curve_single_vline():
    p = hourly_profile()
    spec = ChartSpec(ChartKind.CURVE, "c", "hour", "W", [ChartSeries("p", p)], [VLine(12.0, "split")])
    root = parse(render_chart(spec))
    lines = by_class(root, "vline")
    assert len(lines) == 1
    assert lines[0].get("x1") == lines[0].get("x2")
    area = by_class(root, "plot-area")[0]
    x0, w = float(area.get("x")), float(area.get("width"))
    assert float(lines[0].get("x1")) == pytest.approx(x0 + w * 12 / 23, abs=0.01)
    assert len(by_class(root, "band")) == 1


def test_curve_gaps():
    ts = [local_epoch("2020-03-01T01:00"), local_epoch("2020-03-03T05:00"), local_epoch("2020-03-04T05:00")]
    p = profile([TimeSeries(NodeRef(1, 1), POWER, ts, [1.0, 2.0, 3.0])], "season")
    root = parse(render_chart(ChartSpec(ChartKind.CURVE, "c", "", "", [ChartSeries("p", p)])))
    (path,) = by_class(root, "curve")
    assert path.get("d").count("M") == 2
    assert len(by_class(root, "point")) == 1


def test_bar_zero_std():
    spec = ChartSpec(ChartKind.BAR, "b", "rack", "W", [ChartSeries("a", [BarDatum("r23", 5.0, 0.0)])])
    root = parse(render_chart(spec))
    (err,) = by_class(root, "error-bar")
    assert err.get("y1") == err.get("y2")


def test_validation():
    with pytest.raises(EmptySpec):
        render_chart(ChartSpec(ChartKind.BOX, "x", "", "", []))
    with pytest.raises(PayloadMismatch):
        render_chart(ChartSpec(ChartKind.BOX, "x", "", "", [ChartSeries("a", kde(sample()))]))
    with pytest.raises(PayloadMismatch):
        render_chart(ChartSpec(ChartKind.BAR, "x", "", "", [ChartSeries("a", [1, 2])]))
    with pytest.raises(ValueError):
        render_chart(violin_spec(sample()), width=199, height=150)


def test_escaping():
    spec = ChartSpec(ChartKind.BOX, "<rack & \"23\">", "", "", [ChartSeries("a<b", box_stats([1, 2, 3]))])
    root = parse(render_chart(spec))
    assert root.find(f"{NS}title").text == '<rack & "23">'


def test_nice_ticks_enclose():
    for lo, hi in [(0, 1), (-3.2, 17.9), (1e-6, 2e-6), (5, 5), (-1e9, 1e12)]:
        t = nice_ticks(lo, hi)
        assert t[0] <= lo and t[-1] >= hi and len(t) >= 2


# --------------------------------------------------------------------------
# structural properties over random payloads

_NUM = re.compile(r"-?\d+(?:\.\d+)?")


def data_extent(root):
    """All x and y pixel coordinates of elements in the data group."""
    xs, ys = [], []
    (data,) = [g for g in root.iter(f"{NS}g") if g.get("class") == "data"]
    for e in data:
        tag = e.tag.replace(NS, "")
        if tag == "polygon":
            nums = [float(v) for v in _NUM.findall(e.get("points"))]
            xs += nums[0::2]
            ys += nums[1::2]
        elif tag == "path":
            nums = [float(v) for v in _NUM.findall(e.get("d"))]
            xs += nums[0::2]
            ys += nums[1::2]
        elif tag == "line":
            xs += [float(e.get("x1")), float(e.get("x2"))]
            ys += [float(e.get("y1")), float(e.get("y2"))]
        elif tag == "rect":
            x, y = float(e.get("x")), float(e.get("y"))
            xs += [x, x + float(e.get("width"))]
            ys += [y, y + float(e.get("height"))]
        elif tag == "circle":
            xs.append(float(e.get("cx")))
            ys.append(float(e.get("cy")))
    return xs, ys


def assert_unclipped(svg):
    root = parse(svg)
    area = by_class(root, "plot-area")[0]
    x0, y0 = float(area.get("x")), float(area.get("y"))
    x1, y1 = x0 + float(area.get("width")), y0 + float(area.get("height"))
    xs, ys = data_extent(root)
    assert xs and ys
    assert min(xs) >= x0 - 0.011 and max(xs) <= x1 + 0.011
    assert min(ys) >= y0 - 0.011 and max(ys) <= y1 + 0.011


values = st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=80)


def spec_for(kind, groups):
    if kind is ChartKind.VIOLIN:
        series = []
        for i, g in enumerate(groups):
            try:
                payload = kde(g)
            except DegenerateDistribution:
                payload = float(g[0])
            series.append(ChartSeries(f"g{i}", payload, box_stats(g)))
    elif kind is ChartKind.BOX:
        series = [ChartSeries(f"g{i}", box_stats(g)) for i, g in enumerate(groups)]
    elif kind is ChartKind.ECDF:
        series = [ChartSeries(f"g{i}", ecdf(g)) for i, g in enumerate(groups)]
    elif kind is ChartKind.BAR:
        series = [
            ChartSeries(f"p{j}", [BarDatum(f"r{i}", float(np.mean(g)), float(np.std(g))) for i, g in enumerate(groups)])
            for j in range(2)
        ]
    else:
        series = []
        for i, g in enumerate(groups):
            ts = local_epoch("2020-03-02") + 3600 * np.arange(len(g))
            series.append(ChartSeries(f"g{i}", profile([TimeSeries(NodeRef(1, i), POWER, ts, g)], "weekly")))
    return ChartSpec(kind, "t", "x", "y", series)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(list(ChartKind)), st.lists(values, min_size=1, max_size=3))
def test_charts_valid_deterministic_unclipped(kind, groups):
    spec = spec_for(kind, groups)
    a = render_chart(spec)
    assert a == render_chart(spec)
    parse(a)
    assert_unclipped(a)


def test_ecdf_decimation():
    x = sample(n=50_000)
    svg = render_chart(ChartSpec(ChartKind.ECDF, "e", "", "", [ChartSeries("a", ecdf(x))]))
    (path,) = by_class(parse(svg), "ecdf")
    assert path.get("d").count("L") <= 4001
    assert_unclipped(svg)


# --------------------------------------------------------------------------
# tables


def test_table_csv_lines():
    doc = TableDoc(("a", "b", "c"), [[1, 2.5, "x"], [3, None, "y"]], (None, 2, None))
    text = emit_table(doc, "csv")
    assert text.splitlines() == ["a,b,c", "1,2.50,x", "3,,y"]
    assert "\r" not in text


def test_table_quotes_commas():
    doc = TableDoc(("name",), [["a,b"], ['say "hi"']])
    assert emit_table(doc).splitlines()[1:] == ['"a,b"', '"say ""hi"""']


def test_table_markdown_matches_csv_cells():
    import csv
    import io

    doc = TableDoc(("rack", "mean", "note"), [[23, 20.123456, "a|b"], [30, -1.0, ""]], (None, 3, None))
    csv_cells = list(csv.reader(io.StringIO(emit_table(doc, "csv"))))
    md_lines = emit_table(doc, "markdown").splitlines()
    assert md_lines[1].startswith("|---")
    md_cells = [
        [c.strip().replace("\\|", "|") for c in re.split(r"(?<!\\)\|", line)[1:-1]]
        for line in [md_lines[0]] + md_lines[2:]
    ]
    assert md_cells == csv_cells


def test_table_ragged():
    with pytest.raises(RaggedRows):
        TableDoc(("a", "b"), [[1]])
