"""Command-line entry point.

``tracelens [run] --store load1.csv --out report/`` runs the analysis pipeline;
``tracelens synth`` writes a synthetic store and ``tracelens ingest`` converts
Prometheus range-query JSON into the CSV store.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    AggMode,
    ProfileKind,
    box_stats,
    ecdf,
    kde,
    pooled_values,
    profile,
    resample,
    summary_stats,
)
from .catalog import Catalog, Selection, load_catalog, resolve
from .compare import Grouping, STAT_COLUMNS, compare, rack_table, stats_table
from .errors import ConfigError, DegenerateDistribution, EmptyInput, TracelensError
from .ingest import (
    CoverageReport,
    IngestConfig,
    coverage,
    parse_prometheus_matrix,
    read_manifest,
    read_store,
    write_store,
)
from .model import (
    DEFAULT_SPAN,
    DEFAULT_SPLIT_DATE,
    MetricKind,
    NodeClass,
    NodeRef,
    Period,
    PeriodPair,
    TimeSeries,
    format_local,
    local_epoch,
    parse_node_id,
    parse_utc_offset,
)
from .render import BarDatum, ChartKind, ChartSeries, ChartSpec, TableDoc, VLine, emit_table, profile_ticks, render_chart

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

DAY = 86400
CONFIG_ENV = "TRACELENS_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    stores: tuple[str, ...]
    out: str
    catalog: str | None = None
    metric: str | None = None
    nodes: tuple[str, ...] | None = None
    racks: tuple[int, ...] | None = None
    node_class: str | None = None
    split_date: str = DEFAULT_SPLIT_DATE
    period_a: str | None = None
    period_b: str | None = None
    interval_s: float = 15
    agg: str = "sum"
    tz: str = "+01:00"
    tables: str = "csv"

    def __post_init__(self):
        if not self.stores:
            raise ConfigError("at least one --store is required")
        if not self.out:
            raise ConfigError("--out is required")
        if self.nodes is not None and self.racks is not None:
            raise ConfigError("select nodes or racks, not both")
        if not self.interval_s or self.interval_s <= 0:
            raise ConfigError("--interval must be positive")
        if self.agg not in ("sum", "mean"):
            raise ConfigError(f"--agg must be sum or mean, not {self.agg!r}")
        if self.tables not in ("csv", "md", "markdown"):
            raise ConfigError(f"--tables must be csv or md, not {self.tables!r}")

    def as_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass
class RunSummary:
    out: Path
    files: list[str] = field(default_factory=list)
    coverage: dict[str, CoverageReport] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


# --------------------------------------------------------------------------
# argument handling


def _period_arg(text: str, tz, label: str) -> Period:
    start, sep, end = text.partition("..")
    if not sep or not start or not end:
        raise ConfigError(f"period {text!r} must look like START..END")
    return Period(label, local_epoch(start.strip(), tz), local_epoch(end.strip(), tz))


def _csv_list(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(t).strip() for t in text if str(t).strip()]
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _rack_arg(token: str) -> int:
    t = token.strip()
    if t[:1] in ("r", "R"):
        t = t[1:]
    try:
        return int(t)
    except ValueError:
        raise ConfigError(f"rack {token!r} is not a rack number") from None


def _run_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracelens", description="Characterize node metric traces over two periods.")
    p.add_argument("--store", action="append", dest="stores", metavar="PATH", help="CSV store (repeat per metric)")
    p.add_argument("--catalog", metavar="PATH", help="rack/node catalog (TOML)")
    p.add_argument("--metric", help="metric to analyse, e.g. load1 or power_watts")
    p.add_argument("--nodes", help="comma-separated node ids, e.g. r30n1,r30n2")
    p.add_argument("--racks", help="comma-separated rack numbers")
    p.add_argument("--class", dest="node_class", choices=("generic", "ml"))
    p.add_argument("--split-date", metavar="YYYY-MM-DD")
    p.add_argument("--period-a", metavar="START..END")
    p.add_argument("--period-b", metavar="START..END")
    p.add_argument("--interval", type=float, dest="interval_s", metavar="SECONDS")
    p.add_argument("--agg", choices=("sum", "mean"))
    p.add_argument("--tz", metavar="+HH:MM")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--tables", choices=("csv", "md", "markdown"))
    p.add_argument("--config", metavar="PATH", help=f"TOML config (default: ${CONFIG_ENV})")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"tracelens {__version__}")
    return p


_CONFIG_KEYS = {
    "stores", "store", "catalog", "metric", "nodes", "racks", "class", "node_class", "split_date",
    "period_a", "period_b", "interval", "interval_s", "agg", "tz", "out", "tables",
}


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    doc = doc.get("run", doc)
    unknown = sorted(set(k.replace("-", "_") for k in doc) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")
    out = {}
    for k, v in doc.items():
        k = k.replace("-", "_")
        k = {"store": "stores", "class": "node_class", "interval": "interval_s"}.get(k, k)
        out[k] = v
    if isinstance(out.get("stores"), str):
        out["stores"] = [out["stores"]]
    return out


def build_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Merge the config file (``--config`` or ``$TRACELENS_CONFIG``) with flags; flags win."""
    merged = _load_config_file(args.config or environ.get(CONFIG_ENV))
    for key in ("stores", "catalog", "metric", "nodes", "racks", "node_class", "split_date",
                "period_a", "period_b", "interval_s", "agg", "tz", "out", "tables"):
        v = getattr(args, key)
        if v is not None:
            merged[key] = v
    if "nodes" in merged:
        merged["nodes"] = tuple(_csv_list(merged["nodes"]))
    if "racks" in merged:
        merged["racks"] = tuple(_rack_arg(r) for r in _csv_list(merged["racks"]))
    if "stores" in merged:
        merged["stores"] = tuple(str(s) for s in merged["stores"])
    if "interval_s" in merged:
        merged["interval_s"] = float(merged["interval_s"])
    return RunConfig(**{"stores": (), "out": "", **merged})


# --------------------------------------------------------------------------
# pipeline


def _pick_store(config: RunConfig) -> tuple[Path, MetricKind | None]:
    wanted = MetricKind.parse(config.metric) if config.metric else None
    found = []
    for s in config.stores:
        p = Path(s)
        if not p.is_file():
            raise ConfigError(f"store {s} does not exist")
        m = read_manifest(p)
        found.append((p, m.metric if m else None))
    if wanted is None:
        if len(found) > 1:
            raise ConfigError("several stores given; choose one with --metric")
        return found[0]
    for p, m in found:
        if m == wanted:
            return p, wanted
    bare = [p for p, m in found if m is None]
    if len(bare) == 1:
        return bare[0], wanted
    raise ConfigError(f"no store holds metric {wanted}")


@dataclass
class _Group:
    key: str
    expected: list[NodeRef]
    series: list[TimeSeries]


def _groups(config: RunConfig, catalog: Catalog, series: list[TimeSeries]) -> tuple[Grouping, list[_Group]]:
    nodes = tuple(parse_node_id(n) for n in config.nodes) if config.nodes is not None else None
    node_class = NodeClass.parse(config.node_class) if config.node_class else None
    chosen = resolve(Selection(nodes=nodes, racks=config.racks, node_class=node_class), catalog)
    by_node = {s.node: s for s in series}

    if nodes is not None:
        grouping = Grouping.BY_NODE
        keyed = [(n.canonical, [n]) for n in chosen]
    elif config.racks is not None:
        grouping = Grouping.BY_RACK
        racks = [r for r in catalog.rack_order() if r in set(config.racks)]
        keyed = [(f"r{r}", [n for n in chosen if n.rack == r]) for r in racks]
    else:
        grouping = Grouping.BY_CLASS
        keyed = [(c.value, [n for n in chosen if catalog.class_of_rack[n.rack] is c]) for c in NodeClass]
    groups = []
    for key, expected in keyed:
        if not expected:
            continue
        groups.append(_Group(key, expected, [by_node[n] for n in expected if n in by_node]))
    if not groups:
        raise EmptyInput("the selection matches no catalog nodes")
    return grouping, groups


def _periods(config: RunConfig, tz, series: list[TimeSeries]) -> PeriodPair | Period:
    if config.period_a and config.period_b:
        return PeriodPair(_period_arg(config.period_a, tz, "period-a"), _period_arg(config.period_b, tz, "period-b"))
    if config.period_a or config.period_b:
        return _period_arg(config.period_a or config.period_b, tz, "period")
    split = local_epoch(config.split_date, tz)
    start, end = local_epoch(DEFAULT_SPAN[0], tz), local_epoch(DEFAULT_SPAN[1], tz)
    t = [s.present_timestamps() for s in series if s.n_missing < len(s)]
    if t:
        lo = min(float(x[0]) for x in t)
        hi = max(float(x[-1]) for x in t)
        start = min(start, _day_floor(lo, tz))
        end = max(end, _day_floor(hi, tz) + DAY)
    start = min(start, split - DAY)
    end = max(end, split + DAY)
    return PeriodPair(Period("non-covid", start, split), Period("covid", split, end))


def _day_floor(t: float, tz) -> int:
    off = int(tz.utcoffset(None).total_seconds())
    return int((t + off) // DAY * DAY - off)


def _season_span(members: list[TimeSeries], window: Period, tz) -> Period | None:
    ts = [s.present_timestamps() for s in members]
    ts = [x[(x >= window.start) & (x < window.end)] for x in ts]
    ts = [x for x in ts if x.size]
    if not ts:
        return None
    lo = max(window.start, _day_floor(min(float(x[0]) for x in ts), tz))
    hi = min(window.end, _day_floor(max(float(x[-1]) for x in ts), tz) + DAY)
    return Period("season", lo, hi)


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


class _Writer:
    def __init__(self, root: Path, tables: str):
        self.root = root
        self.tables = "md" if tables in ("md", "markdown") else "csv"
        self.files: list[str] = []

    def text(self, rel: str, content: str) -> None:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(content)
        self.files.append(rel)

    def chart(self, rel: str, spec: ChartSpec) -> None:
        self.text(rel, render_chart(spec))

    def table(self, rel_stem: str, doc: TableDoc) -> None:
        fmt = "markdown" if self.tables == "md" else "csv"
        self.text(f"{rel_stem}.{self.tables}", emit_table(doc, fmt))


def run(config: RunConfig) -> RunSummary:
    """Execute one analysis run and write its artifacts under ``config.out``."""
    collector = _Collector()
    pkg_log = logging.getLogger("tracelens")
    pkg_log.addHandler(collector)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            summary = _run(config)
        for w in caught:
            collector.messages.append(str(w.message))
    finally:
        pkg_log.removeHandler(collector)
    summary.warnings = list(dict.fromkeys(collector.messages))
    _write_summary(config, summary)
    return summary


def _run(config: RunConfig) -> RunSummary:
    tz = parse_utc_offset(config.tz)
    store, metric = _pick_store(config)
    raw = read_store(store, metric=metric)
    if not raw:
        raise EmptyInput(f"{store} holds no series")
    metric = raw[0].metric
    catalog = load_catalog(config.catalog, observed=[s.node for s in raw])
    grouping, groups = _groups(config, catalog, raw)
    periods = _periods(config, tz, raw)

    root = Path(config.out)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output dir {root}: {exc.strerror}") from None
    writer = _Writer(root, config.tables)
    summary = RunSummary(root)
    agg = AggMode(config.agg)
    base = metric.slug

    for g in groups:
        g.series = [resample(s, config.interval_s) for s in g.series]
        cov = coverage(g.series, g.expected)
        summary.coverage[g.key] = cov
        prefix = f"{base}/{g.key}"
        writer.text(f"{prefix}/coverage.json", json.dumps(cov.as_dict(), indent=2, sort_keys=True) + "\n")
        if not any(len(s.present_values()) for s in g.series):
            log.warning("group %s has no present samples; only coverage written", g.key)
            continue
        _profiles(writer, prefix, g, metric, periods, agg, tz)
        if isinstance(periods, PeriodPair):
            _comparison(writer, prefix, g, metric, catalog, periods, grouping)
        else:
            _single(writer, prefix, g, metric, periods)

    if isinstance(periods, PeriodPair) and len(groups) > 1:
        every = [s for g in groups for s in g.series if len(s.present_values())]
        if every:
            report = compare(every, catalog, periods, Grouping.BY_RACK, densities=False)
            writer.chart(f"{base}/all/racks-bar.svg", _rack_bar(report, metric, "all racks"))
            writer.table(f"{base}/all/racks", rack_table(report))
    summary.files = sorted(writer.files)
    return summary


def _ylabel(metric: MetricKind) -> str:
    return f"{metric.token} ({metric.unit})" if metric.unit else metric.token


def _profiles(writer, prefix, g: _Group, metric, periods, agg, tz) -> None:
    sides = [periods.a, periods.b] if isinstance(periods, PeriodPair) else [periods]
    for kind, name, xl in ((ProfileKind.WEEKLY, "weekly", "weekday"), (ProfileKind.HOURLY, "hourly", "hour of day")):
        chart_series, ticks = [], None
        for period in sides:
            members = [s.between(period.start, period.end) for s in g.series]
            members = [s for s in members if len(s)]
            if not members:
                continue
            prof = profile(members, kind, agg, tz)
            ticks = profile_ticks(prof, tz)
            chart_series.append(ChartSeries(period.label, prof))
        if chart_series:
            writer.chart(f"{prefix}/{name}.svg", ChartSpec(
                ChartKind.CURVE, f"{metric.token} {g.key} {name} profile ({agg.value})",
                xl, _ylabel(metric), chart_series, x_ticks=ticks,
            ))

    window = periods.span if isinstance(periods, PeriodPair) else periods
    span = _season_span(g.series, window, tz)
    if span is None:
        return
    members = [s.between(span.start, span.end) for s in g.series]
    prof = profile([s for s in members if len(s)], ProfileKind.SEASON, agg, tz, span=span)
    notes = []
    if isinstance(periods, PeriodPair):
        boundary = periods.b.start if periods.a.start < periods.b.start else periods.a.start
        if span.start < boundary < span.end:
            notes.append(VLine((boundary - span.start) / DAY, format_local(boundary, tz)[:10]))
    writer.chart(f"{prefix}/season.svg", ChartSpec(
        ChartKind.CURVE, f"{metric.token} {g.key} daily profile ({agg.value})",
        "date", _ylabel(metric), [ChartSeries(f"daily {agg.value}", prof)], notes, profile_ticks(prof, tz),
    ))


def _distribution_charts(writer, prefix, key, metric, sides) -> None:
    """``sides``: (label, pooled values, density or None) per period with data."""
    violins, boxes, curves = [], [], []
    for label, vals, density in sides:
        box = box_stats(vals)
        violins.append(ChartSeries(label, density if density is not None else float(vals[0]), box))
        boxes.append(ChartSeries(label, box))
        curves.append(ChartSeries(label, ecdf(vals)))
    if not violins:
        return
    title = f"{metric.token} {key}"
    writer.chart(f"{prefix}/violin.svg", ChartSpec(ChartKind.VIOLIN, f"{title} distribution", "period", _ylabel(metric), violins))
    writer.chart(f"{prefix}/box.svg", ChartSpec(ChartKind.BOX, f"{title} box plot", "period", _ylabel(metric), boxes))
    writer.chart(f"{prefix}/ecdf.svg", ChartSpec(ChartKind.ECDF, f"{title} ECDF", _ylabel(metric), "cumulative probability", curves))


def _comparison(writer, prefix, g: _Group, metric, catalog, pair: PeriodPair, grouping: Grouping) -> None:
    present = [s for s in g.series if len(s.present_values())]
    report = compare(present, catalog, pair, grouping)
    gc = report[g.key]
    sides = []
    for period, density in ((pair.a, gc.density_a), (pair.b, gc.density_b)):
        vals = pooled_values([s.between(period.start, period.end) for s in present])
        if vals.size:
            sides.append((period.label, vals, density))
    _distribution_charts(writer, prefix, g.key, metric, sides)
    writer.table(f"{prefix}/stats", stats_table(report))

    by_rack = compare(present, catalog, pair, Grouping.BY_RACK, densities=False)
    writer.chart(f"{prefix}/racks-bar.svg", _rack_bar(by_rack, metric, g.key))
    writer.table(f"{prefix}/racks", rack_table(by_rack))


def _single(writer, prefix, g: _Group, metric, period: Period) -> None:
    vals = pooled_values([s.between(period.start, period.end) for s in g.series])
    if vals.size == 0:
        log.warning("group %s has no samples in %s", g.key, period.label)
        return
    try:
        density = kde(vals)
    except DegenerateDistribution:
        density = None
    _distribution_charts(writer, prefix, g.key, metric, [(period.label, vals, density)])
    s = summary_stats(vals)
    row = [g.key, period.label, s.count, s.mean, s.std, s.median, s.q1, s.q3, s.max, s.min]
    headers = ("group", "period", *STAT_COLUMNS, "min")
    writer.table(f"{prefix}/stats", TableDoc(headers, [row], (None, None, None) + (3,) * (len(headers) - 3)))


def _rack_bar(report, metric, key) -> ChartSpec:
    series = []
    for period, side in ((report.pair.a, "a"), (report.pair.b, "b")):
        bars = [
            BarDatum(k, getattr(gc, side).mean, getattr(gc, side).std)
            for k, gc in report.per_group.items()
            if getattr(gc, side) is not None
        ]
        if bars:
            series.append(ChartSeries(period.label, bars))
    notes = []
    classes = [gc.node_class for gc in report.per_group.values()]
    if NodeClass.GENERIC in classes and NodeClass.ML in classes:
        notes.append(VLine(classes.index(NodeClass.ML) - 0.5, "generic | ml"))
    return ChartSpec(ChartKind.BAR, f"{metric.token} {key} mean per rack", "rack", _ylabel(metric), series, notes)


def _write_summary(config: RunConfig, summary: RunSummary) -> None:
    doc = {
        "config": config.as_dict(),
        "files": summary.files,
        "coverage": {k: {"coverage_pct": c.coverage_label, "expected_nodes": c.expected_nodes,
                         "present_nodes": c.present_nodes} for k, c in summary.coverage.items()},
        "warnings": summary.warnings,
    }
    path = summary.out / "run-summary.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# subcommands


def _synth_main(argv: Sequence[str]) -> int:
    from .synth import SynthConfig, generate, load_synth_config

    p = argparse.ArgumentParser(prog="tracelens synth", description="Write a seeded synthetic trace store.")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--config", metavar="PATH", help="synth TOML config")
    p.add_argument("--seed", type=int)
    p.add_argument("--missing-fraction", type=float, metavar="F", help="fraction of nodes omitted per class")
    args = p.parse_args(argv)
    config = load_synth_config(args.config) if args.config else SynthConfig.default()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.missing_fraction is not None:
        changes["missing_node_fraction"] = args.missing_fraction
    if changes:
        config = SynthConfig(**{**{f: getattr(config, f) for f in config.__dataclass_fields__}, **changes})
    result = generate(config, args.out)
    for m, path in sorted(result.stores.items()):
        print(f"{m.token}\t{path}")
    print(f"catalog\t{result.catalog_path}")
    print(f"truth\t{result.truth_path}")
    return 0


def _ingest_main(argv: Sequence[str]) -> int:
    p = argparse.ArgumentParser(prog="tracelens ingest", description="Convert Prometheus matrix JSON to a CSV store.")
    p.add_argument("inputs", nargs="+", metavar="JSON")
    p.add_argument("--out", required=True, metavar="CSV")
    p.add_argument("--metric", help="metric kind for all inputs (default: from __name__)")
    p.add_argument("--ingest-config", metavar="PATH", help="TOML with [ingest] node_label and metric names")
    args = p.parse_args(argv)
    cfg = IngestConfig.load(args.ingest_config) if args.ingest_config else IngestConfig()
    metric = MetricKind.parse(args.metric) if args.metric else None
    merged: dict[NodeRef, list[TimeSeries]] = {}
    skipped: list[str] = []
    for path in args.inputs:
        try:
            text = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        for s in parse_prometheus_matrix(text, metric, cfg, skipped):
            merged.setdefault(s.node, []).append(s)
    series = []
    for node, parts in sorted(merged.items()):
        if len(parts) == 1:
            series.append(parts[0])
            continue
        ts = np.concatenate([s.timestamps for s in parts])
        vals = np.concatenate([s.values for s in parts])
        pres = np.concatenate([s.present for s in parts])
        series.append(TimeSeries.from_unsorted(node, parts[0].metric, ts, vals, pres))
    manifest = write_store(series, args.out)
    print(f"{manifest.metric.token}: {len(manifest.nodes)} nodes, {manifest.sample_count} samples -> {args.out}")
    if skipped:
        print(f"skipped {len(skipped)} entries with unparsable node labels", file=sys.stderr)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if argv and argv[0] == "synth":
            return _synth_main(argv[1:])
        if argv and argv[0] == "ingest":
            return _ingest_main(argv[1:])
        if argv and argv[0] == "run":
            argv = argv[1:]
        args = _run_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.INFO)
        summary = run(build_config(args))
        print(f"wrote {len(summary.files)} files to {summary.out}")
        for key, cov in summary.coverage.items():
            print(f"coverage {key}: {cov.coverage_label}% ({cov.present_nodes}/{cov.expected_nodes} nodes)")
        return 0
    except TracelensError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return exc.exit_status


if __name__ == "__main__":
    sys.exit(main())
