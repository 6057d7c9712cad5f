"""Prometheus range-query ingestion, the canonical CSV store, and coverage.

Store layout: one UTF-8 CSV per metric with header ``node,timestamp,value``,
integer epoch-second timestamps and an empty ``value`` field for a missing
observation. A ``<store>.manifest.json`` sidecar records the metric and
summary counts.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BadEnvelope, ConfigError, MalformedNodeId, MixedMetrics, StoreCorrupt
from .model import MetricKind, NodeRef, TimeSeries, parse_node_id

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

STORE_HEADER = ("node", "timestamp", "value")
STORE_FORMAT = "tracelens-csv/1"
DEFAULT_SCRAPE_INTERVAL = 15


# --------------------------------------------------------------------------
# Prometheus


@dataclass(frozen=True)
class IngestConfig:
    """Which label names the node, and how ``__name__`` maps to metrics."""

    node_label: str = "node"
    metric_map: Mapping[str, MetricKind] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> IngestConfig:
        """Read the ``[ingest]`` table of a TOML file::

            [ingest]
            node_label = "instance"
            [ingest.metrics]
            node_load1 = "load1"
            surf_power_watts = "power_watts"
        """
        try:
            doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot load ingest config {path}: {exc}") from None
        section = doc.get("ingest", {})
        metrics = {k: MetricKind.parse(v) for k, v in section.get("metrics", {}).items()}
        return cls(section.get("node_label", "node"), metrics)


def parse_prometheus_matrix(
    text: str | bytes | dict,
    metric: MetricKind | None = None,
    config: IngestConfig = IngestConfig(),
    skipped: list | None = None,
) -> list[TimeSeries]:
    """Decode a range-query response into one series per node.

    ``metric`` wins when given; otherwise each entry's ``__name__`` label is
    looked up in ``config.metric_map`` (falling back to a custom metric of
    that name). Entries whose node label is absent or unparsable are skipped
    with a warning and their raw label appended to ``skipped``. Entries that
    name the same node are merged. ``"NaN"`` values become missing samples.
    """
    if isinstance(text, dict):
        doc = text
    else:
        try:
            doc = json.loads(text)
        except (ValueError, TypeError) as exc:
            raise BadEnvelope(f"not JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("status") != "success":
        raise BadEnvelope(f"status is {doc.get('status') if isinstance(doc, dict) else None!r}")
    data = doc.get("data")
    if not isinstance(data, dict) or data.get("resultType") != "matrix":
        got = data.get("resultType") if isinstance(data, dict) else None
        raise BadEnvelope(f"resultType is {got!r}, expected 'matrix'")
    result = data.get("result")
    if not isinstance(result, list):
        raise BadEnvelope("data.result is not a list")

    merged: dict[tuple[NodeRef, MetricKind], list] = {}
    for entry in result:
        labels = entry.get("metric", {}) if isinstance(entry, dict) else None
        if not isinstance(labels, dict) or not isinstance(entry.get("values"), list):
            raise BadEnvelope("result entry lacks metric labels or values")
        raw = labels.get(config.node_label)
        try:
            node = parse_node_id(raw)
        except MalformedNodeId:
            log.warning("skipping series with node label %s=%r", config.node_label, raw)
            if skipped is not None:
                skipped.append(raw)
            continue
        kind = metric or _metric_for(labels, config)
        ts, vals, present = merged.setdefault((node, kind), ([], [], []))
        for pair in entry["values"]:
            try:
                t, v = pair
                t = float(t)
                v = float(v)
            except (TypeError, ValueError):
                raise BadEnvelope(f"bad sample {pair!r} for {raw}") from None
            ts.append(t)
            if math.isfinite(v):
                vals.append(v)
                present.append(True)
            else:
                vals.append(0.0)
                present.append(False)
    out = [
        TimeSeries.from_unsorted(node, kind, *cols)
        for (node, kind), cols in merged.items()
    ]
    out.sort(key=lambda s: (s.metric.token, s.node.sort_key))
    return out


def _metric_for(labels: dict, config: IngestConfig) -> MetricKind:
    name = labels.get("__name__")
    if name is None:
        raise BadEnvelope("no metric given and entry has no __name__ label")
    return config.metric_map.get(name) or MetricKind.custom(name)


# --------------------------------------------------------------------------
# CSV store


@dataclass(frozen=True)
class StoreManifest:
    metric: MetricKind
    nodes: tuple[NodeRef, ...]
    time_min: int
    time_max: int
    sample_count: int
    scrape_interval_hint: int = DEFAULT_SCRAPE_INTERVAL

    def as_dict(self) -> dict:
        return {
            "format": STORE_FORMAT,
            "metric": self.metric.token,
            "nodes": [n.canonical for n in self.nodes],
            "time_min": self.time_min,
            "time_max": self.time_max,
            "sample_count": self.sample_count,
            "scrape_interval_hint": self.scrape_interval_hint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> StoreManifest:
        try:
            return cls(
                metric=MetricKind.parse(d["metric"]),
                nodes=tuple(parse_node_id(n) for n in d["nodes"]),
                time_min=int(d["time_min"]),
                time_max=int(d["time_max"]),
                sample_count=int(d["sample_count"]),
                scrape_interval_hint=int(d.get("scrape_interval_hint", DEFAULT_SCRAPE_INTERVAL)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreCorrupt(f"bad manifest: {exc}") from None


def manifest_path(store: str | Path) -> Path:
    store = Path(store)
    return store.with_name(store.name + ".manifest.json")


def read_manifest(store: str | Path) -> StoreManifest | None:
    p = manifest_path(store)
    if not p.exists():
        return None
    try:
        return StoreManifest.from_dict(json.loads(p.read_text(encoding="utf-8")))
    except ValueError as exc:
        raise StoreCorrupt(f"{p}: {exc}") from None


def _format_value(v: float) -> str:
    return repr(float(v))


def write_store(series: Sequence[TimeSeries], path: str | Path) -> StoreManifest:
    """Write one metric's series as a CSV store plus manifest sidecar."""
    if not series:
        raise ValueError("nothing to write")
    metrics = {s.metric for s in series}
    if len(metrics) > 1:
        raise MixedMetrics(", ".join(sorted(m.token for m in metrics)))
    (metric,) = metrics
    ordered = sorted(series, key=lambda s: s.node.sort_key)
    seen = set()
    for s in ordered:
        if s.node in seen:
            raise ValueError(f"node {s.node} appears twice")
        seen.add(s.node)
        if len(s) and not np.all(s.timestamps == np.round(s.timestamps)):
            raise ValueError(f"{s.node}: store timestamps must be whole seconds")
    kept = [s for s in ordered if len(s)]
    for s in ordered:
        if not len(s):
            log.warning("%s has no samples; not stored", s.node)
    if not kept:
        raise ValueError("every series is empty")

    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STORE_HEADER)
    for s in kept:
        raw = s.node.canonical
        w.writerows(
            (raw, int(t), _format_value(v) if p else "")
            for t, v, p in zip(s.timestamps.tolist(), s.values.tolist(), s.present.tolist())
        )
    path.write_text(buf.getvalue(), encoding="utf-8")

    gaps = np.concatenate([np.diff(s.timestamps) for s in kept])
    hint = int(round(float(np.median(gaps)))) if gaps.size else DEFAULT_SCRAPE_INTERVAL
    manifest = StoreManifest(
        metric=metric,
        nodes=tuple(s.node for s in kept),
        time_min=int(min(s.timestamps[0] for s in kept)),
        time_max=int(max(s.timestamps[-1] for s in kept)),
        sample_count=sum(len(s) for s in kept),
        scrape_interval_hint=hint or DEFAULT_SCRAPE_INTERVAL,
    )
    manifest_path(path).write_text(json.dumps(manifest.as_dict(), indent=2) + "\n", encoding="utf-8")
    return manifest


def read_store(
    path: str | Path,
    nodes: Iterable[NodeRef] | None = None,
    start: float | None = None,
    end: float | None = None,
    metric: MetricKind | None = None,
) -> list[TimeSeries]:
    """Read a CSV store.

    ``nodes`` drops whole series; ``start``/``end`` trim samples to
    ``[start, end)``. The metric comes from the manifest, else ``metric``,
    else a custom metric named after the file stem.
    """
    path = Path(path)
    manifest = read_manifest(path)
    if manifest is not None:
        if metric is not None and metric != manifest.metric:
            raise MixedMetrics(f"{path} holds {manifest.metric}, not {metric}")
        metric = manifest.metric
    elif metric is None:
        metric = MetricKind.custom(path.stem)
    wanted = None if nodes is None else set(nodes)

    try:
        fh = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise StoreCorrupt(f"cannot open {path}: {exc.strerror}") from None
    cols: dict[NodeRef, tuple[list, list, list]] = {}
    node_cache: dict[str, NodeRef | None] = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != STORE_HEADER:
            raise StoreCorrupt(f"{path}: header must be {','.join(STORE_HEADER)}")
        for row in reader:
            if len(row) != 3:
                raise StoreCorrupt(f"{path}:{reader.line_num}: expected 3 fields, got {len(row)}")
            raw, t, v = row
            node = node_cache.get(raw, False)
            if node is False:
                try:
                    node = parse_node_id(raw)
                except MalformedNodeId:
                    raise StoreCorrupt(f"{path}:{reader.line_num}: bad node id {raw!r}") from None
                if wanted is not None and node not in wanted:
                    node = None
                node_cache[raw] = node
            if node is None:
                continue
            try:
                ts = int(t)
                val = float(v) if v else 0.0
            except ValueError:
                raise StoreCorrupt(f"{path}:{reader.line_num}: bad number in {row!r}") from None
            if (start is not None and ts < start) or (end is not None and ts >= end):
                continue
            if v and not math.isfinite(val):
                raise StoreCorrupt(f"{path}:{reader.line_num}: non-finite value {v!r}")
            tl, vl, pl = cols.setdefault(node, ([], [], []))
            tl.append(ts)
            vl.append(val)
            pl.append(bool(v))
    return [TimeSeries.from_unsorted(n, metric, *cols[n]) for n in sorted(cols)]


# --------------------------------------------------------------------------
# coverage


def round_half_away(x: float, places: int = 1) -> Decimal:
    return Decimal(repr(x)).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class CoverageReport:
    expected_nodes: int
    present_nodes: int
    coverage_pct: float
    missing: tuple[NodeRef, ...]
    per_node_gap_stats: Mapping[NodeRef, float]
    unexpected: tuple[NodeRef, ...] = ()
    skipped_entries: int = 0
    empty_expected: bool = False

    @property
    def coverage_label(self) -> str:
        """``coverage_pct`` to one decimal, halves rounded away from zero."""
        return str(round_half_away(self.coverage_pct, 1))

    def as_dict(self) -> dict:
        return {
            "expected_nodes": self.expected_nodes,
            "present_nodes": self.present_nodes,
            "coverage_pct": self.coverage_pct,
            "coverage_label": self.coverage_label,
            "missing": [n.canonical for n in self.missing],
            "unexpected": [n.canonical for n in self.unexpected],
            "skipped_entries": self.skipped_entries,
            "empty_expected": self.empty_expected,
            "max_gap_seconds": {n.canonical: g for n, g in self.per_node_gap_stats.items()},
        }


def coverage(
    series: Sequence[TimeSeries], expected: Iterable[NodeRef], skipped: Sequence = ()
) -> CoverageReport:
    """How many expected nodes carry at least one present sample.

    ``per_node_gap_stats`` maps each present node to the longest stretch in
    seconds between consecutive present samples.
    """
    expected = sorted(set(expected))
    gaps: dict[NodeRef, float] = {}
    for s in sorted(series, key=lambda s: s.node.sort_key):
        ts = s.present_timestamps()
        if ts.size == 0:
            continue
        g = float(np.max(np.diff(ts))) if ts.size > 1 else 0.0
        gaps[s.node] = max(g, gaps.get(s.node, 0.0))
    exp_set = set(expected)
    present = [n for n in expected if n in gaps]
    missing = tuple(n for n in expected if n not in gaps)
    unexpected = tuple(n for n in gaps if n not in exp_set)
    if not expected:
        log.warning("coverage requested against an empty node list")
        pct = 100.0
    else:
        pct = 100.0 * len(present) / len(expected)
    return CoverageReport(
        expected_nodes=len(expected),
        present_nodes=len(present),
        coverage_pct=pct,
        missing=missing,
        per_node_gap_stats={n: gaps[n] for n in present},
        unexpected=unexpected,
        skipped_entries=len(skipped),
        empty_expected=not expected,
    )
