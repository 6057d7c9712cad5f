"""Seeded synthetic trace stores with known ground truth.

Every (node, metric) pair draws from its own counter-based SplitMix64
stream, so output does not depend on generation order and can be
reproduced outside Python:

* ``mix(z)``: ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
  z *= 0x94D049BB133111EB; z ^= z >> 31`` (all mod 2**64)
* stream key: ``mix(seed) ^ fnv1a64("<node>/<metric>")``
* k-th draw (k = 0, 1, ...): ``mix(key + (k + 1) * 0x9E3779B97F4A7C15)``
* uniform: ``(draw >> 11) * 2**-53``
* sample i's noise: Box-Muller on draws 2i and 2i+1,
  ``sqrt(-2 ln(1 - u0)) * cos(2 pi u1)``

Value model per sample::

    baseline + amplitude * cos(2 pi (local_hour - peak_hour) / 24)
             + covid_shift * [t >= split] + noise_std * N(0, 1)

optionally clipped to the metric's valid range, then rounded to 3 decimals.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from datetime import timezone
from pathlib import Path
from typing import Mapping

import numpy as np

from .catalog import Catalog, dump_catalog
from .errors import ConfigError
from .ingest import write_store
from .model import (
    DEFAULT_TZ,
    LOAD1,
    POWER,
    RAM,
    TEMPERATURE,
    MetricKind,
    NodeClass,
    NodeRef,
    Period,
    TimeSeries,
    format_utc_offset,
    local_epoch,
    offset_seconds,
    parse_utc_offset,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


# --------------------------------------------------------------------------
# random numbers


def _mix_int(z: int) -> int:
    z &= _M64
    z = ((z ^ (z >> 30)) * _MIX1) & _M64
    z = ((z ^ (z >> 27)) * _MIX2) & _M64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _M64
    return h


def stream_key(seed: int, name: str) -> int:
    return _mix_int(seed) ^ fnv1a64(name)


def uniforms(key: int, n: int, offset: int = 0) -> np.ndarray:
    """Draws ``offset .. offset+n-1`` of a stream as floats in [0, 1)."""
    k = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix_array(np.uint64(key) + k * np.uint64(_GAMMA))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normals(key: int, n: int) -> np.ndarray:
    u = uniforms(key, 2 * n)
    u0, u1 = u[0::2], u[1::2]
    return np.sqrt(-2.0 * np.log1p(-u0)) * np.cos(2.0 * math.pi * u1)


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ClassParams:
    baseline: float
    amplitude: float = 0.0
    covid_shift: float = 0.0


@dataclass(frozen=True)
class MetricParams:
    by_class: Mapping[NodeClass, ClassParams]
    peak_hour: float = 14.0
    noise_std: float = 0.0
    clip: tuple[float | None, float | None] = (None, None)


@dataclass(frozen=True)
class RackSpec:
    node_class: NodeClass
    node_count: int


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    span: Period
    split: float
    racks: Mapping[int, RackSpec]
    metrics: Mapping[MetricKind, MetricParams]
    missing_node_fraction: float | Mapping[NodeClass, float] = 0.0
    interval_s: int = 60
    tz: timezone = DEFAULT_TZ

    def __post_init__(self):
        if self.interval_s <= 0 or int(self.interval_s) != self.interval_s:
            raise ConfigError("interval_s must be a positive whole number of seconds")
        fracs = self._fractions().values()
        if any(not 0.0 <= f <= 1.0 for f in fracs):
            raise ConfigError("missing_node_fraction must lie in [0, 1]")
        if not self.span.start <= self.split <= self.span.end:
            raise ConfigError("split must fall inside the span")
        if not self.racks:
            raise ConfigError("no racks configured")
        if not self.metrics:
            raise ConfigError("no metrics configured")
        for m, params in self.metrics.items():
            used = {r.node_class for r in self.racks.values()}
            if not used <= set(params.by_class):
                raise ConfigError(f"{m}: parameters missing for some node class")
            if params.noise_std < 0:
                raise ConfigError(f"{m}: noise_std must be non-negative")

    def _fractions(self) -> dict[NodeClass, float]:
        f = self.missing_node_fraction
        if isinstance(f, Mapping):
            return {c: float(f.get(c, 0.0)) for c in NodeClass}
        return {c: float(f) for c in NodeClass}

    def catalog(self) -> Catalog:
        nodes = [NodeRef(r, i) for r, spec in self.racks.items() for i in range(1, spec.node_count + 1)]
        return Catalog(tuple(nodes), {r: spec.node_class for r, spec in self.racks.items()})

    def omitted_nodes(self) -> list[NodeRef]:
        """Per class, round(fraction * count) nodes (halves away from zero),
        picked in ascending order of their stream key."""
        cat = self.catalog()
        out = []
        for cls, frac in self._fractions().items():
            members = cat.nodes_in_class(cls)
            k = int(math.floor(frac * len(members) + 0.5))
            ranked = sorted(members, key=lambda n: (stream_key(self.seed, n.canonical), n.sort_key))
            out += ranked[:k]
        return sorted(out)

    def timestamps(self) -> np.ndarray:
        return np.arange(int(self.span.start), int(self.span.end), int(self.interval_s), dtype=np.int64)

    @classmethod
    def default(cls, **overrides) -> SynthConfig:
        """A small four-week, four-metric cluster around the default split."""
        tz = overrides.pop("tz", DEFAULT_TZ)
        g, ml = NodeClass.GENERIC, NodeClass.ML
        racks = {r: RackSpec(g, 8) for r in (10, 11, 12, 23)}
        racks.update({r: RackSpec(ml, 4) for r in (30, 31, 32, 33, 34)})
        metrics = {
            POWER: MetricParams(
                {g: ClassParams(200, 20, 30), ml: ClassParams(1200, 100, 1000)},
                peak_hour=14, noise_std=15, clip=(0, None),
            ),
            LOAD1: MetricParams(
                {g: ClassParams(20, 8, 5), ml: ClassParams(5, 2, -2)},
                peak_hour=11, noise_std=3, clip=(0, None),
            ),
            RAM: MetricParams(
                {g: ClassParams(25, 5, -3), ml: ClassParams(15, 3, 2)},
                peak_hour=15, noise_std=4, clip=(0, 100),
            ),
            TEMPERATURE: MetricParams(
                {g: ClassParams(24.5, 0.5, 0.0), ml: ClassParams(25, 1, 2)},
                peak_hour=16, noise_std=0.3,
            ),
        }
        params = dict(
            seed=2020,
            span=Period("span", local_epoch("2020-02-13", tz), local_epoch("2020-03-12", tz)),
            split=local_epoch("2020-02-27", tz),
            racks=racks,
            metrics=metrics,
            interval_s=300,
            tz=tz,
        )
        params.update(overrides)
        return cls(**params)


def load_synth_config(path: str | Path) -> SynthConfig:
    """Build a config from TOML; unspecified parts fall back to :meth:`SynthConfig.default`.

    ::

        seed = 7
        start = "2020-02-13"
        end = "2020-03-12"
        split = "2020-02-27"
        interval_s = 300
        tz = "+01:00"
        missing_node_fraction = 0.0        # or a table: {ml = 0.47}

        [racks.30]
        class = "ml"
        nodes = 4

        [metrics.power_watts]
        peak_hour = 14
        noise_std = 50
        clip = [0, "none"]
        generic = {baseline = 200, amplitude = 20, covid_shift = 30}
        ml = {baseline = 1200, amplitude = 100, covid_shift = 1000}
    """
    try:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot load synth config {path}: {exc}") from None
    tz = parse_utc_offset(doc.get("tz", format_utc_offset(DEFAULT_TZ)))
    base = SynthConfig.default(tz=tz)
    start = local_epoch(doc["start"], tz) if "start" in doc else base.span.start
    end = local_epoch(doc["end"], tz) if "end" in doc else base.span.end
    split = local_epoch(doc["split"], tz) if "split" in doc else base.split

    racks = dict(base.racks)
    if "racks" in doc:
        racks = {
            int(r): RackSpec(NodeClass.parse(e["class"]), int(e["nodes"])) for r, e in doc["racks"].items()
        }
    metrics = dict(base.metrics)
    if "metrics" in doc:
        metrics = {}
        for token, e in doc["metrics"].items():
            by_class = {
                NodeClass.parse(k): ClassParams(float(v["baseline"]), float(v.get("amplitude", 0)),
                                                float(v.get("covid_shift", 0)))
                for k, v in e.items() if k in ("generic", "ml")
            }
            clip = tuple(None if c in (None, "none") else float(c) for c in e.get("clip", [None, None]))
            metrics[MetricKind.parse(token)] = MetricParams(
                by_class, float(e.get("peak_hour", 14)), float(e.get("noise_std", 0)), clip
            )
    frac = doc.get("missing_node_fraction", 0.0)
    if isinstance(frac, dict):
        frac = {NodeClass.parse(k): float(v) for k, v in frac.items()}
    return SynthConfig(
        seed=int(doc.get("seed", base.seed)),
        span=Period("span", start, end),
        split=split,
        racks=racks,
        metrics=metrics,
        missing_node_fraction=frac,
        interval_s=int(doc.get("interval_s", base.interval_s)),
        tz=tz,
    )


# --------------------------------------------------------------------------
# generation


@dataclass
class GroundTruth:
    """Noise-free per-class means for each period, plus the omitted nodes."""

    omitted_nodes: list[NodeRef]
    means: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)
    sample_counts: dict[str, dict[str, dict[str, int]]] = field(default_factory=dict)

    def mean(self, metric: MetricKind, node_class: NodeClass, period: str) -> float:
        return self.means[metric.token][node_class.value][period]

    def as_dict(self) -> dict:
        return {
            "omitted_nodes": [n.canonical for n in self.omitted_nodes],
            "means": self.means,
            "sample_counts": self.sample_counts,
        }


@dataclass
class SynthResult:
    stores: dict[MetricKind, Path]
    catalog_path: Path
    truth_path: Path
    truth: GroundTruth


PERIOD_LABELS = ("non-covid", "covid")


def signal(config: SynthConfig, metric: MetricKind, node_class: NodeClass, ts: np.ndarray) -> np.ndarray:
    """Noise-free value model at the given timestamps."""
    p = config.metrics[metric]
    c = p.by_class[node_class]
    hour = ((ts + offset_seconds(config.tz)) % 86400) / 3600.0
    diurnal = c.amplitude * np.cos(2.0 * math.pi * (hour - p.peak_hour) / 24.0)
    return c.baseline + diurnal + c.covid_shift * (ts >= config.split)


def node_series(config: SynthConfig, metric: MetricKind, node: NodeRef, node_class: NodeClass) -> TimeSeries:
    ts = config.timestamps()
    p = config.metrics[metric]
    vals = signal(config, metric, node_class, ts)
    if p.noise_std:
        vals = vals + p.noise_std * normals(stream_key(config.seed, f"{node.canonical}/{metric.token}"), len(ts))
    lo, hi = p.clip
    if lo is not None or hi is not None:
        vals = np.clip(vals, lo, hi)
    return TimeSeries(node, metric, ts, np.round(vals, 3))


def generate(config: SynthConfig, out_dir: str | Path) -> SynthResult:
    """Write one CSV store per metric, ``catalog.toml`` and ``ground-truth.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    catalog = config.catalog()
    omitted = set(config.omitted_nodes())
    ts = config.timestamps()
    covid = ts >= config.split
    truth = GroundTruth(sorted(omitted))

    stores = {}
    for metric in sorted(config.metrics):
        series = [
            node_series(config, metric, n, catalog.class_of_rack[n.rack])
            for n in catalog.nodes
            if n not in omitted
        ]
        path = out / f"{metric.slug}.csv"
        write_store(series, path)
        stores[metric] = path
        means, counts = {}, {}
        for cls in NodeClass:
            present = [n for n in catalog.nodes_in_class(cls) if n not in omitted]
            if not present:
                continue
            sig = signal(config, metric, cls, ts)
            means[cls.value] = {}
            counts[cls.value] = {}
            for label, mask in zip(PERIOD_LABELS, (~covid, covid)):
                if mask.any():
                    means[cls.value][label] = float(np.mean(sig[mask]))
                    counts[cls.value][label] = int(mask.sum()) * len(present)
        truth.means[metric.token] = means
        truth.sample_counts[metric.token] = counts

    catalog_path = out / "catalog.toml"
    catalog_path.write_text(dump_catalog(catalog), encoding="utf-8")
    truth_path = out / "ground-truth.json"
    truth_path.write_text(json.dumps(truth.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return SynthResult(stores, catalog_path, truth_path, truth)
