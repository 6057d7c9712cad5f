import hashlib
import json
import math

import numpy as np
import pytest

from tracelens.catalog import load_catalog
from tracelens.compare import compare
from tracelens.errors import ConfigError
from tracelens.ingest import coverage, read_store
from tracelens.model import LOAD1, POWER, NodeClass, Period, local_epoch, split_pair
from tracelens.synth import (
    ClassParams,
    MetricParams,
    RackSpec,
    SynthConfig,
    _mix_array,
    _mix_int,
    fnv1a64,
    generate,
    load_synth_config,
    normals,
    uniforms,
)

G, ML = NodeClass.GENERIC, NodeClass.ML


def test_splitmix64_reference_sequence():
    # published SplitMix64 outputs for state 0
    want = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    gamma = 0x9E3779B97F4A7C15
    assert [_mix_int(k * gamma % 2**64) for k in (1, 2, 3)] == want
    z = np.array([k * gamma % 2**64 for k in (1, 2, 3)], dtype=np.uint64)
    assert _mix_array(z).tolist() == want
    u = uniforms(0, 3)
    assert u.tolist() == [(w >> 11) * 2.0**-53 for w in want]


def test_fnv1a64_reference():
    assert fnv1a64("") == 0xCBF29CE484222325
    assert fnv1a64("a") == 0xAF63DC4C8601EC8C


def test_normals_moments():
    z = normals(12345, 200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    assert np.array_equal(z, normals(12345, 200_000))


def flat_config(**kw):
    tz = kw.pop("tz", None)
    racks = {10: RackSpec(G, 2), 30: RackSpec(ML, 3)}
    metrics = {POWER: MetricParams({G: ClassParams(200.0), ML: ClassParams(1200.0, 0.0, 1000.0)})}
    base = dict(racks=racks, metrics=metrics, interval_s=3600,
                span=Period("span", local_epoch("2020-02-20"), local_epoch("2020-03-05")))
    base.update(kw)
    return SynthConfig.default(**base)


def test_exact_shift_without_noise(tmp_path):
    cfg = flat_config()
    res = generate(cfg, tmp_path)
    series = read_store(res.stores[POWER])
    cat = load_catalog(res.catalog_path)
    rep = compare(series, cat, split_pair(start="2020-01-01"))
    assert rep["ml"].delta_mean == 1000.0
    assert rep["generic"].delta_mean == 0.0
    assert res.truth.mean(POWER, ML, "covid") - res.truth.mean(POWER, ML, "non-covid") == 1000.0


def test_deterministic_bytes(tmp_path):
    cfg = SynthConfig.default(racks={23: RackSpec(G, 2), 31: RackSpec(ML, 2)}, interval_s=3600)

    def digest(d):
        res = generate(cfg, d)
        h = hashlib.sha256()
        for p in sorted(d.iterdir()):
            h.update(p.name.encode() + p.read_bytes())
        return h.hexdigest(), res

    (a, _), (b, _) = digest(tmp_path / "a"), digest(tmp_path / "b")
    assert a == b
    other = SynthConfig(**{**{f: getattr(cfg, f) for f in cfg.__dataclass_fields__}, "seed": cfg.seed + 1})
    generate(other, tmp_path / "c")
    assert (tmp_path / "a" / "power_watts.csv").read_bytes() != (tmp_path / "c" / "power_watts.csv").read_bytes()


def coverage_config(ml_fraction):
    racks = {r: RackSpec(ML, 11) for r in (30, 31, 32, 33, 34)}
    racks[23] = RackSpec(G, 4)
    return flat_config(racks=racks, missing_node_fraction={ML: ml_fraction},
                       span=Period("span", local_epoch("2020-02-26"), local_epoch("2020-02-28")))


def test_coverage_figure(tmp_path):
    cfg = coverage_config(26 / 55)
    res = generate(cfg, tmp_path)
    assert len(res.truth.omitted_nodes) == 26
    cat = load_catalog(res.catalog_path)
    series = read_store(res.stores[POWER])
    rep = coverage(series, cat.nodes_in_class(ML))
    assert (rep.present_nodes, rep.expected_nodes) == (29, 55)
    assert rep.coverage_label == "52.7"
    assert set(rep.missing) == set(res.truth.omitted_nodes)
    # generic racks untouched
    assert coverage(series, cat.nodes_in_class(G)).coverage_label == "100.0"


def test_omitting_29_reads_as_47_3(tmp_path):
    res = generate(coverage_config(29 / 55), tmp_path)
    cat = load_catalog(res.catalog_path)
    rep = coverage(read_store(res.stores[POWER]), cat.nodes_in_class(ML))
    assert len(res.truth.omitted_nodes) == 29
    assert rep.coverage_label == "47.3"


def test_omitted_nodes_in_catalog_not_store(tmp_path):
    res = generate(coverage_config(0.5), tmp_path)
    cat = load_catalog(res.catalog_path)
    stored = {s.node for s in read_store(res.stores[POWER])}
    truth = json.loads(res.truth_path.read_text())
    for n in res.truth.omitted_nodes:
        assert n in cat and n not in stored
        assert n.canonical in truth["omitted_nodes"]
    assert len(cat.nodes) == 59


def test_store_passes_validation(small_synth):
    cfg, res = small_synth
    for metric, path in res.stores.items():
        series = read_store(path)
        assert all(np.all(np.diff(s.timestamps) > 0) for s in series)
        assert {s.metric for s in series} == {metric}
        assert len(series) == 10
    ram = read_store(res.stores[next(m for m in res.stores if m.token == "ram_utilization_pct")])
    assert all(0 <= v <= 100 for s in ram for v in s.present_values())
    assert all(v >= 0 for s in read_store(res.stores[LOAD1]) for v in s.present_values())


def test_empirical_means_converge(tmp_path):
    sigma = 40.0
    metrics = {POWER: MetricParams({G: ClassParams(300.0, 25.0, 15.0), ML: ClassParams(1500.0, 80.0, 1000.0)},
                                   peak_hour=13, noise_std=sigma)}
    cfg = flat_config(metrics=metrics, interval_s=600)
    res = generate(cfg, tmp_path)
    series = read_store(res.stores[POWER])
    cat = load_catalog(res.catalog_path)
    for cls in NodeClass:
        for label, (lo, hi) in (("non-covid", (cfg.span.start, cfg.split)), ("covid", (cfg.split, cfg.span.end))):
            vals = np.concatenate([s.between(lo, hi).present_values() for s in series if cat.class_of(s.node) is cls])
            truth = res.truth.mean(POWER, cls, label)
            assert abs(vals.mean() - truth) <= 3 * sigma / math.sqrt(vals.size)
            assert res.truth.sample_counts[POWER.token][cls.value][label] == vals.size


def test_diurnal_peak_hour(tmp_path):
    metrics = {POWER: MetricParams({G: ClassParams(100.0, 30.0), ML: ClassParams(100.0, 30.0)}, peak_hour=9)}
    cfg = flat_config(metrics=metrics, interval_s=900)
    (s, *_) = read_store(generate(cfg, tmp_path).stores[POWER])
    peak_t = s.timestamps[np.argmax(s.values)]
    assert ((peak_t + 3600) % 86400) / 3600 == 9


@pytest.mark.parametrize(
    "kw",
    [{"missing_node_fraction": 1.5}, {"missing_node_fraction": {ML: -0.1}}, {"interval_s": 0}, {"racks": {}},
     {"split": local_epoch("2021-01-01")}],
)
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        flat_config(**kw)


def test_load_synth_config(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text(
        'seed = 7\nstart = "2020-02-25"\nend = "2020-02-29"\nsplit = "2020-02-27"\ninterval_s = 900\n'
        "missing_node_fraction = {ml = 0.5}\n"
        '[racks.30]\nclass = "ml"\nnodes = 4\n[racks.23]\nclass = "generic"\nnodes = 2\n'
        '[metrics.power_watts]\npeak_hour = 10\nnoise_std = 5\nclip = [0, "none"]\n'
        "generic = {baseline = 200, amplitude = 20}\nml = {baseline = 1200, covid_shift = 1000}\n"
    )
    cfg = load_synth_config(path)
    assert cfg.seed == 7 and cfg.interval_s == 900
    assert cfg.split == local_epoch("2020-02-27")
    assert list(cfg.metrics) == [POWER]
    assert cfg.metrics[POWER].by_class[ML].covid_shift == 1000
    assert cfg.metrics[POWER].clip == (0.0, None)
    assert len(cfg.omitted_nodes()) == 2
