import numpy as np
import pytest

from tracelens.model import LOAD1, TimeSeries, parse_node_id


def make_series(node="r23n1", values=(1.0, 2.0, 3.0), start=0, step=15, metric=LOAD1, present=None):
    ref = parse_node_id(node) if isinstance(node, str) else node
    ts = start + step * np.arange(len(values))
    return TimeSeries(ref, metric, ts, values, present)


@pytest.fixture
def series_factory():
    return make_series


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """A compact four-metric synthetic store (shared, read-only)."""
    from tracelens.model import NodeClass
    from tracelens.synth import RackSpec, SynthConfig, generate

    g, ml = NodeClass.GENERIC, NodeClass.ML
    cfg = SynthConfig.default(
        racks={10: RackSpec(g, 3), 23: RackSpec(g, 3), 30: RackSpec(ml, 2), 33: RackSpec(ml, 2)},
        interval_s=1800,
    )
    out = tmp_path_factory.mktemp("synth")
    return cfg, generate(cfg, out)
