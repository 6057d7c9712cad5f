import pytest
from hypothesis import given
from hypothesis import strategies as st

from tracelens.catalog import Catalog, Selection, default_catalog, dump_catalog, load_catalog, resolve
from tracelens.errors import CatalogConflict, CatalogCorrupt, ConfigError, UnknownNode, UnknownRack
from tracelens.model import NodeClass, NodeRef

G, ML = NodeClass.GENERIC, NodeClass.ML


def fixture_catalog():
    nodes = [NodeRef(23, i) for i in range(1, 33)]
    nodes += [NodeRef(r, i) for r in (10, 30, 31, 32, 33, 34) for i in range(1, 5)]
    return default_catalog(nodes)


def test_default_classes():
    cat = fixture_catalog()
    assert cat.class_of(NodeRef(33, 1)) is ML
    assert cat.class_of(NodeRef(23, 5)) is G
    assert cat.generic_racks == [10, 23]
    assert cat.ml_racks == [30, 31, 32, 33, 34]
    assert cat.rack_order() == [10, 23, 30, 31, 32, 33, 34]


def test_resolve_examples():
    cat = fixture_catalog()
    assert len(resolve(Selection(racks=[23]), cat)) == 32
    ml = resolve(Selection(node_class=ML), cat)
    assert {n.rack for n in ml} == {30, 31, 32, 33, 34}
    assert len(ml) == 20
    assert resolve(Selection(), cat) == list(cat.nodes)
    picked = resolve(Selection(nodes=[NodeRef(30, 2), NodeRef(23, 7)]), cat)
    assert [n.canonical for n in picked] == ["r23n7", "r30n2"]
    assert resolve(Selection(racks=[23, 30], node_class=ML), cat) == cat.nodes_in_rack(30)


def test_resolve_errors():
    cat = fixture_catalog()
    with pytest.raises(UnknownRack, match="r99"):
        resolve(Selection(racks=[99]), cat)
    with pytest.raises(UnknownNode, match="r23n99"):
        resolve(Selection(nodes=[NodeRef(23, 99)]), cat)
    with pytest.raises(ConfigError):
        Selection(nodes=[NodeRef(23, 1)], racks=[23])


@given(st.sets(st.sampled_from([10, 23, 30, 31, 32, 33, 34])), st.sampled_from([10, 23, 30, 31, 32, 33, 34]))
def test_resolve_monotone(racks, extra):
    cat = fixture_catalog()
    before = set(resolve(Selection(racks=sorted(racks)), cat))
    after = set(resolve(Selection(racks=sorted(racks | {extra})), cat))
    assert before <= after


def test_class_partition():
    cat = fixture_catalog()
    g = resolve(Selection(node_class=G), cat)
    m = resolve(Selection(node_class=ML), cat)
    assert not set(g) & set(m)
    assert sorted(g + m) == list(cat.nodes)


def test_load_file(tmp_path):
    path = tmp_path / "cat.toml"
    path.write_text(
        '[rack.30]\nclass = "ml"\nnodes = 3\n\n[rack.23]\nclass = "generic"\n\n'
        '[rack.12]\nclass = "generic"\nnodes = [1, 4]\n\n[classes]\nml = [31]\n'
    )
    observed = [NodeRef(23, 1), NodeRef(23, 2), NodeRef(31, 1), NodeRef(12, 9), NodeRef(77, 1)]
    cat = load_catalog(path, observed)
    assert cat.nodes_in_rack(30) == [NodeRef(30, 1), NodeRef(30, 2), NodeRef(30, 3)]
    assert cat.nodes_in_rack(23) == [NodeRef(23, 1), NodeRef(23, 2)]
    assert cat.nodes_in_rack(12) == [NodeRef(12, 1), NodeRef(12, 4)]
    assert cat.class_of(NodeRef(31, 1)) is ML
    assert cat.class_of(NodeRef(77, 1)) is G


def test_load_conflict(tmp_path):
    path = tmp_path / "cat.toml"
    path.write_text("[classes]\nml = [7]\ngeneric = [7]\n")
    with pytest.raises(CatalogConflict):
        load_catalog(path)
    path.write_text('[rack.7]\nclass = "ml"\n[classes]\ngeneric = [7]\n')
    with pytest.raises(CatalogConflict):
        load_catalog(path)


@pytest.mark.parametrize(
    "text", ['[rack.7]\nclass = "ml"\n[rack.7]\nclass = "ml"\n', "[rack.x]\nclass = 'ml'\n", "[rack.7]\nnodes = 2\n", "= ="]
)
def test_load_corrupt(tmp_path, text):
    path = tmp_path / "cat.toml"
    path.write_text(text)
    with pytest.raises(CatalogCorrupt):
        load_catalog(path)


def test_dump_round_trip(tmp_path):
    cat = fixture_catalog()
    path = tmp_path / "cat.toml"
    path.write_text(dump_catalog(cat))
    assert load_catalog(path) == cat


def test_catalog_requires_class_for_every_rack():
    with pytest.raises(CatalogCorrupt):
        Catalog((NodeRef(5, 1),), {})
