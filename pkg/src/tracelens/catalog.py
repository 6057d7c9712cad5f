"""Rack/node topology and node selection.

Catalog files are TOML::

    [rack.30]
    class = "ml"
    nodes = 8            # nodes 1..8; or an explicit list such as [1, 2, 5]

    [rack.23]
    class = "generic"    # no ``nodes`` key: nodes come from the observed data

    [classes]            # optional shorthand for racks without a table
    ml = [31, 32]
    generic = [10, 11]

A rack given two different classes (in ``[classes]`` or between a table and
``[classes]``) raises :class:`CatalogConflict`.
"""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import CatalogConflict, CatalogCorrupt, ConfigError, UnknownNode, UnknownRack
from .model import NodeClass, NodeRef

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

DEFAULT_ML_RACKS = frozenset({30, 31, 32, 33, 34})


@dataclass(frozen=True)
class Catalog:
    nodes: tuple[NodeRef, ...]
    class_of_rack: Mapping[int, NodeClass]

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes)))
        classes = MappingProxyType(dict(sorted(self.class_of_rack.items())))
        for n in nodes:
            if n.rack not in classes:
                raise CatalogCorrupt(f"node {n} sits in rack {n.rack}, which has no class")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "class_of_rack", classes)

    @property
    def racks(self) -> list[int]:
        return list(self.class_of_rack)

    @property
    def generic_racks(self) -> list[int]:
        return [r for r, c in self.class_of_rack.items() if c is NodeClass.GENERIC]

    @property
    def ml_racks(self) -> list[int]:
        return [r for r, c in self.class_of_rack.items() if c is NodeClass.ML]

    def __contains__(self, node: NodeRef) -> bool:
        return node in self._node_set

    @property
    def _node_set(self) -> frozenset[NodeRef]:
        # cached lazily; the dataclass is frozen so bypass __setattr__
        try:
            return self.__dict__["_nodes_cache"]
        except KeyError:
            s = frozenset(self.nodes)
            self.__dict__["_nodes_cache"] = s
            return s

    def class_of(self, node: NodeRef) -> NodeClass:
        if node not in self:
            raise UnknownNode(node.canonical)
        return self.class_of_rack[node.rack]

    def nodes_in_rack(self, rack: int) -> list[NodeRef]:
        return [n for n in self.nodes if n.rack == rack]

    def nodes_in_class(self, node_class: NodeClass) -> list[NodeRef]:
        return [n for n in self.nodes if self.class_of_rack[n.rack] is node_class]

    def rack_order(self) -> list[int]:
        """Generic racks first, then ML racks, each ascending."""
        return self.generic_racks + self.ml_racks


def default_class(rack: int) -> NodeClass:
    return NodeClass.ML if rack in DEFAULT_ML_RACKS else NodeClass.GENERIC


def default_catalog(observed: Iterable[NodeRef] = ()) -> Catalog:
    """Racks 30-34 are ML; every other observed rack is Generic."""
    nodes = tuple(observed)
    return Catalog(nodes, {n.rack: default_class(n.rack) for n in nodes})


def load_catalog(path: str | Path | None = None, observed: Iterable[NodeRef] = ()) -> Catalog:
    """Load a catalog file, or build the default one when ``path`` is None.

    ``observed`` nodes (usually from a store) fill racks that declare no node
    list; observed nodes in racks the file does not mention are classified
    by the default rule, with a warning.
    """
    observed = sorted(set(observed))
    if path is None:
        return default_catalog(observed)
    try:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read catalog {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise CatalogCorrupt(f"{path}: {exc}") from None

    classes: dict[int, NodeClass] = {}

    def assign(rack, cls):
        rack = _rack_number(rack)
        if classes.get(rack, cls) is not cls:
            raise CatalogConflict(f"rack {rack} is both {classes[rack]} and {cls}")
        classes[rack] = cls

    shorthand = doc.get("classes", {})
    if not isinstance(shorthand, dict):
        raise CatalogCorrupt("[classes] must be a table")
    for name, racks in shorthand.items():
        cls = NodeClass.parse(name)
        if not isinstance(racks, list):
            raise CatalogCorrupt(f"classes.{name} must be a list of rack numbers")
        for rack in racks:
            assign(rack, cls)

    explicit: dict[int, list[int]] = {}
    tables = doc.get("rack", {})
    if not isinstance(tables, dict):
        raise CatalogCorrupt("[rack.N] entries must be tables")
    for key, entry in tables.items():
        if not isinstance(entry, dict) or "class" not in entry:
            raise CatalogCorrupt(f"rack.{key} needs a class")
        rack = _rack_number(key)
        assign(rack, NodeClass.parse(str(entry["class"])))
        if "nodes" in entry:
            explicit[rack] = _node_numbers(rack, entry["nodes"])

    nodes = [NodeRef(r, i) for r, ids in explicit.items() for i in ids]
    for n in observed:
        if n.rack in explicit:
            continue
        if n.rack not in classes:
            log.warning("rack %d is not in %s; classified as %s", n.rack, path, default_class(n.rack))
            classes[n.rack] = default_class(n.rack)
        nodes.append(n)
    return Catalog(tuple(nodes), classes)


def _rack_number(key) -> int:
    try:
        rack = int(key)
    except (TypeError, ValueError):
        raise CatalogCorrupt(f"rack id {key!r} is not a number") from None
    if rack < 0:
        raise CatalogCorrupt(f"rack id {key!r} is negative")
    return rack


def _node_numbers(rack: int, spec) -> list[int]:
    if isinstance(spec, int) and not isinstance(spec, bool) and spec >= 0:
        return list(range(1, spec + 1))
    if isinstance(spec, list) and all(isinstance(i, int) and i >= 0 for i in spec):
        return sorted(set(spec))
    raise CatalogCorrupt(f"rack.{rack}.nodes must be a count or a list of node numbers")


def dump_catalog(catalog: Catalog) -> str:
    """Serialize with explicit node lists so that a reload is exact."""
    lines = []
    for rack, cls in catalog.class_of_rack.items():
        ids = ", ".join(str(n.node) for n in catalog.nodes_in_rack(rack))
        lines += [f"[rack.{rack}]", f'class = "{cls.value}"', f"nodes = [{ids}]", ""]
    return "\n".join(lines)


@dataclass(frozen=True)
class Selection:
    """User selection: explicit nodes *or* racks, optionally narrowed by class."""

    nodes: tuple[NodeRef, ...] | None = None
    racks: tuple[int, ...] | None = None
    node_class: NodeClass | None = None

    def __post_init__(self):
        if self.nodes is not None and self.racks is not None:
            raise ConfigError("select nodes or racks, not both")
        if self.nodes is not None:
            object.__setattr__(self, "nodes", tuple(self.nodes))
        if self.racks is not None:
            object.__setattr__(self, "racks", tuple(self.racks))

    @property
    def is_empty(self) -> bool:
        return self.nodes is None and self.racks is None and self.node_class is None


def resolve(selection: Selection, catalog: Catalog) -> list[NodeRef]:
    """Concrete nodes for ``selection``, ordered by (rack, node)."""
    if selection.nodes is not None:
        for n in selection.nodes:
            if n not in catalog:
                raise UnknownNode(n.canonical)
        picked = set(selection.nodes)
    elif selection.racks is not None:
        known = set(catalog.class_of_rack)
        for r in selection.racks:
            if r not in known:
                raise UnknownRack(f"r{r}")
        racks = set(selection.racks)
        picked = {n for n in catalog.nodes if n.rack in racks}
    else:
        picked = set(catalog.nodes)
    if selection.node_class is not None:
        picked = {n for n in picked if catalog.class_of_rack[n.rack] is selection.node_class}
    # hand back the catalog's own NodeRef objects so raw ids are consistent
    return [n for n in catalog.nodes if n in picked]
