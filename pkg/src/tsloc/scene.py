"""Static world: node roster, roles, true positions and link flags."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from tsloc.errors import (
    DuplicateNodeId,
    EmptyScene,
    MixedDimensionality,
    ScenarioError,
    UnknownNodeId,
)


class NodeRole(str, enum.Enum):
    FIXED_TRANSMIT_ONLY = "FixedTransmitOnly"
    FIXED_RECEIVE_ONLY = "FixedReceiveOnly"
    FIXED_TRANSCEIVER = "FixedTransceiver"
    MOBILE_GNSS = "MobileGnss"
    BLIND = "Blind"

    @property
    def is_fixed(self) -> bool:
        return self in (
            NodeRole.FIXED_TRANSMIT_ONLY,
            NodeRole.FIXED_RECEIVE_ONLY,
            NodeRole.FIXED_TRANSCEIVER,
        )


class LinkFlag(str, enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class Node:
    id: str
    role: NodeRole
    position: tuple
    transmits: bool
    receives: bool

    @property
    def pos(self) -> np.ndarray:
        return np.array(self.position, dtype=float)


_FIXED_CAPABILITIES = {
    NodeRole.FIXED_TRANSMIT_ONLY: (True, False),
    NodeRole.FIXED_RECEIVE_ONLY: (False, True),
    NodeRole.FIXED_TRANSCEIVER: (True, True),
}


def _capabilities(role: NodeRole, capability: str | None) -> tuple[bool, bool]:
    """Return (transmits, receives) for a role and optional capability override."""
    if role.is_fixed:
        if capability is not None:
            raise ScenarioError(f"role {role.value} has a fixed capability")
        return _FIXED_CAPABILITIES[role]
    if capability in (None, "transceiver"):
        return True, True
    if capability == "receive_only":
        return False, True
    raise ScenarioError(
        f"mobile/blind nodes are 'transceiver' or 'receive_only', got {capability!r}"
    )


@dataclass(frozen=True)
class Scene:
    """Immutable ground-truth world shared by the simulator and the estimators."""

    nodes: Mapping[str, Node]
    dimension: int
    nlos_links: frozenset = field(default_factory=frozenset)

    def __contains__(self, node_id) -> bool:
        return node_id in self.nodes

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeId(f"unknown node {node_id!r}") from None

    def position(self, node_id: str) -> np.ndarray:
        return self.node(node_id).pos

    def role(self, node_id: str) -> NodeRole:
        return self.node(node_id).role

    @property
    def ids(self) -> list[str]:
        return sorted(self.nodes)

    def ids_with_role(self, *roles: NodeRole) -> list[str]:
        return [i for i in self.ids if self.nodes[i].role in roles]

    @property
    def transmitters(self) -> list[str]:
        return [i for i in self.ids if self.nodes[i].transmits]

    @property
    def receivers(self) -> list[str]:
        return [i for i in self.ids if self.nodes[i].receives]

    def link_flag(self, i: str, k: str) -> LinkFlag:
        self.node(i), self.node(k)
        return LinkFlag.NLOS if frozenset((i, k)) in self.nlos_links else LinkFlag.LOS


def build_scene(config: Mapping) -> Scene:
    """Validate a scene description and freeze it.

    ``config`` holds ``nodes`` (records with ``id``, ``role``, ``coords`` and an
    optional ``capability``) and an optional ``nlos_links`` list of id pairs.
    """
    records = list(config.get("nodes") or [])
    if len(records) < 2:
        raise EmptyScene(f"a scene needs at least 2 nodes, got {len(records)}")

    nodes: dict[str, Node] = {}
    dims = set()
    for rec in records:
        node_id = str(rec["id"])
        if node_id in nodes:
            raise DuplicateNodeId(f"duplicate node id {node_id!r}")
        try:
            role = NodeRole(rec["role"])
        except ValueError:
            raise ScenarioError(f"node {node_id!r}: unknown role {rec['role']!r}") from None
        coords = np.asarray(rec["coords"], dtype=float)
        if coords.ndim != 1 or coords.size not in (2, 3):
            raise MixedDimensionality(f"node {node_id!r}: coords must have 2 or 3 components")
        if not np.all(np.isfinite(coords)):
            raise ScenarioError(f"node {node_id!r}: non-finite coordinates")
        dims.add(coords.size)
        tx, rx = _capabilities(role, rec.get("capability"))
        nodes[node_id] = Node(node_id, role, tuple(float(c) for c in coords), tx, rx)
    if len(dims) != 1:
        raise MixedDimensionality(f"mixed coordinate dimensions {sorted(dims)}")

    nlos = set()
    for pair in config.get("nlos_links") or []:
        i, k = (str(p) for p in pair)
        for n in (i, k):
            if n not in nodes:
                raise UnknownNodeId(f"NLOS link references unknown node {n!r}")
        nlos.add(frozenset((i, k)))

    return Scene(MappingProxyType(nodes), dims.pop(), frozenset(nlos))


def distance(scene: Scene, i: str, k: str) -> float:
    """Euclidean distance between two nodes of ``scene`` in meters."""
    return float(np.linalg.norm(scene.position(i) - scene.position(k)))


def pairwise_distances(points_a: np.ndarray, points_b: np.ndarray) -> np.ndarray:
    diff = np.asarray(points_a, float)[:, None, :] - np.asarray(points_b, float)[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def centroid(positions: Iterable[np.ndarray]) -> np.ndarray:
    return np.mean(np.asarray(list(positions), dtype=float), axis=0)
