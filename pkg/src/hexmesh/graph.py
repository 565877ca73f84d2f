"""Directed routing graph over a mesh topology.

Each PUC port becomes two artificial nodes: an *in* node (light entering the
PUC through that port) and an *out* node (light leaving through it). Inside a
PUC, every in node on one end has a bar arc and a cross arc to the out nodes
on the other end. Waveguide links join the out node of one port to the in
node of its partner, in both directions. Reflections (in -> out of the same
port) are not representable.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .topology import PORT_NAMES, MeshTopology, Puc, check_topology

_PORT_INDEX = {name: i for i, name in enumerate(PORT_NAMES)}
# (in port, out port, tag) for the 8 internal arcs of one PUC
_INTERNAL = (
    ("A1", "B1", "bar"), ("A1", "B2", "cross"),
    ("A2", "B2", "bar"), ("A2", "B1", "cross"),
    ("B1", "A1", "bar"), ("B1", "A2", "cross"),
    ("B2", "A2", "bar"), ("B2", "A1", "cross"),
)


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class WeightCoeffs:
    """Multipliers on insertion loss (dB), unit length and actuation power (mW)."""

    c_il: float = 1.0
    c_bul: float = 0.0
    c_pc: float = 0.0

    def __post_init__(self):
        vals = (self.c_il, self.c_bul, self.c_pc)
        if any(v < 0 for v in vals):
            raise ValueError(f"weight coefficients must be non-negative, got {vals}")
        if not any(v > 0 for v in vals):
            raise ValueError("at least one weight coefficient must be positive")


def edge_weight(puc: Puc, coeffs: WeightCoeffs) -> float:
    """Arc weight of one PUC traversal; insertion loss enters as a magnitude."""
    return coeffs.c_il * abs(puc.il_db) + coeffs.c_bul * puc.bul + coeffs.c_pc * puc.power_mw


@dataclass(frozen=True, slots=True)
class Arc:
    id: int
    tail: int
    head: int
    puc: int | None  # PUC id for internal arcs, None for waveguide links
    kind: str  # "bar", "cross" or "link"
    base_weight: float


def node_id(puc_pos: int, port: str, outbound: bool) -> int:
    return 8 * puc_pos + 2 * _PORT_INDEX[port] + (1 if outbound else 0)


class MeshGraph:
    """Weighted routing graph with per-arc penalty multipliers.

    Queries may share a graph; :meth:`apply_penalty` and
    :meth:`reset_penalties` mutate it and need exclusive access.
    """

    def __init__(self, topology: MeshTopology, coeffs: WeightCoeffs | None = None):
        self.topology = topology
        self.coeffs = coeffs or WeightCoeffs()
        self.n_nodes = 8 * topology.n_pucs
        self.arcs: list[Arc] = []
        self.puc_arcs: dict[int, tuple[int, ...]] = {}
        for pos, puc in enumerate(topology.pucs):
            w = edge_weight(puc, self.coeffs)
            ids = []
            for src, dst, tag in _INTERNAL:
                arc = Arc(len(self.arcs), node_id(pos, src, False), node_id(pos, dst, True), puc.id, tag, w)
                self.arcs.append(arc)
                ids.append(arc.id)
            self.puc_arcs[puc.id] = tuple(ids)
        self.n_internal = len(self.arcs)
        for a, b in topology.links:
            na = self.port_node(a, True), self.port_node(a, False)
            nb = self.port_node(b, True), self.port_node(b, False)
            self.arcs.append(Arc(len(self.arcs), na[0], nb[1], None, "link", 0.0))
            self.arcs.append(Arc(len(self.arcs), nb[0], na[1], None, "link", 0.0))

        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for arc in self.arcs:
            out[arc.tail].append(arc.id)
        for lst in out:
            lst.sort(key=lambda i: self.arcs[i].head)
        self.out_arcs = [tuple(lst) for lst in out]
        # per-node (head, arc id) lists, plus the same adjacency in CSR form for the router
        self.adjacency = [tuple((self.arcs[i].head, i) for i in lst) for lst in self.out_arcs]
        self.indptr = np.zeros(self.n_nodes + 1, np.int64)
        self.indptr[1:] = np.cumsum([len(lst) for lst in out])
        flat = [i for lst in out for i in lst]
        self.csr_arcs = np.array(flat, np.int64)
        self.csr_heads = np.array([self.arcs[i].head for i in flat], np.int64)
        self.tails = np.array([arc.tail for arc in self.arcs], np.int64)
        self.base_weights = np.array([arc.base_weight for arc in self.arcs], np.float64)
        self.penalty = np.ones(len(self.arcs))
        self.weights = self.base_weights.copy()
        self._entry = {i: self.port_node(ref, False) for i, ref in enumerate(topology.external_ports)}
        self._exit = {i: self.port_node(ref, True) for i, ref in enumerate(topology.external_ports)}
        self.usable = frozenset(topology.usable_ports)

    # -- lookups -----------------------------------------------------------
    def port_node(self, ref, outbound: bool) -> int:
        pid, name = ref
        return node_id(self.topology.puc_position(pid), name, outbound)

    def entry_node(self, port: int) -> int:
        """In node where light injected at external ``port`` enters the mesh."""
        return self._entry[port]

    def exit_node(self, port: int) -> int:
        """Out node from which light leaves the mesh at external ``port``."""
        return self._exit[port]

    def describe_node(self, node: int) -> str:
        puc = self.topology.pucs[node // 8]
        port = PORT_NAMES[(node % 8) // 2]
        return f"{'out' if node % 2 else 'in'}({puc.id}.{port})"

    @property
    def internal_arcs(self) -> list[Arc]:
        return self.arcs[: self.n_internal]

    def effective_weight(self, arc_id: int) -> float:
        return self.weights[arc_id]

    # -- penalties ---------------------------------------------------------
    def apply_penalty(self, arcs: Iterable[int], factor: float) -> "MeshGraph":
        return apply_penalty(self, arcs, factor)

    def reset_penalties(self) -> "MeshGraph":
        self.penalty = np.ones(len(self.arcs))
        self.weights = self.base_weights.copy()
        return self

    def penalized_arcs(self) -> set[int]:
        return {int(i) for i in np.flatnonzero(self.penalty != 1.0)}

    def copy(self) -> "MeshGraph":
        """Independent clone; penalty state is copied, structure shared."""
        other = copy.copy(self)
        other.penalty = self.penalty.copy()
        other.weights = self.weights.copy()
        return other


def build_graph(topology: MeshTopology, coeffs: WeightCoeffs | None = None) -> MeshGraph:
    check_topology(topology)
    return MeshGraph(topology, coeffs)


MAX_PENALTY = 1e100  # keeps repeated penalties finite; far beyond any useful weight ratio


def apply_penalty(graph: MeshGraph, arcs: Iterable[int], factor: float) -> MeshGraph:
    """Multiply the penalty of each listed internal arc by ``factor`` (> 1), up to ``MAX_PENALTY``."""
    if not factor > 1:
        raise ValueError(f"penalty factor must be > 1, got {factor}")
    arcs = list(arcs)
    for a in arcs:
        if not (isinstance(a, (int, np.integer)) and 0 <= a < graph.n_internal):
            raise GraphError(f"unknown internal arc id {a!r}")
    for a in arcs:
        graph.penalty[a] = min(graph.penalty[a] * factor, MAX_PENALTY)
        graph.weights[a] = graph.arcs[a].base_weight * graph.penalty[a]
    return graph


def reset_penalties(graph: MeshGraph) -> MeshGraph:
    return graph.reset_penalties()


# --------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class LightPath:
    """Contiguous arc sequence from an external input to an external output."""

    in_port: int | None
    out_port: int | None
    arcs: tuple[Arc, ...]
    total_weight: float

    @property
    def nodes(self) -> tuple[int, ...]:
        if not self.arcs:
            return ()
        return (self.arcs[0].tail,) + tuple(a.head for a in self.arcs)

    @property
    def puc_arcs(self) -> tuple[Arc, ...]:
        return tuple(a for a in self.arcs if a.puc is not None)

    @property
    def puc_count(self) -> int:
        """Number of PUC traversals."""
        return sum(1 for a in self.arcs if a.puc is not None)

    @property
    def pucs(self) -> tuple[int, ...]:
        return tuple(a.puc for a in self.arcs if a.puc is not None)

    @property
    def base_weight(self) -> float:
        w = 0.0
        for a in self.arcs:
            w += a.base_weight
        return w

    @property
    def required_states(self) -> dict[int, str]:
        return path_states(self)

    def il_db(self, topology: MeshTopology) -> float:
        """Summed PUC transmission along the path (dB, <= 0)."""
        total = 0.0
        for pid in self.pucs:
            total += topology.puc(pid).il_db
        return total


def path_states(path: LightPath) -> dict[int, str]:
    """Bar/cross requirement for every PUC the path traverses."""
    states: dict[int, str] = {}
    prev = None
    for arc in path.arcs:
        if prev is not None and arc.tail != prev.head:
            raise GraphError(f"path is not contiguous at arc {arc.id}")
        prev = arc
        if arc.puc is None:
            continue
        have = states.setdefault(arc.puc, arc.kind)
        if have != arc.kind:
            raise GraphError(f"path needs PUC {arc.puc} in both bar and cross")
    return states


def path_from_arcs(graph: MeshGraph, arc_ids: Iterable[int], in_port=None, out_port=None) -> LightPath:
    arcs = tuple(map(graph.arcs.__getitem__, arc_ids))
    w = 0.0
    for x in graph.weights[[a.id for a in arcs]].tolist():
        w += x
    return LightPath(in_port, out_port, arcs, w)


def merge_states(paths: Iterable[LightPath]) -> dict[int, str]:
    """Union of per-path states; raises if two paths disagree on a PUC."""
    merged: dict[int, str] = {}
    for p in paths:
        for pid, st in path_states(p).items():
            if merged.setdefault(pid, st) != st:
                raise GraphError(f"PUC {pid} required both bar and cross")
    return merged


def states_to_puc_states(states: Mapping[int, str]):
    from .topology import BAR, CROSS
    return {pid: (BAR if s == "bar" else CROSS) for pid, s in states.items()}
