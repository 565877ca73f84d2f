"""1×N multicast: a light-path tree from one input with tunable-coupler splits.

The tree is the union of per-output optimal paths. Every PUC where one lane
continues both bar and cross becomes a tunable coupler (TC). Each TC's ideal
ratio ``k_T`` follows from the requested power shares, and the programmed
ratio ``k`` compensates for the unequal losses of its two branches, working
from the deepest TC up to the root.

``k`` is the cross-port power fraction everywhere. Losses are transmissions
in dB (``il_db <= 0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graph import LightPath, MeshGraph, path_from_arcs
from .interconnect import NoRoute, _check_ports, find_arcs, search
from .topology import BAR, CROSS, MeshTopology, PucState

NOMINAL = "nominal"
AVERAGE = "average"
_PROPORTION_TOL = 1e-9


class TreeConflict(RuntimeError):
    """The per-output paths cannot be programmed as one splitting tree."""


@dataclass(frozen=True)
class MulticastRequest:
    input_port: int
    output_ports: tuple[int, ...]
    proportion: tuple[float, ...] | None = None

    def __post_init__(self):
        outs = tuple(int(p) for p in self.output_ports)
        object.__setattr__(self, "output_ports", outs)
        if not outs:
            raise ValueError("at least one output port is required")
        if len(set(outs)) != len(outs):
            raise ValueError(f"output ports must be distinct: {outs}")
        if self.input_port in outs:
            raise ValueError(f"input port {self.input_port} is also an output")
        if self.proportion is None:
            object.__setattr__(self, "proportion", tuple([1.0 / len(outs)] * len(outs)))
        prop = tuple(float(w) for w in self.proportion)
        object.__setattr__(self, "proportion", prop)
        if len(prop) != len(outs):
            raise ValueError(f"{len(prop)} proportions for {len(outs)} outputs")
        if any(not w > 0 for w in prop):
            raise ValueError(f"proportions must be positive: {prop}")
        if abs(math.fsum(prop) - 1.0) > _PROPORTION_TOL:
            raise ValueError(f"proportions sum to {math.fsum(prop)}, not 1")


@dataclass
class MulticastTree:
    """Arcs of the union of per-output paths, rooted at the input's entry node."""

    root: int
    paths: dict[int, LightPath]
    children: dict[int, list] = field(default_factory=dict)  # node -> outgoing tree arcs

    @classmethod
    def from_paths(cls, root: int, paths: Mapping[int, LightPath]) -> "MulticastTree":
        children: dict[int, list] = {}
        parent: dict[int, int] = {}
        for out, p in paths.items():
            for arc in p.arcs:
                if parent.setdefault(arc.head, arc.tail) != arc.tail:
                    raise TreeConflict(f"node {arc.head} is reached from two directions (output {out})")
                kids = children.setdefault(arc.tail, [])
                if arc not in kids:
                    kids.append(arc)
        return cls(root, dict(paths), children)

    @property
    def arcs(self) -> list:
        return [a for kids in self.children.values() for a in kids]

    @property
    def pucs(self) -> set[int]:
        return {a.puc for a in self.arcs if a.puc is not None}

    def outputs_below(self, arc) -> list[int]:
        """Outputs whose path uses ``arc``."""
        return [q for q, p in self.paths.items() if arc in p.arcs]


@dataclass(frozen=True)
class TunablePuc:
    puc_id: int
    k_T: float
    k: float
    il_bar_db: float
    il_cross_db: float


@dataclass
class MulticastConfig:
    input_port: int
    output_ports: tuple[int, ...]
    proportion: tuple[float, ...]
    tree: MulticastTree
    tunable_pucs: list[TunablePuc]  # child to parent
    states: dict[int, PucState]

    @property
    def paths(self) -> dict[int, LightPath]:
        return self.tree.paths


# --------------------------------------------------------------------------
# tree analysis


def _split_arcs(paths: Sequence[LightPath]) -> dict[int, dict[str, object]]:
    """For each PUC, the arcs used out of each entry node: {puc: {in_node: {kind: arc}}}."""
    use: dict[int, dict[int, dict[str, object]]] = {}
    for p in paths:
        for arc in p.arcs:
            if arc.puc is not None:
                use.setdefault(arc.puc, {}).setdefault(arc.tail, {})[arc.kind] = arc
    return use


def get_tunable_pucs(paths: Sequence[LightPath]) -> set[int]:
    """PUCs that two of ``paths`` cross in differing states.

    Paths from one source that share a PUC also share the lane into it, so
    differing states there mean the light must be split.
    """
    required: dict[int, set[str]] = {}
    for p in paths:
        for arc in p.arcs:
            if arc.puc is not None:
                required.setdefault(arc.puc, set()).add(arc.kind)
    return {pid for pid, kinds in required.items() if len(kinds) > 1}


def _check_tree(tree: MulticastTree) -> tuple[dict[int, str], dict[int, object]]:
    """Fixed states of plain PUCs and the split lane of each TC; raise on clashes."""
    fixed: dict[int, str] = {}
    split: dict[int, int] = {}
    for pid, lanes in _split_arcs(list(tree.paths.values())).items():
        kinds = [set(arcs) for arcs in lanes.values()]
        if any(len(k) == 2 for k in kinds):
            if len(lanes) > 1:
                raise TreeConflict(f"PUC {pid} would split one lane while carrying another")
            split[pid] = next(iter(lanes))
        else:
            flat = set().union(*kinds)
            if len(flat) > 1:
                raise TreeConflict(f"PUC {pid} needs bar on one lane and cross on another")
            fixed[pid] = flat.pop()
    return fixed, split


def _tc_depths(tree: MulticastTree, split: Mapping[int, int]) -> dict[int, int]:
    """Largest number of TCs above each TC on any root-to-output path."""
    depth = dict.fromkeys(split, 0)
    for p in tree.paths.values():
        i = 0
        for arc in p.arcs:
            if arc.puc in split and arc.tail == split[arc.puc]:
                depth[arc.puc] = max(depth[arc.puc], i)
                i += 1
    return depth


def sorted_tunable_pucs(tree: MulticastTree) -> list[int]:
    """TCs ordered child to parent (deepest first, then by PUC id)."""
    _, split = _check_tree(tree)
    depth = _tc_depths(tree, split)
    return sorted(split, key=lambda pid: (-depth[pid], pid))


def _branch_arc(tree: MulticastTree, tc: int, branch: str):
    _, split = _check_tree(tree)
    if tc not in split:
        raise ValueError(f"PUC {tc} is not a tunable coupler of this tree")
    for arc in tree.children[split[tc]]:
        if arc.puc == tc and arc.kind == branch:
            return arc
    raise ValueError(f"TC {tc} has no {branch} branch")


def target_ratios(tree: MulticastTree, proportion: Mapping[int, float]) -> dict[int, float]:
    """Ideal cross fraction ``k_T`` of each TC from the requested output shares."""
    missing = set(proportion) - set(tree.paths)
    if missing:
        raise ValueError(f"outputs {sorted(missing)} are not in the tree")
    out = {}
    for tc in sorted_tunable_pucs(tree):
        cross = sum(proportion[q] for q in tree.outputs_below(_branch_arc(tree, tc, "cross")))
        bar = sum(proportion[q] for q in tree.outputs_below(_branch_arc(tree, tc, "bar")))
        out[tc] = cross / (cross + bar)
    return out


def branch_insertion_loss(tree: MulticastTree, tc: int, branch: str, il: Mapping[int, float],
                          solved: Mapping[int, TunablePuc] | None = None) -> float:
    """Transmission (dB) from the TC's ``branch`` output to the outputs it feeds.

    A leaf branch is the summed loss of its PUCs. A branch that meets a
    child TC ``q`` is the connecting loss (including ``q`` itself) plus
    ``q``'s effective transmission ``10*log10(k_q / k_T,q) + IL_q,cross``,
    which by compensation equals the same expression on ``q``'s bar side.
    ``solved`` must already hold every child TC.
    """
    solved = solved or {}
    _, split = _check_tree(tree)
    arc = _branch_arc(tree, tc, branch)
    total = 0.0
    node = arc.head
    while True:
        kids = tree.children.get(node, [])
        if not kids:
            return total
        nxt = kids[0]
        if nxt.puc is None:
            node = nxt.head
            continue
        total += il[nxt.puc]
        if nxt.puc in split and split[nxt.puc] == node:
            child = solved.get(nxt.puc)
            if child is None:
                raise ValueError(f"child TC {nxt.puc} must be solved before TC {tc}")
            return total + 10 * math.log10(child.k / child.k_T) + child.il_cross_db
        node = nxt.head


def splitting_ratio(k_T: float, il_bar_db: float, il_cross_db: float) -> float:
    """Programmed cross fraction so the branches receive ``k_T : 1-k_T`` after their losses."""
    if not 0.0 <= k_T <= 1.0:
        raise ValueError(f"k_T must lie in [0, 1], got {k_T}")
    return k_T / ((1.0 - k_T) * 10 ** ((il_cross_db - il_bar_db) / 10) + k_T)


# --------------------------------------------------------------------------
# synthesis


def _il_map(topology: MeshTopology, il_source: str) -> dict[int, float]:
    if il_source == NOMINAL:
        return {p.id: p.il_db for p in topology.pucs}
    if il_source == AVERAGE:
        avg = float(np.mean([p.il_db for p in topology.pucs]))
        return {p.id: avg for p in topology.pucs}
    raise ValueError(f"unknown IL source {il_source!r}")


def _tree_blocks(graph: MeshGraph, paths: Mapping[int, LightPath]) -> set[int]:
    """Arcs a new branch may not use without breaking the tree built so far.

    A branch may enter a tree node only along its tree arc, may split a PUC
    only on the one lane it carries, and may pass a PUC on another lane only
    in the state already programmed there.
    """
    parent = {a.head: a.tail for p in paths.values() for a in p.arcs}
    blocked = {a.id for a in graph.arcs if a.head in parent and parent[a.head] != a.tail}
    for pid, lanes in _split_arcs(list(paths.values())).items():
        kinds = set().union(*(set(k) for k in lanes.values()))
        for arc_id in graph.puc_arcs[pid]:
            arc = graph.arcs[arc_id]
            if len(kinds) == 2:
                if arc.tail not in lanes:
                    blocked.add(arc_id)
            elif arc.kind not in kinds and (arc.tail not in lanes or len(lanes) > 1):
                blocked.add(arc_id)
    return blocked


def _incremental(graph: MeshGraph, src: int, in_port: int, outputs: Sequence[int]) -> dict[int, LightPath]:
    """Route outputs one by one, riding the tree built so far at zero cost."""
    paths: dict[int, LightPath] = {}
    for q in outputs:
        weights = graph.weights.copy()
        weights[[a.id for p in paths.values() for a in p.arcs]] = 0.0
        found = find_arcs(graph, src, graph.exit_node(q), blocked_arcs=_tree_blocks(graph, paths),
                          weights=weights)
        if found is None:
            raise TreeConflict(f"output {q} cannot join the multicast tree")
        paths[q] = path_from_arcs(graph, found[0], in_port, q)
        _check_tree(MulticastTree.from_paths(src, paths))
    return paths


def auto_multicast(graph: MeshGraph, request: MulticastRequest, *, il_source: str = NOMINAL) -> MulticastConfig:
    """Program a 1×N splitting tree delivering ``request.proportion`` to the outputs.

    ``il_source`` picks the per-PUC loss the ratios compensate for: each
    PUC's own ``il_db`` (``"nominal"``) or the mesh-wide average
    (``"average"``).
    """
    topo = graph.topology
    for q in request.output_ports:
        _check_ports(graph, request.input_port, q)
    src = graph.entry_node(request.input_port)
    tree_search = search(graph, src)
    paths: dict[int, LightPath] = {}
    for q in request.output_ports:
        found = find_arcs(graph, src, graph.exit_node(q), tree=tree_search)
        if found is None:
            raise NoRoute(f"no path from port {request.input_port} to port {q}")
        paths[q] = path_from_arcs(graph, found[0], request.input_port, q)
    try:
        tree = MulticastTree.from_paths(src, paths)
        _check_tree(tree)
    except TreeConflict:
        tree = MulticastTree.from_paths(src, _incremental(graph, src, request.input_port, request.output_ports))
    fixed, split = _check_tree(tree)
    il = _il_map(topo, il_source)
    shares = dict(zip(request.output_ports, request.proportion))
    k_targets = target_ratios(tree, shares)
    solved: dict[int, TunablePuc] = {}
    for tc in sorted_tunable_pucs(tree):
        il_b = branch_insertion_loss(tree, tc, "bar", il, solved)
        il_c = branch_insertion_loss(tree, tc, "cross", il, solved)
        k_T = k_targets[tc]
        solved[tc] = TunablePuc(tc, k_T, splitting_ratio(k_T, il_b, il_c), il_b, il_c)
    states: dict[int, PucState] = {pid: (BAR if st == "bar" else CROSS) for pid, st in fixed.items()}
    states.update({pid: PucState.tunable(t.k) for pid, t in solved.items()})
    return MulticastConfig(request.input_port, request.output_ports, request.proportion, tree,
                           list(solved.values()), dict(sorted(states.items())))


# --------------------------------------------------------------------------
# loss-uncertainty study

# Per-PUC insertion-loss spread (dB), fitted once with fit_il_sigma(n_draws=200, seed=0)
# on mesh72 from MULTICAST_INPUT to a mean 1x2 deviation of 0.663 dB.
IL_SIGMA_DB = 0.774
DEVIATION_ANCHOR_DB = 0.663


@dataclass
class DeviationPoint:
    n_outputs: int
    mean_std_db: float
    mean_range_db: float
    min_power_db: float  # nominal loss model, no perturbation


def perturbed_topologies(topology: MeshTopology, sigma_db: float, n_draws: int, seed: int):
    """Copies with every PUC's ``il_db`` drawn from N(il_db, sigma^2), clipped at 0 dB."""
    il = np.array([p.il_db for p in topology.pucs])
    rng = np.random.default_rng(seed)
    for _ in range(n_draws):
        yield topology.with_il(np.minimum(il + rng.normal(0.0, sigma_db, il.size), 0.0))


def deviation_trend(graph: MeshGraph, input_port: int, output_ports: Sequence[int], sizes: Sequence[int],
                    sigma_db: float, n_draws: int = 100, seed: int = 0) -> list[DeviationPoint]:
    """Output-power deviation when the ratios assume the average loss but the chip does not.

    For each size ``n`` a uniform 1×n tree to ``output_ports[:n]`` is
    synthesised with ``il_source="average"`` and simulated on ``n_draws``
    perturbed copies of the topology (the same draws for every size).
    """
    from .powersim import multicast_power_report

    configs = {n: auto_multicast(graph, MulticastRequest(input_port, tuple(output_ports[:n])), il_source=AVERAGE)
               for n in sizes}
    stds = {n: [] for n in sizes}
    ranges = {n: [] for n in sizes}
    for topo in perturbed_topologies(graph.topology, sigma_db, n_draws, seed):
        for n in sizes:
            rep = multicast_power_report(topo, configs[n])
            stds[n].append(rep.std)
            ranges[n].append(rep.deviation)
    return [DeviationPoint(n, float(np.mean(stds[n])), float(np.mean(ranges[n])),
                           multicast_power_report(graph.topology, configs[n]).min) for n in sizes]


def fit_il_sigma(graph: MeshGraph, input_port: int, output_ports: Sequence[int], target_db: float,
                 n_draws: int = 200, seed: int = 0, tol: float = 1e-3) -> float:
    """Sigma (dB) at which the mean 1×2 deviation equals ``target_db``, by bisection."""
    def at(sigma):
        return deviation_trend(graph, input_port, output_ports, [2], sigma, n_draws, seed)[0].mean_std_db
    lo, hi = 0.0, 1.0
    while at(hi) < target_db:
        hi *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if at(mid) < target_db:
            lo = mid
        else:
            hi = mid
    return round(0.5 * (lo + hi), 3)
