"""N×N optical circuit switch synthesis.

Two solvers: iterative edge penalties (route everything optimally, then
penalise and re-route only the pairs that fight over a PUC) and a
sequential solver that backtracks over each pair's alternative routes.
:func:`balanced_switch` adds an exact integer-programming synthesis that
also keeps every path's PUC count inside a window, for equal insertion loss.
"""
from __future__ import annotations

import itertools
import statistics
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from .graph import LightPath, MeshGraph, apply_penalty, path_from_arcs, path_states, states_to_puc_states
from .interconnect import NoRoute, _check_ports, find_arcs
from .topology import PucState

EDGE_PENALTY = "edge_penalty"
SEQUENTIAL = "sequential"
ALGORITHMS = (EDGE_PENALTY, SEQUENTIAL)
PENALTY_FACTOR = 10.0
DEFAULT_MAX_ITER = 25

Pair = tuple[int, int]


class Unsolved(RuntimeError):
    """No conflict-free configuration found within the iteration budget."""


@dataclass(frozen=True)
class SwitchRequest:
    io_pairs: tuple[Pair, ...]
    max_iter: int = DEFAULT_MAX_ITER
    algorithm: str = EDGE_PENALTY

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.io_pairs)
        object.__setattr__(self, "io_pairs", pairs)
        ins = [a for a, _ in pairs]
        outs = [b for _, b in pairs]
        if not pairs:
            raise ValueError("switch request needs at least one pair")
        if len(set(ins)) != len(ins):
            raise ValueError(f"input ports repeat: {ins}")
        if len(set(outs)) != len(outs):
            raise ValueError(f"output ports repeat: {outs}")
        if set(ins) & set(outs):
            raise ValueError(f"ports used as both input and output: {sorted(set(ins) & set(outs))}")
        if not (isinstance(self.max_iter, int) and self.max_iter >= 1):
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")


@dataclass
class SwitchConfig:
    """Conflict-free light paths with the merged PUC states they need."""

    paths: dict[Pair, LightPath]
    states: dict[int, PucState]
    iterations_used: int

    @property
    def total_weight(self) -> float:
        return sum(p.total_weight for p in self.paths.values())


def get_conflict_edges(paths: Iterable[LightPath]) -> tuple[set[int], set[Pair]]:
    """PUCs needed in bar by one path and cross by another, and the pairs involved.

    Sharing a PUC in the same state is fine: a crossed PUC carries two
    signals legitimately.
    """
    paths = list(paths)
    seen: dict[int, dict[str, list[Pair]]] = {}
    for p in paths:
        for pid, st in path_states(p).items():
            seen.setdefault(pid, {}).setdefault(st, []).append((p.in_port, p.out_port))
    pucs, pairs = set(), set()
    for pid, by_state in seen.items():
        if len(by_state) > 1:
            pucs.add(pid)
            for lst in by_state.values():
                pairs.update(lst)
    return pucs, pairs


def _route(graph: MeshGraph, pair: Pair, blocked_nodes=(), blocked_arcs=()) -> LightPath:
    src, dst = graph.entry_node(pair[0]), graph.exit_node(pair[1])
    found = find_arcs(graph, src, dst, blocked_nodes=blocked_nodes, blocked_arcs=blocked_arcs)
    if found is None:
        raise NoRoute(f"no path from port {pair[0]} to port {pair[1]}")
    return path_from_arcs(graph, found[0], *pair)


def _rebase(graph: MeshGraph, path: LightPath) -> LightPath:
    """Same arcs, weight recomputed from the current (unpenalised) graph."""
    return path_from_arcs(graph, [a.id for a in path.arcs], path.in_port, path.out_port)


def _finish(graph: MeshGraph, pairs: Sequence[Pair], paths: dict[Pair, LightPath], iterations: int) -> SwitchConfig:
    ordered = {pair: _rebase(graph, paths[pair]) for pair in pairs}
    states: dict[int, str] = {}
    for p in ordered.values():
        for pid, st in path_states(p).items():
            if states.setdefault(pid, st) != st:
                raise AssertionError(f"conflict left on PUC {pid}")
    return SwitchConfig(ordered, states_to_puc_states(dict(sorted(states.items()))), iterations)


def _present_weights(graph: MeshGraph, paths: dict[Pair, LightPath], skip: Pair, factor: float):
    """Current weights, with arcs that would clash with the other paths made ``factor`` dearer.

    An arc clashes when its PUC is held in the other state, or when its
    entry lane already carries another signal in the same direction.
    """
    w = graph.weights.copy()
    arcs = graph.arcs
    for pair, p in paths.items():
        if pair == skip:
            continue
        for pid, st in path_states(p).items():
            for a in graph.puc_arcs[pid]:
                if arcs[a].kind != st:
                    w[a] *= factor
        for arc in p.puc_arcs:
            for a in graph.out_arcs[arc.tail]:
                w[a] *= factor
    return w


def _edge_penalty(graph: MeshGraph, req: SwitchRequest, factor: float) -> SwitchConfig:
    pairs = req.io_pairs
    paths = {pair: _route(graph, pair) for pair in pairs}
    try:
        for iteration in range(req.max_iter + 1):
            pucs, bad = get_conflict_edges(paths.values())
            if not pucs:
                graph.reset_penalties()
                return _finish(graph, pairs, paths, iteration)
            if iteration == req.max_iter:
                break
            # lasting penalty on the arcs the conflicting paths use inside conflicting PUCs
            arcs = {a.id for pair in bad for a in paths[pair].arcs if a.puc in pucs}
            apply_penalty(graph, sorted(arcs), factor)
            # re-route the conflicting pairs one at a time, each aware of where the others are now
            for pair in pairs:
                if pair in bad:
                    w = _present_weights(graph, paths, pair, factor)
                    src, dst = graph.entry_node(pair[0]), graph.exit_node(pair[1])
                    found = find_arcs(graph, src, dst, weights=w)
                    if found is None:
                        raise NoRoute(f"no path from port {pair[0]} to port {pair[1]}")
                    paths[pair] = path_from_arcs(graph, found[0], *pair)
    finally:
        graph.reset_penalties()
    raise Unsolved(f"{len(pucs)} conflicting PUCs remain after {req.max_iter} iterations")


def k_best_paths(graph: MeshGraph, pair: Pair, blocked_nodes: Iterable[int] = (),
                 blocked_arcs: Iterable[int] = ()):
    """PUC-simple paths for ``pair`` in nondecreasing (weight, PUC count, nodes) order.

    A lazy Yen's algorithm on top of the router; every spur search avoids the
    PUCs already used by its root so the joined path stays PUC-simple.
    """
    base_nodes = set(blocked_nodes)
    base_arcs = set(blocked_arcs)
    src, dst = graph.entry_node(pair[0]), graph.exit_node(pair[1])
    found = find_arcs(graph, src, dst, blocked_nodes=base_nodes, blocked_arcs=base_arcs)
    if found is None:
        return
    accepted: list[tuple[int, ...]] = []
    seen = set()
    heap: list = []
    arcs = tuple(found[0])
    while True:
        path = path_from_arcs(graph, arcs, *pair)
        yield path
        accepted.append(arcs)
        nodes = path.nodes
        for i in range(len(arcs)):
            root = arcs[:i]
            spur = nodes[i]
            no_arcs = set(base_arcs)
            for other in accepted:
                if other[:i] == root:
                    no_arcs.add(other[i])
            no_nodes = set(base_nodes)
            no_nodes.update(nodes[:i])
            for a in root:
                arc = graph.arcs[a]
                if arc.puc is not None:
                    pos = arc.tail // 8
                    no_nodes.update(range(8 * pos, 8 * pos + 8))
            no_nodes.discard(spur)
            if spur in base_nodes:
                continue
            sub = find_arcs(graph, spur, dst, blocked_nodes=no_nodes, blocked_arcs=no_arcs)
            if sub is None:
                continue
            cand = root + tuple(sub[0])
            if cand in seen:
                continue
            seen.add(cand)
            p = path_from_arcs(graph, cand, *pair)
            heappush(heap, (p.total_weight, p.puc_count, p.nodes, cand))
        if not heap:
            return
        arcs = heappop(heap)[3]


def _blocks(graph: MeshGraph, chosen: Iterable[LightPath]) -> tuple[set[int], set[int]]:
    """Nodes taken by ``chosen`` and arcs whose state disagrees with them."""
    nodes: set[int] = set()
    fixed: dict[int, str] = {}
    for p in chosen:
        nodes.update(p.nodes)
        for pid, st in path_states(p).items():
            fixed.setdefault(pid, st)
    arcs = {a for pid, st in fixed.items() for a in graph.puc_arcs[pid] if graph.arcs[a].kind != st}
    return nodes, arcs


def _sequential(graph: MeshGraph, req: SwitchRequest) -> SwitchConfig:
    """Backtracking search over each pair's alternative routes.

    Pairs are placed one at a time; each tries its routes best first under
    the lanes and states fixed so far. A route is kept only if every pair
    still unplaced keeps at least one compatible route, and the pair with
    the costliest remaining best route goes next. The search is repeated
    with a growing number of alternatives per pair (1, 2, 4, ...), so cheap
    near-optimal assignments are found before deep ones. ``max_iter`` caps
    the total number of abandoned routes.
    """
    pairs = list(req.io_pairs)
    spent = 0

    def best_left(placed: dict[Pair, LightPath]):
        nodes, arcs = _blocks(graph, placed.values())
        worst = None
        for pair in pairs:
            if pair in placed:
                continue
            found = find_arcs(graph, graph.entry_node(pair[0]), graph.exit_node(pair[1]),
                              blocked_nodes=nodes, blocked_arcs=arcs)
            if found is None:
                return None, (nodes, arcs)
            if worst is None or found[1] > worst[1]:
                worst = (pair, found[1])
        return worst, (nodes, arcs)

    def place(placed, pair, blocks, width):
        """Returns (assignment or None, whether the width limit cut anything)."""
        nonlocal spent
        cut = False
        for i, path in enumerate(k_best_paths(graph, pair, *blocks)):
            if i == width:
                return None, True
            placed[pair] = path
            if len(placed) == len(pairs):
                return placed, cut
            nxt, nblocks = best_left(placed)
            if nxt is not None:
                done, sub_cut = place(placed, nxt[0], nblocks, width)
                if done is not None:
                    return done, cut
                cut |= sub_cut
            del placed[pair]
            spent += 1
            if spent > req.max_iter:
                raise Unsolved(f"no conflict-free assignment within {req.max_iter} backtracks")
        return None, cut

    first, blocks = best_left({})
    if first is None:
        raise Unsolved(f"no route for some pair of {pairs}")
    width = 1
    while True:
        done, cut = place({}, first[0], blocks, width)
        if done is not None:
            return _finish(graph, pairs, done, spent)
        if not cut:
            raise Unsolved(f"no conflict-free assignment exists for {pairs}")
        width *= 2


def auto_switch(graph: MeshGraph, request: SwitchRequest, *, penalty_factor: float = PENALTY_FACTOR) -> SwitchConfig:
    """Synthesize a conflict-free switch configuration.

    ``iterations_used`` counts penalty rounds for the edge-penalty solver and
    abandoned routing orders for the sequential one. Penalties are always
    reset before returning.
    """
    for a, b in request.io_pairs:
        _check_ports(graph, a, b)
    if request.algorithm == EDGE_PENALTY:
        return _edge_penalty(graph, request, penalty_factor)
    return _sequential(graph, request)


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    permutation: tuple[int, ...]
    solved: bool
    iterations: int | None
    total_weight: float | None
    weight_spread: float | None
    error: str = ""
    config: SwitchConfig | None = field(default=None, repr=False)


@dataclass
class SweepReport:
    rows: list[SweepRow]

    @property
    def n_solved(self) -> int:
        return sum(r.solved for r in self.rows)

    @property
    def solve_rate(self) -> float:
        return self.n_solved / len(self.rows) if self.rows else 0.0

    @property
    def iteration_histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(r.iterations for r in self.rows if r.solved).items()))

    @property
    def weight_spread(self) -> dict[str, float]:
        vals = [r.weight_spread for r in self.rows if r.solved]
        if not vals:
            return {}
        return {"min": min(vals), "median": statistics.median(vals), "max": max(vals)}


def solve_permutation(graph: MeshGraph, inputs: Sequence[int], outputs: Sequence[int], perm: Sequence[int],
                      max_iter: int = DEFAULT_MAX_ITER, algorithm: str = EDGE_PENALTY) -> SweepRow:
    """Route ``inputs[i] -> outputs[perm[i]]`` and record the outcome."""
    pairs = tuple((a, outputs[j]) for a, j in zip(inputs, perm))
    try:
        cfg = auto_switch(graph, SwitchRequest(pairs, max_iter, algorithm))
    except (Unsolved, NoRoute) as exc:
        return SweepRow(tuple(perm), False, None, None, None, str(exc))
    weights = [p.total_weight for p in cfg.paths.values()]
    return SweepRow(tuple(perm), True, cfg.iterations_used, cfg.total_weight,
                    max(weights) - min(weights), config=cfg)


def feasibility_sweep(graph: MeshGraph, inputs: Sequence[int], outputs: Sequence[int],
                      max_iter: int = DEFAULT_MAX_ITER, algorithm: str = EDGE_PENALTY,
                      threads: int = 1) -> SweepReport:
    """Solve every assignment of ``inputs`` to ``outputs`` (N! permutations, N <= 8).

    With ``threads`` > 1 each worker gets its own graph clone; row order is
    the lexicographic permutation order either way.
    """
    if len(inputs) != len(outputs):
        raise ValueError("inputs and outputs must have the same length")
    if not 1 <= len(inputs) <= 8:
        raise ValueError(f"sweep size must be between 1 and 8, got {len(inputs)}")
    perms = list(itertools.permutations(range(len(outputs))))
    if threads <= 1:
        rows = [solve_permutation(graph, inputs, outputs, p, max_iter, algorithm) for p in perms]
        return SweepReport(rows)
    chunks = [perms[i::threads] for i in range(threads)]

    def work(chunk):
        g = graph.copy()
        return [solve_permutation(g, inputs, outputs, p, max_iter, algorithm) for p in chunk]

    with ThreadPoolExecutor(threads) as pool:
        results = list(pool.map(work, chunks))
    by_perm = {r.permutation: r for rows in results for r in rows}
    return SweepReport([by_perm[p] for p in perms])


# --------------------------------------------------------------------------
# insertion-loss balanced synthesis


def _milp_model(graph: MeshGraph, pairs: Sequence[Pair], window: int, min_hops: int | None):
    """Constraint matrix over one binary per (pair, arc), one state bit per PUC and the floor L."""
    arcs = graph.arcs
    n_arcs, n_pairs, n_nodes = len(arcs), len(pairs), graph.n_nodes
    n_pucs, n_int = graph.topology.n_pucs, graph.n_internal
    n_var = n_pairs * n_arcs + n_pucs + 1
    floor_var = n_var - 1
    tails = np.array([a.tail for a in arcs])
    heads = np.array([a.head for a in arcs])
    arc_ids = np.arange(n_arcs)
    internal = arc_ids[:n_int]
    is_bar = np.array([arcs[a].kind == "bar" for a in internal])
    blocks = []  # (rows, cols, vals, lo, hi, n_rows)

    def add(rows, cols, vals, lo, hi):
        blocks.append((np.asarray(rows), np.asarray(cols), np.asarray(vals, float),
                       np.asarray(lo, float), np.asarray(hi, float)))

    for k, (a, b) in enumerate(pairs):
        off = k * n_arcs
        supply = np.zeros(n_nodes)
        supply[graph.entry_node(a)] = 1
        supply[graph.exit_node(b)] = -1
        # flow conservation: out - in = supply
        add(np.concatenate([tails, heads]), np.concatenate([off + arc_ids] * 2),
            np.concatenate([np.ones(n_arcs), -np.ones(n_arcs)]), supply, supply)
        # bar arcs need state 0, cross arcs state 1
        pos = internal >> 3
        rows = np.concatenate([internal, internal])
        cols = np.concatenate([off + internal, n_pairs * n_arcs + pos])
        vals = np.concatenate([np.ones(n_int), np.where(is_bar, 1.0, -1.0)])
        add(rows, cols, vals, np.where(is_bar, 0.0, -1.0), np.where(is_bar, 1.0, 0.0))
        # at most one traversal of each PUC
        add(internal >> 3, off + internal, np.ones(n_int), np.zeros(n_pucs), np.ones(n_pucs))
        # PUC count inside [L, L + window]
        add(np.zeros(n_int + 1, int), np.append(off + internal, floor_var),
            np.append(np.ones(n_int), -1.0), [0.0], [float(window)])
    # every lane carries at most one signal
    add(np.tile(heads, n_pairs), np.arange(n_pairs * n_arcs), np.ones(n_pairs * n_arcs),
        np.zeros(n_nodes), np.ones(n_nodes))
    rows, cols, vals, lo, hi, base = [], [], [], [], [], 0
    for r, c, v, l, h in blocks:
        rows.append(r + base)
        cols.append(c)
        vals.append(v)
        lo.append(l)
        hi.append(h)
        base += len(l)
    matrix = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(base, n_var))
    lb = np.zeros(n_var)
    ub = np.ones(n_var)
    ub[floor_var] = n_pucs
    if min_hops is not None:
        lb[floor_var] = ub[floor_var] = min_hops
    cost = np.concatenate([np.tile(graph.weights, n_pairs), np.zeros(n_pucs + 1)])
    return cost, matrix, np.concatenate(lo), np.concatenate(hi), lb, ub


def _trace(graph: MeshGraph, chosen: set[int], src: int, dst: int) -> tuple[list[int], set[int]]:
    """Follow the chosen arcs from ``src``; return the path and the arcs left over."""
    out = {}
    for a in chosen:
        out[graph.arcs[a].tail] = a
    path, node = [], src
    while node != dst:
        a = out[node]
        path.append(a)
        node = graph.arcs[a].head
    return path, chosen - set(path)


def balanced_switch(graph: MeshGraph, io_pairs: Sequence[Pair], *, window_hops: int,
                    min_hops: int | None = None, time_limit: float = 60.0) -> SwitchConfig:
    """Minimum-weight conflict-free switch whose path PUC counts differ by at most ``window_hops``.

    With ``min_hops`` the window is pinned to ``[min_hops, min_hops + window_hops]``,
    which lets several configurations share one insertion-loss band.
    Solved exactly with scipy's HiGHS MILP; loops detached from a path are
    cut off and the model is solved again. Raises :class:`Unsolved` when no
    such configuration exists.
    """
    pairs = [(int(a), int(b)) for a, b in io_pairs]
    SwitchRequest(tuple(pairs))
    for a, b in pairs:
        _check_ports(graph, a, b)
    cost, matrix, lo, hi, lb, ub = _milp_model(graph, pairs, window_hops, min_hops)
    n_arcs = len(graph.arcs)
    cuts: list[np.ndarray] = []
    rounds = 0
    while True:
        rounds += 1
        a_mat, a_lo, a_hi = matrix, lo, hi
        if cuts:
            a_mat = sp.vstack([matrix, sp.csr_matrix(np.array(cuts))], format="csr")
            a_lo = np.concatenate([lo, np.full(len(cuts), -np.inf)])
            a_hi = np.concatenate([hi, [float(np.count_nonzero(c)) - 1 for c in cuts]])
        res = milp(cost, constraints=LinearConstraint(a_mat, a_lo, a_hi), integrality=np.ones(len(cost)),
                   bounds=Bounds(lb, ub), options={"time_limit": time_limit})
        if res.status == 1:
            raise Unsolved(f"balanced synthesis hit the {time_limit} s limit")
        if res.x is None:
            raise Unsolved(f"no conflict-free routing with PUC counts within {window_hops} of each other")
        x = np.round(res.x).astype(int)
        paths, loops = {}, []
        for k, (a, b) in enumerate(pairs):
            chosen = set(np.flatnonzero(x[k * n_arcs:(k + 1) * n_arcs]).tolist())
            arc_list, rest = _trace(graph, chosen, graph.entry_node(a), graph.exit_node(b))
            paths[(a, b)] = path_from_arcs(graph, arc_list, a, b)
            if rest:
                row = np.zeros(len(cost))
                row[[k * n_arcs + i for i in rest]] = 1
                loops.append(row)
        if not loops:
            return _finish(graph, pairs, paths, rounds)
        cuts.extend(loops)


def balanced_switches(graph: MeshGraph, pair_sets: Sequence[Sequence[Pair]], *, window_hops: int,
                      time_limit: float = 60.0) -> list[SwitchConfig]:
    """Balanced configurations for several pair sets sharing one PUC-count band.

    Each set is first solved on its own. If the union of their PUC counts
    is wider than ``window_hops``, the band floor is lowered step by step
    from ``max_count - window_hops`` until every set fits it.
    """
    configs = [balanced_switch(graph, ps, window_hops=window_hops, time_limit=time_limit) for ps in pair_sets]
    counts = [p.puc_count for c in configs for p in c.paths.values()]
    if max(counts) - min(counts) <= window_hops:
        return configs
    for floor in range(max(counts) - window_hops, min(counts) - 1, -1):
        try:
            return [balanced_switch(graph, ps, window_hops=window_hops, min_hops=floor, time_limit=time_limit)
                    for ps in pair_sets]
        except Unsolved:
            continue
    raise Unsolved(f"no common band of {window_hops} PUCs fits all {len(pair_sets)} configurations")
