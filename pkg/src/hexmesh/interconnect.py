"""Point-to-point optical interconnect routing."""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Iterable, Sequence

import numpy as np

from ._search import dijkstra, route_source, walk
from .graph import LightPath, MeshGraph, path_from_arcs


class NoRoute(RuntimeError):
    """No light path exists between the requested ports."""


@dataclass
class SearchTree:
    """Result of a single-source search: per-node distance, PUC hops and predecessor arc."""

    source: int
    dist: np.ndarray
    hops: np.ndarray
    pred: np.ndarray
    tails: np.ndarray

    def arcs_to(self, node: int) -> list[int] | None:
        if node != self.source and self.pred[node] < 0:
            return None
        out = []
        while node != self.source:
            a = int(self.pred[node])
            out.append(a)
            node = int(self.tails[a])
        out.reverse()
        return out


_NO_TARGET = np.empty(0, np.int64)


def _mask(n: int, items: Iterable[int]) -> np.ndarray:
    m = np.zeros(n, np.uint8)
    items = list(items)
    if items:
        m[np.asarray(items, np.int64)] = 1
    return m


def search(graph: MeshGraph, source: int, target: int | None = None, *,
           blocked_nodes: Iterable[int] = (), blocked_arcs: Iterable[int] = (),
           weights: Sequence[float] | None = None) -> SearchTree:
    """Dijkstra from ``source`` with the key (weight, PUC hops, node sequence).

    Stops early once ``target`` is settled. Ties on weight are broken by
    fewer PUCs, then by the lexicographically smallest node-id sequence.
    """
    w = graph.weights if weights is None else np.asarray(weights, np.float64)
    node_mask = blocked_nodes if isinstance(blocked_nodes, np.ndarray) else _mask(graph.n_nodes, blocked_nodes)
    arc_mask = blocked_arcs if isinstance(blocked_arcs, np.ndarray) else _mask(len(graph.arcs), blocked_arcs)
    dist, hops, pred = dijkstra(graph.indptr, graph.csr_heads, graph.csr_arcs, w, graph.tails,
                                graph.n_internal, source, _NO_TARGET if target is None else np.array([target], np.int64),
                                node_mask, arc_mask)
    return SearchTree(source, dist, hops, pred, graph.tails)


def find_arcs(graph: MeshGraph, src: int, dst: int, *, blocked_nodes=(), blocked_arcs=(),
              weights=None, tree: SearchTree | None = None) -> tuple[list[int], float] | None:
    """Best path from node ``src`` to node ``dst`` that traverses each PUC at most once.

    The unconstrained search may re-enter a PUC. That subproblem is split in
    two, each forbidding one of the two entry nodes, and the candidates are
    explored best-first on the usual key, so the first PUC-simple path taken
    off the queue is optimal. A precomputed ``tree`` must come from a search
    with the same blocks and weights.
    """
    w = graph.weights if weights is None else np.asarray(weights, np.float64)
    scratch = np.full(graph.topology.n_pucs, -1, np.int64)

    def solve(t):
        arcs, total, r1, r2 = walk(t.pred, graph.tails, w, graph.n_internal, src, dst, scratch)
        if total == math.inf:
            return None
        return arcs, total, int(t.hops[dst]), r1, r2

    node_mask = _mask(graph.n_nodes, blocked_nodes)
    arc_mask = blocked_arcs if isinstance(blocked_arcs, np.ndarray) else _mask(len(graph.arcs), blocked_arcs)
    if tree is None:
        tree = search(graph, src, dst, blocked_nodes=node_mask, blocked_arcs=arc_mask, weights=w)
    first = solve(tree)
    if first is None:
        return None
    if first[3] < 0:
        return first[0].tolist(), first[1]

    def key(r):
        nodes = (src,) + tuple(graph.tails[r[0][1:]].tolist()) + (dst,)
        return (r[1], r[2], nodes)

    heap = [(key(first), (), first)]
    seen = {()}
    while heap:
        _, extra, r = heappop(heap)
        arcs, total, _, r1, r2 = r
        if r1 < 0:
            return arcs.tolist(), total
        for x in (r1, r2):
            if x == src:
                continue
            sub = tuple(sorted(extra + (int(x),)))
            if sub in seen:
                continue
            seen.add(sub)
            m = node_mask.copy()
            m[list(sub)] = 1
            nr = solve(search(graph, src, dst, blocked_nodes=m, blocked_arcs=arc_mask, weights=w))
            if nr is not None:
                heappush(heap, (key(nr), sub, nr))
    return None


def _check_ports(graph: MeshGraph, in_port: int, out_port: int) -> None:
    usable = graph.usable
    if in_port == out_port:
        raise ValueError(f"input and output port are the same ({in_port})")
    for p in (in_port, out_port):
        if p not in usable:
            raise ValueError(f"port {p} is not a usable external port")


def _failed_nodes(graph: MeshGraph, failed_pucs: Iterable[int]) -> list[int]:
    nodes = []
    for pid in failed_pucs:
        try:
            pos = graph.topology.puc_position(pid)
        except KeyError:
            raise ValueError(f"unknown PUC id {pid}") from None
        nodes.extend(range(8 * pos, 8 * pos + 8))
    return nodes


def shortest_path(graph: MeshGraph, in_port: int, out_port: int, *,
                  exclude_pucs: Iterable[int] = (), blocked_arcs: Iterable[int] = (),
                  weights: Sequence[float] | None = None) -> LightPath:
    """Minimum-weight light path between two usable external ports."""
    _check_ports(graph, in_port, out_port)
    src, dst = graph.entry_node(in_port), graph.exit_node(out_port)
    blocked_nodes = _failed_nodes(graph, exclude_pucs)
    if src in blocked_nodes or dst in blocked_nodes:
        raise NoRoute(f"port {in_port} or {out_port} sits on a failed PUC")
    found = find_arcs(graph, src, dst, blocked_nodes=blocked_nodes, blocked_arcs=blocked_arcs, weights=weights)
    if found is None:
        raise NoRoute(f"no path from port {in_port} to port {out_port}")
    path = path_from_arcs(graph, found[0], in_port, out_port)
    if weights is not None:
        object.__setattr__(path, "total_weight", found[1])
    return path


def self_heal(graph: MeshGraph, in_port: int, out_port: int, failed_pucs: Iterable[int]) -> LightPath:
    """Best path that avoids every PUC in ``failed_pucs``."""
    return shortest_path(graph, in_port, out_port, exclude_pucs=failed_pucs)


def enumerate_paths(graph: MeshGraph, in_port: int, out_port: int, max_pucs: int) -> list[LightPath]:
    """Every path with at most ``max_pucs`` PUCs, none of them visited twice.

    Exhaustive depth-first search; exponential, meant as a test oracle on
    small meshes. Sorted by (weight, PUC count, node sequence).
    """
    if max_pucs <= 0:
        return []
    src, dst = graph.entry_node(in_port), graph.exit_node(out_port)
    found: list[tuple[int, ...]] = []
    visited = {src}
    used_pucs: set[int] = set()
    stack: list[int] = []

    def dfs(u, used):
        if u == dst:
            found.append(tuple(stack))
            return
        for v, a in graph.adjacency[u]:
            if v in visited:
                continue
            puc = graph.arcs[a].puc
            if puc is not None and (puc in used_pucs or used + 1 > max_pucs):
                continue
            visited.add(v)
            stack.append(a)
            if puc is not None:
                used_pucs.add(puc)
            dfs(v, used + (puc is not None))
            used_pucs.discard(puc)
            stack.pop()
            visited.discard(v)

    dfs(src, 0)
    paths = [path_from_arcs(graph, arcs, in_port, out_port) for arcs in found]
    paths.sort(key=lambda p: (p.total_weight, p.puc_count, p.nodes))
    return paths


@dataclass
class BatchResult:
    paths: list[LightPath | None]
    errors: dict[int, str] = field(default_factory=dict)
    per_path_s: list[float] = field(default_factory=list)
    total_s: float = 0.0

    @property
    def stats(self) -> dict:
        if not self.per_path_s:
            return {"n": 0, "mean_us": 0.0, "median_us": 0.0, "p99_us": 0.0, "total_s": self.total_s}
        ts = sorted(self.per_path_s)
        p99 = ts[min(len(ts) - 1, math.ceil(0.99 * len(ts)) - 1)]
        return {"n": len(ts), "mean_us": 1e6 * statistics.fmean(ts),
                "median_us": 1e6 * statistics.median(ts), "p99_us": 1e6 * p99,
                "total_s": self.total_s}


def route_batch(graph: MeshGraph, pairs: Sequence[tuple[int, int]]) -> BatchResult:
    """Route every (in, out) pair independently, sharing one search per source port.

    Per-path time is the path's share of its source search plus its own
    extraction time. Failures are collected in ``errors`` by pair index.
    """
    result = BatchResult(paths=[None] * len(pairs), per_path_s=[0.0] * len(pairs))
    by_source: dict[int, list[int]] = {}
    for i, (a, b) in enumerate(pairs):
        try:
            _check_ports(graph, a, b)
        except ValueError as exc:
            result.errors[i] = str(exc)
            continue
        by_source.setdefault(a, []).append(i)
    t_start = time.perf_counter()
    arcs_all = graph.arcs
    no_nodes = np.zeros(graph.n_nodes, np.uint8)
    no_arcs = np.zeros(len(arcs_all), np.uint8)
    for src_port, idxs in by_source.items():
        t0 = time.perf_counter()
        src = graph.entry_node(src_port)
        targets = np.array([graph.exit_node(pairs[i][1]) for i in idxs], np.int64)
        flat, offsets, totals, repeated, dist, hops, pred = route_source(
            graph.indptr, graph.csr_heads, graph.csr_arcs, graph.weights, graph.tails,
            graph.n_internal, graph.topology.n_pucs, src, targets, no_nodes, no_arcs)
        flat, offsets, totals, rep_flags = flat.tolist(), offsets.tolist(), totals.tolist(), repeated.tolist()
        share = (time.perf_counter() - t0) / len(idxs)
        tree = None
        for k, i in enumerate(idxs):
            t1 = time.perf_counter()
            dst_port = pairs[i][1]
            total = totals[k]
            if rep_flags[k]:
                tree = tree or SearchTree(src, dist, hops, pred, graph.tails)
                found = find_arcs(graph, src, int(targets[k]), tree=tree)
                arcs, total = found if found is not None else (None, math.inf)
            else:
                arcs = flat[offsets[k]:offsets[k + 1]]
            if total == math.inf:
                result.errors[i] = f"no path from port {src_port} to port {dst_port}"
            else:
                result.paths[i] = LightPath(src_port, dst_port, tuple(map(arcs_all.__getitem__, arcs)), total)
            result.per_path_s[i] = share + time.perf_counter() - t1
    result.total_s = time.perf_counter() - t_start
    result.per_path_s = [result.per_path_s[i] for i in range(len(pairs)) if i not in result.errors]
    return result
