"""Compiled Dijkstra kernel used by the router.

Labels are ordered by (distance, PUC hops, node sequence). The binary heap
is kept in three parallel arrays ordered by (distance, hops, node id) and
written out inline; equal (distance, hops) relaxations compare the two
candidate node sequences explicitly. Every waveguide link ends at an in
node with no other incoming arc, which lets zero-weight links bypass the
heap.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _lex_less(u, v, pred, tails, source):
    fu, fv = u, v
    while u != v:
        fu, fv = u, v
        if u == source or v == source:
            break
        u = tails[pred[u]]
        v = tails[pred[v]]
    return fu < fv


@njit(cache=True)
def dijkstra(indptr, heads, arc_ids, weights, tails, n_internal, source, targets, blocked_nodes, blocked_arcs):
    """Search from ``source``; stops once every node in ``targets`` is settled
    (never, when ``targets`` is empty)."""
    n = indptr.shape[0] - 1
    wanted = np.zeros(n, np.uint8)
    remaining = 0
    for t in targets:
        if wanted[t] == 0:
            wanted[t] = 1
            remaining += 1
    dist = np.full(n, np.inf)
    hops = np.zeros(n, np.int64)
    pred = np.full(n, -1, np.int64)
    done = blocked_nodes.copy()
    done[source] = 0
    cap = arc_ids.shape[0] + 1
    hd = np.empty(cap, np.float64)
    hh = np.empty(cap, np.int64)
    hn = np.empty(cap, np.int64)
    hd[0] = 0.0; hh[0] = 0; hn[0] = source
    size = 1
    dist[source] = 0.0
    while size > 0:
        d = hd[0]; h = hh[0]; u = hn[0]
        size -= 1
        # sift down the last element from the root
        xd = hd[size]; xh = hh[size]; xn = hn[size]
        i = 0
        while True:
            c = 2 * i + 1
            if c >= size:
                break
            r = c + 1
            if r < size:
                if hd[r] < hd[c] or (hd[r] == hd[c] and (hh[r] < hh[c] or (hh[r] == hh[c] and hn[r] < hn[c]))):
                    c = r
            if hd[c] < xd or (hd[c] == xd and (hh[c] < xh or (hh[c] == xh and hn[c] < xn))):
                hd[i] = hd[c]; hh[i] = hh[c]; hn[i] = hn[c]
                i = c
            else:
                break
        hd[i] = xd; hh[i] = xh; hn[i] = xn
        if done[u] or d != dist[u] or h != hops[u]:
            continue
        # a zero-weight link into a node with no other incoming arc fixes that
        # node's label at once, so it is settled here instead of via the heap
        while u >= 0:
            done[u] = 1
            if wanted[u]:
                remaining -= 1
                if remaining == 0:
                    return dist, hops, pred
            follow = -1
            for j in range(indptr[u], indptr[u + 1]):
                v = heads[j]
                a = arc_ids[j]
                if done[v] or blocked_arcs[a]:
                    continue
                if follow < 0 and a >= n_internal and weights[a] == 0.0:
                    dist[v] = d
                    hops[v] = h
                    pred[v] = a
                    follow = v
                    continue
                nd = d + weights[a]
                nh = h + 1 if a < n_internal else h
                dv = dist[v]
                better = nd < dv
                if not better and nd == dv:
                    if nh < hops[v]:
                        better = True
                    elif nh == hops[v]:
                        better = _lex_less(u, tails[pred[v]], pred, tails, source)
                if better:
                    dist[v] = nd
                    hops[v] = nh
                    pred[v] = a
                    i = size
                    size += 1
                    while i > 0:
                        p = (i - 1) >> 1
                        if nd < hd[p] or (nd == hd[p] and (nh < hh[p] or (nh == hh[p] and v < hn[p]))):
                            hd[i] = hd[p]; hh[i] = hh[p]; hn[i] = hn[p]
                            i = p
                        else:
                            break
                    hd[i] = nd; hh[i] = nh; hn[i] = v
            u = follow
    return dist, hops, pred


@njit(cache=True)
def walk(pred, tails, weights, n_internal, source, target, seen_pos):
    """Arc list from ``source`` to ``target``, its left-fold weight, and the entry
    nodes of the first PUC visited twice (-1, -1 when there is none).

    ``seen_pos`` is scratch space of one int per PUC, filled with -1.
    """
    if target != source and pred[target] < 0:
        return np.empty(0, np.int64), np.inf, -1, -1
    count = 0
    v = target
    while v != source:
        count += 1
        v = tails[pred[v]]
    arcs = np.empty(count, np.int64)
    v = target
    for i in range(count - 1, -1, -1):
        a = pred[v]
        arcs[i] = a
        v = tails[a]
    w = 0.0
    r1 = -1
    r2 = -1
    for i in range(count):
        a = arcs[i]
        w += weights[a]
        if a < n_internal and r1 < 0:
            pos = a >> 3
            if seen_pos[pos] >= 0:
                r1 = seen_pos[pos]
                r2 = tails[a]
            else:
                seen_pos[pos] = tails[a]
    for i in range(count):
        a = arcs[i]
        if a < n_internal:
            seen_pos[a >> 3] = -1
    return arcs, w, r1, r2


@njit(cache=True)
def route_source(indptr, heads, arc_ids, weights, tails, n_internal, n_pucs, source, targets,
                 blocked_nodes, blocked_arcs):
    """One search from ``source`` until every target is settled, then the path to each.

    Returns the concatenated arc lists with their offsets, each path's weight
    (inf when unreachable), a flag for paths that re-enter a PUC, and the
    predecessor array for follow-up work.
    """
    dist, hops, pred = dijkstra(indptr, heads, arc_ids, weights, tails, n_internal, source, targets,
                                blocked_nodes, blocked_arcs)
    m = targets.shape[0]
    offsets = np.zeros(m + 1, np.int64)
    for k in range(m):
        t = targets[k]
        length = 0
        if t == source or pred[t] >= 0:
            v = t
            while v != source:
                length += 1
                v = tails[pred[v]]
        offsets[k + 1] = offsets[k] + length
    flat = np.empty(offsets[m], np.int64)
    totals = np.full(m, np.inf)
    repeated = np.zeros(m, np.uint8)
    seen = np.full(n_pucs, -1, np.int64)
    for k in range(m):
        t = targets[k]
        if t != source and pred[t] < 0:
            continue
        lo = offsets[k]
        v = t
        for i in range(offsets[k + 1] - 1, lo - 1, -1):
            a = pred[v]
            flat[i] = a
            v = tails[a]
        w = 0.0
        for i in range(lo, offsets[k + 1]):
            a = flat[i]
            w += weights[a]
            if a < n_internal:
                if seen[a >> 3] >= 0:
                    repeated[k] = 1
                seen[a >> 3] = 1
        for i in range(lo, offsets[k + 1]):
            if flat[i] < n_internal:
                seen[flat[i] >> 3] = -1
        totals[k] = w
    return flat, offsets, totals, repeated, dist, hops, pred
