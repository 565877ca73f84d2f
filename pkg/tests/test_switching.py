import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexmesh.graph import build_graph, path_states
from hexmesh.interconnect import NoRoute, enumerate_paths, route_batch, shortest_path
from hexmesh.switching import (EDGE_PENALTY, SEQUENTIAL, SwitchRequest, Unsolved, auto_switch, balanced_switch,
                               balanced_switches, feasibility_sweep, get_conflict_edges, k_best_paths)
from hexmesh.topology import SWITCH_INPUTS, SWITCH_OUTPUTS

from meshes import small_meshes


def exhaustive(g, pairs, window=math.inf):
    """Cheapest conflict-free choice of one enumerated path per pair, or None."""
    options = [enumerate_paths(g, a, b, g.topology.n_pucs) for a, b in pairs]
    best = None
    for combo in itertools.product(*options):
        counts = [p.puc_count for p in combo]
        if max(counts) - min(counts) > window or get_conflict_edges(combo)[0]:
            continue
        w = math.fsum(p.total_weight for p in combo)
        if best is None or w < best:
            best = w
    return best


@st.composite
def two_by_two(draw):
    topo, coeffs = draw(small_meshes())
    a1, a2, b1, b2 = draw(st.permutations(topo.usable_ports))[:4]
    return build_graph(topo, coeffs), ((a1, b1), (a2, b2))


@pytest.fixture(scope="module")
def routes(graph72):
    usable = graph72.topology.usable_ports
    batch = route_batch(graph72, [(a, b) for a in usable for b in usable if a != b])
    return [p for p in batch.paths if p is not None]


class TestConflicts:
    def _find(self, routes, want):
        for p, q in itertools.combinations(routes, 2):
            if p.in_port in (q.in_port, q.out_port) or p.out_port in (q.in_port, q.out_port):
                continue
            sp, sq = path_states(p), path_states(q)
            shared = set(sp) & set(sq)
            if want(shared, sp, sq):
                return p, q, shared
        raise AssertionError("no such pair of routes")

    def test_disjoint(self, routes):
        p, q, _ = self._find(routes, lambda shared, *_: not shared)
        assert get_conflict_edges([p, q]) == (set(), set())

    def test_same_state_sharing(self, routes):
        p, q, shared = self._find(routes, lambda shared, sp, sq: len(shared) == 1
                                  and all(sp[x] == sq[x] == "cross" for x in shared))
        assert get_conflict_edges([p, q]) == (set(), set())

    def test_differing_states(self, routes):
        p, q, shared = self._find(routes, lambda shared, sp, sq: any(sp[x] != sq[x] for x in shared)
                                  and any(sp[x] == sq[x] for x in shared))
        sp, sq = path_states(p), path_states(q)
        differing = {x for x in shared if sp[x] != sq[x]}
        assert differing != shared
        assert get_conflict_edges([p, q]) == (differing, {(p.in_port, p.out_port), (q.in_port, q.out_port)})


class TestRequest:
    @pytest.mark.parametrize("pairs", [(), ((1, 2), (1, 3)), ((1, 2), (3, 2)), ((1, 2), (2, 3))])
    def test_invalid(self, pairs):
        with pytest.raises(ValueError):
            SwitchRequest(pairs)

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            SwitchRequest(((8, 35),), algorithm="annealing")


class TestAutoSwitch:
    @pytest.mark.parametrize("algorithm", [EDGE_PENALTY, SEQUENTIAL])
    def test_single_pair(self, graph72, algorithm):
        cfg = auto_switch(graph72, SwitchRequest(((8, 35),), algorithm=algorithm))
        assert cfg.paths[(8, 35)] == shortest_path(graph72, 8, 35)
        assert cfg.iterations_used == 0

    def test_hexagon_crossing(self, hexagon):
        g = build_graph(hexagon)
        cfg = auto_switch(g, SwitchRequest(((0, 3), (2, 11))))
        p, q = cfg.paths.values()
        shared = set(p.pucs) & set(q.pucs)
        assert shared == {1}
        assert cfg.states[1].kind == "cross"

    @pytest.mark.parametrize("algorithm", [EDGE_PENALTY, SEQUENTIAL])
    def test_six_by_six(self, graph72, algorithm):
        outs = [SWITCH_OUTPUTS[j] for j in (1, 3, 2, 0, 5, 4)]
        req = SwitchRequest(tuple(zip(SWITCH_INPUTS, outs)), max_iter=5000 if algorithm == SEQUENTIAL else 25,
                            algorithm=algorithm)
        cfg = auto_switch(graph72, req)
        assert get_conflict_edges(cfg.paths.values())[0] == set()
        assert [p.out_port for p in cfg.paths.values()] == outs
        assert graph72.penalized_arcs() == set()
        assert auto_switch(graph72, req) == cfg

    def test_gives_up(self, graph72):
        # needs 16 penalty rounds with the default solver
        outs = [SWITCH_OUTPUTS[j] for j in (1, 3, 2, 0, 5, 4)]
        with pytest.raises(Unsolved):
            auto_switch(graph72, SwitchRequest(tuple(zip(SWITCH_INPUTS, outs)), max_iter=3))
        assert graph72.penalized_arcs() == set()

    def test_no_route(self, graph72):
        with pytest.raises(NoRoute):
            auto_switch(graph72, SwitchRequest(((0, 2), (8, 35))))

    @settings(max_examples=40, deadline=None)
    @given(two_by_two())
    def test_against_exhaustive(self, case):
        g, pairs = case
        best = exhaustive(g, pairs)
        for algorithm in (EDGE_PENALTY, SEQUENTIAL):
            try:
                cfg = auto_switch(g, SwitchRequest(pairs, max_iter=10_000, algorithm=algorithm))
            except (Unsolved, NoRoute):
                if algorithm == SEQUENTIAL:
                    assert best is None
                continue
            assert best is not None
            assert not get_conflict_edges(cfg.paths.values())[0]
            assert cfg.total_weight >= best - 1e-12
        assert np.all(g.penalty == 1)


class TestKBest:
    @settings(max_examples=30, deadline=None)
    @given(small_meshes(), st.data())
    def test_matches_enumeration(self, mesh, data):
        topo, coeffs = mesh
        g = build_graph(topo, coeffs)
        a, b = data.draw(st.sampled_from([(a, b) for a in topo.usable_ports for b in topo.usable_ports if a != b]))
        expected = enumerate_paths(g, a, b, topo.n_pucs)
        got = list(k_best_paths(g, (a, b)))
        assert [p.nodes for p in got] == [p.nodes for p in expected]


class TestBalanced:
    @settings(max_examples=25, deadline=None)
    @given(two_by_two(), st.integers(0, 3))
    def test_exact_against_exhaustive(self, case, window):
        g, pairs = case
        best = exhaustive(g, pairs, window)
        try:
            cfg = balanced_switch(g, pairs, window_hops=window)
        except (Unsolved, NoRoute):
            assert best is None
            return
        counts = [p.puc_count for p in cfg.paths.values()]
        assert max(counts) - min(counts) <= window
        assert not get_conflict_edges(cfg.paths.values())[0]
        assert cfg.total_weight == pytest.approx(best, abs=1e-9)

    def test_pinned_floor(self, graph72):
        pairs = list(zip(SWITCH_INPUTS[:3], SWITCH_OUTPUTS[:3]))
        assert [p.puc_count for p in balanced_switch(graph72, pairs, window_hops=1).paths.values()] == [14] * 3
        cfg = balanced_switch(graph72, pairs, window_hops=1, min_hops=15)
        assert all(15 <= p.puc_count <= 16 for p in cfg.paths.values())
        with pytest.raises(Unsolved):
            balanced_switch(graph72, pairs, window_hops=0, min_hops=3)

    def test_common_band(self, graph72):
        sets = [list(zip(SWITCH_INPUTS[:3], SWITCH_OUTPUTS[:3])), list(zip(SWITCH_INPUTS[:3], SWITCH_OUTPUTS[3:]))]
        cfgs = balanced_switches(graph72, sets, window_hops=2)
        counts = [p.puc_count for c in cfgs for p in c.paths.values()]
        assert max(counts) - min(counts) <= 2


class TestSweep:
    def test_single(self, graph72):
        rep = feasibility_sweep(graph72, [8], [35])
        assert len(rep.rows) == 1 and rep.n_solved == 1

    def test_threads_match_serial(self, graph72):
        ins, outs = SWITCH_INPUTS[:4], SWITCH_OUTPUTS[:4]
        serial = feasibility_sweep(graph72, ins, outs)
        threaded = feasibility_sweep(graph72, ins, outs, threads=3)
        assert [(r.permutation, r.solved, r.iterations, r.total_weight) for r in serial.rows] == \
               [(r.permutation, r.solved, r.iterations, r.total_weight) for r in threaded.rows]
        assert serial.n_solved == 24

    def test_failures_recorded(self, graph72):
        rep = feasibility_sweep(graph72, SWITCH_INPUTS, SWITCH_OUTPUTS, max_iter=1)
        assert rep.n_solved == 464  # the permutations that need at most one penalty round
        failed = [r for r in rep.rows if not r.solved]
        assert all(r.error and r.config is None for r in failed)
