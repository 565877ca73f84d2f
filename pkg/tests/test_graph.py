from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexmesh.graph import (GraphError, LightPath, WeightCoeffs, apply_penalty, build_graph, edge_weight,
                           merge_states, path_states, reset_penalties)
from hexmesh.interconnect import route_batch
from hexmesh.topology import Puc

from meshes import small_meshes

PUC = Puc(id=0, il_db=-0.215, bul=1.0, power_mw=1.0)


class TestEdgeWeight:
    @pytest.mark.parametrize("coeffs,expected", [((1, 0, 0), 0.215), ((1, 1, 0), 1.215), ((0, 0, 2), 2.0)])
    def test_examples(self, coeffs, expected):
        assert edge_weight(PUC, WeightCoeffs(*coeffs)) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("coeffs", [(0, 0, 0), (-1, 1, 0)])
    def test_invalid_coeffs(self, coeffs):
        with pytest.raises(ValueError):
            WeightCoeffs(*coeffs)

    @given(st.tuples(*[st.floats(0, 5)] * 3), st.integers(0, 2), st.floats(0, 5),
           st.floats(-3, 0), st.floats(0.1, 3), st.floats(0, 3))
    def test_monotone_in_coefficients(self, c, which, bump, il, bul, pw):
        if not any(c):
            c = (1.0, 0.0, 0.0)
        puc = Puc(0, il_db=il, bul=bul, power_mw=pw)
        more = list(c)
        more[which] += bump
        assert edge_weight(puc, WeightCoeffs(*more)) >= edge_weight(puc, WeightCoeffs(*c))


class TestStructure:
    def test_mesh72_counts(self, graph72):
        assert graph72.n_nodes == 576
        assert graph72.n_internal == 576

    def test_hexagon_counts(self, hexagon):
        g = build_graph(hexagon)
        assert g.n_nodes == 48
        assert g.n_internal == 48

    @settings(max_examples=25, deadline=None)
    @given(small_meshes())
    def test_arc_count_law(self, mesh):
        topo, coeffs = mesh
        g = build_graph(topo, coeffs)
        assert g.n_nodes == g.n_internal == 8 * topo.n_pucs
        assert len(g.arcs) - g.n_internal == 2 * len(topo.links)

    def test_internal_arcs_per_puc(self, graph72):
        for pid, ids in graph72.puc_arcs.items():
            arcs = [graph72.arcs[i] for i in ids]
            assert all(a.puc == pid for a in arcs)
            assert Counter(a.kind for a in arcs) == {"bar": 4, "cross": 4}
            # each arc leaves an in-node and enters an out-node on the far side of the same PUC
            for a in arcs:
                assert a.tail % 2 == 0 and a.head % 2 == 1
                assert a.tail // 8 == a.head // 8
                assert ((a.tail % 8) // 4) != ((a.head % 8) // 4)

    def test_no_reflections(self, graph72):
        for a in graph72.arcs:
            assert a.tail != a.head
            assert a.tail // 2 != a.head // 2  # never in(p) -> out(p) of one port

    def test_links_free(self, graph72):
        assert all(graph72.weights[i] == 0.0 for i in range(graph72.n_internal, len(graph72.arcs)))

    def test_internal_weight_default(self, graph72):
        assert np.all(graph72.weights[: graph72.n_internal] == 0.215)


class TestPenalty:
    def test_factor_ten(self, hexagon):
        g = build_graph(hexagon)
        bar = next(a.id for a in g.internal_arcs if a.kind == "bar")
        apply_penalty(g, [bar], 10)
        assert g.effective_weight(bar) == pytest.approx(2.15)
        assert g.penalized_arcs() == {bar}

    def test_composes(self, hexagon):
        g = build_graph(hexagon)
        apply_penalty(g, [3], 2)
        apply_penalty(g, [3], 2)
        assert g.penalty[3] == 4
        assert g.effective_weight(3) == pytest.approx(4 * 0.215)

    def test_reset(self, hexagon):
        g = build_graph(hexagon)
        apply_penalty(g, range(10), 3)
        reset_penalties(g)
        assert np.all(g.penalty == 1)
        assert np.array_equal(g.weights, g.base_weights)

    @pytest.mark.parametrize("arcs,factor", [([10_000], 2), ([-1], 2), ([0], 1.0), ([0], 0.5)])
    def test_rejects(self, hexagon, arcs, factor):
        g = build_graph(hexagon)
        with pytest.raises(ValueError):
            apply_penalty(g, arcs, factor)

    def test_link_arcs_rejected(self, hexagon):
        g = build_graph(hexagon)
        with pytest.raises(GraphError):
            apply_penalty(g, [g.n_internal], 2)

    @settings(max_examples=25, deadline=None)
    @given(small_meshes())
    def test_neutral_multipliers_give_base_weights(self, mesh):
        topo, coeffs = mesh
        g = build_graph(topo, coeffs)
        for a in g.internal_arcs:
            assert g.effective_weight(a.id) == edge_weight(topo.puc(a.puc), coeffs)


class TestPathStates:
    def _arc(self, g, pid, kind, tail=None):
        return next(g.arcs[i] for i in g.puc_arcs[pid] if g.arcs[i].kind == kind
                    and (tail is None or g.arcs[i].tail == tail))

    def test_two_pucs(self, hexagon):
        g = build_graph(hexagon)
        # follow a real walk: a bar arc, its link, then a cross arc in the next PUC
        first = next(a for a in g.internal_arcs if a.kind == "bar" and g.out_arcs[a.head])
        link = g.arcs[g.out_arcs[first.head][0]]
        second = self._arc(g, g.arcs[g.out_arcs[link.head][0]].puc, "cross", tail=link.head)
        path = LightPath(None, None, (first, link, second), 0.43)
        assert path_states(path) == {first.puc: "bar", second.puc: "cross"}
        assert path.puc_count == 2

    def test_empty(self):
        assert path_states(LightPath(None, None, (), 0.0)) == {}

    def test_non_contiguous(self, hexagon):
        g = build_graph(hexagon)
        a, b = g.arcs[0], g.arcs[9]
        assert a.head != b.tail
        with pytest.raises(GraphError, match="contiguous"):
            path_states(LightPath(None, None, (a, b), 0.0))

    def test_every_mesh72_route(self, graph72):
        usable = graph72.topology.usable_ports
        pairs = [(a, b) for a in usable for b in usable if a != b]
        batch = route_batch(graph72, pairs)
        routed = [p for p in batch.paths if p is not None]
        assert len(routed) == len(pairs) - 20
        for p in routed:
            assert len(path_states(p)) == p.puc_count
            assert len(set(p.nodes)) == len(p.nodes)

    def test_merge_conflict(self, hexagon):
        g = build_graph(hexagon)
        bar, cross = self._arc(g, 0, "bar"), self._arc(g, 0, "cross")
        p1, p2 = LightPath(None, None, (bar,), 0), LightPath(None, None, (cross,), 0)
        assert merge_states([p1, p1]) == {0: "bar"}
        with pytest.raises(GraphError, match="PUC 0"):
            merge_states([p1, p2])
