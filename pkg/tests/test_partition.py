import math

import numpy as np
import pytest

from quadsketch.errors import QuadsketchError
from quadsketch.graph import (
    WeightedGraph,
    cheeger_exact,
    conductance,
    cut_weight,
    expansion_exact,
)
from quadsketch.partition import (
    assign_direction,
    cut_preprocessing,
    degree_class_partition,
    find_sparse_cut,
    importance_sample,
    recursion_depth_bound,
    spectral_preprocessing,
    weight_class_of,
)
from quadsketch.rng import rng_for

from conftest import complete_graph, gnp, gnp_connected, random_members


def two_triangles_bridge():
    return WeightedGraph(
        6,
        [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)],
    )


class TestFindSparseCut:
    def test_two_triangles_conductance(self):
        res = find_sparse_cut(two_triangles_bridge(), "conductance", 0.2)
        assert res.members is not None
        side = set(np.flatnonzero(res.members).tolist())
        assert side in ({0, 1, 2}, {3, 4, 5})
        assert conductance(two_triangles_bridge(), res.members) <= 0.2

    def test_k6_edge_mode_none(self):
        res = find_sparse_cut(complete_graph(6), "edge_expansion", 1.0)
        assert res.members is None and res.certified

    def test_single_edge_conductance(self):
        res = find_sparse_cut(WeightedGraph(2, [(0, 1, 1.0)]), "conductance", 1.0)
        assert res.members is not None and res.members.sum() == 1

    def test_found_cut_always_qualifies(self):
        for seed in range(20):
            g = gnp_connected(14, 0.35, seed=seed)
            thr = 3.0
            res = find_sparse_cut(g, "edge_expansion", thr)
            if res.members is not None:
                s = res.members
                count = int(np.sum(s[g.edge_u] != s[g.edge_v]))
                assert s.sum() <= g.n // 2
                assert count / s.sum() < thr

    def test_exhaustive_absence_is_exact(self):
        # on small graphs a None answer must really mean no qualifying cut
        for seed in range(10):
            g = gnp_connected(9, 0.6, seed=seed)
            thr = 2.0
            res = find_sparse_cut(g, "edge_expansion", thr)
            if res.members is None:
                assert res.certified
                assert expansion_exact(g) >= thr

    def test_deterministic(self):
        g = gnp_connected(26, 0.2, seed=5)
        a = find_sparse_cut(g, "conductance", 0.3)
        b = find_sparse_cut(g, "conductance", 0.3)
        if a.members is None:
            assert b.members is None
        else:
            assert np.array_equal(a.members, b.members)


class TestSpectralPreprocessing:
    def test_no_split_when_h_below_cheeger(self):
        g = complete_graph(8)
        h = cheeger_exact(g) * 0.5
        part = spectral_preprocessing(g, h)
        assert len(part.components) == 1 and part.cross_count == 0

    def test_barbell_splits_at_bridge(self):
        k5a = [(i, j, 1.0) for i in range(5) for j in range(i + 1, 5)]
        k5b = [(i + 5, j + 5, 1.0) for i in range(5) for j in range(i + 1, 5)]
        g = WeightedGraph(10, k5a + k5b + [(4, 5, 1.0)])
        part = spectral_preprocessing(g, 0.1)
        assert sorted(c.graph.n for c in part.components) == [5, 5]
        assert part.cross_count == 1

    def test_h_at_least_one_dissolves_everything(self):
        g = gnp_connected(9, 0.5, seed=2)
        part = spectral_preprocessing(g, 1.0)
        assert part.cross_count == g.m
        assert not part.components

    def test_components_certified_cheeger_above_h(self):
        for seed in range(15):
            g = gnp_connected(11, 0.45, seed=seed)
            h = 0.25
            part = spectral_preprocessing(g, h)
            for comp in part.components:
                if comp.graph.n >= 2 and comp.certified:
                    assert cheeger_exact(comp.graph) > h

    def test_edge_conservation(self):
        g = gnp_connected(16, 0.4, seed=9, w_lo=1.0, w_hi=1.9)
        part = spectral_preprocessing(g, 0.3)
        seen = sorted(
            np.concatenate([c.edge_idx for c in part.components] + [part.cross_idx]).tolist()
        )
        assert seen == list(range(g.m))

    def test_q_bound_constant(self):
        # |Q| <= 16 h m log2(m+1) across a factor-2-weight corpus
        for seed in range(100):
            n = 8 + seed % 10
            g = gnp_connected(n, 0.5, seed=seed, w_lo=1.0, w_hi=1.999)
            h = (0.05, 0.1, 0.2, 0.3)[seed % 4]
            part = spectral_preprocessing(g, h)
            bound = 16.0 * h * g.m * math.log2(g.m + 1)
            assert part.cross_count <= bound


class TestCutPreprocessing:
    def test_epsilon_range_guard(self):
        g = gnp_connected(8, 0.5, seed=0)
        with pytest.raises(QuadsketchError):
            cut_preprocessing(g, 1.0, 0.01, seed=1)  # below 1/n

    def test_heavy_edges_discarded(self):
        g = WeightedGraph(4, [(0, 1, 100.0), (1, 2, 200.0), (0, 2, 150.0), (2, 3, 400.0)])
        prep = cut_preprocessing(g, 1.0, 0.3, seed=1)
        assert prep.discarded_heavy.size == 4
        assert not prep.classes

    def test_probability_clamped_keeps_edge(self):
        # rescaled weight >= eps^2 -> p = 1, kept deterministically with w~ = w
        g = WeightedGraph(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 4.0)])
        prep = cut_preprocessing(g, 1.0, 0.25, seed=5)
        kept = sum(c.edge_idx.size for cl in prep.classes for c in cl.result.components)
        kept += sum(cl.result.cross_count for cl in prep.classes)
        assert kept == 3 and prep.dropped_unsampled.size == 0

    def test_components_have_required_expansion(self):
        g = gnp_connected(16, 0.5, seed=4)
        prep = cut_preprocessing(g, 1.0, 0.25, seed=7)
        for cl in prep.classes:
            for comp in cl.result.components:
                if comp.certified and 2 <= comp.graph.n <= 20:
                    assert expansion_exact(comp.graph) >= 4.0

    def test_edge_conservation_multiset(self):
        g = gnp_connected(20, 0.4, seed=8, w_lo=0.2, w_hi=8.0)
        prep = cut_preprocessing(g, 2.0, 0.25, seed=9)
        seen = [prep.discarded_heavy, prep.dropped_unsampled]
        for cl in prep.classes:
            seen.append(cl.result.cross_idx)
            for comp in cl.result.components:
                seen.append(comp.edge_idx)
        flat = sorted(np.concatenate(seen).tolist())
        assert flat == list(range(g.m))

    def test_weight_class_bands(self):
        w = np.array([5.0, 2.6, 2.5, 1.26, 0.1, 0.01])
        cls = weight_class_of(w)
        for wi, ci in zip(w, cls):
            assert 5.0 * 2.0**-ci < wi <= 5.0 * 2.0 ** (1 - ci)

    def test_importance_sampling_concentration(self):
        # |w~(S) - w(S)| <= 3 eps w(S) with empirical rate >= 8/9 - 0.03
        eps = 0.1
        g = gnp_connected(32, 0.3, seed=11, w_lo=0.02, w_hi=0.2)
        rng_q = np.random.default_rng(1)
        queries = []
        while len(queries) < 40:
            s = random_members(32, rng_q)
            if 1.0 <= cut_weight(g, s) <= 4.0:
                queries.append(s)
        ok = 0
        trials = 0
        for t in range(50):
            rng = rng_for(1000 + t, "imp")
            kept, w_tilde = importance_sample(g.edge_w, eps, rng)
            ku, kv = g.edge_u[kept], g.edge_v[kept]
            for s in queries:
                w_true = cut_weight(g, s)
                w_est = float(w_tilde[s[ku] != s[kv]].sum())
                trials += 1
                ok += abs(w_est - w_true) <= 3 * eps * w_true
        assert ok / trials >= 8.0 / 9.0 - 0.03


class TestAssignDirection:
    def test_single_edge(self):
        g = WeightedGraph(2, [(0, 1, 1.0)])
        d = assign_direction(g, 2.0)
        assert d.m == 1

    def test_star_center_bounded(self):
        g = WeightedGraph(6, [(0, i, 1.0) for i in range(1, 6)])
        d = assign_direction(g, 3.0, check_potential=True)
        assert d.out_degrees_unweighted()[0] < 3

    def test_postcondition_on_random_corpus(self):
        for seed in range(100):
            n = 6 + seed % 27
            t = (2.0, 4.0, 8.0)[seed % 3]
            g = gnp(n, 0.4, seed=seed)
            d = assign_direction(g, t)
            out = d.out_degrees_unweighted()
            ok = (out[d.arc_u] < t) | (out[d.arc_v] >= t - 1)
            assert bool(np.all(ok))

    def test_underlying_graph_unchanged(self):
        g = gnp_connected(15, 0.4, seed=3, w_lo=0.5, w_hi=2.0)
        d = assign_direction(g, 4.0)
        assert d.undirected() == g

    def test_potential_decreases_by_two(self):
        # check_potential asserts a drop of >= 2 on every flip
        for seed in range(10):
            g = gnp(10, 0.5, seed=seed)
            assign_direction(g, 3.0, check_potential=True)


class TestDegreeClassPartition:
    def test_tiny_graph_verbatim(self):
        g = WeightedGraph(2, [(0, 1, 1.0)])
        dcp = degree_class_partition(g, 0.25, seed=1)
        assert len(dcp.classes) == 1 and dcp.classes[0].kind == "verbatim"

    def test_all_low_when_sparse(self):
        g = WeightedGraph(8, [(i, i + 1, 1.0) for i in range(7)])
        dcp = degree_class_partition(g, 0.25, seed=2)
        assert all(c.kind in ("low", "verbatim") for c in dcp.classes)

    def test_band_invariant_and_depth(self):
        for seed in range(12):
            n = 24 + 8 * (seed % 4)
            g = gnp_connected(n, 0.4, seed=seed)
            dcp = degree_class_partition(g, 0.25, seed=seed)
            s_top = dcp.levels[0].s if dcp.levels else 4.0
            assert dcp.recursion_depth <= recursion_depth_bound(n, s_top)
            beta = 0.25 ** (-8.0 / 5.0)
            for cls in dcp.classes:
                if cls.kind != "band":
                    continue
                out = np.zeros(cls.piece.n, dtype=np.int64)
                np.add.at(out, cls.piece.arc_u, 1)
                tails = cls.piece.arc_u
                lo = 2.0**cls.band * beta
                hi = 2.0 ** (cls.band + 1) * beta
                assert np.all(out[tails] >= lo) and np.all(out[tails] < hi)

    def test_arc_conservation_per_level(self):
        # at every level: classified arcs + deferred arcs = sparsified arcs
        g = gnp_connected(40, 0.5, seed=6)
        dcp = degree_class_partition(g, 0.25, seed=3)
        for lv in dcp.levels:
            classified = sum(
                c.piece.m for c in dcp.classes if c.depth == lv.depth and c.kind != "verbatim"
            )
            assert classified + lv.m_leftover == lv.m_sparsified

    def test_epsilon_validation(self):
        g = gnp_connected(8, 0.5, seed=0)
        with pytest.raises(ValueError):
            degree_class_partition(g, 0.7, seed=1)
