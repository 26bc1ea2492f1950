"""Adaptive expansion: gate network, selection, kernel, normalization, assembly."""

import math

import numpy as np
import pytest

from hyperx import rng as rngmod
from hyperx.ade import (
    DistanceCache,
    GsiNetParams,
    HyperedgeSelection,
    KernelParams,
    assemble_adjacency,
    compute_signal,
    expand,
    expand_hypergcn_fixed,
    global_pool,
    kernel_weight,
    kernel_weights_bulk,
    normalize_weights,
    pair_distance,
    scale_features,
    select_all,
    select_pair,
    selection_needs_rng,
    si_net_forward,
)
from hyperx.classic import clique_expand
from hyperx.core import Hypergraph, synth_hypergraph

from oracles import fsum_column_means, fsum_row_sums, kernel_scalar, max_gap_pairs, si_net_scalar


def make_h(n, hyperedges, features):
    features = np.asarray(features, dtype=float)
    return Hypergraph(n, tuple(tuple(e) for e in hyperedges), features, np.zeros(n, dtype=int), 1)


class TestGlobalPool:
    def test_two_rows(self):
        assert global_pool(np.array([[1.0, 3.0], [3.0, 5.0]])).tolist() == [2.0, 4.0]

    def test_single_row_identity(self):
        row = np.array([[0.25, -7.0, 2.0]])
        assert global_pool(row).tolist() == row[0].tolist()

    def test_matches_fsum_oracle(self):
        X = rngmod.substream(0, 99).standard_normal((37, 5))
        assert global_pool(X) == pytest.approx(fsum_column_means(X), rel=1e-13)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            global_pool(np.zeros((0, 3)))


class TestSiNet:
    def test_zero_weights_give_half(self):
        p = GsiNetParams(np.zeros((4, 3)), np.zeros((3, 4)))
        assert si_net_forward(np.array([1.0, -2.0, 3.0]), p).tolist() == [0.5, 0.5, 0.5]

    def test_relu_kills_negative_preactivation(self):
        p = GsiNetParams(np.array([[1.0]]), np.array([[1.0]]))
        assert si_net_forward(np.array([-3.0]), p).tolist() == [0.5]

    def test_matches_elementwise_oracle(self):
        rng = rngmod.substream(1, 98)
        w1 = rng.standard_normal((6, 4))
        w2 = rng.standard_normal((4, 6))
        x_g = rng.standard_normal(4)
        got = si_net_forward(x_g, GsiNetParams(w1, w2))
        want = si_net_scalar(x_g.tolist(), w1.tolist(), w2.tolist())
        assert got == pytest.approx(want, rel=1e-12)

    def test_output_in_open_interval(self):
        p = GsiNetParams(np.full((2, 2), 100.0), np.full((2, 2), 100.0))
        out = si_net_forward(np.array([100.0, 100.0]), p)
        assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            si_net_forward(np.ones(3), GsiNetParams(np.zeros((2, 2)), np.zeros((2, 2))))


class TestScaleAndSignal:
    def test_identity_and_zero_gates(self):
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(scale_features(X, np.ones(2)), X)
        assert np.array_equal(scale_features(X, np.zeros(2)), np.zeros_like(X))

    def test_mixed_gate_elementwise(self):
        X = rngmod.substream(2, 97).standard_normal((8, 3))
        gate = np.array([0.2, 0.9, 0.5])
        got = scale_features(X, gate)
        for i in range(8):
            for d in range(3):
                assert got[i, d] == X[i, d] * gate[d]

    def test_signal_trivial(self):
        assert compute_signal(np.array([[1.0, 2.0], [3.0, 4.0]])).tolist() == [3.0, 7.0]
        assert compute_signal(np.zeros((3, 2))).tolist() == [0.0, 0.0, 0.0]

    def test_signal_matches_fsum(self):
        X = rngmod.substream(3, 96).standard_normal((20, 7))
        assert compute_signal(X) == pytest.approx(fsum_row_sums(X), rel=1e-13)


class TestSelectPair:
    def test_example_gap(self):
        S = np.array([0.0, 1.0, 0.4])
        sel = select_pair((0, 1, 2), S, 0)
        assert (sel.v_minus, sel.v_plus) == (0, 1)
        assert sel.mediators == (2,)
        assert len(sel.edge_set()) == 3

    def test_size_two_forced(self):
        sel = select_pair((4, 7), np.array([0.0] * 5 + [0.0, 0.0, 1.0]), 0)
        assert {sel.v_minus, sel.v_plus} == {4, 7}
        assert sel.edge_set() == [(sel.v_minus, sel.v_plus)]

    def test_singleton_has_no_edges(self):
        sel = select_pair((3,), np.zeros(5), 0)
        assert sel.edge_set() == []

    def test_constant_signal_uses_rng_deterministically(self):
        members = (0, 1, 2, 3)
        S = np.zeros(4)
        a = select_pair(members, S, 0, rngmod.substream(5, 1, 0, 0))
        b = select_pair(members, S, 0, rngmod.substream(5, 1, 0, 0))
        assert (a.v_minus, a.v_plus) == (b.v_minus, b.v_plus)
        # different substreams eventually pick a different pair
        seen = {
            (select_pair(members, S, 0, rngmod.substream(s, 1, 0, 0)).v_minus,
             select_pair(members, S, 0, rngmod.substream(s, 1, 0, 0)).v_plus)
            for s in range(30)
        }
        assert len(seen) > 1

    def test_tie_requires_rng(self):
        with pytest.raises(ValueError, match="rng"):
            select_pair((0, 1, 2), np.zeros(3), 0, None)

    def test_selected_pair_maximizes_gap_brute_force(self):
        rng = rngmod.substream(6, 95)
        for _ in range(60):
            size = int(rng.integers(2, 8))
            members = tuple(rng.choice(30, size=size, replace=False).tolist())
            S = rng.standard_normal(30)
            sel = select_pair(members, S, 0, rngmod.substream(7, 1, 0, 0))
            best = max_gap_pairs(members, S)
            assert tuple(sorted((sel.v_minus, sel.v_plus))) in best
            assert S[sel.v_plus] >= S[sel.v_minus]
            assert set(sel.mediators) == set(members) - {sel.v_minus, sel.v_plus}
            assert len(sel.edge_set()) == 2 * size - 3
            # every mediator appears in exactly two edges, the pair edge is present
            counts = {}
            for a, b in sel.edge_set():
                counts[a] = counts.get(a, 0) + 1
                counts[b] = counts.get(b, 0) + 1
            assert (sel.v_minus, sel.v_plus) in sel.edge_set()
            for m in sel.mediators:
                assert counts[m] == 2

    def test_partial_tie_drawn_from_tied_set(self):
        members = (0, 1, 2, 3)
        S = np.array([0.0, 0.0, 5.0, 2.0])  # two minima, one maximum -> 2 tied pairs
        assert selection_needs_rng(S[list(members)])
        picks = set()
        for s in range(40):
            sel = select_pair(members, S, 0, rngmod.substream(s, 1, 0, 0))
            picks.add((sel.v_minus, sel.v_plus))
        assert picks == {(0, 2), (1, 2)}


class TestDistance:
    def test_identical_rows_zero(self):
        X = np.array([[1.0, 2.0], [1.0, 2.0]])
        assert pair_distance(X, 0, 1, DistanceCache(X)) == 0.0

    def test_three_four_five(self):
        X = np.array([[0.0, 0.0], [3.0, 4.0]])
        assert pair_distance(X, 0, 1, DistanceCache(X)) == 5.0

    def test_symmetry_and_memoization(self):
        X = rngmod.substream(8, 94).standard_normal((10, 4))
        cache = DistanceCache(X)
        for i, j in ((0, 1), (5, 2), (9, 9)):
            assert cache.get(i, j) == cache.get(j, i)
        assert len(cache) == 2  # (9, 9) short-circuits without storing

    def test_get_many_matches_scalar_path(self):
        X = rngmod.substream(9, 93).standard_normal((15, 3))
        cache = DistanceCache(X)
        ii = np.array([0, 3, 7, 3, 0])
        jj = np.array([5, 2, 7, 2, 5])
        bulk = cache.get_many(ii, jj)
        fresh = DistanceCache(X)
        for k in range(ii.size):
            assert bulk[k] == fresh.get(int(ii[k]), int(jj[k]))


class TestKernel:
    def test_identical_rows_weight_one(self):
        X_a = np.array([[0.5, 0.5], [0.5, 0.5]])
        assert kernel_weight(X_a, 0.0, np.ones(2), 0, 1) == 1.0

    def test_frozen_exponents(self):
        # b=1, rows 0 and 2: distance 2, squared diff 4
        X_a = np.array([[0.0], [2.0]])
        assert kernel_weight(X_a, 2.0, np.array([1.0]), 0, 1) == pytest.approx(math.exp(-8.0), rel=1e-15)
        assert kernel_weight(X_a, 2.0, np.array([2.0]), 0, 1) == pytest.approx(math.exp(-2.0), rel=1e-15)

    def test_matches_elementwise_oracle(self):
        rng = rngmod.substream(10, 92)
        X_a = rng.standard_normal((12, 5))
        theta = np.abs(rng.standard_normal(5)) + 0.1
        cache = DistanceCache(X_a)
        for _ in range(25):
            i, j = rng.integers(12, size=2)
            d = cache.get(int(i), int(j))
            got = kernel_weight(X_a, d, theta, int(i), int(j))
            want = kernel_scalar(X_a[int(i)].tolist(), X_a[int(j)].tolist(), d, theta.tolist())
            assert got == pytest.approx(want, rel=1e-12)
            assert got == kernel_weight(X_a, d, theta, int(j), int(i))
            assert 0.0 < got <= 1.0

    def test_exponent_clamp_prevents_underflow(self):
        X_a = np.array([[0.0], [1e6]])
        w = kernel_weight(X_a, 1e6, np.array([1.0]), 0, 1)
        assert w == math.exp(-60.0)

    def test_bulk_matches_scalar(self):
        rng = rngmod.substream(11, 91)
        X_a = rng.standard_normal((9, 4))
        theta = np.abs(rng.standard_normal(4)) + 0.2
        ii = np.array([0, 1, 2, 3])
        jj = np.array([4, 5, 6, 7])
        cache = DistanceCache(X_a)
        d = cache.get_many(ii, jj)
        bulk = kernel_weights_bulk(X_a, d, ii, jj, theta)
        for k in range(4):
            assert bulk[k] == pytest.approx(kernel_weight(X_a, d[k], theta, int(ii[k]), int(jj[k])), rel=1e-14)

    def test_monotone_in_dominated_differences(self):
        # scaling both rows by c >= 1 scales U * diff^2 by c^3 in every dimension
        rng = rngmod.substream(12, 90)
        for _ in range(20):
            xi = rng.standard_normal(4)
            xj = rng.standard_normal(4)
            c = 1.0 + float(rng.random()) * 3.0
            X_a = np.vstack([xi, xj, c * xi, c * xj])
            theta = np.abs(rng.standard_normal(4)) + 0.1
            cache = DistanceCache(X_a)
            w_near = kernel_weight(X_a, cache.get(0, 1), theta, 0, 1)
            w_far = kernel_weight(X_a, cache.get(2, 3), theta, 2, 3)
            assert w_near >= w_far


class TestNormalization:
    def test_three_equal(self):
        out = normalize_weights([(0, 1), (0, 2), (1, 2)], np.array([0.7, 0.7, 0.7]))
        assert out == pytest.approx([1 / 3] * 3, rel=1e-15)

    def test_uniform_size_four_gives_one_fifth(self):
        edges = [(0, 1)] * 5
        out = normalize_weights(edges, np.full(5, 0.123))
        assert np.all(out == 0.2)

    def test_ratio_preserved(self):
        out = normalize_weights([(0, 1), (0, 2), (1, 2)], np.array([2.0, 1.0, 1.0]))
        assert out.tolist() == [0.5, 0.25, 0.25]

    def test_sums_to_one(self):
        rng = rngmod.substream(13, 89)
        for _ in range(50):
            raw = np.exp(rng.standard_normal(int(rng.integers(1, 12))))
            out = normalize_weights([(0, 1)] * raw.size, raw)
            assert abs(out.sum() - 1.0) <= 1e-12

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            normalize_weights([(0, 1)], np.array([0.0]))


class TestAssembly:
    def test_pair_shared_by_two_hyperedges(self):
        sels = [
            HyperedgeSelection(0, 0, 1, (2,)),
            HyperedgeSelection(1, 0, 1, ()),
        ]
        weights = [np.array([0.2, 0.4, 0.4]), np.array([0.5])]
        g = assemble_adjacency(sels, weights, 3)
        assert dict(((u, v), w) for u, v, w in g.edges())[(0, 1)] == pytest.approx(0.7, abs=1e-15)

    def test_absent_pair_is_absent(self):
        g = assemble_adjacency([HyperedgeSelection(0, 0, 1, ())], [np.array([1.0])], 4)
        assert {(u, v) for u, v, _ in g.edges()} == {(0, 1)}

    def test_triangle_weights_sum_to_one(self):
        H = make_h(3, [[0, 1, 2]], rngmod.substream(14, 88).standard_normal((3, 4)))
        res = expand(H, GsiNetParams.init(4, 1), KernelParams.init(4), seed=1)
        assert res.graph.num_edges == 3
        assert res.graph.edge_weight_sum() == pytest.approx(1.0, abs=1e-12)


class TestExpand:
    def test_three_uniform_matches_clique_structure(self):
        H = synth_hypergraph(20, 10, (3, 3), 2, seed=21, n_features=5)
        res = expand(H, GsiNetParams.init(5, 21), KernelParams.init(5), seed=21)
        ade_pairs = {(u, v) for u, v, _ in res.graph.edges()}
        ce_pairs = {(u, v) for u, v, _ in clique_expand(H).edges()}
        assert ade_pairs == ce_pairs

    def test_uniform_features_give_fixed_weights(self):
        H = synth_hypergraph(24, 9, (2, 6), 2, feature_scheme="constant", seed=22, n_features=3)
        res = expand(H, GsiNetParams.init(3, 22), KernelParams.init(3), seed=22)
        for sel, weights in zip(res.selections, res.normalized_weights):
            k = len(sel.edge_set())
            if k:
                assert np.max(np.abs(weights - 1.0 / k)) <= 1e-12

    def test_determinism(self):
        H = synth_hypergraph(30, 12, (1, 6), 2, seed=23)
        gsi, ker = GsiNetParams.init(H.num_features, 23), KernelParams.init(H.num_features)
        a = expand(H, gsi, ker, seed=23)
        b = expand(H, gsi, ker, seed=23)
        assert np.array_equal(a.graph.edge_u, b.graph.edge_u)
        assert np.array_equal(a.graph.edge_v, b.graph.edge_v)
        assert np.array_equal(a.graph.edge_w, b.graph.edge_w)
        assert a.selections == b.selections

    def test_edge_count_identity(self):
        for seed in range(6):
            H = synth_hypergraph(40, 15, (1, 8), 2, seed=seed)
            res = expand(H, GsiNetParams.init(H.num_features, seed), KernelParams.init(H.num_features), seed=seed)
            expected = sum(max(0, 2 * len(e) - 3) for e in H.hyperedges)
            assert sum(len(s.edge_set()) for s in res.selections) == expected

    def test_matches_operation_composition(self):
        # independently recompute the adjacency from the public per-op surface
        H = synth_hypergraph(25, 10, (1, 6), 2, seed=24, n_features=4)
        gsi, ker = GsiNetParams.init(4, 24), KernelParams.init(4)
        res = expand(H, gsi, ker, seed=24)

        gate = si_net_forward(global_pool(H.features), gsi)
        X_a = scale_features(H.features, gate)
        signal = compute_signal(X_a)
        sels = select_all(H, signal, 24, 0)
        assert list(res.selections) == sels
        cache = DistanceCache(H.features)
        theta = ker.effective_theta()
        normalized = []
        for sel in sels:
            edges = sel.edge_set()
            raw = np.array([kernel_weight(X_a, cache.get(i, j), theta, i, j) for i, j in edges])
            normalized.append(normalize_weights(edges, raw) if edges else np.empty(0))
        g = assemble_adjacency(sels, normalized, H.num_nodes)
        assert np.array_equal(g.edge_u, res.graph.edge_u)
        assert np.array_equal(g.edge_v, res.graph.edge_v)
        assert g.edge_w == pytest.approx(res.graph.edge_w, rel=1e-12)

    def test_signal_scaling_invariance(self):
        # scaling the scaled-feature matrix by 2^k scales the signal exactly and
        # keeps the selected pairs identical for a fixed seed
        H = synth_hypergraph(30, 12, (2, 6), 2, seed=25, n_features=4)
        gate = si_net_forward(global_pool(H.features), GsiNetParams.init(4, 25))
        X_a = scale_features(H.features, gate)
        S = compute_signal(X_a)
        for c in (0.5, 2.0, 4.0):
            S_scaled = compute_signal(c * X_a)
            assert np.array_equal(S_scaled, c * S)
            a = select_all(H, S, 77, 0)
            b = select_all(H, S_scaled, 77, 0)
            assert a == b

    def test_signal_scaling_invariance_generic_positive(self):
        H = synth_hypergraph(30, 12, (2, 6), 2, seed=26, n_features=4)
        X_a = scale_features(H.features, si_net_forward(global_pool(H.features), GsiNetParams.init(4, 26)))
        S = compute_signal(X_a)
        a = select_all(H, S, 78, 0)
        b = select_all(H, compute_signal(1.7 * X_a), 78, 0)
        assert a == b

    def test_distance_cache_stays_sparse(self):
        H = synth_hypergraph(60, 20, (2, 6), 2, seed=27)
        cache = DistanceCache(H.features)
        res = expand(H, GsiNetParams.init(H.num_features, 27), KernelParams.init(H.num_features), seed=27, cache=cache)
        assert len(cache) == res.graph.num_edges
        assert len(cache) < 60 * 59 // 2


class TestDegenerateStructures:
    def test_no_hyperedges_expand_to_empty_graph(self):
        H = Hypergraph(3, (), np.eye(3), np.zeros(3, dtype=int), 1)
        res = expand(H, GsiNetParams.init(3, 0), KernelParams.init(3), seed=0)
        assert res.graph.num_edges == 0
        assert res.selections == ()

    def test_all_singletons_expand_to_empty_graph(self):
        H = make_h(5, [[0], [2], [4]], rngmod.substream(16, 86).standard_normal((5, 2)))
        res = expand(H, GsiNetParams.init(2, 0), KernelParams.init(2), seed=0)
        assert res.graph.num_edges == 0
        assert all(s.edge_set() == [] for s in res.selections)
        assert expand_hypergcn_fixed(H, 0).num_edges == 0


class TestHypergcnFixed:
    def test_triple_gets_thirds(self):
        H = make_h(3, [[0, 1, 2]], rngmod.substream(15, 87).standard_normal((3, 2)))
        g = expand_hypergcn_fixed(H, seed=4)
        assert g.num_edges == 3
        assert all(w == pytest.approx(1 / 3, rel=1e-15) for _, _, w in g.edges())

    def test_pair_weight_one(self):
        H = make_h(2, [[0, 1]], np.array([[1.0], [2.0]]))
        g = expand_hypergcn_fixed(H, seed=4)
        assert list(g.edges()) == [(0, 1, 1.0)]

    def test_seed_changes_projection(self):
        # crafted features where the random projection's sign flips the selection
        H = make_h(4, [[0, 1, 2, 3]], np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]))
        picks = set()
        for seed in range(12):
            g = expand_hypergcn_fixed(H, seed=seed)
            picks.add(tuple((u, v) for u, v, _ in g.edges()))
        assert len(picks) > 1
