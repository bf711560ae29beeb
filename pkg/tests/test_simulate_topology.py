import networkx as nx
import numpy as np
import pytest
from scipy import stats

from lapinfer.errors import ValidationError
from lapinfer.graph_core import frobenius_metric
from lapinfer.simulate.rng import Stage, as_generator, stream
from lapinfer.simulate.topology import (
    MixtureParams,
    TopologySpec,
    build_sigma_from_topology,
    default_effect_ladder,
    expected_block_edges,
    gen_block_adjacency,
    gen_smallworld_adjacency,
    population_laplacian,
    rewire,
    ring_degree_for,
)


def n_edges(A):
    return int(A.sum()) // 2


def assert_simple(A):
    np.testing.assert_array_equal(A, A.T)
    assert not np.diag(A).any()
    assert set(np.unique(A)) <= {0, 1}


class TestStreams:
    def test_same_key_same_draws(self):
        np.testing.assert_array_equal(stream(7, 1, 2, Stage.SIGMA).random(5), stream(7, 1, 2, Stage.SIGMA).random(5))

    def test_keys_are_independent(self):
        a = stream(7, 1, 2, Stage.SERIES_1).random(5)
        b = stream(7, 1, 2, Stage.SERIES_2).random(5)
        c = stream(7, 1, 3, Stage.SERIES_1).random(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_generator_passes_through(self):
        rng = np.random.default_rng(3)
        assert as_generator(rng) is rng

    def test_negative_key_rejected(self):
        with pytest.raises(ValidationError):
            stream(-1)


class TestBlockAdjacency:
    def test_four_vertices_gives_two_full_blocks(self):
        expected = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        for seed in range(20):
            A = gen_block_adjacency(4, seed)
            np.testing.assert_array_equal(A[:2, :2], expected[:2, :2])
            np.testing.assert_array_equal(A[2:, 2:], expected[2:, 2:])

    @pytest.mark.parametrize("d", [4, 7, 10, 31])
    def test_simple_for_all_seeds(self, d):
        for seed in range(25):
            assert_simple(gen_block_adjacency(d, seed))

    def test_expected_edge_count(self):
        counts = np.array([n_edges(gen_block_adjacency(50, seed)) for seed in range(500)])
        big = small = 25
        p1, p2 = 4 / 50, 1 / 100
        pairs = big * (big - 1) + small * (small - 1)
        variance = p1 * (1 - p1) * pairs / 2 + p2 * (1 - p2) * big * small
        assert expected_block_edges(50) == pytest.approx(p1 * pairs / 2 + p2 * big * small)
        assert abs(counts.mean() - expected_block_edges(50)) <= 4 * np.sqrt(variance / counts.size)

    def test_rejects_small_d(self):
        with pytest.raises(ValidationError):
            gen_block_adjacency(3, 0)


class TestSmallWorld:
    def test_ring_lattice_without_rewiring(self):
        d, k = 12, 4
        A = gen_smallworld_adjacency(d, 0, rewire_beta=0.0, ring_degree=k)
        np.testing.assert_array_equal(A.sum(axis=1), np.full(d, k))
        for i in range(d):
            for step in range(1, k // 2 + 1):
                assert A[i, (i + step) % d] == 1

    def test_edge_count_preserved(self):
        for seed in range(30):
            A = gen_smallworld_adjacency(20, seed, rewire_beta=0.3, ring_degree=4)
            assert_simple(A)
            assert n_edges(A) == 40

    def test_default_degree_matches_block_model(self):
        assert ring_degree_for(10) == 2
        assert ring_degree_for(40) == 2
        for d in (10, 20, 50):
            k = ring_degree_for(d)
            assert k % 2 == 0 and 2 <= k < d

    def test_clustering_exceeds_random_graph(self):
        d, k = 50, 4
        ring = [
            nx.average_clustering(nx.from_numpy_array(gen_smallworld_adjacency(d, seed, 0.1, ring_degree=k)))
            for seed in range(100)
        ]
        random = [nx.average_clustering(nx.gnm_random_graph(d, d * k // 2, seed=seed)) for seed in range(100)]
        assert np.mean(ring) > np.mean(random) + 0.1

    def test_odd_degree_rejected(self):
        with pytest.raises(ValidationError):
            gen_smallworld_adjacency(10, 0, ring_degree=3)

    def test_spec_generates_both_kinds(self):
        assert TopologySpec(kind="block_diagonal", d=8, seed=2).generate().shape == (8, 8)
        assert n_edges(TopologySpec(kind="small_world", d=8, ring_degree=4).generate()) == 16
        with pytest.raises(ValidationError):
            TopologySpec(kind="lattice")


class TestRewire:
    def test_zero_count_is_identity(self):
        A = gen_block_adjacency(12, 4)
        np.testing.assert_array_equal(rewire(A, 0, 1), A)

    @pytest.mark.parametrize("r", [1, 3, 10, 40])
    def test_edge_count_invariant(self, r):
        A = gen_smallworld_adjacency(20, 0, 0.0, ring_degree=4)
        B = rewire(A, r, 11)
        assert_simple(B)
        assert n_edges(B) == n_edges(A)
        moved = np.triu(A != B, k=1).sum()
        assert moved == 2 * r

    def test_too_many_edges(self):
        A = gen_smallworld_adjacency(10, 0, 0.0, ring_degree=2)
        with pytest.raises(ValidationError):
            rewire(A, 11, 0)

    def test_effect_grows_with_rewiring(self):
        A = gen_smallworld_adjacency(20, 0, 0.0, ring_degree=4)
        params = MixtureParams()
        effects = {r: [] for r in (1, 4, 16)}
        for seed in range(40):
            lap1 = population_laplacian(build_sigma_from_topology(A, params, seed))
            for r in effects:
                sigma2 = build_sigma_from_topology(rewire(A, r, stream(seed, stage=Stage.REWIRE)), params, seed)
                effects[r].append(frobenius_metric(lap1, population_laplacian(sigma2)))
        means = [np.mean(effects[r]) for r in (1, 4, 16)]
        assert means[0] > 0
        assert means[0] < means[1] < means[2]

    def test_default_ladder(self):
        A = gen_smallworld_adjacency(20, 0, 0.0, ring_degree=4)
        assert default_effect_ladder(A) == [0, 1, 2, 4, 8]


class TestSigma:
    def test_projected_and_deterministic(self):
        A = gen_block_adjacency(10, 1)
        sigma = build_sigma_from_topology(A, MixtureParams(), 5)
        np.testing.assert_array_equal(sigma, build_sigma_from_topology(A, MixtureParams(), 5))
        assert np.all(np.isfinite(sigma))
        np.testing.assert_allclose(sigma, sigma.T, atol=1e-12)
        w = np.linalg.eigvalsh(sigma)
        assert w.min() >= 1e-8 * w.max() * (1 - 1e-6)

    def test_default_diagonal_dominates(self):
        for seed in range(20):
            sigma = build_sigma_from_topology(gen_smallworld_adjacency(10, seed), MixtureParams(), seed)
            off = np.abs(sigma).sum(axis=1) - np.diag(sigma)
            assert np.all(np.diag(sigma) > off)
            # Gershgorin
            assert np.linalg.eigvalsh(sigma).min() >= np.min(np.diag(sigma) - off) - 1e-12 * sigma.max()

    def test_exponential_diagonal_is_projected_to_near_singular(self):
        params = MixtureParams(diagonal="exponential")
        A = gen_block_adjacency(10, 1)
        w = np.linalg.eigvalsh(build_sigma_from_topology(A, params, 5))
        assert w.min() <= 1e-3 * w.max()

    def test_same_seed_changes_only_rewired_entries(self):
        A = gen_smallworld_adjacency(12, 0, 0.0, ring_degree=4)
        B = rewire(A, 3, 9)
        sa = build_sigma_from_topology(A, MixtureParams(), 21)
        sb = build_sigma_from_topology(B, MixtureParams(), 21)
        off = ~np.eye(12, dtype=bool)
        np.testing.assert_array_equal(sa[off & (A == B)], sb[off & (A == B)])
        assert not np.array_equal(sa[A != B], sb[A != B])
        touched = np.any(A != B, axis=1)
        np.testing.assert_array_equal(np.diag(sa)[~touched], np.diag(sb)[~touched])

    def test_mixture_entries(self):
        A = gen_block_adjacency(10, 3)
        params = MixtureParams()
        upper = np.triu(np.ones_like(A, dtype=bool), k=1)
        edge_values, other_values = [], []
        for seed in range(200):
            sigma = build_sigma_from_topology(A, params, seed)
            assert np.all(sigma[upper] >= 0)
            edge_values.extend(sigma[upper & (A == 1)])
            other_values.extend(sigma[upper & (A == 0)])
        scale = np.sqrt(params.sigma2)
        for values, mu in ((edge_values, params.mu1), (other_values, params.mu2)):
            law = stats.foldnorm(c=mu / scale, scale=scale)
            assert abs(np.mean(values) - law.mean()) <= 4 * law.std() / np.sqrt(len(values))

    def test_diagonal_excess_is_exponential(self):
        params = MixtureParams()
        A = gen_block_adjacency(8, 2)
        excess = []
        for seed in range(300):
            sigma = build_sigma_from_topology(A, params, seed)
            excess.extend(np.diag(sigma) - (sigma.sum(axis=1) - np.diag(sigma)))
        law = stats.expon(scale=1.0 / params.lambda_exp)
        assert abs(np.mean(excess) - law.mean()) <= 4 * law.std() / np.sqrt(len(excess))

    def test_rejects_non_binary(self):
        with pytest.raises(ValidationError):
            build_sigma_from_topology(np.full((4, 4), 0.5), MixtureParams(), 0)

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            MixtureParams(sigma2=0.0)
        with pytest.raises(ValidationError):
            MixtureParams(diagonal="uniform")
