import itertools

import numpy as np
import pytest
from networkx.utils import UnionFind

from lapinfer.errors import DimensionError, ValidationError
from lapinfer.graph_core import (
    AssociationMatrix,
    EdgeVector,
    LaplacianMatrix,
    binarize_percentile,
    component_monotonicity_check,
    devectorize,
    dim_from_edges,
    edge_count,
    frechet_mean,
    frobenius_distance,
    frobenius_metric,
    laplacian_from_association,
    space_membership,
    vectorize,
)
from tests.helpers import laplacian_of, random_weights


def random_laplacian(rng, d, density=1.0):
    w = random_weights(rng, d)
    keep = np.triu(rng.random((d, d)) < density, k=1)
    return laplacian_of(w * (keep | keep.T))


class TestLaplacianFromAssociation:
    def test_single_edge(self):
        L = laplacian_from_association(AssociationMatrix([[0, 1], [1, 0]]))
        np.testing.assert_array_equal(L.entries, [[1, -1], [-1, 1]])

    def test_zero_matrix(self):
        L = laplacian_from_association(AssociationMatrix(np.zeros((3, 3))))
        np.testing.assert_array_equal(L.entries, np.zeros((3, 3)))

    def test_self_weights_cancel(self):
        L = laplacian_from_association(AssociationMatrix([[2, 1], [1, 3]]))
        np.testing.assert_array_equal(L.entries, [[1, -1], [-1, 1]])

    def test_rejects_asymmetric(self):
        with pytest.raises(ValidationError, match="not symmetric"):
            AssociationMatrix([[0, 1], [2, 0]])

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            AssociationMatrix(np.zeros((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError, match="non-finite"):
            AssociationMatrix([[0, np.nan], [np.nan, 0]])

    def test_permutation_equivariance(self, rng):
        d = 6
        S = random_weights(rng, d) + np.diag(rng.uniform(1, 2, d))
        order = rng.permutation(d)
        P = np.eye(d)[order]
        direct = laplacian_from_association(AssociationMatrix(P @ S @ P.T))
        relabelled = laplacian_from_association(AssociationMatrix(S)).permuted(order)
        np.testing.assert_array_equal(direct.entries, relabelled.entries)

    def test_row_sums_vanish(self, rng):
        for _ in range(20):
            S = rng.normal(size=(7, 7))
            L = laplacian_from_association(AssociationMatrix(S + S.T))
            assert np.max(np.abs(L.entries.sum(axis=1))) <= 1e-8 * max(1.0, np.abs(L.entries).max())


def test_laplacian_rejects_nonzero_row_sums():
    with pytest.raises(ValidationError, match="sum to zero"):
        LaplacianMatrix([[1.0, -0.5], [-0.5, 1.0]])


class TestVectorize:
    def test_two_vertices(self):
        v = vectorize(LaplacianMatrix([[1, -1], [-1, 1]]))
        np.testing.assert_array_equal(v.values, [-1])

    def test_path_order(self):
        v = vectorize(LaplacianMatrix([[1, -1, 0], [-1, 2, -1], [0, -1, 1]]))
        np.testing.assert_array_equal(v.values, [-1, 0, -1])

    def test_round_trip(self, rng):
        for _ in range(100):
            L = random_laplacian(rng, int(rng.integers(2, 9)), density=0.6)
            back = devectorize(vectorize(L)).entries
            off = ~np.eye(L.dim, dtype=bool)
            np.testing.assert_array_equal(back[off], L.entries[off])
            np.testing.assert_allclose(np.diag(back), np.diag(L.entries), rtol=0, atol=1e-12)

    def test_edge_vector_length_checked(self):
        with pytest.raises(DimensionError):
            EdgeVector(4, np.zeros(5))

    @pytest.mark.parametrize("d", [1, 2, 3, 10, 50])
    def test_dim_from_edges(self, d):
        assert dim_from_edges(edge_count(d)) == d

    def test_dim_from_edges_rejects_non_triangular(self):
        with pytest.raises(DimensionError):
            dim_from_edges(4)


class TestFrobenius:
    def test_zero_on_identical(self, rng):
        L = random_laplacian(rng, 4)
        assert frobenius_distance(L, L) == 0.0

    def test_sum_of_squares(self):
        X = LaplacianMatrix([[1, -1], [-1, 1]])
        assert frobenius_distance(X, LaplacianMatrix(np.zeros((2, 2)))) == 4.0
        assert frobenius_metric(X, LaplacianMatrix(np.zeros((2, 2)))) == 2.0

    def test_brute_force(self, rng):
        for _ in range(50):
            X, Y = random_laplacian(rng, 5), random_laplacian(rng, 5)
            brute = sum(
                (X.entries[i, j] - Y.entries[i, j]) ** 2 for i in range(5) for j in range(5)
            )
            assert frobenius_distance(X, Y) == pytest.approx(brute, rel=1e-12)

    def test_metric_axioms(self, rng):
        for _ in range(100):
            X, Y, Z = (random_laplacian(rng, 4, density=0.7) for _ in range(3))
            xy, yz, xz = frobenius_metric(X, Y), frobenius_metric(Y, Z), frobenius_metric(X, Z)
            assert xy >= 0
            assert xy == frobenius_metric(Y, X)
            assert xz <= (xy + yz) * (1 + 1e-9)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            frobenius_distance(random_laplacian(rng, 3), random_laplacian(rng, 4))


class TestFrechetMean:
    def test_mean_of_copies(self, rng):
        L = random_laplacian(rng, 5)
        np.testing.assert_array_equal(frechet_mean([L, L]).entries, L.entries)

    def test_elementwise(self):
        a = LaplacianMatrix([[1, -1], [-1, 1]])
        b = LaplacianMatrix([[3, -3], [-3, 3]])
        np.testing.assert_array_equal(frechet_mean([a, b]).entries, [[2, -2], [-2, 2]])

    def test_linearity_of_vectorization(self, rng):
        sample = [random_laplacian(rng, 5) for _ in range(8)]
        expected = np.mean([vectorize(L).values for L in sample], axis=0)
        np.testing.assert_allclose(vectorize(frechet_mean(sample)).values, expected, rtol=0, atol=1e-12)

    def test_minimises_sum_of_distances(self, rng):
        sample = [random_laplacian(rng, 4) for _ in range(20)]
        mean = frechet_mean(sample)
        objective = sum(frobenius_distance(mean, L) for L in sample)
        for a, b in itertools.combinations(range(4), 2):
            for step in (-0.05, 0.05):
                bump = np.zeros((4, 4))
                bump[a, b] = bump[b, a] = -step
                bump[a, a] = bump[b, b] = step
                moved = LaplacianMatrix(mean.entries + bump)
                assert sum(frobenius_distance(moved, L) for L in sample) > objective

    def test_empty_sample(self):
        with pytest.raises(ValidationError):
            frechet_mean([])

    def test_mixed_dimensions(self, rng):
        with pytest.raises(DimensionError):
            frechet_mean([random_laplacian(rng, 3), random_laplacian(rng, 4)])


class TestSpaceMembership:
    def test_complete_graph(self):
        diag = space_membership(laplacian_of(np.ones((3, 3)) - np.eye(3)))
        assert diag.rank == 2
        assert diag.n_components == 1
        assert diag.in_L_d
        assert diag.in_L_d_prime
        assert diag.stratum_dim == edge_count(3)

    def test_two_disjoint_edges(self):
        w = np.zeros((4, 4))
        w[0, 1] = w[1, 0] = w[2, 3] = w[3, 2] = 1.0
        diag = space_membership(laplacian_of(w))
        assert diag.rank == 2
        assert diag.n_components == 2
        assert diag.offdiag_sign == "non-positive"
        assert not diag.in_L_d
        assert diag.in_L_d_prime

    def test_positive_offdiagonal_is_mixed(self):
        w = np.array([[0, 1, -0.5], [1, 0, 1], [-0.5, 1, 0]])
        diag = space_membership(laplacian_of(w))
        assert diag.offdiag_sign == "mixed"
        assert not diag.in_L_d_prime

    def test_non_laplacian_array(self):
        diag = space_membership(np.eye(3))
        assert not diag.row_sums_ok
        assert not diag.in_L_d_prime

    def test_components_match_union_find(self, rng):
        for _ in range(200):
            d = int(rng.integers(2, 9))
            L = random_laplacian(rng, d, density=rng.uniform(0.05, 0.6))
            uf = UnionFind(range(d))
            for a, b in zip(*np.nonzero(np.tril(L.entries, k=-1))):
                uf.union(int(a), int(b))
            components = len(list(uf.to_sets()))
            diag = space_membership(L)
            assert diag.n_components == components
            assert diag.n_components == d - diag.rank
            if diag.in_L_d:
                assert diag.in_L_d_prime


class TestComponentMonotonicity:
    def test_identical(self, rng):
        L = random_laplacian(rng, 5, density=0.3)
        assert component_monotonicity_check(L, L)

    def test_two_single_edges(self):
        w1 = np.zeros((3, 3))
        w1[0, 1] = w1[1, 0] = 1.0
        w2 = np.zeros((3, 3))
        w2[1, 2] = w2[2, 1] = 1.0
        assert component_monotonicity_check(laplacian_of(w1), laplacian_of(w2))

    def test_random_pairs(self, rng):
        for _ in range(500):
            d = int(rng.integers(2, 8))
            L1 = random_laplacian(rng, d, density=rng.uniform(0, 0.5))
            L2 = random_laplacian(rng, d, density=rng.uniform(0, 0.5))
            assert component_monotonicity_check(L1, L2)

    def test_rejects_positive_offdiagonals(self):
        w = np.array([[0, 1, -0.5], [1, 0, 1], [-0.5, 1, 0]])
        with pytest.raises(ValidationError):
            component_monotonicity_check(laplacian_of(w), laplacian_of(np.zeros((3, 3))))


class TestBinarize:
    def test_q_zero_keeps_everything(self, rng):
        masks = binarize_percentile([random_laplacian(rng, 4) for _ in range(3)], 0)
        assert all(mask.all() for mask in masks)

    def test_q_hundred_keeps_maximum(self, rng):
        sample = [random_laplacian(rng, 4) for _ in range(3)]
        peak = max(L.entries.max() for L in sample)
        for L, mask in zip(sample, binarize_percentile(sample, 100)):
            np.testing.assert_array_equal(mask, L.entries == peak)

    def test_seventy_fifth_percentile(self):
        (mask,) = binarize_percentile([LaplacianMatrix([[1, -1], [-1, 1]])], 75)
        np.testing.assert_array_equal(mask, [[True, False], [False, True]])

    def test_rejects_bad_percentile(self, rng):
        with pytest.raises(ValidationError):
            binarize_percentile([random_laplacian(rng, 3)], 101)
