"""Builders shared by the test modules."""

import numpy as np

from lapinfer.graph_core import EdgeVector, LaplacianMatrix, devectorize, dim_from_edges
from lapinfer.inference import NetworkGroup


def random_weights(rng, d, low=0.1, high=1.0):
    """Symmetric positive weights with a zero diagonal."""
    w = np.triu(rng.uniform(low, high, size=(d, d)), k=1)
    return w + w.T


def laplacian_of(weights):
    weights = np.asarray(weights, dtype=float)
    return LaplacianMatrix(np.diag(weights.sum(axis=1)) - weights)


def group_from_vectors(label, vectors):
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    d = dim_from_edges(vectors.shape[1])
    return NetworkGroup(label, tuple(devectorize(EdgeVector(d, v)) for v in vectors))


def edge_group(label, mean_edges, n, rng, scale=1.0):
    """Group whose edge vectors are iid N(mean_edges, scale^2 I)."""
    mean_edges = np.asarray(mean_edges, dtype=float)
    draws = mean_edges + scale * rng.standard_normal((n, mean_edges.size))
    return group_from_vectors(label, draws)
