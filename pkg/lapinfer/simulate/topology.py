# lapinfer/simulate/topology.py
"""
Population networks for the synthetic studies.

Adjacency matrices come from one of two models: a two-block random graph and
a rewired ring lattice (small world). A population covariance is drawn
around an adjacency matrix, and the population mean Laplacian of the
covariance association is D(Sigma) - Sigma.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import networkx as nx
import numpy as np

from lapinfer.cov_est import CovEstimate, nearest_pd
from lapinfer.errors import ensure
from lapinfer.graph_core import (
    AssociationMatrix,
    LaplacianMatrix,
    laplacian_from_association,
)
from lapinfer.simulate.rng import SeedLike, as_generator, child_seed

logger = logging.getLogger(__name__)

TOPOLOGY_KINDS = ("block_diagonal", "small_world")
DIAGONAL_KINDS = ("dominant", "exponential")
DEFAULT_REWIRE_BETA = 0.1


@dataclass(frozen=True)
class TopologySpec:
    """Which adjacency model to draw and with which parameters."""

    kind: str = "block_diagonal"
    d: int = 10
    rewire_beta: float = DEFAULT_REWIRE_BETA
    seed: int = 0
    ring_degree: Optional[int] = None

    def __post_init__(self):
        ensure(f"topology kind must be one of {TOPOLOGY_KINDS}, got {self.kind!r}", self.kind in TOPOLOGY_KINDS)
        ensure(f"topology needs d >= 4, got {self.d}", self.d >= 4)
        ensure(f"rewire_beta must lie in [0, 1], got {self.rewire_beta}", 0.0 <= self.rewire_beta <= 1.0)

    def generate(self, seed: Optional[SeedLike] = None) -> np.ndarray:
        rng = self.seed if seed is None else seed
        if self.kind == "block_diagonal":
            return gen_block_adjacency(self.d, rng)
        return gen_smallworld_adjacency(self.d, rng, self.rewire_beta, ring_degree=self.ring_degree)


@dataclass(frozen=True)
class MixtureParams:
    """
    Law of the population covariance.

    An off-diagonal entry is |N(mu1, sigma2)| where the adjacency has an edge
    and |N(mu2, sigma2)| elsewhere. Each variance is an exponential draw with
    rate ``lambda_exp``, added to the row's off-diagonal sum when
    ``diagonal`` is ``"dominant"``.
    """

    lambda_exp: float = 4.0
    mu1: float = 1.0
    mu2: float = 0.0
    sigma2: float = 0.2
    diagonal: str = "dominant"

    def __post_init__(self):
        ensure(
            f"diagonal must be one of {DIAGONAL_KINDS}, got {self.diagonal!r}",
            self.diagonal in DIAGONAL_KINDS,
        )
        ensure(f"lambda_exp must be positive, got {self.lambda_exp}", self.lambda_exp > 0)
        ensure(f"sigma2 must be positive, got {self.sigma2}", self.sigma2 > 0)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def block_sizes(d: int):
    """Sizes of the two blocks, the first taking the odd vertex."""
    return (d + 1) // 2, d // 2


def expected_block_edges(d: int) -> float:
    """Expected edge count of ``gen_block_adjacency`` for d vertices."""
    big, small = block_sizes(d)
    p_within, p_across = 4.0 / d, 1.0 / (2 * d)
    pairs_within = big * (big - 1) / 2 + small * (small - 1) / 2
    return p_within * pairs_within + p_across * big * small


def ring_degree_for(d: int) -> int:
    """Even ring degree giving about as many edges as the block model."""
    target = _round_half_up(expected_block_edges(d))
    k = 2 * _round_half_up(target / d)
    largest = d - 1 if (d - 1) % 2 == 0 else d - 2
    return int(min(max(k, 2), largest))


def _check_adjacency(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    ensure(f"adjacency must be square, got shape {A.shape}", A.ndim == 2 and A.shape[0] == A.shape[1])
    ensure("adjacency must be binary", bool(np.all((A == 0) | (A == 1))))
    ensure("adjacency must be symmetric", bool(np.array_equal(A, A.T)))
    ensure("adjacency must have a zero diagonal", not np.any(np.diag(A)))
    return A.astype(np.int8)


def gen_block_adjacency(d: int, seed: SeedLike) -> np.ndarray:
    """
    Two-block random graph.

    Vertices split into blocks of sizes ceil(d/2) and floor(d/2). Pairs within
    a block are joined with probability 4/d, pairs across blocks with 1/(2d).
    """
    ensure(f"block model needs d >= 4, got {d}", d >= 4)
    rng = as_generator(seed)
    big, _ = block_sizes(d)
    block = np.arange(d) >= big
    same = block[:, None] == block[None, :]
    prob = np.where(same, 4.0 / d, 1.0 / (2 * d))
    draws = rng.random((d, d)) < prob
    upper = np.triu(draws, k=1)
    A = (upper | upper.T).astype(np.int8)
    logger.debug("block adjacency d=%d with %d edges", d, int(A.sum()) // 2)
    return A


def gen_smallworld_adjacency(
    d: int, seed: SeedLike, rewire_beta: float = DEFAULT_REWIRE_BETA, ring_degree: Optional[int] = None
) -> np.ndarray:
    """
    Watts-Strogatz graph: a ring lattice whose edges are rewired with probability beta.

    Args:
        d: Number of vertices, at least 4.
        seed: Integer seed or generator.
        rewire_beta: Per-edge rewiring probability.
        ring_degree: Even lattice degree; defaults to ``ring_degree_for(d)``.

    Returns:
        Binary symmetric adjacency with zero diagonal.
    """
    ensure(f"small-world model needs d >= 4, got {d}", d >= 4)
    ensure(f"rewire_beta must lie in [0, 1], got {rewire_beta}", 0.0 <= rewire_beta <= 1.0)
    k = ring_degree_for(d) if ring_degree is None else int(ring_degree)
    ensure(f"ring degree must be even and in [2, {d - 1}], got {k}", k % 2 == 0 and 2 <= k < d)
    graph = nx.watts_strogatz_graph(d, k, rewire_beta, seed=child_seed(as_generator(seed)))
    A = nx.to_numpy_array(graph, nodelist=range(d), dtype=np.int8)
    logger.debug("small-world adjacency d=%d k=%d beta=%s", d, k, rewire_beta)
    return A


def rewire(A: np.ndarray, r: int, seed: SeedLike) -> np.ndarray:
    """
    Move r distinct edges to r distinct vacant vertex pairs, uniformly at random.

    Raises:
        ValidationError: r exceeds the number of edges or of vacant pairs.
    """
    A = _check_adjacency(A)
    ensure(f"rewire count must be non-negative, got {r}", r >= 0)
    if r == 0:
        return A.copy()
    rng = as_generator(seed)
    rows, cols = np.triu_indices(A.shape[0], k=1)
    present = A[rows, cols] == 1
    edges = np.flatnonzero(present)
    vacant = np.flatnonzero(~present)
    ensure(f"cannot rewire {r} of {edges.size} edges", r <= edges.size)
    ensure(f"cannot rewire {r} edges into {vacant.size} vacant pairs", r <= vacant.size)
    removed = rng.choice(edges, size=r, replace=False)
    added = rng.choice(vacant, size=r, replace=False)
    out = A.copy()
    out[rows[removed], cols[removed]] = 0
    out[cols[removed], rows[removed]] = 0
    out[rows[added], cols[added]] = 1
    out[cols[added], rows[added]] = 1
    return out


def default_effect_ladder(A: np.ndarray, fraction: float = 0.25) -> List[int]:
    """Rewire counts 0, 1, 2, 4, ... up to ``fraction`` of the edge count."""
    A = _check_adjacency(A)
    n_edges = int(A.sum()) // 2
    d = A.shape[0]
    vacancies = d * (d - 1) // 2 - n_edges
    cap = min(int(math.floor(fraction * n_edges)), vacancies)
    ladder = [0]
    step = 1
    while step <= cap:
        ladder.append(step)
        step *= 2
    return ladder


def build_sigma_from_topology(A: np.ndarray, params: MixtureParams, seed: SeedLike) -> np.ndarray:
    """
    Population covariance drawn around an adjacency matrix, projected to PD.

    With ``diagonal="dominant"`` each variance is its exponential draw plus
    the row's off-diagonal sum. The matrix is then strictly diagonally
    dominant and the projection leaves it unchanged. With
    ``"exponential"`` the raw draws are projected, which for the default
    parameters leaves a nearly singular matrix.

    The diagonal and the standard-normal draws behind the off-diagonal entries
    are taken from the stream in the same order for every A. Two adjacency
    matrices built from the same seed therefore give off-diagonal entries
    that differ only where A differs; under ``"dominant"`` the variances
    differ only at the endpoints of those pairs.

    Args:
        A: Binary symmetric adjacency.
        params: Mixture law of the entries.
        seed: Integer seed or generator.

    Returns:
        A d x d positive-definite matrix.
    """
    A = _check_adjacency(A)
    d = A.shape[0]
    rng = as_generator(seed)
    diagonal = rng.exponential(1.0 / params.lambda_exp, size=d)
    noise = rng.standard_normal((d, d))
    means = np.where(A == 1, params.mu1, params.mu2)
    off = np.abs(means + math.sqrt(params.sigma2) * noise)
    upper = np.triu(off, k=1)
    sigma = upper + upper.T
    if params.diagonal == "dominant":
        diagonal = diagonal + sigma.sum(axis=1)
    np.fill_diagonal(sigma, diagonal)
    projected = nearest_pd(CovEstimate(sigma, estimator="population"), on_nonconvergence="warn")
    return np.array(projected.matrix)


def population_laplacian(sigma: np.ndarray) -> LaplacianMatrix:
    """Mean Laplacian D(Sigma) - Sigma of the covariance association."""
    return laplacian_from_association(AssociationMatrix(sigma))
