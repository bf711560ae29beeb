# lapinfer/simulate/clt.py
"""
Empirical check of the central limit theorem for Laplacian means.

The covariance association of T Gaussian time points with covariance Sigma
is S ~ Wishart(T - 1, Sigma) / (T - 1). Its Laplacian has mean
Lambda = D(Sigma) - Sigma and its edge vector has covariance

    Cov(S_ab, S_cd) = (Sigma_ac Sigma_bd + Sigma_ad Sigma_bc) / (T - 1),

so the limit law of sqrt(n) (v(L_hat) - v(Lambda)) is known exactly and the
simulated means can be compared against it.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy import stats

from lapinfer.errors import ensure
from lapinfer.graph_core import edge_index, vectorize
from lapinfer.simulate.rng import SeedLike, Stage, as_generator, stream
from lapinfer.simulate.topology import (
    MixtureParams,
    TopologySpec,
    build_sigma_from_topology,
    population_laplacian,
)

logger = logging.getLogger(__name__)


class WishartLaplacianLaw:
    """Laplacians of scaled Wishart(T - 1, Sigma) association matrices."""

    def __init__(self, sigma: np.ndarray, T: int):
        sigma = np.asarray(sigma, dtype=float)
        ensure(f"Sigma must be square, got shape {sigma.shape}", sigma.ndim == 2 and sigma.shape[0] == sigma.shape[1])
        ensure(f"Wishart law needs T - 1 >= d, got T={T}, d={sigma.shape[0]}", T - 1 >= sigma.shape[0])
        self.sigma = sigma
        self.T = T
        self.d = sigma.shape[0]
        self._wishart = stats.wishart(df=T - 1, scale=sigma)

    @classmethod
    def from_topology(
        cls, topology: TopologySpec, T: int, params: MixtureParams = MixtureParams(), seed: int = 0
    ) -> "WishartLaplacianLaw":
        A = topology.generate(stream(seed, stage=Stage.TOPOLOGY))
        sigma = build_sigma_from_topology(A, params, stream(seed, stage=Stage.SIGMA))
        return cls(sigma, T)

    def mean_vector(self) -> np.ndarray:
        return vectorize(population_laplacian(self.sigma)).values

    def edge_covariance(self) -> np.ndarray:
        """Per-observation covariance of the edge vector."""
        rows, cols = edge_index(self.d)
        s = self.sigma
        cov = s[np.ix_(rows, rows)] * s[np.ix_(cols, cols)] + s[np.ix_(rows, cols)] * s[np.ix_(cols, rows)]
        return cov / (self.T - 1)

    def sample_vectors(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Edge vectors of n independent Laplacians, shape (n, m)."""
        draws = self._wishart.rvs(size=n, random_state=rng).reshape(n, self.d, self.d) / (self.T - 1)
        rows, cols = edge_index(self.d)
        # off-diagonal Laplacian entries are -S_ab
        return -draws[:, rows, cols]


@dataclass(frozen=True)
class CLTDiagnostic:
    """Agreement of simulated scaled means with their limit law."""

    d: int
    n: int
    reps: int
    rel_frobenius_error: float
    sandwich_rel_error: float
    max_abs_skewness: float
    skewness_band: float
    skewness_within_band: float
    max_abs_excess_kurtosis: float
    kurtosis_band: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def _rel_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    return float(np.linalg.norm(estimate - truth) / np.linalg.norm(truth))


def clt_diagnostic(law: WishartLaplacianLaw, n: int, reps: int, seed: SeedLike = 0) -> CLTDiagnostic:
    """
    Simulate ``reps`` sample means of n Laplacians and compare with the limit.

    Reports the relative Frobenius error between the empirical covariance of
    sqrt(n) (mean - Lambda) and the per-observation covariance, the same error
    for the sandwich (2I)^-1 V (2I)^-1 built from the gradients 2(Lambda - L)
    of the squared-distance objective, and marginal skewness and excess
    kurtosis with their 3-sigma normal-theory bands.

    Args:
        law: Population law of the Laplacians.
        n: Sample size of each mean.
        reps: Number of simulated means, at least 3.
        seed: Integer seed or generator.

    Returns:
        CLTDiagnostic.
    """
    ensure(f"n must be positive, got {n}", n >= 1)
    ensure(f"reps must be at least 3, got {reps}", reps >= 3)
    rng = as_generator(seed)
    mu = law.mean_vector()
    target = law.edge_covariance()
    scaled = np.empty((reps, mu.size))
    gradient_sum = np.zeros((mu.size, mu.size))
    n_gradients = 0
    for rep in range(reps):
        vectors = law.sample_vectors(n, rng)
        scaled[rep] = math.sqrt(n) * (vectors.mean(axis=0) - mu)
        gradients = 2.0 * (mu - vectors)
        gradient_sum += gradients.T @ gradients
        n_gradients += n
    empirical = np.cov(scaled, rowvar=False, ddof=1)
    # gradients have mean zero at Lambda, so V is their raw second moment
    sandwich = (gradient_sum / n_gradients) / 4.0
    skew = stats.skew(scaled, axis=0)
    kurt = stats.kurtosis(scaled, axis=0)
    skew_band = 3.0 * math.sqrt(6.0 / reps)
    kurt_band = 3.0 * math.sqrt(24.0 / reps)
    report = CLTDiagnostic(
        d=law.d,
        n=n,
        reps=reps,
        rel_frobenius_error=_rel_error(np.atleast_2d(empirical), target),
        sandwich_rel_error=_rel_error(sandwich, target),
        max_abs_skewness=float(np.max(np.abs(skew))),
        skewness_band=skew_band,
        skewness_within_band=float(np.mean(np.abs(skew) <= skew_band)),
        max_abs_excess_kurtosis=float(np.max(np.abs(kurt))),
        kurtosis_band=kurt_band,
    )
    logger.info(
        "CLT diagnostic d=%d n=%d reps=%d: covariance rel. error %.3f",
        law.d, n, reps, report.rel_frobenius_error,
    )
    return report


def default_clt_law(kind: str = "block_diagonal", d: int = 5, T: int = 50, seed: int = 0,
                    params: Optional[MixtureParams] = None) -> WishartLaplacianLaw:
    """Law built from a seeded topology, as used by the command line."""
    return WishartLaplacianLaw.from_topology(TopologySpec(kind=kind, d=d), T, params or MixtureParams(), seed)
