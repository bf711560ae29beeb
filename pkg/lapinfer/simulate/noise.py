# lapinfer/simulate/noise.py
"""
Multivariate time series for synthetic subjects.

Series are returned as arrays of shape (n subjects, T time points, d regions).
Both samplers draw the innovations the same way, Cholesky factor times
standard normals, so an AR(1) process with phi = 0 and zero drift reproduces
the Gaussian sampler exactly for the same seed.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import linalg, signal

from lapinfer.errors import NumericalError, ensure
from lapinfer.simulate.rng import SeedLike, as_generator

logger = logging.getLogger(__name__)

NOISE_KINDS = ("gaussian_iid", "ar1")

Drift = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model of the simulated series; ``alpha`` and ``phi`` only matter for ar1."""

    kind: str = "gaussian_iid"
    T: int = 200
    alpha: Drift = 0.0
    phi: float = 0.5

    def __post_init__(self):
        ensure(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}", self.kind in NOISE_KINDS)
        ensure(f"series need T >= 2, got {self.T}", self.T >= 2)
        if self.kind == "ar1":
            ensure(f"AR(1) needs |phi| < 1 for stationarity, got {self.phi}", abs(self.phi) < 1)

    def sample(self, sigma: np.ndarray, n: int, seed: SeedLike) -> np.ndarray:
        if self.kind == "gaussian_iid":
            return sample_gaussian_series(sigma, self.T, n, seed)
        return sample_ar_series(sigma, self.T, n, self.alpha, self.phi, seed)


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    ensure(
        f"Sigma must be a square matrix, got shape {sigma.shape}",
        sigma.ndim == 2 and sigma.shape[0] == sigma.shape[1],
    )
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Sigma is not positive definite; project it first ({exc})") from exc


def _innovations(sigma: np.ndarray, T: int, n: int, seed: SeedLike) -> np.ndarray:
    ensure(f"series need T >= 2, got {T}", T >= 2)
    ensure(f"need at least one subject, got n={n}", n >= 1)
    factor = _cholesky(sigma)
    rng = as_generator(seed)
    return rng.standard_normal((n, T, factor.shape[0])) @ factor.T


def sample_gaussian_series(sigma: np.ndarray, T: int, n: int, seed: SeedLike) -> np.ndarray:
    """n subjects of T iid N(0, Sigma) draws."""
    return _innovations(sigma, T, n, seed)


def sample_ar_series(
    sigma: np.ndarray, T: int, n: int, alpha: Drift, phi: float, seed: SeedLike
) -> np.ndarray:
    """
    Vector AR(1) series X_t = alpha + phi X_{t-1} + e_t with X_0 = alpha + e_0.

    Args:
        sigma: Innovation covariance, positive definite.
        T: Number of time points returned (t = 0 .. T-1), no burn-in.
        n: Number of subjects.
        alpha: Drift, scalar or length-d vector.
        phi: Autoregressive coefficient, |phi| < 1.
        seed: Integer seed or generator.

    Returns:
        Array of shape (n, T, d).
    """
    ensure(f"AR(1) needs |phi| < 1 for stationarity, got {phi}", abs(phi) < 1)
    eps = _innovations(sigma, T, n, seed)
    drift = np.asarray(alpha, dtype=float).reshape(-1)
    ensure(
        f"drift must be a scalar or have length {eps.shape[2]}, got {drift.size}",
        drift.size in (1, eps.shape[2]),
    )
    # lfilter from a zero state gives X_0 = u_0 and X_t = phi X_{t-1} + u_t
    return signal.lfilter([1.0], [1.0, -phi], eps + drift, axis=1)
