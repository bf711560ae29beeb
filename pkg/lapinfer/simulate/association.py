# lapinfer/simulate/association.py
"""Association matrices of one subject's (T, d) series."""

import logging
from typing import List

import numpy as np

from lapinfer.errors import ensure
from lapinfer.graph_core import AssociationMatrix, LaplacianMatrix, laplacian_from_association

logger = logging.getLogger(__name__)

ASSOCIATION_KINDS = ("covariance", "mutual_information")
DEFAULT_BINS = 10


def _as_series(series: np.ndarray) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    ensure(f"series must be a (T, d) array, got shape {series.shape}", series.ndim == 2)
    ensure(f"series need T >= 2, got T={series.shape[0]}", series.shape[0] >= 2)
    return series


def association_covariance(series: np.ndarray) -> AssociationMatrix:
    """Sample covariance over time, denominator T - 1."""
    series = _as_series(series)
    centered = series - series.mean(axis=0)
    cov = centered.T @ centered / (series.shape[0] - 1)
    return AssociationMatrix((cov + cov.T) / 2.0)


def _equal_width_codes(series: np.ndarray, bins: int) -> np.ndarray:
    lo = series.min(axis=0)
    width = series.max(axis=0) - lo
    # a constant column falls entirely into bin 0
    safe = np.where(width > 0, width, 1.0)
    codes = np.floor((series - lo) / safe * bins).astype(int)
    return np.clip(codes, 0, bins - 1)


def association_mutual_info(series: np.ndarray, bins: int = DEFAULT_BINS) -> AssociationMatrix:
    """
    Plug-in mutual information between every pair of coordinates.

    Each coordinate is cut into ``bins`` equal-width cells over its own range.
    Probabilities are cell frequencies, logs are natural and empty cells
    contribute nothing. The diagonal holds the marginal entropies, and a
    constant coordinate has zero information with every other one.

    Args:
        series: (T, d) array.
        bins: Number of cells per coordinate, at least 2.

    Returns:
        Symmetric non-negative AssociationMatrix.
    """
    ensure(f"mutual information needs bins >= 2, got {bins}", bins >= 2)
    series = _as_series(series)
    T, d = series.shape
    codes = _equal_width_codes(series, bins)
    onehot = np.zeros((T, d * bins))
    onehot[np.arange(T)[:, None], np.arange(d) * bins + codes] = 1.0
    joint = (onehot.T @ onehot / T).reshape(d, bins, d, bins)
    marginal = onehot.mean(axis=0).reshape(d, bins)
    expected = marginal[:, :, None, None] * marginal[None, None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log(joint / expected), 0.0)
    info = terms.sum(axis=(1, 3))
    info = np.maximum((info + info.T) / 2.0, 0.0)
    constant = np.ptp(series, axis=0) == 0
    info[constant, :] = 0.0
    info[:, constant] = 0.0
    return AssociationMatrix(info)


def subject_laplacians(series: np.ndarray, kind: str = "covariance", bins: int = DEFAULT_BINS) -> List[LaplacianMatrix]:
    """Laplacians of every subject in an (n, T, d) stack of series."""
    ensure(f"association must be one of {ASSOCIATION_KINDS}, got {kind!r}", kind in ASSOCIATION_KINDS)
    series = np.asarray(series, dtype=float)
    ensure(f"expected an (n, T, d) array, got shape {series.shape}", series.ndim == 3)
    if kind == "covariance":
        build = association_covariance
    else:
        def build(x):
            return association_mutual_info(x, bins)
    return [laplacian_from_association(build(subject)) for subject in series]
