# lapinfer/cov_est.py
"""
Covariance estimation for samples of edge vectors.

The estimators here feed the quadratic forms of the network tests:

* ``sample_cov``: textbook covariance with denominator n or n-1.
* ``cai_liu_threshold``: entrywise adaptive thresholding of the n-denominator
  covariance, keeping an off-diagonal entry only when it exceeds its own
  noise level.
* ``nearest_pd``: alternating projections with Dykstra's correction between
  the PSD cone and the unit-diagonal set in correlation scale, followed by an
  eigenvalue floor.
* ``pooled_cov`` and ``within_group_cov``: combinations across groups.
* ``solve_spd``: Cholesky solves for the test statistics.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from lapinfer.errors import (
    ConvergenceError,
    DimensionError,
    NumericalError,
    ensure,
)
from lapinfer.graph_core import LaplacianMatrix, scaled_tolerance, stack_vectors

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 2.0
PD_TOL = 1e-7
PD_MAX_ITER = 200
PD_FLOOR_REL = 1e-8
# smallest eigenvalue, relative to the largest, still treated as zero
PSD_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class CovEstimate:
    """An m x m covariance estimate and how it was produced."""

    matrix: np.ndarray
    estimator: str = "sample"
    delta: float = 0.0
    pd_projected: bool = False
    pd_floor: float = 0.0
    pd_iterations: int = 0
    pd_converged: bool = True
    denominator: str = "n-1"
    pooling: Optional[str] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        ensure(
            f"covariance must be square, got shape {matrix.shape}",
            matrix.ndim == 2 and matrix.shape[0] == matrix.shape[1],
            DimensionError,
        )
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def meta(self) -> Dict[str, Any]:
        """Provenance recorded in every report that consumes this estimate."""
        return {
            "kind": self.estimator,
            "delta": self.delta,
            "denominator": self.denominator,
            "pd_projected": self.pd_projected,
            "pd_floor": self.pd_floor,
            "pd_iterations": self.pd_iterations,
            "pd_converged": self.pd_converged,
            "pooling": self.pooling,
        }


@dataclass(frozen=True, eq=False)
class VectorSample:
    """n edge vectors stacked as rows."""

    rows: np.ndarray
    mean: np.ndarray = field(init=False)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        ensure(
            f"vector sample must be a 2-D (n, m) array, got shape {rows.shape}",
            rows.ndim == 2,
            DimensionError,
        )
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "mean", rows.mean(axis=0))

    @classmethod
    def from_laplacians(cls, laplacians: Sequence[LaplacianMatrix]) -> "VectorSample":
        return cls(stack_vectors(laplacians))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def centered(self, center: Optional[np.ndarray] = None) -> np.ndarray:
        if center is None:
            return self.rows - self.mean
        center = np.asarray(center, dtype=float)
        ensure(
            f"center has length {center.size}, sample dimension is {self.dim}",
            center.shape == (self.dim,),
            DimensionError,
        )
        return self.rows - center


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def sample_cov(
    sample: VectorSample, denominator: str = "n-1", center: Optional[np.ndarray] = None
) -> CovEstimate:
    """
    Sample covariance of the rows.

    Args:
        sample: At least two edge vectors.
        denominator: ``"n-1"`` for the unbiased estimate, ``"n"`` for Sigma*.
        center: Vector to center at; defaults to the sample mean.

    Returns:
        A ``sample`` CovEstimate.
    """
    ensure(f"covariance needs n >= 2, got n={sample.n}", sample.n >= 2)
    ensure(f"denominator must be 'n' or 'n-1', got {denominator!r}", denominator in ("n", "n-1"))
    scale = sample.n - 1 if denominator == "n-1" else sample.n
    centered = sample.centered(center)
    matrix = _symmetrize(centered.T @ centered) / scale
    return CovEstimate(matrix, estimator="sample", denominator=denominator)


def cai_liu_threshold(
    sample: VectorSample, delta: float = DEFAULT_DELTA, center: Optional[np.ndarray] = None
) -> CovEstimate:
    """
    Adaptive entrywise thresholding of Sigma* = (n-1)/n * Sigma_hat.

    Off-diagonal entry ij is kept iff |sigma*_ij| >= lambda_ij with
    lambda_ij = delta * sqrt(theta_ij * log(m) / n) and theta_ij the empirical
    variance of the centered cross-products about sigma*_ij. The diagonal is
    never thresholded.

    Args:
        sample: At least two edge vectors.
        delta: Threshold scale, non-negative.
        center: Vector to center at; defaults to the sample mean.

    Returns:
        A ``thresholded`` CovEstimate with denominator n.
    """
    ensure(f"covariance needs n >= 2, got n={sample.n}", sample.n >= 2)
    ensure(f"delta must be non-negative, got {delta}", delta >= 0)
    n, m = sample.n, sample.dim
    centered = sample.centered(center)
    sigma_star = _symmetrize(centered.T @ centered) / n
    squared = centered * centered
    # mean((x_i x_j - s)^2) = mean((x_i x_j)^2) - s^2 because s = mean(x_i x_j)
    fourth = _symmetrize(squared.T @ squared) / n
    theta = np.maximum(fourth - sigma_star * sigma_star, 0.0)
    lam = delta * np.sqrt(theta * np.log(m) / n)
    keep = np.abs(sigma_star) >= lam
    np.fill_diagonal(keep, True)
    thresholded = np.where(keep, sigma_star, 0.0)
    logger.debug(
        "thresholding kept %d of %d off-diagonal entries (delta=%s)",
        int(keep.sum()) - m, m * (m - 1), delta,
    )
    return CovEstimate(thresholded, estimator="thresholded", delta=float(delta), denominator="n")


def _clip_psd(matrix: np.ndarray, floor: float = 0.0) -> np.ndarray:
    w, v = np.linalg.eigh(matrix)
    w = np.maximum(w, floor)
    return _symmetrize((v * w) @ v.T)


def _relative_floor(eigenvalues: np.ndarray, floor_rel: float) -> float:
    lambda_max = float(eigenvalues.max()) if eigenvalues.size else 0.0
    # a zero matrix has no scale of its own
    return floor_rel * (lambda_max if lambda_max > 0 else 1.0)


def _floor_eigenvalues(matrix: np.ndarray, tau: float) -> np.ndarray:
    projected = _clip_psd(matrix, floor=tau)
    # eigh round-off can leave the smallest eigenvalue marginally under tau
    shortfall = tau - float(np.linalg.eigvalsh(projected).min())
    if shortfall > 0:
        projected = projected + shortfall * np.eye(projected.shape[0])
    return projected


def nearest_pd(
    C: CovEstimate,
    tol: float = PD_TOL,
    max_iter: int = PD_MAX_ITER,
    floor_rel: float = PD_FLOOR_REL,
    on_nonconvergence: str = "raise",
) -> CovEstimate:
    """
    Project a symmetric estimate to a close positive-definite matrix.

    Uses alternating projections with Dykstra's correction between the PSD
    cone and the set of matrices with the input's diagonal, carried out in
    correlation scale, then rescales and floors the eigenvalues at
    tau = floor_rel * lambda_max. The floor is relative so that projecting
    c * C gives c times the projection of C.

    An input that is already PSD up to round-off (lambda_min no lower than
    -PSD_SLACK * lambda_max) skips the iteration and only gets the floor.

    Args:
        C: Symmetric estimate.
        tol: Relative change between iterates that stops the iteration.
        max_iter: Iteration budget.
        floor_rel: Relative eigenvalue floor.
        on_nonconvergence: ``"raise"`` a ConvergenceError or ``"warn"`` and
            keep the floored last iterate.

    Returns:
        The projected estimate, ``pd_projected`` set.
    """
    ensure(
        f"on_nonconvergence must be 'raise' or 'warn', got {on_nonconvergence!r}",
        on_nonconvergence in ("raise", "warn"),
    )
    matrix = np.array(C.matrix, dtype=float)
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    ensure(
        f"nearest_pd needs a symmetric input (asymmetry {asymmetry:.3e})",
        asymmetry <= scaled_tolerance(matrix),
    )
    matrix = _symmetrize(matrix)
    eigenvalues = np.linalg.eigvalsh(matrix)
    tau = _relative_floor(eigenvalues, floor_rel)
    if eigenvalues.min() >= tau:
        return replace(C, matrix=matrix, pd_projected=True, pd_floor=tau, pd_iterations=0)
    if eigenvalues.min() >= -PSD_SLACK * max(float(eigenvalues.max()), 0.0):
        return replace(
            C, matrix=_floor_eigenvalues(matrix, tau), pd_projected=True, pd_floor=tau, pd_iterations=0,
        )

    diag = np.diag(matrix).copy()
    good = diag > 0
    scale = np.where(good, np.sqrt(np.where(good, diag, 1.0)), 1.0)
    corr = matrix / np.outer(scale, scale)
    # variables with non-positive variance are decoupled and given unit variance
    corr[~good, :] = 0.0
    corr[:, ~good] = 0.0
    corr[~good, ~good] = 1.0
    target_diag = np.diag(corr).copy()

    y = corr.copy()
    correction = np.zeros_like(corr)
    converged = False
    gap = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        y_prev = y
        r = y - correction
        x = _clip_psd(r)
        correction = x - r
        y = x.copy()
        np.fill_diagonal(y, target_diag)
        norm_y = max(np.linalg.norm(y), 1.0)
        gap = max(
            np.linalg.norm(y - y_prev) / norm_y,
            np.linalg.norm(y - x) / norm_y,
        )
        if gap < tol:
            converged = True
            break

    if not converged:
        if on_nonconvergence == "raise":
            raise ConvergenceError("nearest_pd did not converge", gap, iterations)
        logger.warning(
            "nearest_pd stopped after %d iterations with gap %.3e; applying eigenvalue floor",
            iterations, gap,
        )
    else:
        logger.debug("nearest_pd converged in %d iterations (gap %.3e)", iterations, gap)

    restored = y * np.outer(scale, scale)
    restored[~good, :] = 0.0
    restored[:, ~good] = 0.0
    restored[~good, ~good] = np.where(diag[~good] > 0, diag[~good], tau)
    tau = _relative_floor(np.linalg.eigvalsh(restored), floor_rel)
    projected = _floor_eigenvalues(restored, tau)
    return replace(
        C,
        matrix=projected,
        pd_projected=True,
        pd_floor=tau,
        pd_iterations=iterations,
        pd_converged=converged,
    )


def pooled_cov(groups: Sequence[Tuple[CovEstimate, int]], mode: str) -> CovEstimate:
    """
    Pooled covariance sum_j Sigma_j / n_j.

    Both modes share the formula; ``mode`` records which statistic it feeds.

    Args:
        groups: Pairs of (group covariance, group size n_j >= 2).
        mode: ``"k_sample"`` or ``"two_sample"``.
    """
    ensure(f"unknown pooling mode {mode!r}", mode in ("k_sample", "two_sample"))
    ensure("pooling needs at least one group", len(groups) > 0)
    dims = {cov.dim for cov, _ in groups}
    ensure(f"pooled covariances differ in dimension: {sorted(dims)}", len(dims) == 1, DimensionError)
    for _, n_j in groups:
        ensure(f"group size must be >= 2, got {n_j}", n_j >= 2)
    weights = [1.0 / n_j for _, n_j in groups]
    return _combine(groups, weights, mode)


def within_group_cov(groups: Sequence[Tuple[CovEstimate, int]]) -> CovEstimate:
    """
    Size-weighted average sum_j n_j Sigma_j / n of per-observation covariances.

    Args:
        groups: Pairs of (group covariance, group size n_j).

    Returns:
        The average, ``pooling`` set to ``"within"``.
    """
    ensure("pooling needs at least one group", len(groups) > 0)
    dims = {cov.dim for cov, _ in groups}
    ensure(f"pooled covariances differ in dimension: {sorted(dims)}", len(dims) == 1, DimensionError)
    n = sum(n_j for _, n_j in groups)
    weights = [n_j / n for _, n_j in groups]
    return _combine(groups, weights, "within")


def _combine(groups: Sequence[Tuple[CovEstimate, int]], weights: Sequence[float], pooling: str) -> CovEstimate:
    covs = [cov for cov, _ in groups]
    total = sum(w * cov.matrix for w, cov in zip(weights, covs))
    projected = all(cov.pd_projected for cov in covs)
    # Weyl: a positive combination of floored matrices keeps the combined floor
    floor = sum(w * cov.pd_floor for w, cov in zip(weights, covs)) if projected else 0.0
    return replace(
        covs[0],
        matrix=total,
        pooling=pooling,
        pd_projected=projected,
        pd_floor=floor,
        pd_iterations=max(cov.pd_iterations for cov in covs),
        pd_converged=all(cov.pd_converged for cov in covs),
    )


def solve_spd(C: CovEstimate, b: np.ndarray) -> np.ndarray:
    """
    Solve C x = b by Cholesky factorization.

    One step of iterative refinement is taken when the relative residual
    exceeds 1e-10.

    Raises:
        NumericalError: C is not positive definite; project it first.
    """
    b = np.asarray(b, dtype=float)
    ensure(f"right-hand side has length {b.size}, matrix is {C.dim}x{C.dim}", b.shape == (C.dim,), DimensionError)
    ensure("right-hand side has non-finite entries", bool(np.all(np.isfinite(b))))
    try:
        factor = linalg.cho_factor(C.matrix, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"covariance is not positive definite: {exc}") from exc
    x = linalg.cho_solve(factor, b)
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0:
        return x
    residual = C.matrix @ x - b
    if np.linalg.norm(residual) / norm_b > 1e-10:
        x = x - linalg.cho_solve(factor, residual)
        relative = float(np.linalg.norm(C.matrix @ x - b)) / norm_b
        if relative > 1e-8:
            logger.warning("SPD solve relative residual %.3e exceeds 1e-8", relative)
    return x


def quadratic_form(C: CovEstimate, v: np.ndarray) -> float:
    """v' C^{-1} v via ``solve_spd``, clipped at zero."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return 0.0
    return max(float(v @ solve_spd(C, v)), 0.0)
