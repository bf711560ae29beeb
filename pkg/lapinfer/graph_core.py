# lapinfer/graph_core.py
"""
Graph Laplacians as points of a Euclidean space.

This module builds weighted combinatorial Laplacians from association matrices,
maps them to edge-vector coordinates, and provides the Frobenius geometry,
Fréchet means and space-membership diagnostics the tests are built on.

Edge vectors hold the strictly-lower-triangular entries of a Laplacian in
row-major order, i.e. the pairs (1,0), (2,0), (2,1), (3,0), ... for 0-based
vertex indices. The diagonal is never stored; it is recovered from the
zero row-sum property.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from lapinfer.errors import DimensionError, ensure

logger = logging.getLogger(__name__)

TOL_REL = 1e-8
TOL_EIG = 1e-10


def scaled_tolerance(entries: np.ndarray) -> float:
    """Absolute tolerance 1e-8 * max(1, max|entry|) used for symmetry and row sums."""
    peak = float(np.max(np.abs(entries))) if entries.size else 0.0
    return TOL_REL * max(1.0, peak)


def _as_square(entries, name: str) -> np.ndarray:
    array = np.array(entries, dtype=float)
    ensure(
        f"{name} must be a square 2-D matrix, got shape {array.shape}",
        array.ndim == 2 and array.shape[0] == array.shape[1] and array.shape[0] > 0,
        DimensionError,
    )
    ensure(f"{name} has non-finite entries", bool(np.all(np.isfinite(array))))
    return array


def _check_symmetric(array: np.ndarray, name: str) -> None:
    asymmetry = float(np.max(np.abs(array - array.T)))
    ensure(
        f"{name} is not symmetric (max |s_ab - s_ba| = {asymmetry:.3e})",
        asymmetry <= scaled_tolerance(array),
    )


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _degrees(weights: np.ndarray) -> np.ndarray:
    # Summing sorted rows makes the result independent of vertex order.
    return np.sort(weights, axis=1).sum(axis=1)


@dataclass(frozen=True, eq=False)
class AssociationMatrix:
    """Symmetric d x d matrix of pairwise association weights for one subject."""

    entries: np.ndarray

    def __post_init__(self):
        array = _as_square(self.entries, "association matrix")
        _check_symmetric(array, "association matrix")
        object.__setattr__(self, "entries", _frozen(array))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class LaplacianMatrix:
    """Weighted combinatorial Laplacian L = D(W) - W."""

    entries: np.ndarray

    def __post_init__(self):
        array = _as_square(self.entries, "Laplacian")
        _check_symmetric(array, "Laplacian")
        row_sums = np.abs(array.sum(axis=1))
        ensure(
            f"Laplacian rows must sum to zero (max |row sum| = {row_sums.max():.3e})",
            float(row_sums.max()) <= scaled_tolerance(array),
        )
        object.__setattr__(self, "entries", _frozen(array))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def scaled(self, factor: float) -> "LaplacianMatrix":
        return LaplacianMatrix(self.entries * factor)

    def permuted(self, order: Sequence[int]) -> "LaplacianMatrix":
        """Relabel vertices so that new vertex i is old vertex order[i]."""
        index = np.asarray(order)
        return LaplacianMatrix(self.entries[np.ix_(index, index)])


@dataclass(frozen=True, eq=False)
class EdgeVector:
    """Edge coordinates of a d-vertex Laplacian, length m = d(d-1)/2."""

    dim: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        ensure(
            f"edge vector for d={self.dim} needs {edge_count(self.dim)} entries, got {values.size}",
            values.size == edge_count(self.dim),
            DimensionError,
        )
        object.__setattr__(self, "values", _frozen(values))

    @property
    def size(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SpaceDiagnostic:
    """Rank, component and sign diagnostics of a Laplacian-like matrix."""

    rank: int
    n_components: int
    psd: bool
    row_sums_ok: bool
    offdiag_sign: str
    in_L_d: bool
    in_L_d_prime: bool
    stratum_dim: int


def edge_count(d: int) -> int:
    """Number of vertex pairs m = d(d-1)/2."""
    return d * (d - 1) // 2


def dim_from_edges(m: int) -> int:
    """Invert m = d(d-1)/2; raise DimensionError when m is not triangular."""
    d = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    ensure(f"{m} is not a valid edge-vector length", edge_count(d) == m and d >= 1, DimensionError)
    return d


def edge_index(d: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column indices (i > j, row-major) of the edge coordinates."""
    return np.tril_indices(d, k=-1)


def laplacian_from_association(S: AssociationMatrix) -> LaplacianMatrix:
    """
    Build L = D(S) - S with [D]_aa = sum_b s_ab.

    Self-weights cancel, so the diagonal of L is sum_{b != a} s_ab.

    Args:
        S: Subject association matrix.

    Returns:
        The weighted combinatorial Laplacian.
    """
    weights = S.entries.copy()
    np.fill_diagonal(weights, 0.0)
    laplacian = -weights
    np.fill_diagonal(laplacian, _degrees(weights))
    return LaplacianMatrix(laplacian)


def vectorize(L: LaplacianMatrix) -> EdgeVector:
    """Strictly-lower-triangular entries of L in row-major order."""
    rows, cols = edge_index(L.dim)
    return EdgeVector(L.dim, L.entries[rows, cols])


def devectorize(v: EdgeVector) -> LaplacianMatrix:
    """Rebuild the Laplacian whose off-diagonal entries are v; diagonal from zero row sums."""
    rows, cols = edge_index(v.dim)
    off = np.zeros((v.dim, v.dim))
    off[rows, cols] = v.values
    off[cols, rows] = v.values
    laplacian = off.copy()
    np.fill_diagonal(laplacian, _degrees(-off))
    return LaplacianMatrix(laplacian)


def stack_vectors(sample: Sequence[LaplacianMatrix]) -> np.ndarray:
    """Edge vectors of a sample as the rows of an (n, m) array."""
    ensure("sample must not be empty", len(sample) > 0)
    d = _common_dim(sample)
    rows, cols = edge_index(d)
    return np.stack([L.entries[rows, cols] for L in sample])


def _common_dim(sample: Sequence[LaplacianMatrix]) -> int:
    dims = {L.dim for L in sample}
    ensure(f"sample mixes dimensions {sorted(dims)}", len(dims) == 1, DimensionError)
    return dims.pop()


def frobenius_distance(X: LaplacianMatrix, Y: LaplacianMatrix) -> float:
    """
    Squared Frobenius distance sum_ij (x_ij - y_ij)^2.

    The square root, a proper metric, is available as ``frobenius_metric``.
    """
    ensure(f"dimension mismatch: {X.dim} vs {Y.dim}", X.dim == Y.dim, DimensionError)
    diff = X.entries - Y.entries
    return float(np.sum(diff * diff))


def frobenius_metric(X: LaplacianMatrix, Y: LaplacianMatrix) -> float:
    """
    Euclidean distance between two Laplacians.

    Args:
        X: First Laplacian.
        Y: Second Laplacian of the same dimension.

    Returns:
        The Frobenius norm of X - Y.
    """
    return float(np.sqrt(frobenius_distance(X, Y)))


def frechet_mean(sample: Sequence[LaplacianMatrix]) -> LaplacianMatrix:
    """
    Sample Fréchet mean under the Frobenius metric, i.e. the entrywise average.

    Args:
        sample: Non-empty list of Laplacians of equal dimension.

    Returns:
        The mean Laplacian.
    """
    ensure("cannot average an empty sample", len(sample) > 0)
    _common_dim(sample)
    return LaplacianMatrix(np.mean(np.stack([L.entries for L in sample]), axis=0))


def _offdiag_sign(entries: np.ndarray, tol: float) -> str:
    mask = ~np.eye(entries.shape[0], dtype=bool)
    off = entries[mask]
    if off.size == 0 or np.all(off < -tol):
        return "strictly-negative"
    if np.all(off <= tol):
        return "non-positive"
    return "mixed"


def space_membership(
    L: Union[LaplacianMatrix, np.ndarray], tol_eig: float = TOL_EIG
) -> SpaceDiagnostic:
    """
    Check the defining conditions of the Laplacian spaces L_d and L'_d.

    Rank counts eigenvalues above tol_eig * lambda_max; the number of connected
    components is d - rank. Plain symmetric arrays are accepted so that
    matrices with non-zero row sums can be diagnosed too.
    """
    if isinstance(L, LaplacianMatrix):
        entries = L.entries
    else:
        entries = _as_square(L, "matrix")
        _check_symmetric(entries, "matrix")
    d = entries.shape[0]
    eigenvalues = np.linalg.eigvalsh(entries)
    lam_max = float(eigenvalues.max())
    threshold = tol_eig * lam_max if lam_max > 0 else 0.0
    rank = int(np.sum(eigenvalues > threshold)) if lam_max > 0 else 0
    psd = bool(eigenvalues.min() >= -threshold)
    tol = scaled_tolerance(entries)
    row_sums_ok = bool(np.max(np.abs(entries.sum(axis=1))) <= tol)
    sign = _offdiag_sign(entries, tol)
    laplacian_like = psd and row_sums_ok
    in_L_d = laplacian_like and rank == d - 1 and sign == "strictly-negative"
    in_L_d_prime = laplacian_like and sign in ("strictly-negative", "non-positive")
    return SpaceDiagnostic(
        rank=rank,
        n_components=d - rank,
        psd=psd,
        row_sums_ok=row_sums_ok,
        offdiag_sign=sign,
        in_L_d=in_L_d,
        in_L_d_prime=in_L_d_prime,
        stratum_dim=d * rank - rank * (rank + 1) // 2,
    )


def n_components(L: LaplacianMatrix, tol_eig: float = TOL_EIG) -> int:
    """
    Number of connected components of the graph behind L.

    Args:
        L: Laplacian.
        tol_eig: Eigenvalues at or below tol_eig * lambda_max count as zero.

    Returns:
        The multiplicity of the zero eigenvalue.
    """
    return space_membership(L, tol_eig).n_components


def component_monotonicity_check(L1: LaplacianMatrix, L2: LaplacianMatrix) -> bool:
    """
    True iff averaging L1 and L2 does not increase the number of components.

    Both inputs must have non-positive off-diagonal entries.
    """
    ensure(f"dimension mismatch: {L1.dim} vs {L2.dim}", L1.dim == L2.dim, DimensionError)
    for name, L in (("L1", L1), ("L2", L2)):
        ensure(
            f"{name} has positive off-diagonal entries",
            _offdiag_sign(L.entries, scaled_tolerance(L.entries)) != "mixed",
        )
    merged = n_components(frechet_mean([L1, L2]))
    return merged <= min(n_components(L1), n_components(L2))


def binarize_percentile(sample: Sequence[LaplacianMatrix], q: float) -> List[np.ndarray]:
    """
    Threshold every matrix at the q-th percentile of all pooled entries.

    The percentile uses linear interpolation between order statistics.

    Args:
        sample: Non-empty list of Laplacians.
        q: Percentile in [0, 100].

    Returns:
        Boolean masks, true where the entry is at or above the threshold.
    """
    ensure("cannot binarize an empty sample", len(sample) > 0)
    ensure(f"percentile must lie in [0, 100], got {q}", 0.0 <= q <= 100.0)
    pooled = np.concatenate([L.entries.ravel() for L in sample])
    threshold = np.percentile(pooled, q, method="linear")
    logger.debug("binarizing %d matrices at q=%s (threshold %.6g)", len(sample), q, threshold)
    return [L.entries >= threshold for L in sample]

