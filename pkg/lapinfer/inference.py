# lapinfer/inference.py
"""
Hypothesis tests on samples of graph Laplacians.

The tests compare Fréchet means of Laplacians through their edge vectors:

* ``test_one_sample``: T1 = n (v(L_hat) - v(Lambda0))' S^-1 (...), chi-square with m dof.
* ``test_two_sample``: T2 = (v(L_1) - v(L_2))' S^-1 (...), S = S_1/n_1 + S_2/n_2.
* ``test_k_sample``: Tk = sum_j n_j (v(L_j) - v(L))' S^-1 (...), (k-1)m dof.
* ``mass_univariate``: per-edge Welch tests, the usual edgewise baseline.

Every covariance goes through the same pipeline, controlled by
``EstimatorOptions``: sample covariance, optional adaptive thresholding,
optional nearest-PD projection.

Tk restricted to two groups is not the same statistic as T2: the n_j weights
and the centering of the group covariances differ. Both are kept as defined.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats

from lapinfer.cov_est import (
    DEFAULT_DELTA,
    PD_FLOOR_REL,
    PD_MAX_ITER,
    PD_TOL,
    CovEstimate,
    VectorSample,
    cai_liu_threshold,
    nearest_pd,
    pooled_cov,
    quadratic_form,
    sample_cov,
    within_group_cov,
)
from lapinfer.errors import DimensionError, ensure
from lapinfer.graph_core import (
    LaplacianMatrix,
    edge_count,
    edge_index,
    frechet_mean,
    vectorize,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NetworkGroup:
    """A labelled sample of n_j >= 2 Laplacians sharing one dimension."""

    label: str
    laplacians: Tuple[LaplacianMatrix, ...]

    def __post_init__(self):
        members = tuple(self.laplacians)
        ensure(f"group '{self.label}' needs at least 2 members, got {len(members)}", len(members) >= 2)
        dims = {L.dim for L in members}
        ensure(
            f"group '{self.label}' mixes dimensions {sorted(dims)}",
            len(dims) == 1,
            DimensionError,
        )
        object.__setattr__(self, "laplacians", members)

    @property
    def n(self) -> int:
        return len(self.laplacians)

    @property
    def dim(self) -> int:
        return self.laplacians[0].dim

    @cached_property
    def sample(self) -> VectorSample:
        return VectorSample.from_laplacians(self.laplacians)

    @cached_property
    def mean(self) -> LaplacianMatrix:
        return frechet_mean(self.laplacians)


@dataclass(frozen=True)
class EstimatorOptions:
    """
    Settings of the covariance pipeline shared by all tests.

    ``identity_covariance`` replaces the estimate by the identity matrix and
    exists for checking the algebra of the statistics. ``k_pooling`` selects
    the k-sample covariance: ``"within"`` is sum_j n_j S_j / n, ``"literal"``
    is sum_j S_j / n_j.
    """

    denominator: str = "n-1"
    threshold: bool = True
    delta: float = DEFAULT_DELTA
    project_pd: bool = True
    pd_tol: float = PD_TOL
    pd_max_iter: int = PD_MAX_ITER
    pd_floor_rel: float = PD_FLOOR_REL
    identity_covariance: bool = False
    on_nonconvergence: str = "warn"
    k_pooling: str = "within"

    def __post_init__(self):
        ensure(f"denominator must be 'n' or 'n-1', got {self.denominator!r}", self.denominator in ("n", "n-1"))
        ensure(f"delta must be non-negative, got {self.delta}", self.delta >= 0)
        ensure(f"pd_max_iter must be positive, got {self.pd_max_iter}", self.pd_max_iter >= 1)
        ensure(
            f"on_nonconvergence must be 'raise' or 'warn', got {self.on_nonconvergence!r}",
            self.on_nonconvergence in ("raise", "warn"),
        )
        ensure(
            f"k_pooling must be 'within' or 'literal', got {self.k_pooling!r}",
            self.k_pooling in ("within", "literal"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "denominator": self.denominator,
            "threshold": self.threshold,
            "delta": self.delta,
            "project_pd": self.project_pd,
            "pd_tol": self.pd_tol,
            "pd_max_iter": self.pd_max_iter,
            "pd_floor_rel": self.pd_floor_rel,
            "identity_covariance": self.identity_covariance,
            "on_nonconvergence": self.on_nonconvergence,
            "k_pooling": self.k_pooling,
        }


@dataclass(frozen=True)
class TestReport:
    """Outcome of one of the network tests."""

    __test__ = False  # not a pytest class

    test_kind: str
    statistic: float
    dof: int
    p_value: float
    group_labels: Tuple[str, ...]
    group_sizes: Tuple[int, ...]
    estimator_meta: Dict[str, Any] = field(default_factory=dict)

    def reject(self, alpha: float) -> bool:
        return self.p_value < alpha

    def to_dict(self) -> Dict[str, Any]:
        return {
            "test_kind": self.test_kind,
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "group_labels": list(self.group_labels),
            "group_sizes": list(self.group_sizes),
            "estimator": dict(self.estimator_meta),
        }


def chi_square_sf(t: float, dof: int) -> float:
    """
    Upper tail P(chi2_dof > t) as the regularized upper incomplete gamma Q(dof/2, t/2).

    Args:
        t: Non-negative statistic.
        dof: Positive integer degrees of freedom.

    Returns:
        The tail probability in [0, 1].
    """
    ensure(f"dof must be a positive integer, got {dof!r}", isinstance(dof, (int, np.integer)) and dof >= 1)
    ensure(f"chi-square statistic must be non-negative, got {t}", t >= 0)
    if t == 0:
        return 1.0
    return float(special.gammaincc(dof / 2.0, t / 2.0))


def _group_cov(sample: VectorSample, options: EstimatorOptions, center: Optional[np.ndarray]) -> CovEstimate:
    if options.threshold:
        return cai_liu_threshold(sample, delta=options.delta, center=center)
    return sample_cov(sample, denominator=options.denominator, center=center)


def _project(cov: CovEstimate, options: EstimatorOptions) -> CovEstimate:
    if not options.project_pd:
        return cov
    return nearest_pd(
        cov,
        tol=options.pd_tol,
        max_iter=options.pd_max_iter,
        floor_rel=options.pd_floor_rel,
        on_nonconvergence=options.on_nonconvergence,
    )


def _identity(m: int, options: EstimatorOptions) -> CovEstimate:
    return CovEstimate(np.eye(m), estimator="identity", denominator=options.denominator)


def estimate_covariance(
    sample: VectorSample,
    options: EstimatorOptions = EstimatorOptions(),
    center: Optional[np.ndarray] = None,
) -> CovEstimate:
    """Run the full pipeline (estimate, threshold, project) on a single sample."""
    if options.identity_covariance:
        return _identity(sample.dim, options)
    return _project(_group_cov(sample, options, center), options)


def _shared_dim(groups: Sequence[NetworkGroup]) -> int:
    dims = {g.dim for g in groups}
    ensure(
        "groups differ in dimension: " + ", ".join(f"{g.label}={g.dim}" for g in groups),
        len(dims) == 1,
        DimensionError,
    )
    return dims.pop()


def _report(
    kind: str,
    statistic: float,
    dof: int,
    groups: Sequence[NetworkGroup],
    cov: CovEstimate,
) -> TestReport:
    statistic = max(float(statistic), 0.0)
    report = TestReport(
        test_kind=kind,
        statistic=statistic,
        dof=dof,
        p_value=chi_square_sf(statistic, dof),
        group_labels=tuple(g.label for g in groups),
        group_sizes=tuple(g.n for g in groups),
        estimator_meta=cov.meta(),
    )
    logger.info(
        "%s test on %s: statistic %.6g, dof %d, p %.4g",
        kind, "/".join(report.group_labels), report.statistic, dof, report.p_value,
    )
    return report


def test_one_sample(
    group: NetworkGroup,
    Lambda0: LaplacianMatrix,
    options: EstimatorOptions = EstimatorOptions(),
) -> TestReport:
    """
    Test whether the group's mean Laplacian equals Lambda0.

    Args:
        group: Sample of n >= 2 Laplacians.
        Lambda0: Hypothesised mean, same dimension.
        options: Covariance pipeline settings.

    Returns:
        TestReport with statistic T1 and m = d(d-1)/2 degrees of freedom.
    """
    ensure(
        f"Lambda0 has dimension {Lambda0.dim}, group '{group.label}' has {group.dim}",
        Lambda0.dim == group.dim,
        DimensionError,
    )
    sample = group.sample
    delta = sample.mean - vectorize(Lambda0).values
    cov = estimate_covariance(sample, options)
    statistic = group.n * quadratic_form(cov, delta)
    return _report("one_sample", statistic, edge_count(group.dim), [group], cov)


def test_two_sample(
    g1: NetworkGroup,
    g2: NetworkGroup,
    options: EstimatorOptions = EstimatorOptions(),
) -> TestReport:
    """
    Test equality of two group means.

    Each group covariance is taken about its own mean and goes through the
    pipeline on its own (threshold, projection) before the pooling
    S_1/n_1 + S_2/n_2, so the pooled estimate inherits the groups' floors.
    """
    d = _shared_dim([g1, g2])
    delta = g1.sample.mean - g2.sample.mean
    if options.identity_covariance:
        cov = _identity(edge_count(d), options)
    else:
        cov = pooled_cov(
            [(estimate_covariance(g.sample, options), g.n) for g in (g1, g2)],
            mode="two_sample",
        )
    statistic = quadratic_form(cov, delta)
    return _report("two_sample", statistic, edge_count(d), [g1, g2], cov)


def test_k_sample(
    groups: Sequence[NetworkGroup],
    options: EstimatorOptions = EstimatorOptions(),
) -> TestReport:
    """
    Test equality of k >= 2 group means.

    The grand mean is taken over all n Laplacians and each group covariance
    is computed about it, then thresholded and projected on its own. With
    ``k_pooling="within"`` the groups are combined as sum_j n_j S_j / n,
    the per-observation scale at which Tk is chi-square
    with (k-1)m dof under the null; ``"literal"`` uses sum_j S_j / n_j.

    Args:
        groups: At least two groups of equal dimension.
        options: Covariance pipeline settings.

    Returns:
        TestReport with statistic Tk and (k-1)m degrees of freedom.
    """
    groups = list(groups)
    ensure(f"k-sample test needs at least 2 groups, got {len(groups)}", len(groups) >= 2)
    d = _shared_dim(groups)
    m = edge_count(d)
    n = sum(g.n for g in groups)
    grand = sum(g.sample.rows.sum(axis=0) for g in groups) / n
    if options.identity_covariance:
        cov = _identity(m, options)
    else:
        per_group = [(estimate_covariance(g.sample, options, grand), g.n) for g in groups]
        if options.k_pooling == "within":
            cov = within_group_cov(per_group)
        else:
            cov = pooled_cov(per_group, mode="k_sample")
    statistic = sum(g.n * quadratic_form(cov, g.sample.mean - grand) for g in groups)
    return _report("k_sample", statistic, (len(groups) - 1) * m, groups, cov)


@dataclass(frozen=True, eq=False)
class MassUnivariateResult:
    """Per-edge Welch tests between two groups."""

    group_labels: Tuple[str, str]
    dim: int
    alpha: float
    correction: str
    statistics: np.ndarray
    p_values: np.ndarray

    @property
    def level(self) -> float:
        if self.correction == "bonferroni":
            return self.alpha / edge_count(self.dim)
        return self.alpha

    def _to_matrix(self, values: np.ndarray, diagonal) -> np.ndarray:
        rows, cols = edge_index(self.dim)
        out = np.full((self.dim, self.dim), diagonal, dtype=np.asarray(values).dtype)
        out[rows, cols] = values
        out[cols, rows] = values
        return out

    @property
    def p_matrix(self) -> np.ndarray:
        """Symmetric d x d p-values, 1 on the diagonal."""
        return self._to_matrix(self.p_values, 1.0)

    @property
    def uncorrected_mask(self) -> np.ndarray:
        return self._to_matrix(self.p_values < self.alpha, False)

    @property
    def mask(self) -> np.ndarray:
        """Edges significant at the corrected level."""
        return self._to_matrix(self.p_values < self.level, False)

    def flagged_edges(self) -> List[Tuple[int, int]]:
        rows, cols = edge_index(self.dim)
        hits = self.p_values < self.level
        return [(int(a), int(b)) for a, b in zip(rows[hits], cols[hits])]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "group_labels": list(self.group_labels),
            "dim": self.dim,
            "alpha": self.alpha,
            "correction": self.correction,
            "level": self.level,
            "n_tests": int(self.p_values.size),
            "n_flagged_uncorrected": int(np.sum(self.p_values < self.alpha)),
            "n_flagged": int(np.sum(self.p_values < self.level)),
            "flagged_edges": [list(e) for e in self.flagged_edges()],
        }


def mass_univariate(
    g1: NetworkGroup,
    g2: NetworkGroup,
    alpha: float = 0.05,
    correction: str = "bonferroni",
) -> MassUnivariateResult:
    """
    Welch two-sample t-test on every edge coordinate.

    An edge with zero variance in both groups gets p = 1 when the group means
    agree and p = 0 otherwise.

    Args:
        g1: First group.
        g2: Second group.
        alpha: Family level.
        correction: ``"none"`` or ``"bonferroni"`` (level alpha / m).

    Returns:
        MassUnivariateResult holding per-edge statistics and p-values.
    """
    ensure(f"alpha must lie in (0, 1), got {alpha}", 0.0 < alpha < 1.0)
    ensure(f"unknown correction {correction!r}", correction in ("none", "bonferroni"))
    d = _shared_dim([g1, g2])
    a, b = g1.sample.rows, g2.sample.rows
    degenerate = (np.ptp(a, axis=0) == 0) & (np.ptp(b, axis=0) == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        welch = stats.ttest_ind(a, b, axis=0, equal_var=False)
    statistics = np.asarray(welch.statistic, dtype=float)
    p_values = np.asarray(welch.pvalue, dtype=float)
    gap = a.mean(axis=0) - b.mean(axis=0)
    p_values = np.where(degenerate, np.where(gap == 0, 1.0, 0.0), p_values)
    statistics = np.where(degenerate, np.where(gap == 0, 0.0, np.copysign(np.inf, gap)), statistics)
    result = MassUnivariateResult(
        group_labels=(g1.label, g2.label),
        dim=d,
        alpha=float(alpha),
        correction=correction,
        statistics=statistics,
        p_values=p_values,
    )
    logger.info(
        "mass-univariate %s vs %s: %d of %d edges below the %s level %.3g",
        g1.label, g2.label, int(np.sum(p_values < result.level)), p_values.size, correction, result.level,
    )
    return result
