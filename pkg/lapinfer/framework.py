# lapinfer/framework.py
"""
Laplacian analysis framework

This module ties the pieces together: it ingests a manifest of subject
matrices into labelled groups of Laplacians and runs the descriptive and
inferential analyses on them.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from lapinfer.errors import LaplacianError, ValidationError, ensure
from lapinfer.graph_core import (
    TOL_REL,
    AssociationMatrix,
    LaplacianMatrix,
    binarize_percentile,
    laplacian_from_association,
    space_membership,
)
from lapinfer.inference import (
    EstimatorOptions,
    MassUnivariateResult,
    NetworkGroup,
    TestReport,
    mass_univariate,
    test_k_sample,
    test_one_sample,
    test_two_sample,
)
from lapinfer.parser import ManifestParser, MatrixParser, group_order
from lapinfer.report import PathLike, input_digest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IngestOptions:
    """
    How manifest matrices are read.

    ``tol`` is the relative symmetry tolerance; matrices within it are
    symmetrized before use. ``laplacian`` marks the files as precomputed
    Laplacians instead of association matrices.
    """

    dim: Optional[int] = None
    header: int = 0
    laplacian: bool = False
    tol: float = TOL_REL

    def to_dict(self) -> Dict[str, Any]:
        return {"dim": self.dim, "header": self.header, "laplacian": self.laplacian, "tol": self.tol}


def _load_subject(matrix: np.ndarray, options: IngestOptions) -> LaplacianMatrix:
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    limit = options.tol * max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 0.0)
    ensure(f"matrix is not symmetric (max |s_ab - s_ba| = {asymmetry:.3e})", asymmetry <= limit)
    matrix = (matrix + matrix.T) / 2.0
    if options.laplacian:
        return LaplacianMatrix(matrix)
    return laplacian_from_association(AssociationMatrix(matrix))


def ingest_manifest(path: PathLike, options: IngestOptions = IngestOptions()) -> Dict[str, NetworkGroup]:
    """
    Read every subject in a manifest and group the Laplacians by label.

    Args:
        path: Manifest CSV (subject_id, group, path).
        options: Reading options.

    Returns:
        Groups keyed by label, in order of first appearance.

    Raises:
        ValidationError: a file is missing or malformed, a subject is
            duplicated, a dimension disagrees or a matrix is not symmetric.
            The message names the manifest row and the file.
    """
    frame = ManifestParser().read(path)
    ensure(f"{path}: manifest has no rows", len(frame) > 0)
    reader = MatrixParser(header=options.header)
    dim = options.dim
    members: Dict[str, List[LaplacianMatrix]] = {label: [] for label in group_order(frame)}
    for record in frame.itertuples(index=False):
        try:
            matrix = reader.read(record.path, dim=dim)
            laplacian = _load_subject(matrix, options)
        except LaplacianError as exc:
            raise type(exc)(f"{path}, row {record.row} (subject '{record.subject_id}', file {record.path}): {exc}") from exc
        dim = laplacian.dim if dim is None else dim
        members[record.group].append(laplacian)
    groups = {}
    for label, laplacians in members.items():
        try:
            groups[label] = NetworkGroup(label, tuple(laplacians))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
    logger.info(
        "ingested %d subjects (d=%d) from %s: %s",
        len(frame), dim, path, ", ".join(f"{g.label}={g.n}" for g in groups.values()),
    )
    return groups


class LaplacianAnalysisFramework:
    """
    Main framework class holding the ingested groups and running analyses on them.
    """

    def __init__(self, groups: Dict[str, NetworkGroup], options: EstimatorOptions = EstimatorOptions()):
        """
        Initialize the framework.

        Args:
            groups: Labelled groups sharing one dimension.
            options: Covariance pipeline settings used by every test.
        """
        ensure("no groups to analyse", len(groups) > 0)
        self.groups = dict(groups)
        self.options = options

    @classmethod
    def from_manifest(
        cls,
        path: PathLike,
        ingest: IngestOptions = IngestOptions(),
        options: EstimatorOptions = EstimatorOptions(),
    ) -> "LaplacianAnalysisFramework":
        return cls(ingest_manifest(path, ingest), options)

    @property
    def dim(self) -> int:
        return next(iter(self.groups.values())).dim

    def group(self, label: str) -> NetworkGroup:
        ensure(
            f"unknown group '{label}' (available: {', '.join(self.groups)})",
            label in self.groups,
        )
        return self.groups[label]

    def select(self, labels: Optional[Sequence[str]], count: Optional[int] = None) -> List[NetworkGroup]:
        """Groups by label, or all groups in manifest order when no labels are given."""
        chosen = [self.group(label) for label in labels] if labels else list(self.groups.values())
        if count is not None:
            ensure(f"expected {count} groups, got {len(chosen)} ({', '.join(g.label for g in chosen)})",
                   len(chosen) == count)
        return chosen

    def input_digest(self, groups: Optional[Sequence[NetworkGroup]] = None) -> str:
        return input_digest(self.groups.values() if groups is None else groups)

    def summary(self) -> Dict[str, Any]:
        """Dimension, group sizes and how many subjects lie in L_d and L'_d."""
        out: Dict[str, Any] = {"dim": self.dim, "groups": {}}
        for label, group in self.groups.items():
            diagnostics = [space_membership(L) for L in group.laplacians]
            out["groups"][label] = {
                "n": group.n,
                "in_L_d": sum(diag.in_L_d for diag in diagnostics),
                "in_L_d_prime": sum(diag.in_L_d_prime for diag in diagnostics),
                "min_components": min(diag.n_components for diag in diagnostics),
                "max_components": max(diag.n_components for diag in diagnostics),
            }
        return out

    def means(self) -> Dict[str, LaplacianMatrix]:
        """Mean Laplacian of every group, keyed by label."""
        return {label: group.mean for label, group in self.groups.items()}

    def binarize(self, q: float) -> Dict[str, List[np.ndarray]]:
        """Threshold every subject at the q-th percentile of all subjects' entries."""
        labels = list(self.groups)
        pooled = [L for label in labels for L in self.groups[label].laplacians]
        masks = binarize_percentile(pooled, q)
        out, start = {}, 0
        for label in labels:
            n = self.groups[label].n
            out[label] = masks[start:start + n]
            start += n
        return out

    def test_one(self, label: str, Lambda0: LaplacianMatrix) -> TestReport:
        return test_one_sample(self.group(label), Lambda0, self.options)

    def test_two(self, labels: Optional[Sequence[str]] = None) -> TestReport:
        """
        Two-sample test between the named groups.

        Args:
            labels: Two group labels; None takes the manifest's only two groups.

        Returns:
            The T2 report.
        """
        g1, g2 = self.select(labels, count=2)
        return test_two_sample(g1, g2, self.options)

    def test_k(self, labels: Optional[Sequence[str]] = None) -> TestReport:
        """k-sample test across the named groups, all groups when labels is None."""
        return test_k_sample(self.select(labels), self.options)

    def mass_univariate(
        self, labels: Optional[Sequence[str]] = None, alpha: float = 0.05, correction: str = "bonferroni"
    ) -> MassUnivariateResult:
        """
        Edgewise Welch tests between two groups.

        Args:
            labels: Two group labels; None takes the manifest's only two groups.
            alpha: Family-wise level.
            correction: ``"bonferroni"`` or ``"none"``.

        Returns:
            Per-edge p-values and masks.
        """
        g1, g2 = self.select(labels, count=2)
        return mass_univariate(g1, g2, alpha=alpha, correction=correction)
