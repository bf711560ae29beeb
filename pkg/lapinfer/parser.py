# lapinfer/parser.py
"""
Readers and writers for matrix files and subject manifests.

Matrices are plain comma-separated text, one row per line, optionally after
a number of header lines. A manifest is a CSV file with the columns
``subject_id``, ``group`` and ``path``; relative paths are resolved against
the manifest's directory.
"""

import io
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from lapinfer.errors import DimensionError, ValidationError, ensure
from lapinfer.report import PathLike, atomic_write

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("subject_id", "group", "path")


class MatrixParser:
    """
    Parser for square matrices stored as delimited text.
    """

    def __init__(self, header: int = 0, delimiter: str = ","):
        """
        Initialize the matrix parser.

        Args:
            header: Number of leading lines to skip.
            delimiter: Field separator.
        """
        ensure(f"header line count must be non-negative, got {header}", header >= 0)
        self.header = header
        self.delimiter = delimiter

    def read(self, path: PathLike, dim: Optional[int] = None) -> np.ndarray:
        """
        Read a square matrix.

        Args:
            path: Matrix file.
            dim: Expected dimension, if declared.

        Returns:
            The matrix as a float array.
        """
        path = Path(path)
        ensure(f"matrix file not found: {path}", path.is_file())
        try:
            matrix = np.loadtxt(path, delimiter=self.delimiter, skiprows=self.header, ndmin=2, comments="#")
        except ValueError as exc:
            raise ValidationError(f"{path}: cannot parse matrix ({exc})") from exc
        ensure(
            f"{path}: matrix is not square (shape {matrix.shape})",
            matrix.shape[0] == matrix.shape[1],
            DimensionError,
        )
        if dim is not None:
            ensure(
                f"{path}: expected a {dim}x{dim} matrix, got {matrix.shape[0]}x{matrix.shape[1]}",
                matrix.shape[0] == dim,
                DimensionError,
            )
        return matrix

    def format(self, matrix: np.ndarray, header: Optional[str] = None) -> str:
        """
        Render a matrix as delimited text with full float precision.

        Args:
            matrix: Matrix to render; a vector becomes one row.
            header: Text written before the rows, e.g. a digest line.

        Returns:
            The file contents.
        """
        buffer = io.StringIO()
        if header:
            buffer.write(header)
        np.savetxt(buffer, np.atleast_2d(matrix), delimiter=self.delimiter, fmt="%.17g")
        return buffer.getvalue()

    def write(self, path: PathLike, matrix: np.ndarray, header: Optional[str] = None) -> Path:
        """Write ``format(matrix, header)`` to path atomically and return the path."""
        return atomic_write(path, self.format(matrix, header))


class ManifestParser:
    """
    Parser for subject manifests.
    """

    def read(self, path: PathLike) -> pd.DataFrame:
        """
        Read and check a manifest.

        Args:
            path: Manifest CSV file.

        Returns:
            DataFrame with columns subject_id, group, path (resolved), row
            (1-based data row number) in file order.
        """
        path = Path(path)
        ensure(f"manifest not found: {path}", path.is_file())
        try:
            frame = pd.read_csv(path, dtype=str, comment="#", skipinitialspace=True)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise ValidationError(f"{path}: cannot parse manifest ({exc})") from exc
        missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
        ensure(f"{path}: manifest lacks columns {missing}", not missing)
        frame = frame.loc[:, list(MANIFEST_COLUMNS)]
        frame.insert(0, "row", np.arange(1, len(frame) + 1))
        for column in MANIFEST_COLUMNS:
            empty = frame[column].isna() | (frame[column].str.strip() == "")
            if empty.any():
                row = int(frame.loc[empty, "row"].iloc[0])
                raise ValidationError(f"{path}, row {row}: empty {column}")
        frame[list(MANIFEST_COLUMNS)] = frame[list(MANIFEST_COLUMNS)].apply(lambda s: s.str.strip())
        duplicated = frame["subject_id"].duplicated()
        if duplicated.any():
            row = int(frame.loc[duplicated, "row"].iloc[0])
            subject = frame.loc[duplicated, "subject_id"].iloc[0]
            raise ValidationError(f"{path}, row {row}: duplicate subject_id '{subject}'")
        base = path.parent
        frame["path"] = [str(p) if Path(p).is_absolute() else str(base / p) for p in frame["path"]]
        logger.debug("manifest %s: %d rows", path, len(frame))
        return frame

    def write(self, path: PathLike, rows: Iterable[Tuple[str, str, str]]) -> Path:
        """Write (subject_id, group, path) rows."""
        frame = pd.DataFrame(list(rows), columns=list(MANIFEST_COLUMNS))
        return atomic_write(path, frame.to_csv(index=False, lineterminator="\n"))


def group_order(frame: pd.DataFrame) -> List[str]:
    """Group labels in order of first appearance."""
    return list(dict.fromkeys(frame["group"]))
