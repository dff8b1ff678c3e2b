"""Learning samples and delimited-text input/output.

All CSV files are comma separated, UTF-8, LF line endings, one header row,
and numbers carry at least 17 significant digits so a round trip through
text is lossless for double precision.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .utils import format_float


@dataclass(frozen=True)
class LearningSample:
    """Paired design matrix and scalar outputs.

    Parameters
    ----------
    x : ndarray of shape (n, d)
        Input points, finite.
    y : ndarray of shape (n,)
        Outputs, finite.
    names : tuple of str, optional
        Input labels; defaults to ``x1..xd``.
    """

    x: np.ndarray
    y: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.ndim != 2:
            raise DataError("design matrix must be two-dimensional")
        if x.shape[0] != y.shape[0]:
            raise DataError(
                f"design has {x.shape[0]} rows but outputs have "
                f"{y.shape[0]} entries"
            )
        if x.shape[0] < 1:
            raise DataError("learning sample is empty")
        if not np.all(np.isfinite(x)):
            bad = np.argwhere(~np.isfinite(x))[0]
            raise DataError(
                f"non-finite input value at row {bad[0] + 1}, "
                f"column {bad[1] + 1}"
            )
        if not np.all(np.isfinite(y)):
            bad = int(np.flatnonzero(~np.isfinite(y))[0])
            raise DataError(f"non-finite output value at row {bad + 1}")
        if self.names is not None:
            names = tuple(str(s) for s in self.names)
            if len(names) != x.shape[1]:
                raise DataError(
                    f"{len(names)} input names for {x.shape[1]} columns"
                )
            object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def column_names(self) -> list[str]:
        if self.names is not None:
            return list(self.names)
        return [f"x{k + 1}" for k in range(self.dim)]


def write_matrix_csv(path, matrix: np.ndarray, names: Sequence[str]) -> None:
    """Write a numeric matrix as CSV with a header row.

    Parameters
    ----------
    path : path-like
        Destination file.
    matrix : ndarray of shape (n, d)
    names : sequence of str
        Column names, one per column.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    names = [str(s) for s in names]
    if len(names) != matrix.shape[1]:
        raise DataError(
            f"{len(names)} column names for {matrix.shape[1]} columns"
        )
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    for row in matrix:
        buf.write(",".join(format_float(v) for v in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def read_matrix_csv(path, expected_names: Sequence[str] | None = None):
    """Read a CSV written by :func:`write_matrix_csv` (or a simulator).

    Parameters
    ----------
    path : path-like
    expected_names : sequence of str, optional
        When given, the header must match these names in order.

    Returns
    -------
    matrix : ndarray of shape (n, d)
    names : list of str
        Column names from the header.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not lines:
        raise DataError(f"{path}: empty file")
    names = [s.strip() for s in lines[0].split(",")]
    if expected_names is not None:
        expected = [str(s) for s in expected_names]
        if names != expected:
            raise DataError(
                f"{path}: header {names} does not match expected "
                f"column names {expected}"
            )
    ncol = len(names)
    rows = np.empty((len(lines) - 1, ncol))
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != ncol:
            raise DataError(
                f"{path}: row {i + 1} has {len(parts)} fields, "
                f"expected {ncol}"
            )
        for j, tok in enumerate(parts):
            try:
                rows[i, j] = float(tok)
            except ValueError as exc:
                raise DataError(
                    f"{path}: non-numeric value {tok.strip()!r} at "
                    f"row {i + 1}, column {j + 1} ({names[j]})"
                ) from exc
    if not np.all(np.isfinite(rows)):
        bad = np.argwhere(~np.isfinite(rows))[0]
        raise DataError(
            f"{path}: non-finite value at row {bad[0] + 1}, "
            f"column {bad[1] + 1}"
        )
    return rows, names


def ingest_sample(x_path, y_source, expected_names=None) -> LearningSample:
    """Load a learning sample from delimited files.

    Parameters
    ----------
    x_path : path-like
        CSV of input points.
    y_source : str or path-like
        Either the name of a column inside ``x_path`` holding the output,
        or the path of a single-column CSV of outputs.
    expected_names : sequence of str, optional
        Input column names to validate against (order matters).

    Returns
    -------
    LearningSample
    """
    matrix, names = read_matrix_csv(x_path)
    y_source = str(y_source)
    if y_source in names:
        j = names.index(y_source)
        y = matrix[:, j]
        x = np.delete(matrix, j, axis=1)
        names = names[:j] + names[j + 1:]
    else:
        ycol, _ = read_matrix_csv(y_source)
        if ycol.shape[1] != 1:
            raise DataError(
                f"{y_source}: output file must have exactly one column"
            )
        if ycol.shape[0] != matrix.shape[0]:
            raise DataError(
                f"output file has {ycol.shape[0]} rows but the design "
                f"has {matrix.shape[0]}"
            )
        y = ycol[:, 0]
        x = matrix
    if expected_names is not None:
        expected = [str(s) for s in expected_names]
        if names != expected:
            raise DataError(
                f"input columns {names} do not match the declared input "
                f"space {expected}"
            )
    return LearningSample(x=x, y=y, names=tuple(names))
