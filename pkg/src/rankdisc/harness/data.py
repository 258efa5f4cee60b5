"""CSV ingestion for observation matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError


@dataclass
class Observations:
    values: np.ndarray
    labels: list[str] | None = None
    columns: list[str] = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def label(self, t: int) -> str:
        """Label of 1-based time index ``t`` (the index itself when unlabeled)."""
        return self.labels[t - 1] if self.labels else str(t)


TIME_NAMES = {"date", "time", "t", "month", "year", "period", "index", "timestamp", "yyyymm"}


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, has_header: bool | None = None, time_column: int | None | str = "auto", delimiter: str | None = None) -> Observations:
    """Read a ``T x d`` matrix from a delimited text file.

    ``has_header=None`` treats the first row as a header when one of its
    cells is text while the cell below it is numeric. ``time_column`` is a
    0-based column index holding time labels, ``None`` for no label column,
    or ``"auto"``: the first column is used when its data cells are not all
    numeric, or when its header cell is blank or a time-like name such as
    ``Date`` (so ``192607`` under ``Date`` is a label, not data). Blank
    lines and ``#`` comments are skipped.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DataError(f"{path}: no data rows")
    if delimiter is None:
        try:
            delimiter = csv.Sniffer().sniff(lines[0], delimiters=",;\t ").delimiter
        except csv.Error:
            delimiter = ","
    rows = [[c.strip() for c in row] for row in csv.reader(lines, delimiter=delimiter, skipinitialspace=True)]
    if has_header is None:
        # a header has text above a numeric cell (or is all text when alone)
        if len(rows) > 1:
            has_header = any(not _is_number(a) and _is_number(b) for a, b in zip(rows[0], rows[1]))
        else:
            has_header = not any(_is_number(c) for c in rows[0])
    header = rows[0] if has_header else []
    body = rows[1:] if has_header else rows
    if not body:
        raise DataError(f"{path}: no data rows after header")
    width = len(body[0])
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 1 + has_header} has {len(row)} cells, expected {width}")
    if time_column == "auto":
        first = header[0].strip().lower() if header else None
        named = first is not None and (first == "" or first in TIME_NAMES)
        textual = not all(_is_number(r[0]) for r in body)
        time_column = 0 if width > 1 and (named or textual) else None
    if time_column is not None and not 0 <= time_column < width:
        raise DataError(f"{path}: time column {time_column} out of range for {width} columns")
    keep = [j for j in range(width) if j != time_column]
    if not keep:
        raise DataError(f"{path}: no numeric columns")
    values = np.empty((len(body), len(keep)))
    for i, row in enumerate(body):
        for k, j in enumerate(keep):
            try:
                values[i, k] = float(row[j])
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {row[j]!r} at row {i + 1 + has_header}, column {j + 1}"
                ) from None
    labels = [row[time_column] for row in body] if time_column is not None else None
    columns = [header[j] for j in keep] if header else [f"x{k + 1}" for k in range(len(keep))]
    return Observations(values=values, labels=labels, columns=columns)
