"""Dataset ingestion, count binning, and seeded splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError

DEFAULT_BINS = 16


@dataclass
class DatasetTable:
    """An integer count/bin matrix with a binary label column."""

    columns: list[str]
    x: np.ndarray
    y: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]


def ingest_csv(path, label_col: str) -> DatasetTable:
    """Parse a headered CSV of integer counts plus a binary label column.

    Cells must be integers; the first offending cell is reported by file
    line number (the header is line 1) and column name.  CRLF and LF
    files parse identically.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_col not in header:
            raise DataError(f"{path}: missing label column {label_col!r}")
        label_idx = header.index(label_col)
        feat_idx = [i for i in range(len(header)) if i != label_idx]
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row at line {line_no} has {len(row)} cells, expected {len(header)}")
            parsed = []
            for i in feat_idx + [label_idx]:
                cell = row[i].strip()
                try:
                    parsed.append(int(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-integer value {cell!r} at row {line_no}, column {header[i]!r}"
                    ) from None
            rows.append(parsed[:-1])
            labels.append(parsed[-1])
    if not rows:
        raise DataError(f"{path}: no data rows")
    y = np.asarray(labels, dtype=np.int64)
    if not np.all((y == 0) | (y == 1)):
        raise DataError(f"{path}: label column {label_col!r} must be binary")
    return DatasetTable(
        columns=[header[i] for i in feat_idx],
        x=np.asarray(rows, dtype=np.int64),
        y=y,
        provenance={"source": str(path), "label_col": label_col, "binned": False},
    )


def log_bin_counts(counts, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Logarithmic binning of nonnegative counts: min(floor(log2(c+1)), bins-1).

    Monotone in the count, maps 0 to bin 0, and clamps at the top bin.
    """
    counts = np.asarray(counts)
    if np.any(counts < 0):
        raise DomainError("counts must be >= 0")
    if bins < 2:
        raise DomainError("need at least 2 bins")
    binned = np.floor(np.log2(counts.astype(np.float64) + 1.0)).astype(np.int64)
    return np.minimum(binned, bins - 1)


def bin_table(table: DatasetTable, bins: int = DEFAULT_BINS) -> DatasetTable:
    """Apply log binning to every feature column of a table."""
    return DatasetTable(
        columns=list(table.columns),
        x=log_bin_counts(table.x, bins),
        y=table.y.copy(),
        provenance={**table.provenance, "binned": True, "bins": bins},
    )


def stratified_split(
    y, fractions: tuple[float, float, float] = (0.75, 0.10, 0.15), seed: int = 0
):
    """Label-stratified train/valid/test index arrays."""
    if abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) <= 0:
        raise DomainError("fractions must be positive and sum to 1")
    y = np.asarray(y).ravel()
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        n = idx.size
        n_tr = int(round(fractions[0] * n))
        n_va = int(round(fractions[1] * n))
        parts[0].extend(idx[:n_tr])
        parts[1].extend(idx[n_tr : n_tr + n_va])
        parts[2].extend(idx[n_tr + n_va :])
    return tuple(np.sort(np.asarray(p, dtype=int)) for p in parts)
