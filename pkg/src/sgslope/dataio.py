"""Delimited-text ingestion for designs, responses, and groupings."""

from __future__ import annotations

import csv

import numpy as np

from .data import GroupPartition
from .errors import ParseError


def _rows(path):
    with open(path, newline="") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not field.strip() for field in row):
                continue
            yield line_no, [field.strip() for field in row]


def _is_numeric_row(row) -> bool:
    try:
        for field in row:
            float(field)
    except ValueError:
        return False
    return True


def load_design(path) -> np.ndarray:
    """Read a numeric CSV into an n x p matrix. A header row is skipped
    when its fields are not all numeric."""
    data = []
    width = None
    for line_no, row in _rows(path):
        if width is None and not _is_numeric_row(row):
            continue  # header
        if not _is_numeric_row(row):
            raise ParseError(path, line_no, "non-numeric field")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(
                path, line_no, f"expected {width} fields, found {len(row)}"
            )
        data.append([float(field) for field in row])
    if not data:
        raise ParseError(path, 0, "no data rows")
    return np.asarray(data, dtype=np.float64)


def load_response(path) -> np.ndarray:
    """Read a single-column CSV of response values."""
    values = []
    for line_no, row in _rows(path):
        if len(row) != 1:
            raise ParseError(path, line_no, "expected a single column")
        if not values and not _is_numeric_row(row):
            continue  # header
        try:
            values.append(float(row[0]))
        except ValueError:
            raise ParseError(path, line_no, "non-numeric field") from None
    if not values:
        raise ParseError(path, 0, "no data rows")
    return np.asarray(values, dtype=np.float64)


def load_groups(path) -> GroupPartition:
    """Read a two-column CSV `variable_index,group_id` (0-based) and build
    the partition. Every variable index 0..p-1 must appear exactly once."""
    pairs = []
    for line_no, row in _rows(path):
        if len(row) != 2:
            raise ParseError(path, line_no, "expected two columns")
        if not pairs and not _is_numeric_row(row):
            continue  # header
        try:
            var, grp = int(row[0]), int(row[1])
        except ValueError:
            raise ParseError(path, line_no, "indices must be integers") from None
        if var < 0 or grp < 0:
            raise ParseError(path, line_no, "indices must be non-negative")
        pairs.append((line_no, var, grp))
    if not pairs:
        raise ParseError(path, 0, "no data rows")
    p = max(var for _, var, _grp in pairs) + 1
    group_of = np.full(p, -1, dtype=np.int64)
    for line_no, var, grp in pairs:
        if group_of[var] != -1:
            raise ParseError(path, line_no, f"variable {var} listed twice")
        group_of[var] = grp
    missing = np.flatnonzero(group_of == -1)
    if missing.size:
        raise ParseError(path, 0, f"variable {int(missing[0])} has no group")
    return GroupPartition(group_of)
