"""Tabular numeric datasets: load, validate, split, subset and write."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateColumn,
    IoError,
    KOutOfRange,
    MissingFile,
    NonFinite,
    OutcomeNotFound,
    ParseError,
    TooFewRows,
    ValidationError,
)

ID_HEADERS = ("id", "row_id", "")


def fmt_float(x):
    """Format a float with 17 significant digits (exact round trip)."""
    return format(float(x), ".17g")


def synthetic_ids(n):
    return [f"r{i:06d}" for i in range(1, n + 1)]


@dataclass(frozen=True)
class Dataset:
    """Numeric covariate matrix with named columns and optional outcome.

    Arrays are copied and made read-only on construction, so instances can
    be shared freely between workers.
    """

    row_ids: tuple
    column_names: tuple
    X: np.ndarray
    y: np.ndarray | None = None
    outcome_name: str | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim != 2:
            raise DimensionMismatch(f"X must be 2-dimensional, got shape {X.shape}")
        n, p = X.shape
        if n < 1:
            raise TooFewRows("a dataset needs at least 1 row")
        if p < 1:
            raise ValidationError("a dataset needs at least 1 column")
        if not np.all(np.isfinite(X)):
            raise NonFinite("X contains non-finite entries")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != p:
            raise DimensionMismatch(f"{len(names)} column names for {p} columns")
        if len(set(names)) != p:
            dup = sorted({c for c in names if names.count(c) > 1})
            raise DuplicateColumn(f"duplicate column names: {dup}")
        ids = tuple(str(r) for r in self.row_ids)
        if len(ids) != n:
            raise DimensionMismatch(f"{len(ids)} row ids for {n} rows")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "row_ids", ids)
        if self.y is not None:
            y = np.array(self.y, dtype=float, copy=True).reshape(-1)
            if y.shape[0] != n:
                raise DimensionMismatch(f"outcome has length {y.shape[0]}, expected {n}")
            if not np.all(np.isfinite(y)):
                raise NonFinite("outcome contains non-finite entries")
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def take_rows(self, idx, row_ids=None, keep_y=True):
        idx = np.asarray(idx, dtype=np.int64)
        ids = [self.row_ids[i] for i in idx] if row_ids is None else row_ids
        return Dataset(
            row_ids=ids,
            column_names=self.column_names,
            X=self.X[idx],
            y=self.y[idx] if (keep_y and self.y is not None) else None,
            outcome_name=self.outcome_name if keep_y else None,
        )


@dataclass(frozen=True)
class SplitResult:
    train: Dataset
    test: Dataset
    ratio: tuple
    seed: int
    train_indices: np.ndarray = field(repr=False, default=None)
    test_indices: np.ndarray = field(repr=False, default=None)


def _parse_cell(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(row, column, text) from None
    if not math.isfinite(value):
        raise ParseError(row, column, text)
    return value


def load_csv(path, outcome_column=None, id_column=None):
    """Read a comma-separated numeric table with a mandatory header row.

    Parameters
    ----------
    path : str or Path
    outcome_column : str, optional
        Column moved out of ``X`` into ``y``.
    id_column : bool, optional
        ``True`` treats the first column as row ids, ``False`` never does.
        ``None`` (default) treats it as ids when its header is ``id``,
        ``row_id`` or empty.

    Raises
    ------
    MissingFile, ParseError, DuplicateColumn, OutcomeNotFound
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(1, None, "") from None
        rows = [r for r in reader if r]

    if id_column is None:
        id_column = header[0].lower() in ID_HEADERS
    names = header[1:] if id_column else header
    seen = set()
    for c in names:
        if c in seen:
            raise DuplicateColumn(f"duplicate column {c!r} in {path}")
        seen.add(c)
    if outcome_column is not None and outcome_column not in names:
        raise OutcomeNotFound(f"outcome column {outcome_column!r} not in {path}")

    width = len(header)
    ids = []
    values = np.empty((len(rows), len(names)))
    offset = 1 if id_column else 0
    for i, row in enumerate(rows):
        line = i + 2
        if len(row) != width:
            raise ParseError(line, None, ",".join(row))
        if id_column:
            ids.append(row[0])
        for j, name in enumerate(names):
            values[i, j] = _parse_cell(row[j + offset].strip(), line, name)
    if len(rows) < 2:
        raise TooFewRows(f"{path} has {len(rows)} data rows, at least 2 are required")
    if not id_column:
        ids = synthetic_ids(len(rows))

    if outcome_column is None:
        return Dataset(ids, names, values)
    k = names.index(outcome_column)
    keep = [j for j in range(len(names)) if j != k]
    return Dataset(
        row_ids=ids,
        column_names=[names[j] for j in keep],
        X=values[:, keep],
        y=values[:, k],
        outcome_name=outcome_column,
    )


def write_csv(ds, path):
    """Write ``ds`` with an ``id`` column first and the outcome (if any) last."""
    path = Path(path)
    header = ["id", *ds.column_names]
    if ds.y is not None:
        header.append(ds.outcome_name or "y")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(ds.n):
                row = [ds.row_ids[i], *(fmt_float(v) for v in ds.X[i])]
                if ds.y is not None:
                    row.append(fmt_float(ds.y[i]))
                w.writerow(row)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def split_train_test(ds, ratio=(2, 1), seed=0):
    """Random partition of rows into train and test parts.

    Rows are shuffled with a seeded permutation; the first
    ``ceil(n * a / (a + b))`` go to train. Both parts keep the original row
    order.
    """
    a, b = (int(r) for r in ratio)
    if a < 1 or b < 1:
        raise ValidationError(f"ratio parts must be >= 1, got {ratio}")
    if ds.n < a + b:
        raise TooFewRows(f"cannot split {ds.n} rows with ratio {a}:{b}")
    n_train = math.ceil(ds.n * a / (a + b))
    perm = np.random.default_rng(seed).permutation(ds.n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return SplitResult(
        train=ds.take_rows(train_idx),
        test=ds.take_rows(test_idx),
        ratio=(a, b),
        seed=seed,
        train_indices=train_idx,
        test_indices=test_idx,
    )


def select_columns(ds, k, seed=0):
    """Keep ``k`` columns drawn at random without replacement, in original order."""
    if not 1 <= k <= ds.p:
        raise KOutOfRange(f"k must be in [1, {ds.p}], got {k}")
    if k == ds.p:
        return ds
    keep = np.sort(np.random.default_rng(seed).choice(ds.p, size=k, replace=False))
    return Dataset(
        row_ids=ds.row_ids,
        column_names=[ds.column_names[j] for j in keep],
        X=ds.X[:, keep],
        y=ds.y,
        outcome_name=ds.outcome_name,
    )


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create directory {path}: {exc}") from exc
    return Path(path)
