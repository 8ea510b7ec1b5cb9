"""Datasets: CSV ingestion, synthetic generation, and the in-memory matrix type."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CsvParseError, MissingValueError, SingleClassError


@dataclass(frozen=True)
class Dataset:
    """A numeric feature matrix with dense integer class labels.

    ``labels`` holds class ids in ``[0, n_classes)``; ``label_names`` maps
    ids back to the original class names (first-appearance order when
    loaded from a file). Class ids are a per-load encoding: two datasets
    are semantically equal when their values and decoded label names
    match, even if the id assignment differs.
    """

    values: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_names: tuple[str, ...] | None = None
    label_names: tuple[str, ...] | None = None
    label_column_name: str | None = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError("values must be a non-empty 2-d matrix")
        if labels.shape != (values.shape[0],):
            raise ValueError("labels length must equal the number of rows")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must not contain missing or non-finite entries")
        if self.n_classes < 2:
            raise ValueError("at least two classes are required")
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise ValueError("labels must be class ids in [0, n_classes)")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != values.shape[1]:
                raise ValueError("feature_names length must equal the number of columns")
            object.__setattr__(self, "feature_names", names)
        if self.label_names is not None:
            names = tuple(self.label_names)
            if len(names) != self.n_classes:
                raise ValueError("label_names length must equal n_classes")
            object.__setattr__(self, "label_names", names)

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.values.shape[1])

    def take(self, rows: Sequence[int]) -> "Dataset":
        """Row subset; keeps the declared class universe and all metadata."""
        rows = np.asarray(rows, dtype=np.int64)
        return replace(self, values=self.values[rows], labels=self.labels[rows])

    def select_features(self, columns: Sequence[int]) -> "Dataset":
        """Column subset, preserving feature-name metadata."""
        cols = np.asarray(columns, dtype=np.int64)
        names = None
        if self.feature_names is not None:
            names = tuple(self.feature_names[int(c)] for c in cols)
        return replace(self, values=self.values[:, cols], feature_names=names)

    def decoded_labels(self) -> list[str]:
        """Original class name per row (stringified ids when names are unknown)."""
        if self.label_names is None:
            return [str(int(l)) for l in self.labels]
        return [self.label_names[int(l)] for l in self.labels]


@dataclass(frozen=True)
class CsvSchema:
    """How to read a dataset CSV.

    ``label_column`` is a header name or 0-based index; ``None`` means the
    last column. Every non-label cell must parse as a finite real.
    """

    label_column: str | int | None = None
    delimiter: str = ","
    header: bool = True


@dataclass(frozen=True)
class SyntheticSpec:
    """Uniform-noise classification data where only two features matter.

    Features are i.i.d. uniform on ``value_range``; the class is 1 for
    rows whose relevant-feature sum lies strictly above the sample median
    and 0 otherwise, so even row counts split exactly in half.
    """

    n_rows: int = 500
    n_features: int = 500
    relevant_features: tuple[int, int] = (0, 20)
    value_range: tuple[float, float] = (-1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_rows < 1 or self.n_features < 1:
            raise ValueError("n_rows and n_features must be positive")
        a, b = self.relevant_features
        if a == b or not (0 <= a < self.n_features) or not (0 <= b < self.n_features):
            raise ValueError("relevant feature indices must be distinct and in range")
        lo, hi = self.value_range
        if not lo < hi:
            raise ValueError("value_range must be increasing")


def simulate_dataset(spec: SyntheticSpec) -> Dataset:
    """Generate the synthetic dataset; a pure function of ``spec``."""
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.value_range
    values = rng.uniform(lo, hi, size=(spec.n_rows, spec.n_features))
    a, b = spec.relevant_features
    score = values[:, a] + values[:, b]
    cut = float(np.quantile(score, 0.5))
    labels = (score > cut).astype(np.int64)
    return Dataset(
        values=values,
        labels=labels,
        n_classes=2,
        feature_names=tuple(f"f{i}" for i in range(spec.n_features)),
        label_names=("0", "1"),
        label_column_name="label",
    )


def _read_csv_rows(path: Path, schema: CsvSchema) -> tuple[list[str], list[list[str]], int]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        rows = [r for r in reader if r]  # ignore fully blank lines
    if not rows:
        raise CsvParseError(f"{path}: file contains no data rows")
    if schema.header:
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
        first_line = 2
    else:
        names = [f"f{i}" for i in range(len(rows[0]))]
        body = rows
        first_line = 1
    if not body:
        raise CsvParseError(f"{path}: file contains no data rows")
    return names, body, first_line


def _parse_cell(path: Path, cell: str, line: int, column: int) -> float:
    text = cell.strip()
    if not text:
        raise MissingValueError(f"{path}: empty value", row=line, column=column)
    try:
        v = float(text)
    except ValueError:
        raise CsvParseError(
            f"{path}: could not parse {text!r} as a number", row=line, column=column
        ) from None
    if not math.isfinite(v):
        raise CsvParseError(f"{path}: non-finite value {text!r}", row=line, column=column)
    return v


def _resolve_label_index(schema: CsvSchema, names: list[str], n_columns: int) -> int:
    if schema.label_column is None:
        return n_columns - 1
    if isinstance(schema.label_column, int):
        idx = schema.label_column
        if idx < 0:
            idx += n_columns
        if not 0 <= idx < n_columns:
            raise CsvParseError(f"label column index {schema.label_column} out of range")
        return idx
    try:
        return names.index(schema.label_column)
    except ValueError:
        raise CsvParseError(f"label column {schema.label_column!r} not found in header") from None


def load_csv(path: str | Path, schema: CsvSchema = CsvSchema()) -> Dataset:
    """Read a dataset CSV per ``schema``.

    Labels are mapped to dense class ids in first-appearance order and the
    mapping is recorded on the returned dataset. Raises
    :class:`CsvParseError` (with 1-based row/column location),
    :class:`MissingValueError`, or :class:`SingleClassError`.
    """
    path = Path(path)
    names, body, first_line = _read_csv_rows(path, schema)

    n_columns = len(names)
    label_idx = _resolve_label_index(schema, names, n_columns)
    feature_names = tuple(n for i, n in enumerate(names) if i != label_idx)

    n_rows = len(body)
    values = np.empty((n_rows, n_columns - 1), dtype=np.float64)
    label_text: list[str] = []
    for i, row in enumerate(body):
        line = first_line + i
        if len(row) != n_columns:
            raise CsvParseError(f"{path}: expected {n_columns} columns, found {len(row)}", row=line)
        j = 0
        for col, cell in enumerate(row):
            if col == label_idx:
                text = cell.strip()
                if not text:
                    raise MissingValueError(f"{path}: empty label", row=line, column=col + 1)
                label_text.append(text)
                continue
            values[i, j] = _parse_cell(path, cell, line, col + 1)
            j += 1

    id_of: dict[str, int] = {}
    labels = np.empty(n_rows, dtype=np.int64)
    for i, text in enumerate(label_text):
        if text not in id_of:
            id_of[text] = len(id_of)
        labels[i] = id_of[text]
    if len(id_of) < 2:
        raise SingleClassError(f"{path}: all rows share the single class {label_text[0]!r}")

    return Dataset(
        values=values,
        labels=labels,
        n_classes=len(id_of),
        feature_names=feature_names,
        label_names=tuple(id_of.keys()),
        label_column_name=names[label_idx] if schema.header else "label",
    )


def load_feature_matrix(path: str | Path, schema: CsvSchema = CsvSchema()) -> tuple[np.ndarray, tuple[str, ...]]:
    """Read a CSV in which every column is a feature (no label column);
    the input format of prediction runs. Returns the matrix and the
    column names."""
    path = Path(path)
    names, body, first_line = _read_csv_rows(path, schema)
    n_columns = len(names)
    values = np.empty((len(body), n_columns), dtype=np.float64)
    for i, row in enumerate(body):
        line = first_line + i
        if len(row) != n_columns:
            raise CsvParseError(f"{path}: expected {n_columns} columns, found {len(row)}", row=line)
        for col, cell in enumerate(row):
            values[i, col] = _parse_cell(path, cell, line, col + 1)
    return values, tuple(names)


def write_csv(data: Dataset, path: str | Path, delimiter: str = ",") -> None:
    """Write a dataset with full-precision values and original label names."""
    path = Path(path)
    feature_names = data.feature_names or tuple(f"f{i}" for i in range(data.n_features))
    label_name = data.label_column_name or "label"
    decoded = data.decoded_labels()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(list(feature_names) + [label_name])
        for i in range(data.n_rows):
            cells = [repr(float(v)) for v in data.values[i]]
            cells.append(decoded[i])
            writer.writerow(cells)
