"""Column-typed tabular data: CSV ingestion, schema inference, quantile grids.

A :class:`DataTable` stores every cell as a float: numeric columns hold the
parsed value, categorical columns hold the index of the level in the column's
level list. Tables are immutable after construction and row order is never
changed by any operation in this module.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import IngestError

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class ColumnSpec:
    """One column: a name, a role, and (for categorical columns) its levels."""

    name: str
    role: str
    levels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("column name must be nonempty")
        if self.role not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown column role {self.role!r}")
        if self.role == CATEGORICAL:
            if not self.levels:
                raise ValueError(f"categorical column {self.name!r} needs at least one level")
            if len(set(self.levels)) != len(self.levels):
                raise ValueError(f"duplicate levels in column {self.name!r}")
        elif self.levels:
            raise ValueError(f"numeric column {self.name!r} cannot carry levels")


class DataTable:
    """Immutable table of ``n >= 1`` complete rows with a typed schema."""

    def __init__(self, schema, data, dropped_rows: int = 0):
        schema = tuple(schema)
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names in schema")
        data = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
        if data.ndim != 2 or data.shape[1] != len(schema):
            raise ValueError("data shape does not match schema")
        if data.shape[0] < 1:
            raise ValueError("a table needs at least one row")
        for j, col in enumerate(schema):
            v = data[:, j]
            if col.role == CATEGORICAL:
                if not (np.all(v == np.floor(v)) and np.all(v >= 0) and np.all(v < len(col.levels))):
                    raise ValueError(f"column {col.name!r} holds out-of-range level indices")
            elif not np.all(np.isfinite(v)):
                raise ValueError(f"column {col.name!r} holds non-finite values")
        data.setflags(write=False)
        self.schema = schema
        self.data = data
        self.dropped_rows = dropped_rows

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def n_columns(self) -> int:
        return len(self.schema)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.schema)

    def column_index(self, column: int | str) -> int:
        if isinstance(column, (int, np.integer)):
            if not 0 <= column < self.n_columns:
                raise KeyError(f"column index {column} out of range")
            return int(column)
        for j, c in enumerate(self.schema):
            if c.name == column:
                return j
        raise KeyError(f"no column named {column!r}")

    def column_values(self, column: int | str) -> np.ndarray:
        return self.data[:, self.column_index(column)]

    def is_numeric(self, column: int | str) -> bool:
        return self.schema[self.column_index(column)].role == NUMERIC

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataTable):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"DataTable(n={self.n}, columns={list(self.column_names)})"

    def summary(self) -> dict:
        """Per-column summary: min/mean/max for numeric, level counts otherwise."""
        out = {}
        for j, col in enumerate(self.schema):
            v = self.data[:, j]
            if col.role == NUMERIC:
                out[col.name] = {
                    "role": NUMERIC,
                    "min": float(v.min()),
                    "mean": float(v.mean()),
                    "max": float(v.max()),
                }
            else:
                counts = np.bincount(v.astype(np.int64), minlength=len(col.levels))
                out[col.name] = {
                    "role": CATEGORICAL,
                    "levels": {lev: int(c) for lev, c in zip(col.levels, counts)},
                }
        return out

    def write_csv(self, path, comment: str | None = None) -> None:
        """Write the table back out; ``load_csv`` of the result reproduces it.

        ``comment`` becomes a leading ``#`` line that the loader skips.
        """
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh)
            writer.writerow(self.column_names)
            cats = {j: c.levels for j, c in enumerate(self.schema) if c.role == CATEGORICAL}
            for row in self.data:
                writer.writerow(
                    [cats[j][int(x)] if j in cats else repr(float(x)) for j, x in enumerate(row)]
                )


@dataclass(frozen=True)
class FeatureSubset:
    """Ordered, duplicate-free column positions; may be empty."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise ValueError("column indices must be nonnegative")
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate column indices in subset")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_names(cls, table: DataTable, names) -> "FeatureSubset":
        return cls(tuple(table.column_index(n) for n in names))

    def names(self, table: DataTable) -> tuple[str, ...]:
        return tuple(table.schema[i].name for i in self.indices)

    def complement(self, n_columns: int) -> tuple[int, ...]:
        present = set(self.indices)
        return tuple(j for j in range(n_columns) if j not in present)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


def _parse_number(field: str) -> float | None:
    """Parse a finite decimal number (scientific notation allowed), else None."""
    try:
        x = float(field)
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def load_csv(path, schema_hint: dict[str, str] | None = None,
             drop_incomplete: bool = False) -> DataTable:
    """Load an RFC-4180 style CSV with a header row into a :class:`DataTable`.

    Columns where every field parses as a finite decimal number become
    numeric; all others become categorical with levels ordered by first
    appearance. ``schema_hint`` maps column names to roles and overrides the
    inference. Empty fields are missing values: an error by default, or the
    whole row is dropped (and counted) when ``drop_incomplete`` is set.
    Leading lines starting with ``#`` are skipped.
    """
    try:
        with open(path, "r", newline="", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    lines = text.splitlines(keepends=True)
    skipped = 0
    while skipped < len(lines) and lines[skipped].startswith("#"):
        skipped += 1
    reader = csv.reader(io.StringIO("".join(lines[skipped:])))

    header = next(reader, None)
    if header is None or header == []:
        raise IngestError(f"{path}: empty file")
    if any(not name for name in header):
        raise IngestError(f"{path}: empty column name in header")
    if len(set(header)) != len(header):
        raise IngestError(f"{path}: duplicate column names in header")

    if schema_hint:
        unknown = set(schema_hint) - set(header)
        if unknown:
            raise IngestError(f"{path}: schema hint names unknown columns {sorted(unknown)}")
        for name, role in schema_hint.items():
            if role not in (NUMERIC, CATEGORICAL):
                raise IngestError(f"{path}: bad role {role!r} for column {name!r}")

    records: list[list[str]] = []
    dropped = 0
    for rec in reader:
        if not rec:
            continue
        line = reader.line_num + skipped
        if len(rec) != len(header):
            raise IngestError(f"{path}: line {line}: expected {len(header)} fields, got {len(rec)}")
        missing = [header[i] for i, f in enumerate(rec) if f == ""]
        if missing:
            if drop_incomplete:
                dropped += 1
                continue
            raise IngestError(f"{path}: line {line}: missing value in column {missing[0]!r}")
        records.append(rec)
    if not records:
        raise IngestError(f"{path}: no data rows")

    n, p = len(records), len(header)
    schema: list[ColumnSpec] = []
    matrix = np.empty((n, p), dtype=np.float64)
    for j, name in enumerate(header):
        fields = [rec[j] for rec in records]
        parsed = [_parse_number(f) for f in fields]
        role = schema_hint.get(name) if schema_hint else None
        if role is None:
            role = NUMERIC if all(x is not None for x in parsed) else CATEGORICAL
        if role == NUMERIC:
            for i, x in enumerate(parsed):
                if x is None:
                    raise IngestError(f"{path}: column {name!r}: value {fields[i]!r} is not numeric")
                matrix[i, j] = x
            schema.append(ColumnSpec(name, NUMERIC))
        else:
            levels: list[str] = []
            index: dict[str, int] = {}
            for i, f in enumerate(fields):
                if f not in index:
                    index[f] = len(levels)
                    levels.append(f)
                matrix[i, j] = index[f]
            schema.append(ColumnSpec(name, CATEGORICAL, tuple(levels)))

    return DataTable(schema, matrix, dropped_rows=dropped)


def quantile_grid(table: DataTable, column: int | str, g: int) -> np.ndarray:
    """Grid of evaluation values for a numeric column.

    Returns the sorted distinct values when there are at most ``g`` of them,
    otherwise ``g`` empirical quantiles at probabilities ``k/(g-1)`` with
    linear interpolation between order statistics, duplicates collapsed. The
    result is strictly increasing and bounded by the column min and max.
    """
    j = table.column_index(column)
    if table.schema[j].role != NUMERIC:
        raise TypeError(f"column {table.schema[j].name!r} is categorical; a quantile grid needs a numeric column")
    if g < 2:
        raise ValueError("grid size must be at least 2")
    values = table.data[:, j]
    distinct = np.unique(values)
    if distinct.size <= g:
        return distinct
    qs = np.quantile(values, np.linspace(0.0, 1.0, g), method="linear")
    return np.unique(qs)
