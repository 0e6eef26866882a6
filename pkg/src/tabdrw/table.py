"""Typed in-memory tables with CSV ingestion and schema inference.

Cells are stored as a float64 matrix. Categorical cells hold integer codes
into the column's codebook so they can be treated numerically when needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CONTINUOUS = "continuous"
DISCRETE = "discrete"
CATEGORICAL = "categorical"

MAX_GRID_DECIMALS = 6


class TableError(ValueError):
    """Raised for malformed tables, schemas or CSV input."""


@dataclass(frozen=True)
class ColumnKind:
    kind: str
    decimals: int = 0
    codebook: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, DISCRETE, CATEGORICAL):
            raise TableError(f"unknown column kind {self.kind!r}")
        if self.decimals < 0:
            raise TableError("discrete decimals must be >= 0")
        if len(set(self.codebook)) != len(self.codebook):
            raise TableError("categorical codebook labels must be unique")

    @classmethod
    def continuous(cls) -> "ColumnKind":
        return cls(CONTINUOUS)

    @classmethod
    def discrete(cls, decimals: int = 0) -> "ColumnKind":
        return cls(DISCRETE, decimals=decimals)

    @classmethod
    def categorical(cls, labels: Iterable[str]) -> "ColumnKind":
        return cls(CATEGORICAL, codebook=tuple(labels))

    @property
    def is_numeric(self) -> bool:
        return self.kind != CATEGORICAL


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: ColumnKind
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise TableError(f"column {self.name!r}: lower bound exceeds upper bound")


@dataclass(frozen=True)
class Table:
    """An N x p matrix of float64 cells plus one ColumnSchema per column."""

    schema: tuple[ColumnSchema, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        schema = tuple(self.schema)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(schema))
        if values.ndim != 2 or values.shape[1] != len(schema):
            raise TableError(
                f"values shape {values.shape} does not match {len(schema)} schema columns"
            )
        if not np.all(np.isfinite(values)):
            raise TableError("table contains NaN or infinite cells")
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise TableError("duplicate column names")
        for j, col in enumerate(schema):
            if col.kind.kind == CATEGORICAL and values.shape[0]:
                codes = values[:, j]
                if (np.any(codes != np.round(codes)) or codes.min() < 0
                        or codes.max() >= len(col.kind.codebook)):
                    raise TableError(f"column {col.name!r}: codes outside the codebook")
        values.setflags(write=False)
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise TableError(f"no column named {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    @property
    def numeric_indices(self) -> list[int]:
        return [j for j, c in enumerate(self.schema) if c.kind.is_numeric]

    @property
    def categorical_indices(self) -> list[int]:
        return [j for j, c in enumerate(self.schema) if not c.kind.is_numeric]

    def with_values(self, values: np.ndarray) -> "Table":
        return Table(self.schema, values)

    def take(self, rows: Sequence[int] | np.ndarray) -> "Table":
        return Table(self.schema, self.values[np.asarray(rows, dtype=np.intp)])

    def labels(self, j: int) -> list[str]:
        book = self.schema[j].kind.codebook
        return [book[int(c)] for c in self.values[:, j]]


def _parse_float(text: str) -> float | None:
    try:
        v = float(text)
    except ValueError:
        return None
    return v


def on_grid(values: np.ndarray, decimals: int) -> bool:
    scaled = np.asarray(values, dtype=np.float64) * 10.0**decimals
    return bool(np.all(np.abs(scaled - np.round(scaled)) <= 1e-9 * np.maximum(1.0, np.abs(scaled))))


def infer_schema(header: Sequence[str], rows: Sequence[Sequence[str]],
                 max_decimals: int = 0) -> list[ColumnSchema]:
    """Infer one ColumnSchema per header entry from raw string cells.

    A column whose cells all parse as finite numbers is numeric. It is
    discrete(d) for the smallest d <= ``max_decimals`` whose grid
    10**-d holds every value, otherwise continuous. Any non-numeric cell
    makes the column categorical with a sorted codebook. Numeric bounds are
    the observed min/max.
    """
    if not header:
        raise TableError("table has zero columns")
    if not rows:
        raise TableError("schema inference needs at least one data row")
    if not 0 <= max_decimals <= MAX_GRID_DECIMALS:
        raise TableError(f"max_decimals must lie in [0, {MAX_GRID_DECIMALS}]")
    schema = []
    for j, name in enumerate(header):
        cells = [r[j] for r in rows]
        parsed = [_parse_float(c) for c in cells]
        if all(v is not None for v in parsed):
            col = np.array(parsed, dtype=np.float64)
            if not np.all(np.isfinite(col)):
                bad = int(np.flatnonzero(~np.isfinite(col))[0])
                raise TableError(f"row {bad + 1}, column {name!r}: NaN or infinite cell")
            kind = ColumnKind.continuous()
            for d in range(max_decimals + 1):
                if on_grid(col, d):
                    kind = ColumnKind.discrete(d)
                    break
            schema.append(ColumnSchema(name, kind, float(col.min()), float(col.max())))
        else:
            schema.append(ColumnSchema(name, ColumnKind.categorical(sorted(set(cells)))))
    return schema


def _read_raw(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableError(f"{path}: missing header row") from None
        rows = []
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise TableError(f"row {lineno}: expected {len(header)} cells, got {len(row)}")
            for j, cell in enumerate(row):
                if cell.strip() == "":
                    raise TableError(f"row {lineno}, column {header[j]!r}: missing value")
            rows.append(row)
    return header, rows


def read_csv(path: str | Path, schema: Sequence[ColumnSchema] | None = None,
             max_decimals: int = 0) -> Table:
    header, rows = _read_raw(path)
    if schema is None:
        if not rows:
            raise TableError(f"{path}: cannot infer a schema without data rows")
        schema = infer_schema(header, rows, max_decimals=max_decimals)
    else:
        schema = list(schema)
        if [c.name for c in schema] != header:
            raise TableError(f"{path}: header {header} does not match schema names")
    values = np.empty((len(rows), len(schema)), dtype=np.float64)
    for j, col in enumerate(schema):
        if col.kind.is_numeric:
            for i, row in enumerate(rows):
                v = _parse_float(row[j])
                if v is None:
                    raise TableError(f"row {i + 1}, column {col.name!r}: cannot parse {row[j]!r}")
                if not math.isfinite(v):
                    raise TableError(f"row {i + 1}, column {col.name!r}: NaN or infinite cell")
                values[i, j] = v
        else:
            lookup = {label: k for k, label in enumerate(col.kind.codebook)}
            for i, row in enumerate(rows):
                try:
                    values[i, j] = lookup[row[j]]
                except KeyError:
                    raise TableError(
                        f"row {i + 1}, column {col.name!r}: label {row[j]!r} not in codebook"
                    ) from None
    return Table(tuple(schema), values)


def format_cell(value: float, kind: ColumnKind) -> str:
    if kind.kind == CATEGORICAL:
        return kind.codebook[int(value)]
    if kind.kind == DISCRETE:
        text = f"{value:.{kind.decimals}f}"
        if float(text) == value:
            return text
    return repr(float(value))


def write_csv(table: Table, path: str | Path) -> None:
    kinds = [c.kind for c in table.schema]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.names)
        for row in table.values:
            writer.writerow([format_cell(v, k) for v, k in zip(row, kinds)])


# Sidecar schema: one line per column, "key=value" fields separated by "; ".

def _fmt_bound(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_schema(schema: Sequence[ColumnSchema], path: str | Path) -> None:
    lines = []
    for col in schema:
        if ";" in col.name or "\n" in col.name:
            raise TableError(f"column name {col.name!r} cannot be stored in a schema file")
        fields = [f"name={col.name}", f"kind={col.kind.kind}",
                  f"decimals={col.kind.decimals}",
                  f"lower={_fmt_bound(col.lower)}", f"upper={_fmt_bound(col.upper)}"]
        if col.kind.kind == CATEGORICAL:
            fields.append("codebook=" + "|".join(col.kind.codebook))
        lines.append("; ".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_schema(path: str | Path) -> list[ColumnSchema]:
    schema = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = {}
        for part in line.split(";"):
            key, sep, value = part.strip().partition("=")
            if not sep:
                raise TableError(f"{path}:{lineno}: expected key=value, got {part.strip()!r}")
            fields[key] = value
        try:
            kind_name = fields["kind"]
            if kind_name == CATEGORICAL:
                labels = fields.get("codebook", "")
                kind = ColumnKind.categorical(labels.split("|") if labels else [])
            elif kind_name == DISCRETE:
                kind = ColumnKind.discrete(int(fields.get("decimals", "0")))
            else:
                kind = ColumnKind(kind_name)
            lower = fields.get("lower", "")
            upper = fields.get("upper", "")
            schema.append(ColumnSchema(fields["name"], kind,
                                       float(lower) if lower else None,
                                       float(upper) if upper else None))
        except KeyError as exc:
            raise TableError(f"{path}:{lineno}: missing field {exc}") from None
    return schema


def with_bounds_from_data(table: Table) -> Table:
    """Fill missing numeric bounds with the observed column range."""
    if table.n_rows == 0:
        return table
    schema = []
    for j, col in enumerate(table.schema):
        if col.kind.is_numeric:
            lo = col.lower if col.lower is not None else float(table.values[:, j].min())
            hi = col.upper if col.upper is not None else float(table.values[:, j].max())
            col = replace(col, lower=lo, upper=hi)
        schema.append(col)
    return Table(tuple(schema), table.values)
