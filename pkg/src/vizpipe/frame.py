"""Immutable columnar table.

Columns are numpy-backed and read-only after construction; frame operations
(append, project, sample) share column storage instead of copying. Three
dtypes cover every pipeline this engine runs: float64, int64, and
dictionary-encoded categoricals. Booleans are stored as int64 {0,1} and
calendar dates as their ISO strings (categorical) or epoch-day int64.

Null handling: a column may carry a validity mask (True = value present).
Payload slots under a null are canonicalized (NaN / 0 / code 0) so that
equal frames are bit-equal.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DuplicateName, LengthMismatch, UnknownColumn

FLOAT64 = "float64"
INT64 = "int64"
CATEGORICAL = "categorical"

_DTYPES = (FLOAT64, INT64, CATEGORICAL)


def _freeze(arr: np.ndarray) -> np.ndarray:
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


class Column:
    """One named, typed, optionally-nullable column."""

    __slots__ = ("name", "dtype", "values", "valid", "dictionary")

    def __init__(
        self,
        name: str,
        dtype: str,
        values: np.ndarray,
        valid: np.ndarray | None = None,
        dictionary: tuple[str, ...] | None = None,
    ):
        if dtype not in _DTYPES:
            raise ValueError(f"unsupported dtype {dtype!r}")
        if dtype == CATEGORICAL:
            if dictionary is None:
                raise ValueError("categorical column requires a dictionary")
            values = np.ascontiguousarray(values, dtype=np.uint32)
        elif dtype == FLOAT64:
            values = np.ascontiguousarray(values, dtype=np.float64)
            dictionary = None
        else:
            values = np.ascontiguousarray(values, dtype=np.int64)
            dictionary = None
        if valid is not None:
            valid = np.ascontiguousarray(valid, dtype=bool)
            if valid.shape != values.shape:
                raise LengthMismatch("validity mask length differs from values")
            if valid.all():
                valid = None
            else:
                # canonical fill under nulls keeps encode() deterministic
                values = values.copy()
                if dtype == FLOAT64:
                    values[~valid] = np.nan
                else:
                    values[~valid] = 0
                valid = _freeze(valid)
        if dtype == CATEGORICAL:
            # codes only need to be in range where the value is present
            live = values if valid is None else values[valid]
            if live.size and (not dictionary or live.max() >= len(dictionary)):
                raise ValueError("categorical code out of dictionary range")
        self.name = name
        self.dtype = dtype
        self.values = _freeze(values)
        self.valid = valid
        self.dictionary = tuple(dictionary) if dictionary is not None else None

    @property
    def row_count(self) -> int:
        return int(self.values.shape[0])

    @property
    def has_nulls(self) -> bool:
        return self.valid is not None

    def null_count(self) -> int:
        return 0 if self.valid is None else int((~self.valid).sum())

    def valid_mask(self) -> np.ndarray:
        """Validity as a bool array (all True when no mask is stored)."""
        if self.valid is not None:
            return self.valid
        return np.ones(self.row_count, dtype=bool)

    def take(self, indices: np.ndarray) -> "Column":
        """New column with rows gathered at `indices` (copies payload)."""
        valid = self.valid[indices] if self.valid is not None else None
        return Column(self.name, self.dtype, self.values[indices], valid, self.dictionary)

    def rename(self, name: str) -> "Column":
        col = Column.__new__(Column)
        col.name = name
        col.dtype = self.dtype
        col.values = self.values
        col.valid = self.valid
        col.dictionary = self.dictionary
        return col

    def to_list(self) -> list:
        """Python values with None for nulls; categoricals as their labels."""
        valid = self.valid
        if self.dtype == CATEGORICAL:
            out = [self.dictionary[c] if valid is None or valid[i] else None
                   for i, c in enumerate(self.values)]
            return out
        elif self.dtype == FLOAT64:
            out = [float(v) for v in self.values]
        else:
            out = [int(v) for v in self.values]
        if valid is not None:
            out = [v if ok else None for v, ok in zip(out, valid)]
        return out

    def equals(self, other: "Column") -> bool:
        if (
            self.name != other.name
            or self.dtype != other.dtype
            or self.dictionary != other.dictionary
            or self.row_count != other.row_count
        ):
            return False
        if (self.valid is None) != (other.valid is None):
            return False
        if self.valid is not None and not np.array_equal(self.valid, other.valid):
            return False
        # canonical null fill makes a plain byte compare sound (NaN included)
        return self.values.tobytes() == other.values.tobytes()

    def __repr__(self) -> str:
        nulls = f", nulls={self.null_count()}" if self.has_nulls else ""
        return f"Column({self.name!r}, {self.dtype}, n={self.row_count}{nulls})"


def float_column(name: str, values: Iterable, valid=None) -> Column:
    return Column(name, FLOAT64, np.asarray(list(values), dtype=np.float64), _as_mask(valid))


def int_column(name: str, values: Iterable, valid=None) -> Column:
    return Column(name, INT64, np.asarray(list(values), dtype=np.int64), _as_mask(valid))


def categorical_column(name: str, labels: Iterable[str | None]) -> Column:
    """Build a categorical column from raw labels; dictionary is lexicographic."""
    labels = list(labels)
    valid = np.array([v is not None for v in labels], dtype=bool)
    dictionary = sorted({v for v in labels if v is not None})
    index = {v: i for i, v in enumerate(dictionary)}
    codes = np.array([index[v] if v is not None else 0 for v in labels], dtype=np.uint32)
    return Column(name, CATEGORICAL, codes, valid if not valid.all() else None, tuple(dictionary))


def _as_mask(valid) -> np.ndarray | None:
    if valid is None:
        return None
    return np.asarray(list(valid), dtype=bool)


def column_from_values(name: str, values: Sequence) -> Column:
    """Infer dtype from Python values (None = null): ints -> int64, numbers ->
    float64, bools -> int64 {0,1}, anything else -> categorical of str()."""
    present = [v for v in values if v is not None]
    valid = [v is not None for v in values]
    mask = None if all(valid) else valid
    if all(isinstance(v, bool) for v in present) and present:
        return int_column(name, [int(bool(v)) for v in values], mask)
    if all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in present):
        return int_column(name, [0 if v is None else int(v) for v in values], mask)
    if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in present):
        return float_column(name, [np.nan if v is None else float(v) for v in values], mask)
    return categorical_column(name, [None if v is None else str(v) for v in values])


class DataFrame:
    """Ordered collection of equal-length columns with unique names."""

    __slots__ = ("_columns", "_index", "_row_count")

    def __init__(self, columns: Sequence[Column], row_count: int | None = None):
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise DuplicateName("duplicate column names in frame")
        if columns:
            counts = {c.row_count for c in columns}
            if len(counts) != 1:
                raise LengthMismatch(f"column row counts disagree: {sorted(counts)}")
            inferred = counts.pop()
            if row_count is not None and row_count != inferred:
                raise LengthMismatch("row_count does not match columns")
            row_count = inferred
        else:
            row_count = int(row_count or 0)
        self._columns = tuple(columns)
        self._index = {c.name: i for i, c in enumerate(columns)}
        self._row_count = row_count

    @property
    def columns(self) -> tuple[Column, ...]:
        return self._columns

    @property
    def names(self) -> list[str]:
        return [c.name for c in self._columns]

    @property
    def row_count(self) -> int:
        return self._row_count

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def column(self, name: str) -> Column:
        try:
            return self._columns[self._index[name]]
        except KeyError:
            raise UnknownColumn(name) from None

    def numeric_names(self) -> list[str]:
        return [c.name for c in self._columns if c.dtype != CATEGORICAL]

    def append_column(self, col: Column) -> "DataFrame":
        """Frame with `col` appended; existing column storage is shared."""
        if col.row_count != self._row_count:
            raise LengthMismatch(
                f"column {col.name!r} has {col.row_count} rows, frame has {self._row_count}"
            )
        if col.name in self._index:
            raise DuplicateName(f"column {col.name!r} already present")
        return DataFrame(self._columns + (col,))

    def project(self, names: Sequence[str]) -> "DataFrame":
        """Frame with the named columns in the requested order (storage shared)."""
        return DataFrame([self.column(n) for n in names], row_count=self._row_count)

    def take(self, indices: np.ndarray) -> "DataFrame":
        indices = np.asarray(indices, dtype=np.int64)
        return DataFrame([c.take(indices) for c in self._columns], row_count=len(indices))

    def sample_rows(self, n: int, seed: int = 0) -> "DataFrame":
        """Uniform sample of n rows without replacement, original order kept.

        Returns the frame unchanged when n >= row_count. Deterministic for a
        fixed seed.
        """
        if n < 1:
            raise ValueError("sample size must be >= 1")
        if n >= self._row_count:
            return self
        rng = np.random.default_rng(seed)
        idx = rng.choice(self._row_count, size=n, replace=False)
        idx.sort()
        return self.take(idx)

    def to_dict(self) -> dict[str, list]:
        """Column-oriented plain-Python export (None for nulls)."""
        return {c.name: c.to_list() for c in self._columns}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence]) -> "DataFrame":
        cols = [column_from_values(name, list(values)) for name, values in data.items()]
        return cls(cols)

    def equals(self, other: "DataFrame") -> bool:
        if self.names != other.names or self._row_count != other._row_count:
            return False
        return all(a.equals(b) for a, b in zip(self._columns, other._columns))

    def __repr__(self) -> str:
        return f"DataFrame({self._row_count} rows: {', '.join(self.names)})"
