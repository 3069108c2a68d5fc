"""Tabular data ingestion, schemas, splitting, normalization and binning.

A :class:`Table` stores one numpy array per attribute: ``float64`` values for
numerical attributes and ``int64`` category codes (positions in the schema
domain) for categorical ones. Everything downstream works on these arrays.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

NUMERICAL = "numerical"
CATEGORICAL = "categorical"
KINDS = (NUMERICAL, CATEGORICAL)

BINARY = "binary_classification"
MULTICLASS = "multiclass_classification"
REGRESSION = "regression"
TASKS = (BINARY, MULTICLASS, REGRESSION)


class SchemaError(ValueError):
    """Schema is inconsistent or does not match a data file."""


class ParseError(ValueError):
    """A cell could not be parsed to its attribute kind."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DomainError(ValueError):
    """A value lies outside its attribute domain."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class AttributeSpec:
    """One typed column.

    ``domain`` is ``(lo, hi)`` for numerical attributes and a tuple of
    distinct string labels for categorical ones.
    """

    name: str
    kind: str
    domain: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NUMERICAL:
            if len(self.domain) != 2:
                raise SchemaError(f"attribute {self.name!r}: numerical domain must be [lo, hi]")
            lo, hi = (float(v) for v in self.domain)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise SchemaError(f"attribute {self.name!r}: invalid interval [{lo}, {hi}]")
            object.__setattr__(self, "domain", (lo, hi))
        else:
            labels = tuple(str(v) for v in self.domain)
            if not labels or any(lab == "" for lab in labels):
                raise SchemaError(f"attribute {self.name!r}: categorical labels must be non-empty")
            if len(set(labels)) != len(labels):
                raise SchemaError(f"attribute {self.name!r}: duplicate categorical labels")
            object.__setattr__(self, "domain", labels)

    @property
    def is_numerical(self) -> bool:
        return self.kind == NUMERICAL

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "domain": list(self.domain)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributeSpec":
        return cls(name=str(d["name"]), kind=str(d["kind"]), domain=tuple(d["domain"]))


@dataclass(frozen=True)
class Schema:
    attributes: tuple
    target: str
    task: str
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        attrs = tuple(self.attributes)
        object.__setattr__(self, "attributes", attrs)
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        object.__setattr__(self, "_index", {a.name: a for a in attrs})
        if self.target not in self._index:
            raise SchemaError(f"target {self.target!r} is not an attribute")
        if self.task not in TASKS:
            raise SchemaError(f"unknown task {self.task!r}")
        target = self._index[self.target]
        if self.task == REGRESSION and not target.is_numerical:
            raise SchemaError("regression requires a numerical target")
        if self.task != REGRESSION and not target.is_categorical:
            raise SchemaError("classification requires a categorical target")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def numerical(self) -> list[str]:
        return [a.name for a in self.attributes if a.is_numerical]

    @property
    def categorical(self) -> list[str]:
        return [a.name for a in self.attributes if a.is_categorical]

    @property
    def features(self) -> list[str]:
        return [a.name for a in self.attributes if a.name != self.target]

    def __getitem__(self, name: str) -> AttributeSpec:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no attribute named {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.attributes)

    def replace(self, **specs: AttributeSpec) -> "Schema":
        """Return a copy with some attribute specs swapped (task is re-derived if needed)."""
        attrs = tuple(specs.get(a.name, a) for a in self.attributes)
        target = specs.get(self.target, self[self.target])
        task = self.task
        if target.is_categorical and task == REGRESSION:
            task = BINARY if len(target.domain) == 2 else MULTICLASS
        return Schema(attrs, self.target, task)

    def to_dict(self) -> dict:
        return {
            "attributes": [a.to_dict() for a in self.attributes],
            "target": self.target,
            "task": self.task,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Schema":
        return cls(tuple(AttributeSpec.from_dict(a) for a in d["attributes"]), d["target"], d["task"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Schema":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class Table:
    """Immutable rectangular dataset bound to a :class:`Schema`.

    Parameters
    ----------
    schema : Schema
    columns : mapping of attribute name to array
        Numerical columns are converted to float64; categorical columns must
        already be integer codes into ``schema[name].domain``.
    check_domain : bool
        When False, numerical values outside ``[lo, hi]`` are accepted. This is
        used for normalized tables and for output of external synthesizers.
    """

    __slots__ = ("schema", "_columns", "_n")

    def __init__(self, schema: Schema, columns: Mapping[str, np.ndarray], *, check_domain: bool = True):
        missing = [n for n in schema.names if n not in columns]
        if missing:
            raise SchemaError(f"missing columns: {missing}")
        cols = {}
        n = None
        for attr in schema.attributes:
            col = np.asarray(columns[attr.name])
            if col.ndim != 1:
                raise ValueError(f"column {attr.name!r} must be one-dimensional")
            if attr.is_numerical:
                col = col.astype(np.float64, copy=True)
                if not np.all(np.isfinite(col)):
                    bad = int(np.flatnonzero(~np.isfinite(col))[0])
                    raise ParseError(f"non-finite value in column {attr.name!r} at row {bad}", bad, attr.name)
                if check_domain and col.size:
                    lo, hi = attr.domain
                    out = np.flatnonzero((col < lo) | (col > hi))
                    if out.size:
                        r = int(out[0])
                        raise DomainError(
                            f"value {col[r]!r} at row {r}, column {attr.name!r} outside [{lo}, {hi}]",
                            r, attr.name,
                        )
            else:
                col = col.astype(np.int64, copy=True)
                out = np.flatnonzero((col < 0) | (col >= len(attr.domain)))
                if out.size:
                    r = int(out[0])
                    raise DomainError(f"invalid category code at row {r}, column {attr.name!r}", r, attr.name)
            col.setflags(write=False)
            if n is None:
                n = col.size
            elif col.size != n:
                raise ValueError("columns have different lengths")
            cols[attr.name] = col
        self.schema = schema
        self._columns = cols
        self._n = 0 if n is None else n

    # construction -----------------------------------------------------

    @classmethod
    def from_records(cls, schema: Schema, records: Iterable[Sequence], **kw) -> "Table":
        """Build from rows of decoded values (labels for categorical attributes)."""
        rows = list(records)
        cols = {}
        for j, attr in enumerate(schema.attributes):
            raw = [r[j] for r in rows]
            if attr.is_numerical:
                cols[attr.name] = np.asarray(raw, dtype=np.float64)
            else:
                lookup = {lab: i for i, lab in enumerate(attr.domain)}
                codes = np.empty(len(raw), dtype=np.int64)
                for i, v in enumerate(raw):
                    try:
                        codes[i] = lookup[str(v)]
                    except KeyError:
                        raise DomainError(
                            f"category {v!r} at row {i}, column {attr.name!r} not in domain", i, attr.name
                        ) from None
                cols[attr.name] = codes
        return cls(schema, cols, **kw)

    @classmethod
    def from_frame(cls, schema: Schema, frame: pd.DataFrame, **kw) -> "Table":
        return cls.from_records(schema, frame[schema.names].itertuples(index=False, name=None), **kw)

    # access -----------------------------------------------------------

    def __len__(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return f"Table(rows={self._n}, attributes={self.schema.names})"

    def column(self, name: str) -> np.ndarray:
        """Raw column: floats for numerical, codes for categorical (read-only)."""
        return self._columns[name]

    def labels(self, name: str) -> np.ndarray:
        attr = self.schema[name]
        col = self._columns[name]
        if attr.is_numerical:
            return col
        return np.asarray(attr.domain, dtype=object)[col]

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        """Stack columns into a float matrix (categorical codes as floats)."""
        names = self.schema.names if names is None else list(names)
        if not names:
            return np.empty((self._n, 0))
        return np.column_stack([self._columns[n].astype(np.float64) for n in names])

    def records(self) -> list[tuple]:
        cols = [self.labels(n) for n in self.schema.names]
        return [tuple(c[i] if isinstance(c[i], str) else c[i].item() for c in cols) for i in range(self._n)]

    def take(self, indices) -> "Table":
        idx = np.asarray(indices, dtype=np.int64)
        return self._derive({n: c[idx] for n, c in self._columns.items()})

    def with_columns(self, schema: Schema | None = None, *, check_domain: bool = False, **columns) -> "Table":
        cols = dict(self._columns)
        cols.update(columns)
        return Table(schema or self.schema, cols, check_domain=check_domain)

    def _derive(self, cols) -> "Table":
        # rows come from an already validated table
        t = object.__new__(Table)
        for c in cols.values():
            c.setflags(write=False)
        t.schema = self.schema
        t._columns = cols
        t._n = len(next(iter(cols.values()))) if cols else 0
        return t

    def equals(self, other: "Table") -> bool:
        return (
            self.schema == other.schema
            and len(self) == len(other)
            and all(np.array_equal(self._columns[n], other._columns[n]) for n in self.schema.names)
        )

    @staticmethod
    def concat(tables: Sequence["Table"]) -> "Table":
        first = tables[0]
        cols = {n: np.concatenate([t.column(n) for t in tables]) for n in first.schema.names}
        return first._derive(cols)

    # serialization ----------------------------------------------------

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({n: self.labels(n) for n in self.schema.names})

    def to_csv(self, path=None) -> str | None:
        buf = io.StringIO()
        self.to_frame().to_csv(buf, index=False, float_format="%.17g", lineterminator="\n")
        text = buf.getvalue()
        if path is None:
            return text
        Path(path).write_text(text, encoding="utf-8")
        return None

    def fingerprint(self) -> str:
        h = hashlib.sha256(json.dumps(self.schema.to_dict(), sort_keys=True).encode("utf-8"))
        for name in self.schema.names:
            h.update(np.ascontiguousarray(self._columns[name]).tobytes())
        return h.hexdigest()


# ----------------------------------------------------------------------
# CSV ingestion


def _read_raw(csv_path) -> pd.DataFrame:
    path = Path(csv_path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path} is empty") from None
    return frame


def load_table(csv_path, schema: Schema) -> Table:
    """Read a CSV file and validate every cell against ``schema``.

    Row numbers in error messages are 1-based data rows (the header is row 0).
    """
    frame = _read_raw(csv_path)
    header = list(frame.columns)
    if sorted(header) != sorted(schema.names) or len(header) != len(schema.names):
        missing = sorted(set(schema.names) - set(header))
        extra = sorted(set(header) - set(schema.names))
        raise SchemaError(f"header mismatch: missing {missing}, unexpected {extra}")
    cols = {}
    for attr in schema.attributes:
        raw = frame[attr.name].tolist()
        if attr.is_numerical:
            vals = np.empty(len(raw))
            lo, hi = attr.domain
            for i, tok in enumerate(raw):
                try:
                    v = float(tok)
                except ValueError:
                    raise ParseError(
                        f"row {i + 1}, column {attr.name!r}: cannot parse {tok!r} as a number", i + 1, attr.name
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(f"row {i + 1}, column {attr.name!r}: non-finite value", i + 1, attr.name)
                if v < lo or v > hi:
                    raise DomainError(
                        f"row {i + 1}, column {attr.name!r}: {v} outside [{lo}, {hi}]", i + 1, attr.name
                    )
                vals[i] = v
            cols[attr.name] = vals
        else:
            lookup = {lab: k for k, lab in enumerate(attr.domain)}
            codes = np.empty(len(raw), dtype=np.int64)
            for i, tok in enumerate(raw):
                k = lookup.get(tok.strip())
                if k is None:
                    raise DomainError(
                        f"row {i + 1}, column {attr.name!r}: category {tok!r} not in domain", i + 1, attr.name
                    )
                codes[i] = k
            cols[attr.name] = codes
    return Table(schema, cols)


def _as_float(tok: str):
    try:
        v = float(tok)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def infer_schema(csv_path, target: str, categorical_threshold: int = 10, task: str | None = None) -> Schema:
    """Guess attribute kinds from a CSV file.

    A column becomes categorical when it has at most ``categorical_threshold``
    distinct values or contains any non-numeric token; otherwise it is
    numerical with the observed ``[min, max]`` as domain.
    """
    frame = _read_raw(csv_path)
    if frame.shape[0] == 0:
        raise ValueError(f"{csv_path} has no data rows")
    if target not in frame.columns:
        raise SchemaError(f"target column {target!r} not found")
    attrs = []
    for name in frame.columns:
        toks = [t.strip() for t in frame[name].tolist()]
        if any(t == "" for t in toks):
            raise ValueError(f"column {name!r} has blank cells; missing values are not supported")
        floats = [_as_float(t) for t in toks]
        distinct = sorted(set(toks))
        if any(f is None for f in floats) or len(distinct) <= categorical_threshold:
            if all(f is not None for f in floats):
                distinct.sort(key=float)
            attrs.append(AttributeSpec(name, CATEGORICAL, tuple(distinct)))
        else:
            attrs.append(AttributeSpec(name, NUMERICAL, (min(floats), max(floats))))
    tgt = next(a for a in attrs if a.name == target)
    if task is None:
        if tgt.is_numerical:
            task = REGRESSION
        else:
            task = BINARY if len(tgt.domain) == 2 else MULTICLASS
    return Schema(tuple(attrs), target, task)


# ----------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class DataSplit:
    train: Table
    validation: Table
    test: Table
    seed: int


def split(table: Table, seed: int) -> DataSplit:
    """Shuffle and partition into train / validation / test (64/16/20).

    ``|test| = round(0.2 n)`` and ``|validation| = round(0.2 (n - |test|))``.
    """
    n = len(table)
    if n < 10:
        raise ValueError(f"need at least 10 rows to split, got {n}")
    n_test = round(0.2 * n)
    n_val = round(0.2 * (n - n_test))
    if min(n_test, n_val, n - n_test - n_val) < 1:
        raise ValueError("table too small for a three-way split")
    perm = np.random.default_rng(seed).permutation(n)
    test = perm[:n_test]
    val = perm[n_test:n_test + n_val]
    train = perm[n_test + n_val:]
    return DataSplit(table.take(train), table.take(val), table.take(test), int(seed))


# ----------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormalizationParams:
    """Per numerical attribute ``(lo, hi)`` used for min-max scaling."""

    bounds: dict

    def scale(self, name: str, values: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[name]
        if hi == lo:
            return np.zeros_like(values, dtype=np.float64)
        return (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)

    def unscale(self, name: str, values: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[name]
        return np.asarray(values, dtype=np.float64) * (hi - lo) + lo

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.bounds.items()}


def fit_normalization(table: Table) -> NormalizationParams:
    bounds = {}
    for name in table.schema.numerical:
        col = table.column(name)
        bounds[name] = (float(col.min()), float(col.max())) if col.size else table.schema[name].domain
    return NormalizationParams(bounds)


def _normalized_schema(schema: Schema, params: NormalizationParams) -> Schema:
    specs = {}
    for name in schema.numerical:
        lo, hi = params.bounds[name]
        specs[name] = AttributeSpec(name, NUMERICAL, (0.0, 0.0 if hi == lo else 1.0))
    return schema.replace(**specs)


def normalize(table: Table, params: NormalizationParams | None = None) -> tuple[Table, NormalizationParams]:
    """Min-max scale numerical attributes.

    With ``params`` given (typically fitted on real data) values outside the
    fitted range map outside ``[0, 1]``; they are not clipped. Constant
    attributes map to 0.
    """
    if params is None:
        params = fit_normalization(table)
    schema = _normalized_schema(table.schema, params)
    cols = {n: params.scale(n, table.column(n)) for n in table.schema.numerical}
    return table.with_columns(schema, check_domain=False, **cols), params


def denormalize(table: Table, params: NormalizationParams, schema: Schema) -> Table:
    cols = {n: params.unscale(n, table.column(n)) for n in schema.numerical}
    return table.with_columns(schema, check_domain=False, **cols)


# ----------------------------------------------------------------------
# discretization


@dataclass(frozen=True)
class BinEdges:
    """Equal-width bin edges per numerical attribute."""

    edges: dict

    def midpoints(self, name: str) -> np.ndarray:
        e = self.edges[name]
        return 0.5 * (e[:-1] + e[1:])


def bin_index(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    if hi == lo:
        return np.zeros(len(values), dtype=np.int64)
    idx = np.floor((np.asarray(values) - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def discretize(table: Table, bins: int) -> tuple[Table, BinEdges]:
    """Replace every numerical attribute by equal-width bins over its domain.

    Bin ``k`` is labelled ``"bin<k>"``; :meth:`BinEdges.midpoints` maps labels
    back to interval midpoints.
    """
    if not 2 <= bins <= 1024:
        raise ValueError(f"bins must be in [2, 1024], got {bins}")
    specs, cols, edges = {}, {}, {}
    for name in table.schema.numerical:
        lo, hi = table.schema[name].domain
        edges[name] = np.linspace(lo, hi, bins + 1)
        specs[name] = AttributeSpec(name, CATEGORICAL, tuple(f"bin{k}" for k in range(bins)))
        cols[name] = bin_index(table.column(name), lo, hi, bins)
    schema = table.schema.replace(**specs)
    return table.with_columns(schema, check_domain=True, **cols), BinEdges(edges)


def undiscretize(table: Table, edges: BinEdges, schema: Schema) -> Table:
    """Map each bin back to its midpoint under the original ``schema``."""
    cols = {n: edges.midpoints(n)[table.column(n)] for n in edges.edges}
    return table.with_columns(schema, check_domain=True, **cols)
