"""Rectangular datasets with per-cell missingness.

A :class:`MaskedDataset` stores every cell as a float64: numeric payloads
directly, categorical payloads as indices into the column's level list, and
missing cells as NaN.  The boolean ``mask`` (True = missing) always agrees
with the NaN pattern.  Datasets are immutable after construction; engines
produce new :class:`CompletedDataset` objects instead of mutating inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import IngestionError, ParseError

DEFAULT_NA_TOKEN = "NA"


@dataclass(frozen=True)
class Numeric:
    """Marker kind for real-valued columns."""


@dataclass(frozen=True)
class Categorical:
    """Kind for label columns; cell values index into ``levels``."""

    levels: tuple[str, ...]

    def __post_init__(self):
        if len(self.levels) == 0:
            raise IngestionError("categorical column needs at least one level")
        if len(set(self.levels)) != len(self.levels):
            raise IngestionError("categorical levels must be unique")


ColumnKind = Union[Numeric, Categorical]


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind

    @property
    def is_categorical(self) -> bool:
        return isinstance(self.kind, Categorical)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _check_cells(values: np.ndarray, mask: np.ndarray, columns: Sequence[Column]) -> None:
    if values.ndim != 2:
        raise IngestionError("cell matrix must be 2-D")
    n, d = values.shape
    if n == 0:
        raise IngestionError("dataset has no rows")
    if d != len(columns):
        raise IngestionError(f"{d} data columns but {len(columns)} column specs")
    if mask.shape != values.shape:
        raise IngestionError("mask shape differs from cell shape")
    if not np.array_equal(np.isnan(values), mask):
        raise IngestionError("mask does not match NaN pattern of cells")
    for j, col in enumerate(columns):
        obs = values[~mask[:, j], j]
        if obs.size == 0:
            raise IngestionError(f"column {col.name!r} is entirely missing")
        if isinstance(col.kind, Categorical):
            k = len(col.kind.levels)
            if not np.all((obs == np.floor(obs)) & (obs >= 0) & (obs < k)):
                raise IngestionError(f"column {col.name!r} holds invalid level indices")
        else:
            if not np.all(np.isfinite(obs)):
                raise IngestionError(f"column {col.name!r} holds non-finite values")


class MaskedDataset:
    """Immutable dataset with missing cells (NaN) and their mask."""

    def __init__(self, values: np.ndarray, columns: Sequence[Column], mask: Optional[np.ndarray] = None):
        values = np.array(values, dtype=np.float64)
        if mask is None:
            mask = np.isnan(values)
        mask = np.array(mask, dtype=bool)
        columns = tuple(columns)
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise IngestionError("duplicate column names")
        _check_cells(values, mask, columns)
        self.values = _freeze(values)
        self.mask = _freeze(mask)
        self.columns = columns

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(f"no column named {name!r}")

    def is_categorical(self) -> np.ndarray:
        return np.array([c.is_categorical for c in self.columns], dtype=bool)

    def n_missing(self) -> int:
        return int(self.mask.sum())


class CompletedDataset:
    """A fully observed copy of a dataset plus the mask of filled cells."""

    def __init__(
        self,
        values: np.ndarray,
        columns: Sequence[Column],
        imputed_mask: np.ndarray,
        notes: Optional[dict] = None,
    ):
        values = np.array(values, dtype=np.float64)
        imputed_mask = np.array(imputed_mask, dtype=bool)
        columns = tuple(columns)
        if np.isnan(values).any():
            raise IngestionError("completed dataset still has missing cells")
        _check_cells(values, np.zeros_like(imputed_mask), columns)
        if imputed_mask.shape != values.shape:
            raise IngestionError("imputed_mask shape differs from cell shape")
        self.values = _freeze(values)
        self.imputed_mask = _freeze(imputed_mask)
        self.columns = columns
        self.notes = dict(notes or {})

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(f"no column named {name!r}")


Dataset = Union[MaskedDataset, CompletedDataset]


@dataclass(frozen=True)
class PatternGroup:
    pattern: tuple[int, ...]
    rows: tuple[int, ...]


@dataclass(frozen=True)
class PatternTable:
    groups: tuple[PatternGroup, ...]


@dataclass(frozen=True)
class ColumnStats:
    """Observed-cell summary: mean (numeric) or modal level index, sample sd
    (NaN when undefined), and observed count."""

    center: float
    sd: float
    n_obs: int


def mask_of(ds: MaskedDataset) -> np.ndarray:
    """0/1 missingness matrix, 1 where the cell is missing."""
    return ds.mask.astype(np.int64)


def patterns(ds: MaskedDataset) -> PatternTable:
    """Group rows by identical mask rows, ordered lexicographically."""
    by_pattern: dict[tuple[int, ...], list[int]] = {}
    for i in range(ds.n_rows):
        key = tuple(int(v) for v in ds.mask[i])
        by_pattern.setdefault(key, []).append(i)
    groups = tuple(
        PatternGroup(pattern=k, rows=tuple(v)) for k, v in sorted(by_pattern.items())
    )
    return PatternTable(groups=groups)


def column_stats(ds: MaskedDataset, j: int) -> ColumnStats:
    obs = ds.values[~ds.mask[:, j], j]
    if obs.size == 0:
        raise IngestionError(f"column {ds.columns[j].name!r} has no observed cells")
    if ds.columns[j].is_categorical:
        counts = np.bincount(obs.astype(np.int64), minlength=len(ds.columns[j].kind.levels))
        mode = int(np.argmax(counts))  # first maximum = lowest level index
        return ColumnStats(center=float(mode), sd=float("nan"), n_obs=int(obs.size))
    mean = float(np.mean(obs))
    sd = float(np.std(obs, ddof=1)) if obs.size >= 2 else float("nan")
    return ColumnStats(center=mean, sd=sd, n_obs=int(obs.size))


def _parse_numeric(token: str) -> Optional[float]:
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _normalize_hint(hint) -> Union[str, Categorical, Numeric]:
    if isinstance(hint, (Categorical, Numeric)):
        return hint
    if isinstance(hint, str) and hint in ("numeric", "categorical"):
        return hint
    raise IngestionError(f"bad schema hint {hint!r}")


def read_csv(
    path,
    na_token: str = DEFAULT_NA_TOKEN,
    schema_hint: Optional[Mapping[str, object]] = None,
) -> MaskedDataset:
    """Parse a CSV file with a header row into a :class:`MaskedDataset`.

    Fields equal to ``na_token`` (or empty) are missing.  A column whose
    non-missing tokens all parse as finite reals is numeric; anything else is
    categorical with levels in first-appearance order.  ``schema_hint`` maps
    column names to ``"numeric"``, ``"categorical"``, or explicit kinds and
    overrides detection; tokens outside hinted levels are rejected.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        d = len(header)
        raw_rows: list[list[str]] = []
        for i, row in enumerate(reader, start=1):
            if len(row) != d:
                raise ParseError(f"{path}: row {i} has {len(row)} fields, expected {d}")
            raw_rows.append(row)
    if not raw_rows:
        raise ParseError(f"{path}: no data rows")

    hints = {k: _normalize_hint(v) for k, v in (schema_hint or {}).items()}
    n = len(raw_rows)
    values = np.full((n, d), np.nan, dtype=np.float64)
    columns: list[Column] = []
    for j, name in enumerate(header):
        tokens = [row[j] for row in raw_rows]
        present = [(i, t) for i, t in enumerate(tokens) if t != na_token and t != ""]
        hint = hints.get(name)
        if all(t == na_token or t == "" for t in tokens):
            raise IngestionError(f"{path}: column {name!r} is entirely missing")
        if isinstance(hint, Numeric) or hint == "numeric":
            kind: ColumnKind = Numeric()
        elif isinstance(hint, Categorical):
            kind = hint
        elif hint == "categorical":
            levels: list[str] = []
            for _, t in present:
                if t not in levels:
                    levels.append(t)
            kind = Categorical(tuple(levels))
        else:
            parsed = [_parse_numeric(t) for _, t in present]
            if all(v is not None for v in parsed):
                kind = Numeric()
            else:
                levels = []
                for _, t in present:
                    if t not in levels:
                        levels.append(t)
                kind = Categorical(tuple(levels))
        if isinstance(kind, Numeric):
            for i, t in present:
                v = _parse_numeric(t)
                if v is None:
                    raise IngestionError(
                        f"{path}: column {name!r} hinted numeric but row {i + 1} holds {t!r}"
                    )
                values[i, j] = v
        else:
            index = {lev: k for k, lev in enumerate(kind.levels)}
            for i, t in present:
                if t not in index:
                    raise IngestionError(
                        f"{path}: column {name!r} holds unknown level {t!r} (row {i + 1})"
                    )
                values[i, j] = index[t]
        columns.append(Column(name=name, kind=kind))
    return MaskedDataset(values=values, columns=columns)


def _format_cell(v: float, col: Column) -> str:
    if col.is_categorical:
        return col.kind.levels[int(v)]
    return repr(float(v))  # shortest round-trip decimal


def write_csv(ds: Dataset, path, na_token: str = DEFAULT_NA_TOKEN) -> None:
    """Write a dataset as RFC-4180 CSV; missing cells become ``na_token``."""
    mask = ds.mask if isinstance(ds, MaskedDataset) else np.zeros_like(ds.imputed_mask)
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise ParseError(f"cannot write {path}: {exc}") from exc
    with fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in ds.columns])
        for i in range(ds.n_rows):
            row = [
                na_token if mask[i, j] else _format_cell(ds.values[i, j], col)
                for j, col in enumerate(ds.columns)
            ]
            writer.writerow(row)


def as_completed(ds: MaskedDataset) -> CompletedDataset:
    """View a dataset with no missing cells as a completed dataset."""
    if ds.mask.any():
        raise IngestionError("dataset still has missing cells")
    return CompletedDataset(
        values=ds.values.copy(),
        columns=ds.columns,
        imputed_mask=np.zeros_like(ds.mask),
    )


def numeric_dataset(values: np.ndarray, names: Optional[Iterable[str]] = None) -> MaskedDataset:
    """Build an all-numeric dataset from a (n, d) array (NaN = missing)."""
    values = np.asarray(values, dtype=np.float64)
    if names is None:
        names = [f"X{j + 1}" for j in range(values.shape[1])]
    cols = [Column(name=n, kind=Numeric()) for n in names]
    return MaskedDataset(values=values, columns=cols)
