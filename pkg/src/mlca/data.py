"""CSV ingestion, categorical encoding and design matrices.

Missing values are the empty cell and the literal ``NA``. Rows with a
missing item are dropped before any estimation; rows with a missing
covariate are only dropped for the structural step (``filter_for_structural``).
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    DegenerateCovariateError,
    DegenerateItemError,
    EmptyStructuralDataError,
    MissingColumnError,
)

log = logging.getLogger(__name__)

NA_VALUES = ["", "NA"]
INTERCEPT = "(Intercept)"


@dataclass(frozen=True)
class ItemSchema:
    name: str
    categories: tuple

    def __post_init__(self):
        if len(set(self.categories)) != len(self.categories):
            raise DataError(f"item {self.name!r}: duplicate category codes")
        if len(self.categories) < 2:
            raise DegenerateItemError(
                f"item {self.name!r} has a single observed category; "
                "its response probabilities are not identified"
            )

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def encode(self, values) -> np.ndarray:
        lookup = {c: k for k, c in enumerate(self.categories)}
        return np.array([lookup[v] for v in values], dtype=np.int64)

    def decode(self, codes) -> list:
        return [self.categories[int(k)] for k in codes]


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    names: tuple

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded responses with grouping and covariate designs.

    ``group`` holds 0-based group indices; ``Z_high`` has one row per group.
    Covariate matrices may contain NaN until ``filter_for_structural`` is
    applied. ``rows`` maps each unit back to its row in the source table.
    """

    Y: np.ndarray
    items: tuple
    group: np.ndarray
    Z_low: np.ndarray
    Z_high: np.ndarray
    z_names: tuple = (INTERCEPT,)
    zh_names: tuple = (INTERCEPT,)
    group_labels: tuple | None = None
    rows: np.ndarray | None = None
    _n_j: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.int64)
        if Y.ndim != 2 or Y.shape[1] != len(self.items):
            raise DataError("Y must be N x H with one column per item")
        object.__setattr__(self, "Y", Y)
        group = np.asarray(self.group, dtype=np.int64)
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "Z_low", np.asarray(self.Z_low, dtype=float))
        object.__setattr__(self, "Z_high", np.asarray(self.Z_high, dtype=float))
        if self.rows is None:
            object.__setattr__(self, "rows", np.arange(Y.shape[0]))
        J = self.Z_high.shape[0]
        n_j = np.bincount(group, minlength=J)
        if len(n_j) != J or (n_j == 0).any():
            raise DataError("every group needs at least one unit")
        object.__setattr__(self, "_n_j", n_j)
        for h, item in enumerate(self.items):
            col = Y[:, h]
            if col.size and (col.min() < 0 or col.max() >= item.n_categories):
                raise DataError(f"item {item.name!r} has codes outside 0..C-1")
        if self.Z_low.shape != (Y.shape[0], len(self.z_names)):
            raise DataError("Z_low shape does not match N x len(z_names)")
        if self.Z_high.shape[1] != len(self.zh_names):
            raise DataError("Z_high shape does not match J x len(zh_names)")

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @property
    def H(self) -> int:
        return self.Y.shape[1]

    @property
    def J(self) -> int:
        return self.Z_high.shape[0]

    @property
    def n_j(self) -> np.ndarray:
        return self._n_j

    @property
    def n_categories(self) -> list[int]:
        return [item.n_categories for item in self.items]

    @property
    def is_multilevel(self) -> bool:
        return self.group_labels is not None

    @property
    def has_low_covariates(self) -> bool:
        return self.Z_low.shape[1] > 1

    @property
    def has_high_covariates(self) -> bool:
        return self.Z_high.shape[1] > 1

    def intercept_only(self) -> "Dataset":
        """Same units and groups with covariates stripped (measurement view)."""
        return dataclasses.replace(
            self,
            Z_low=np.ones((self.N, 1)),
            Z_high=np.ones((self.J, 1)),
            z_names=(INTERCEPT,),
            zh_names=(INTERCEPT,),
        )

    def subset(self, mask) -> "Dataset":
        """Keep units where ``mask`` is true; empty groups are dropped and reindexed."""
        mask = np.asarray(mask, dtype=bool)
        kept_groups = np.unique(self.group[mask])
        remap = np.full(self.J, -1)
        remap[kept_groups] = np.arange(len(kept_groups))
        labels = None
        if self.group_labels is not None:
            labels = tuple(self.group_labels[g] for g in kept_groups)
        return dataclasses.replace(
            self,
            Y=self.Y[mask],
            group=remap[self.group[mask]],
            Z_low=self.Z_low[mask],
            Z_high=self.Z_high[kept_groups],
            group_labels=labels,
            rows=self.rows[mask],
        )


def load_csv(
    path,
    item_cols: Sequence[str],
    group_col: str | None = None,
    z_cols: Sequence[str] = (),
    zh_cols: Sequence[str] = (),
) -> pd.DataFrame:
    """Read a CSV with a header row, checking that every named column exists.

    Columns whose non-missing cells all parse as numbers become numeric
    (nullable ``Int64`` when integral); the rest stay as strings.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        table = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_values=NA_VALUES,
            encoding="utf-8",
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    wanted = list(item_cols) + ([group_col] if group_col else []) + list(z_cols) + list(zh_cols)
    for col in wanted:
        if col not in table.columns:
            raise MissingColumnError(col)
    for col in table.columns:
        table[col] = _infer_column(table[col])
    return table


def _infer_column(col: pd.Series) -> pd.Series:
    present = col.dropna()
    if present.empty:
        return col
    # astype(float) parses with correct rounding; pd.to_numeric can be off by an ulp
    try:
        numeric = present.astype(float)
    except (TypeError, ValueError):
        return col
    out = col.astype(float)
    if np.all(np.mod(numeric.to_numpy(), 1) == 0):
        return out.astype("Int64")
    return out.astype(float)


def _sort_key(value):
    # numbers before strings so mixed columns still sort deterministically
    if isinstance(value, (int, float, np.integer, np.floating)):
        return (0, float(value), "")
    return (1, 0.0, str(value))


def _levels(col: pd.Series) -> list:
    values = [v.item() if hasattr(v, "item") else v for v in col.dropna().unique()]
    return sorted(values, key=_sort_key)


def encode_items(table: pd.DataFrame, item_cols: Sequence[str]):
    """Encode item columns to 0..C_h-1 codes in sorted order of observed values.

    Returns ``(schemas, Y, missing)`` where ``missing`` flags rows of
    ``table`` with any missing item and ``Y`` holds only the other rows.
    """
    for col in item_cols:
        if col not in table.columns:
            raise MissingColumnError(col)
    missing = table[list(item_cols)].isna().any(axis=1).to_numpy()
    kept = table.loc[~missing, list(item_cols)]
    schemas = []
    codes = np.empty((len(kept), len(item_cols)), dtype=np.int64)
    for h, col in enumerate(item_cols):
        schema = ItemSchema(col, tuple(_levels(kept[col])))
        schemas.append(schema)
        codes[:, h] = schema.encode(v.item() if hasattr(v, "item") else v for v in kept[col])
    return schemas, codes, missing


def encode_covariates(table: pd.DataFrame, cols: Sequence[str]) -> DesignMatrix:
    """Intercept plus numeric passthrough and ``<col>.<level>`` dummies.

    The dummy reference level is the first in sorted order. Missing cells
    stay NaN (all dummies of the row become NaN).
    """
    n = len(table)
    blocks = [np.ones((n, 1))]
    names = [INTERCEPT]
    for col in cols:
        if col not in table.columns:
            raise MissingColumnError(col)
        series = table[col]
        if pd.api.types.is_numeric_dtype(series):
            blocks.append(series.to_numpy(dtype=float, na_value=np.nan)[:, None])
            names.append(col)
            continue
        levels = _levels(series)
        if len(levels) < 2:
            raise DegenerateCovariateError(f"categorical covariate {col!r} is constant")
        isna = series.isna().to_numpy()
        dummies = np.zeros((n, len(levels) - 1))
        values = series.to_numpy(dtype=object)
        for k, level in enumerate(levels[1:]):
            dummies[:, k] = values == level
            names.append(f"{col}.{level}")
        dummies[isna] = np.nan
        blocks.append(dummies)
    return DesignMatrix(np.hstack(blocks), tuple(names))


def build_dataset(
    table: pd.DataFrame,
    item_cols: Sequence[str],
    group_col: str | None = None,
    z_cols: Sequence[str] = (),
    zh_cols: Sequence[str] = (),
) -> Dataset:
    """Item-filtered dataset; covariates may still contain NaN."""
    if zh_cols and not group_col:
        raise DataError("high-level covariates need a group column")
    schemas, Y, missing = encode_items(table, item_cols)
    if Y.shape[0] == 0:
        raise DataError("no rows left after removing missing item responses")
    kept = table.loc[~missing].reset_index(drop=True)
    rows = np.flatnonzero(~missing)

    if group_col:
        if kept[group_col].isna().any():
            raise DataError(f"group column {group_col!r} has missing values")
        raw_ids = [str(v) for v in kept[group_col]]
        labels = list(dict.fromkeys(raw_ids))  # first-appearance order
        index = {lab: j for j, lab in enumerate(labels)}
        group = np.array([index[g] for g in raw_ids], dtype=np.int64)
        group_labels = tuple(labels)
    else:
        group = np.zeros(len(kept), dtype=np.int64)
        group_labels = None
    J = int(group.max()) + 1

    low = encode_covariates(kept, z_cols)
    high_rows = encode_covariates(kept, zh_cols)
    Z_high = np.empty((J, high_rows.values.shape[1]))
    for j in range(J):
        block = high_rows.values[group == j]
        first = block[0]
        same = np.all((block == first) | (np.isnan(block) & np.isnan(first)))
        if not same:
            lab = group_labels[j] if group_labels else j
            raise DataError(f"high-level covariates vary within group {lab!r}")
        Z_high[j] = first
    return Dataset(
        Y=Y,
        items=tuple(schemas),
        group=group,
        Z_low=low.values,
        Z_high=Z_high,
        z_names=low.names,
        zh_names=high_rows.names,
        group_labels=group_labels,
        rows=rows,
    )


def filter_for_structural(data: Dataset) -> Dataset:
    """Drop units with any missing covariate (own row or their group's row)."""
    bad_group = np.isnan(data.Z_high).any(axis=1)
    bad = np.isnan(data.Z_low).any(axis=1) | bad_group[data.group]
    if not bad.any():
        return data
    if bad.all():
        raise EmptyStructuralDataError("every row has a missing covariate")
    out = data.subset(~bad)
    if out.J < data.J:
        log.warning("structural step: %d group(s) dropped, no complete covariate rows", data.J - out.J)
    return out


def load_dataset(path, item_cols, group_col=None, z_cols=(), zh_cols=()) -> Dataset:
    table = load_csv(path, item_cols, group_col, z_cols, zh_cols)
    return build_dataset(table, item_cols, group_col, z_cols, zh_cols)
