"""Rank imputation methods on data with real missing values.

The idea: hide some additionally chosen observed cells, impute the augmented
dataset many times, and score the sample of imputed values for each test row
against the held-back truth with the energy score (a proper scoring rule, so
methods that draw from the right conditional distribution beat methods that
insert point predictions).  Lower is better.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import MaskedDataset, column_stats
from .engines import Imputer
from .errors import ConfigError
from .rng import RngLike, as_rng
from ._parallel import run_indexed

DEFAULT_N_IMPUTATIONS = 20
DEFAULT_MASK_FRACTION = 0.2


def energy_score(sample: np.ndarray, truth: np.ndarray) -> float:
    """Energy score of a sample of vectors against one observed vector.

    ``mean_i ||x_i - y|| - (1/(2 N^2)) sum_ij ||x_i - x_j||`` with the
    Euclidean norm. Lower is better; zero when every sample point equals the
    truth.
    """
    sample = np.asarray(sample, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if sample.ndim == 1:
        sample = sample[:, None]
    if truth.ndim != 1 or sample.ndim != 2 or sample.shape[1] != truth.size:
        raise ConfigError(
            f"sample of shape {sample.shape} does not match truth of dimension {truth.size}"
        )
    if sample.shape[0] < 1 or truth.size < 1:
        raise ConfigError("need at least one sample vector and one coordinate")
    if not (np.isfinite(sample).all() and np.isfinite(truth).all()):
        raise ConfigError("energy score inputs must be finite")
    n = sample.shape[0]
    term1 = float(np.sqrt(((sample - truth) ** 2).sum(axis=1)).sum()) / n
    diff = sample[:, None, :] - sample[None, :, :]
    term2 = float(np.sqrt((diff ** 2).sum(axis=2)).sum()) / (2 * n * n)
    return term1 - term2


@dataclass(frozen=True)
class ColumnScore:
    column: str
    score: float
    n_test_cells: int


@dataclass(frozen=True)
class ScoreReportEntry:
    method: str
    overall: float
    columns: tuple[ColumnScore, ...]
    n_imputations: int
    n_masked_cells: int


@dataclass(frozen=True)
class ScoreReport:
    entries: tuple[ScoreReportEntry, ...]
    ranking: tuple[str, ...]
    tied: bool


def select_test_cells(
    ds: MaskedDataset, mask_fraction: float, rng: RngLike
) -> dict[int, np.ndarray]:
    """Pick ceil(mask_fraction * n_obs) observed rows per incomplete column.

    Selection streams are keyed by the column's rank among the incomplete
    columns' sorted names, so reordering dataset columns does not change
    which named cells are selected.
    """
    if not 0 < mask_fraction < 1:
        raise ConfigError("mask_fraction must be in (0, 1)")
    root = as_rng(rng)
    cols = [j for j in range(ds.n_cols) if ds.mask[:, j].any()]
    if not cols:
        raise ConfigError("dataset has no missing cells to mimic")
    by_name = sorted(cols, key=lambda j: ds.columns[j].name)
    streams = dict(zip(by_name, root.spawn(len(by_name))))
    picked: dict[int, np.ndarray] = {}
    for j in cols:
        obs_rows = np.flatnonzero(~ds.mask[:, j])
        n_test = math.ceil(mask_fraction * obs_rows.size)
        rows = streams[j].choice(obs_rows, size=n_test, replace=False)
        picked[j] = np.sort(rows)
    return picked


def _augment(ds: MaskedDataset, cells: dict[int, np.ndarray]) -> MaskedDataset:
    vals = ds.values.copy()
    mask = ds.mask.copy()
    for j, rows in cells.items():
        vals[rows, j] = np.nan
        mask[rows, j] = True
    return MaskedDataset(values=vals, columns=ds.columns, mask=mask)


def _run_one(payload):
    imputer, aug, rng = payload
    return imputer.single(aug, rng)


def iscore(
    ds: MaskedDataset,
    imputer: Imputer,
    rng: RngLike,
    n_imputations: int = DEFAULT_N_IMPUTATIONS,
    mask_fraction: float = DEFAULT_MASK_FRACTION,
    jobs: int = 1,
    cells: Optional[dict[int, np.ndarray]] = None,
) -> ScoreReportEntry:
    """Energy-based imputation score of one method on one dataset.

    Numeric columns are standardized by their observed mean/sd (frozen before
    any extra masking) so per-column scores are comparable; the imputer runs
    ``n_imputations`` times with independent streams on the augmented-mask
    dataset; each test row contributes the energy score of its imputed
    vectors against the held-back truth.  Categorical test cells are masked
    but not scored.
    """
    if n_imputations < 5:
        raise ConfigError("need at least 5 imputations for a sample-based score")
    root = as_rng(rng)
    is_cat = ds.is_categorical()
    for j in range(ds.n_cols):
        if ds.mask[:, j].any() and not is_cat[j]:
            if int((~ds.mask[:, j]).sum()) < 20:
                raise ConfigError(
                    f"column {ds.columns[j].name!r} has fewer than 20 observed cells"
                )
    center = np.zeros(ds.n_cols)
    spread = np.ones(ds.n_cols)
    for j in range(ds.n_cols):
        if not is_cat[j]:
            st = column_stats(ds, j)
            center[j] = st.center
            if np.isfinite(st.sd) and st.sd > 0:
                spread[j] = st.sd
    sel_rng, run_root = root.spawn(2)
    if cells is None:
        cells = select_test_cells(ds, mask_fraction, sel_rng)
    aug = _augment(ds, cells)
    run_rngs = run_root.spawn(n_imputations)
    try:
        if imputer.stochastic:
            runs = run_indexed(_run_one, [(imputer, aug, r) for r in run_rngs], jobs)
        else:
            # deterministic methods are honestly a point mass: one run,
            # replicated, rather than a spread earned from reseeding
            runs = [imputer.single(aug, run_rngs[0])] * n_imputations
    except Exception as exc:
        raise ConfigError(f"imputer {imputer.name!r} failed on the augmented mask: {exc}") from exc

    # row -> numeric test columns in that row
    per_row: dict[int, list[int]] = {}
    for j, rows in cells.items():
        if is_cat[j]:
            continue
        for r in rows:
            per_row.setdefault(int(r), []).append(j)
    row_scores: dict[int, float] = {}
    for r, cols_r in sorted(per_row.items()):
        cols_r = sorted(cols_r)
        truth = (ds.values[r, cols_r] - center[cols_r]) / spread[cols_r]
        sample = np.array(
            [(run.values[r, cols_r] - center[cols_r]) / spread[cols_r] for run in runs]
        )
        row_scores[r] = energy_score(sample, truth)

    col_scores = []
    weight_sum = 0
    total = 0.0
    for j in sorted(cells):
        if is_cat[j]:
            continue
        rows = cells[j]
        score = float(np.mean([row_scores[int(r)] for r in rows]))
        col_scores.append(
            ColumnScore(column=ds.columns[j].name, score=score, n_test_cells=int(rows.size))
        )
        total += score * rows.size
        weight_sum += rows.size
    if weight_sum == 0:
        raise ConfigError("no numeric test cells to score")
    n_masked = int(sum(rows.size for rows in cells.values()))
    return ScoreReportEntry(
        method=imputer.name,
        overall=total / weight_sum,
        columns=tuple(col_scores),
        n_imputations=n_imputations,
        n_masked_cells=n_masked,
    )


def rank_methods(entries: Sequence[ScoreReportEntry]) -> ScoreReport:
    """Ascending by overall score; ties break alphabetically and are flagged."""
    if not entries:
        raise ConfigError("need at least one score entry to rank")
    ordered = sorted(entries, key=lambda e: (e.overall, e.method))
    tied = any(
        ordered[i].overall == ordered[i + 1].overall for i in range(len(ordered) - 1)
    )
    return ScoreReport(
        entries=tuple(ordered),
        ranking=tuple(e.method for e in ordered),
        tied=tied,
    )


def write_score_csv(report: ScoreReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "overall_score", "column", "column_score", "n_test_cells"])
        for entry in report.entries:
            for col in entry.columns:
                writer.writerow(
                    [entry.method, repr(entry.overall), col.column, repr(col.score), col.n_test_cells]
                )
