"""Whole-dataset imputation engines.

``mice_impute`` runs the chained-equations loop: initialize missing cells
with column means/modes, then cycle over the incomplete columns, each time
refitting a conditional model of that column on all others (fitted on the
rows where the column was originally observed, predictors taking their
current completed values) and refilling the column's missing cells from the
model.  Stochastic variants draw from the fitted conditional distribution;
``norm_predict`` inserts the conditional mean instead.

``knn_impute`` and ``missforest_impute`` are the deterministic
prediction-style foils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import kernels
from .dataset import CompletedDataset, MaskedDataset, column_stats
from .errors import ConfigError, FitError
from .linear import design_matrix, design_width, draw_norm_bayes, draw_norm_nob, fit_linear, predict_norm
from .rng import RngLike, as_rng, seed_tree
from .trees import draw_cart_many, draw_forest_many, fit_cart, fit_forest, predict_cart_many, predict_forest_many

MICE_METHODS = ("norm", "norm_nob", "norm_predict", "cart", "rf")
VISIT_ORDERS = ("increasing-missing",)

DEFAULT_M = 5
DEFAULT_MAX_ITER = 10
DEFAULT_K = 5
DEFAULT_N_TREES = 10


@dataclass(frozen=True)
class MiceConfig:
    method: str
    m: int = DEFAULT_M
    max_iter: int = DEFAULT_MAX_ITER
    visit_order: str = "increasing-missing"
    model_params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.method not in MICE_METHODS:
            raise ConfigError(f"unknown mice method {self.method!r}; choose from {MICE_METHODS}")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.visit_order not in VISIT_ORDERS:
            raise ConfigError(f"unknown visit order {self.visit_order!r}")


@dataclass
class MultipleImputation:
    completions: list[CompletedDataset]
    source_mask: np.ndarray
    chain_means: np.ndarray  # (m, max_iter, d); NaN where not tracked
    fallback_columns: tuple[str, ...] = ()

    @property
    def m(self) -> int:
        return len(self.completions)


def _initial_fill(ds: MaskedDataset) -> np.ndarray:
    """Step-1 start: column mean (numeric) or modal level (categorical)."""
    vals = ds.values.copy()
    for j in range(ds.n_cols):
        mis = ds.mask[:, j]
        if mis.any():
            vals[mis, j] = column_stats(ds, j).center
    return vals


def _visit_columns(ds: MaskedDataset) -> list[int]:
    counts = ds.mask.sum(axis=0)
    cols = [j for j in range(ds.n_cols) if counts[j] > 0]
    return sorted(cols, key=lambda j: (counts[j], j))


def _fit_threshold(q: int) -> int:
    return max(10, q + 2)


class _ColumnModel:
    """One column's conditional model for one mice visit."""

    def __init__(self, ds, vals, j, method, params, rng):
        self.ds = ds
        self.j = j
        self.method = method
        self.rng = rng
        self.col = ds.columns[j]
        self.is_cat = self.col.is_categorical
        self.n_classes = len(self.col.kind.levels) if self.is_cat else 0
        self.predictors = [c for c in range(ds.n_cols) if c != j]
        self.obs_rows = np.flatnonzero(~ds.mask[:, j])
        self.mis_rows = np.flatnonzero(ds.mask[:, j])
        self.vals = vals
        self.q = design_width(ds.columns, self.predictors)
        self.fallback = self.obs_rows.size < _fit_threshold(self.q)
        self.params = params

    def _tree_inputs(self, rows):
        X = self.vals[rows][:, self.predictors]
        pred_is_cat = np.array([self.ds.columns[c].is_categorical for c in self.predictors])
        pred_levels = [
            len(self.ds.columns[c].kind.levels) if self.ds.columns[c].is_categorical else 0
            for c in self.predictors
        ]
        return X, pred_is_cat, pred_levels

    def impute(self) -> np.ndarray:
        """Values for the column's originally missing cells."""
        y_obs = self.vals[self.obs_rows, self.j]
        n_mis = self.mis_rows.size
        if self.fallback:
            return self._impute_fallback(y_obs, n_mis)
        if self.is_cat:
            return self._impute_categorical(y_obs, n_mis)
        return self._impute_numeric(y_obs, n_mis)

    def _impute_fallback(self, y_obs, n_mis):
        # too few observed rows for a conditional fit: draw from the
        # observed marginal instead (donor draw for tree methods, Gaussian
        # for the norm family, point value for norm_predict)
        if self.method == "norm_predict":
            if self.is_cat:
                counts = np.bincount(y_obs.astype(np.int64), minlength=self.n_classes)
                return np.full(n_mis, float(np.argmax(counts)))
            return np.full(n_mis, float(np.mean(y_obs)))
        if self.is_cat or self.method in ("cart", "rf"):
            idx = self.rng.integers(0, y_obs.size, size=n_mis)
            return y_obs[idx]
        mean = float(np.mean(y_obs))
        sd = float(np.std(y_obs, ddof=1)) if y_obs.size >= 2 else 0.0
        if not np.isfinite(sd):
            sd = 0.0
        return mean + sd * self.rng.standard_normal(n_mis)

    def _impute_numeric(self, y_obs, n_mis):
        if self.method in ("norm", "norm_nob", "norm_predict"):
            X_fit = design_matrix(self.vals, self.ds.columns, self.predictors, self.obs_rows)
            model = fit_linear(X_fit, y_obs)
            X_new = design_matrix(self.vals, self.ds.columns, self.predictors, self.mis_rows)
            if self.method == "norm":
                return draw_norm_bayes(model, X_new, self.rng)
            if self.method == "norm_nob":
                return draw_norm_nob(model, X_new, self.rng)
            return predict_norm(model, X_new)
        X_fit, pred_is_cat, pred_levels = self._tree_inputs(self.obs_rows)
        X_new = self._tree_inputs(self.mis_rows)[0]
        if self.method == "cart":
            tree = fit_cart(
                X_fit, y_obs, pred_is_cat=pred_is_cat, pred_levels=pred_levels,
                **self._tree_params(),
            )
            return draw_cart_many(tree, X_new, self.rng)
        forest = fit_forest(
            X_fit, y_obs, rng=self.rng, pred_is_cat=pred_is_cat, pred_levels=pred_levels,
            n_trees=self.params.get("n_trees", DEFAULT_N_TREES),
            mtry=self.params.get("mtry"), **self._tree_params(),
        )
        return draw_forest_many(forest, X_new, self.rng)

    def _impute_categorical(self, y_obs, n_mis):
        # the norm family has no Gaussian model for level targets; fall back
        # to a donor tree so draws stay inside the ingested level set
        X_fit, pred_is_cat, pred_levels = self._tree_inputs(self.obs_rows)
        X_new = self._tree_inputs(self.mis_rows)[0]
        common = dict(
            pred_is_cat=pred_is_cat, pred_levels=pred_levels,
            target_is_cat=True, n_classes=self.n_classes,
        )
        if self.method == "rf":
            forest = fit_forest(
                X_fit, y_obs, rng=self.rng,
                n_trees=self.params.get("n_trees", DEFAULT_N_TREES),
                mtry=self.params.get("mtry"), **common, **self._tree_params(),
            )
            return draw_forest_many(forest, X_new, self.rng)
        tree = fit_cart(X_fit, y_obs, **common, **self._tree_params())
        if self.method == "norm_predict":
            return predict_cart_many(tree, X_new)
        return draw_cart_many(tree, X_new, self.rng)

    def _tree_params(self):
        return dict(
            min_leaf=self.params.get("min_leaf", 5),
            max_depth=self.params.get("max_depth"),
            min_gain_frac=self.params.get("min_gain_frac", 1e-4),
        )


def _run_chain(ds: MaskedDataset, cfg: MiceConfig, rng: np.random.Generator):
    vals = _initial_fill(ds)
    visit = _visit_columns(ds)
    means = np.full((cfg.max_iter, ds.n_cols), np.nan)
    fallback: set[str] = set()
    for it in range(cfg.max_iter):
        for j in visit:
            try:
                model = _ColumnModel(ds, vals, j, cfg.method, cfg.model_params, rng)
                if model.fallback:
                    fallback.add(ds.columns[j].name)
                filled = model.impute()
            except FitError as exc:
                raise FitError(
                    f"column {ds.columns[j].name!r}, cycle {it + 1}: {exc}"
                ) from exc
            vals[model.mis_rows, j] = filled
        for j in visit:
            if not ds.columns[j].is_categorical:
                means[it, j] = float(np.mean(vals[ds.mask[:, j], j]))
    return vals, means, fallback


def mice_impute(
    ds: MaskedDataset, cfg: MiceConfig, rng: Optional[RngLike] = None
) -> MultipleImputation:
    """Run ``cfg.m`` independent chained-equations chains.

    Chains use disjoint substreams derived from ``cfg.seed`` (or the supplied
    generator), so they can be compared or parallelized; per-cycle means of
    the imputed cells are recorded for convergence inspection.
    """
    root = as_rng(rng) if rng is not None else seed_tree(cfg.seed)
    if not ds.mask.any():
        comps = [
            CompletedDataset(ds.values.copy(), ds.columns, np.zeros_like(ds.mask))
            for _ in range(cfg.m)
        ]
        return MultipleImputation(
            completions=comps, source_mask=ds.mask.copy(),
            chain_means=np.full((cfg.m, cfg.max_iter, ds.n_cols), np.nan),
        )
    chain_rngs = root.spawn(cfg.m)
    completions = []
    chain_means = np.full((cfg.m, cfg.max_iter, ds.n_cols), np.nan)
    fallback: set[str] = set()
    for c in range(cfg.m):
        vals, means, fb = _run_chain(ds, cfg, chain_rngs[c])
        chain_means[c] = means
        fallback |= fb
        completions.append(CompletedDataset(vals, ds.columns, ds.mask.copy()))
    return MultipleImputation(
        completions=completions, source_mask=ds.mask.copy(),
        chain_means=chain_means, fallback_columns=tuple(sorted(fallback)),
    )


def knn_impute(ds: MaskedDataset, k: int = DEFAULT_K) -> CompletedDataset:
    """Nearest-neighbor imputation (deterministic).

    Distances are root-mean-square over mutually observed coordinates,
    numeric coordinates scaled by the column's observed sd, categorical ones
    contributing 0/1 mismatch.  Each missing cell takes the unweighted mean
    (or modal level) of the k nearest rows that observe it; rows without a
    single shared coordinate fall back to the column mean/mode and are noted.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if not ds.mask.any():
        return CompletedDataset(ds.values.copy(), ds.columns, np.zeros_like(ds.mask))
    is_cat = ds.is_categorical()
    scale = np.ones(ds.n_cols)
    for j in range(ds.n_cols):
        if not is_cat[j]:
            sd = column_stats(ds, j).sd
            if np.isfinite(sd) and sd > 0:
                scale[j] = sd
    vals = ds.values.copy()
    query_rows = np.flatnonzero(ds.mask.any(axis=1))
    dist = kernels.knn_distances(ds.values, query_rows, scale, is_cat)
    fallback_cells: list[tuple[int, int]] = []
    for qi, i in enumerate(query_rows):
        drow = dist[qi]
        ranked = np.argsort(drow, kind="stable")  # distance, then row index
        for j in np.flatnonzero(ds.mask[i]):
            observed_j = ~ds.mask[:, j]
            eligible = ranked[observed_j[ranked] & np.isfinite(drow[ranked])]
            if eligible.size == 0:
                vals[i, j] = column_stats(ds, j).center
                fallback_cells.append((int(i), int(j)))
                continue
            near = eligible[: min(k, eligible.size)]
            if is_cat[j]:
                codes = ds.values[near, j].astype(np.int64)
                counts = np.bincount(codes, minlength=len(ds.columns[j].kind.levels))
                top = np.flatnonzero(counts == counts.max())
                if top.size == 1:
                    vals[i, j] = float(top[0])
                else:
                    # tie: take the level of the nearest contributing neighbor
                    pick = codes[np.isin(codes, top).argmax()]
                    vals[i, j] = float(pick)
            else:
                vals[i, j] = float(np.mean(ds.values[near, j]))
    notes = {"fallback_cells": tuple(fallback_cells)} if fallback_cells else {}
    return CompletedDataset(vals, ds.columns, ds.mask.copy(), notes=notes)


def missforest_impute(
    ds: MaskedDataset,
    n_trees: int = DEFAULT_N_TREES,
    min_leaf: int = 5,
    max_iter: int = 10,
    seed: int = 0,
    rng: Optional[RngLike] = None,
) -> CompletedDataset:
    """Iterative forest-prediction imputation (deterministic given the seed).

    Columns are refit in increasing-missingness order; iteration stops when
    the normalized change of the imputed cells stops decreasing, returning
    the previous sweep's values, or after ``max_iter`` sweeps.
    """
    root = as_rng(rng) if rng is not None else seed_tree(seed)
    if not ds.mask.any():
        return CompletedDataset(ds.values.copy(), ds.columns, np.zeros_like(ds.mask))
    vals = _initial_fill(ds)
    visit = _visit_columns(ds)
    is_cat = ds.is_categorical()
    num_cells = [(j, ds.mask[:, j]) for j in visit if not is_cat[j]]
    cat_cells = [(j, ds.mask[:, j]) for j in visit if is_cat[j]]

    def deltas(new, old):
        d_num = 0.0
        if num_cells:
            num = sum(float(((new[m, j] - old[m, j]) ** 2).sum()) for j, m in num_cells)
            den = sum(float((new[m, j] ** 2).sum()) for j, m in num_cells)
            d_num = num / den if den > 0 else (0.0 if num == 0 else math.inf)
        d_cat = 0.0
        if cat_cells:
            changed = sum(int((new[m, j] != old[m, j]).sum()) for j, m in cat_cells)
            total = sum(int(m.sum()) for j, m in cat_cells)
            d_cat = changed / total
        return d_num, d_cat

    prev_vals = vals.copy()
    prev_delta = None
    for _ in range(max_iter):
        new_vals = vals.copy()
        for j in visit:
            obs_rows = np.flatnonzero(~ds.mask[:, j])
            mis_rows = np.flatnonzero(ds.mask[:, j])
            predictors = [c for c in range(ds.n_cols) if c != j]
            X_fit = new_vals[obs_rows][:, predictors]
            X_new = new_vals[mis_rows][:, predictors]
            pred_is_cat = np.array([is_cat[c] for c in predictors])
            pred_levels = [
                len(ds.columns[c].kind.levels) if is_cat[c] else 0 for c in predictors
            ]
            y_obs = ds.values[obs_rows, j]
            try:
                forest = fit_forest(
                    X_fit, y_obs, rng=root, pred_is_cat=pred_is_cat,
                    pred_levels=pred_levels, target_is_cat=bool(is_cat[j]),
                    n_classes=len(ds.columns[j].kind.levels) if is_cat[j] else 0,
                    n_trees=n_trees, min_leaf=min_leaf,
                )
            except FitError as exc:
                raise FitError(f"column {ds.columns[j].name!r}: {exc}") from exc
            new_vals[mis_rows, j] = predict_forest_many(forest, X_new)
        delta = deltas(new_vals, vals)
        if delta == (0.0, 0.0):
            vals = new_vals
            break
        if prev_delta is not None and (
            (num_cells and delta[0] >= prev_delta[0]) or (cat_cells and delta[1] >= prev_delta[1])
        ):
            vals = prev_vals  # change stopped shrinking: keep the previous sweep
            break
        prev_vals = vals
        vals = new_vals
        prev_delta = delta
    return CompletedDataset(vals, ds.columns, ds.mask.copy())


# --- method registry -------------------------------------------------------

CLI_METHODS = (
    "mice-norm",
    "mice-norm-nob",
    "mice-norm-predict",
    "mice-cart",
    "mice-rf",
    "knn",
    "missforest",
)

_MICE_BY_CLI = {
    "mice-norm": "norm",
    "mice-norm-nob": "norm_nob",
    "mice-norm-predict": "norm_predict",
    "mice-cart": "cart",
    "mice-rf": "rf",
}

_DETERMINISTIC = ("mice-norm-predict", "knn", "missforest", "identity")


@dataclass(frozen=True)
class Imputer:
    """A named imputation method bound to its hyperparameters.

    ``impute`` returns the method's completions of a dataset; stochastic
    methods honor ``m``, deterministic ones return a single completion.
    Instances are plain data (picklable), so they can be shipped to worker
    processes.
    """

    name: str
    max_iter: int = DEFAULT_MAX_ITER
    k: int = DEFAULT_K
    n_trees: int = DEFAULT_N_TREES
    model_params: tuple = ()

    def __post_init__(self):
        if self.name not in CLI_METHODS and self.name != "identity":
            raise ConfigError(f"unknown method {self.name!r}; choose from {CLI_METHODS}")

    @property
    def stochastic(self) -> bool:
        return self.name not in _DETERMINISTIC

    def impute(self, ds: MaskedDataset, rng: RngLike, m: int = DEFAULT_M) -> list[CompletedDataset]:
        rng = as_rng(rng)
        eff_m = m if self.stochastic else 1
        if self.name == "identity":
            if ds.mask.any():
                raise ConfigError("identity imputer requires a complete dataset")
            return [CompletedDataset(ds.values.copy(), ds.columns, np.zeros_like(ds.mask))]
        if self.name in _MICE_BY_CLI:
            cfg = MiceConfig(
                method=_MICE_BY_CLI[self.name], m=eff_m, max_iter=self.max_iter,
                model_params={**dict(self.model_params), "n_trees": self.n_trees},
            )
            return mice_impute(ds, cfg, rng=rng).completions
        if self.name == "knn":
            return [knn_impute(ds, k=self.k)]
        return [missforest_impute(ds, n_trees=self.n_trees, max_iter=self.max_iter, rng=rng)]

    def single(self, ds: MaskedDataset, rng: RngLike) -> CompletedDataset:
        if self.name in _MICE_BY_CLI:
            cfg = MiceConfig(
                method=_MICE_BY_CLI[self.name], m=1, max_iter=self.max_iter,
                model_params={**dict(self.model_params), "n_trees": self.n_trees},
            )
            return mice_impute(ds, cfg, rng=as_rng(rng)).completions[0]
        return self.impute(ds, rng, m=1)[0]


def make_imputer(
    name: str,
    max_iter: int = DEFAULT_MAX_ITER,
    k: int = DEFAULT_K,
    n_trees: int = DEFAULT_N_TREES,
    model_params: Optional[dict] = None,
) -> Imputer:
    """Build a registered imputation method by its public name."""
    if name not in CLI_METHODS:
        raise ConfigError(f"unknown method {name!r}; choose from {CLI_METHODS}")
    return Imputer(
        name=name, max_iter=max_iter, k=k, n_trees=n_trees,
        model_params=tuple(sorted((model_params or {}).items())),
    )


def identity_imputer() -> Imputer:
    """Imputer for datasets that have no missing cells (bootstrap baselines)."""
    return Imputer(name="identity")
