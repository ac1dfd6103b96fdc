"""Linear-Gaussian conditional models for the chained-equations loop.

A fitted model supports a deterministic prediction, a noise-only stochastic
draw (residual noise on top of the fitted mean), and a fully Bayesian draw
that also resamples the residual variance and coefficients, propagating
parameter uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import Column
from .errors import FitError

RIDGE_FACTOR = 1e-8  # diagonal jitter, scaled by trace(X'X)/q, on rank deficiency


@dataclass(frozen=True)
class LinearGaussianModel:
    beta: np.ndarray  # intercept first
    sigma2: float
    xtx_inv: np.ndarray
    dof: int
    ridged: bool = False

    @property
    def rss(self) -> float:
        return self.sigma2 * self.dof


def design_matrix(
    values: np.ndarray, columns: Sequence[Column], predictor_idx: Sequence[int], rows: np.ndarray
) -> np.ndarray:
    """Encode predictors for linear fitting (no intercept column).

    Numeric columns pass through; a categorical column with K levels expands
    into K-1 indicators (reference level = first level).
    """
    blocks = []
    sub = values[rows]
    for j in predictor_idx:
        col = columns[j]
        if col.is_categorical:
            k = len(col.kind.levels)
            codes = sub[:, j].astype(np.int64)
            for lev in range(1, k):
                blocks.append((codes == lev).astype(np.float64))
        else:
            blocks.append(sub[:, j])
    if not blocks:
        return np.empty((sub.shape[0], 0), dtype=np.float64)
    return np.column_stack(blocks)


def design_width(columns: Sequence[Column], predictor_idx: Sequence[int]) -> int:
    """Coefficient count q of the implied design, intercept included."""
    q = 1
    for j in predictor_idx:
        col = columns[j]
        q += len(col.kind.levels) - 1 if col.is_categorical else 1
    return q


def fit_linear(X: np.ndarray, y: np.ndarray) -> LinearGaussianModel:
    """Least-squares fit of ``y`` on ``X`` plus an implicit intercept.

    Rank-deficient Gram matrices get a small ridge jitter and the model is
    flagged; too few rows (n <= q) is an error.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    A = np.column_stack([np.ones(n), X])
    q = A.shape[1]
    if n <= q:
        raise FitError(f"need more than {q} rows to fit {q} coefficients, got {n}")
    G = A.T @ A
    ridged = False
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        G = G + (RIDGE_FACTOR * np.trace(G) / q) * np.eye(q)
        ridged = True
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError as exc:
            raise FitError("design matrix is degenerate even after ridge jitter") from exc
    # solve via the Cholesky factor; also reuse it for the Gram inverse
    z = np.linalg.solve(L, A.T @ y)
    beta = np.linalg.solve(L.T, z)
    eye = np.eye(q)
    Linv = np.linalg.solve(L, eye)
    xtx_inv = Linv.T @ Linv
    resid = y - A @ beta
    rss = float(resid @ resid)
    if rss <= 1e-20 * float(y @ y):  # rounding residue of an exact fit
        rss = 0.0
    dof = n - q
    sigma2 = max(rss / dof, 0.0)
    return LinearGaussianModel(beta=beta, sigma2=sigma2, xtx_inv=xtx_inv, dof=dof, ridged=ridged)


def _mean(model: LinearGaussianModel, X_new: np.ndarray) -> np.ndarray:
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.shape[1] != model.beta.size - 1:
        raise FitError(
            f"model has {model.beta.size - 1} predictors, got {X_new.shape[1]}"
        )
    return model.beta[0] + X_new @ model.beta[1:]


def predict_norm(model: LinearGaussianModel, X_new: np.ndarray) -> np.ndarray:
    """Deterministic conditional mean."""
    return _mean(model, X_new)


def draw_norm_nob(
    model: LinearGaussianModel, X_new: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw from N(X beta, sigma2): residual noise, parameters held fixed."""
    mu = _mean(model, X_new)
    return mu + rng.standard_normal(mu.size) * np.sqrt(model.sigma2)


def draw_norm_bayes(
    model: LinearGaussianModel, X_new: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Bayesian draw: resample sigma2 (scaled inverse chi-square), then
    coefficients from N(beta, sigma2* (X'X)^-1), then residual noise."""
    if model.dof < 1:
        raise FitError("Bayesian draw needs at least one residual degree of freedom")
    X_new = np.asarray(X_new, dtype=np.float64)
    g = rng.chisquare(model.dof)
    sigma2_star = model.rss / g if g > 0 else model.rss
    try:
        L = np.linalg.cholesky(model.xtx_inv)
    except np.linalg.LinAlgError as exc:
        raise FitError("Gram inverse is not positive definite") from exc
    q = model.beta.size
    beta_star = model.beta + np.sqrt(sigma2_star) * (L @ rng.standard_normal(q))
    mu = beta_star[0] + X_new @ beta_star[1:]
    return mu + rng.standard_normal(mu.size) * np.sqrt(sigma2_star)
