"""Bootstrap confidence intervals around imputation-based estimators.

The resampling loop: compute the estimate on the imputed original data, then
repeatedly resample rows with replacement (mask rows travel with their data
rows), impute each resample, and re-estimate.  The spread of the replicate
estimates gives a normal-approximation interval around the original
estimate.  ``coverage_experiment`` replays this over freshly generated
datasets to measure how often the interval catches the truth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .dataset import CompletedDataset, MaskedDataset
from .engines import Imputer
from .errors import ConfigError, EstimatorError, ImputekitError
from .rng import RngLike, as_rng
from ._parallel import run_indexed

DEFAULT_N_BOOT = 30  # bootstrap replicates (the experiments' L)
DEFAULT_CI_LEVEL = 0.05
MAX_EXCLUSION_FRACTION = 0.05


@dataclass(frozen=True)
class Estimator:
    """A named deterministic statistic of a completed dataset.

    ``fn`` must be a module-level callable of ``(dataset, *params)`` so the
    estimator can travel to worker processes.
    """

    name: str
    fn: Callable
    params: tuple = ()

    def evaluate(self, cds: CompletedDataset) -> float:
        return float(self.fn(cds, *self.params))


def _column_mean(cds, column):
    return float(np.mean(cds.values[:, cds.column_index(column)]))


def _column_quantile(cds, column, alpha):
    from .benchmarks import quantile_est

    return quantile_est(cds.values[:, cds.column_index(column)], alpha)


def _slope(cds, y_col, x_col):
    from .benchmarks import slope_est

    return slope_est(cds, y_col, x_col)


def mean_estimator(column: str) -> Estimator:
    return Estimator(name=f"mean[{column}]", fn=_column_mean, params=(column,))


def quantile_estimator(column: str, alpha: float) -> Estimator:
    return Estimator(name=f"quantile[{column},{alpha}]", fn=_column_quantile, params=(column, alpha))


def slope_estimator(y_col: str, x_col: str) -> Estimator:
    return Estimator(name=f"slope[{y_col}~{x_col}]", fn=_slope, params=(y_col, x_col))


@dataclass(frozen=True)
class BootstrapResult:
    theta_hat: float
    replicates: np.ndarray
    sigma_star: float
    ci: tuple[float, float]
    level: float


def resample_rows(ds: MaskedDataset, rng: RngLike) -> MaskedDataset:
    """Row bootstrap: rows are drawn with replacement together with their
    mask rows (missingness is never regenerated)."""
    rng = as_rng(rng)
    idx = rng.integers(0, ds.n_rows, size=ds.n_rows)
    return MaskedDataset(values=ds.values[idx], columns=ds.columns, mask=ds.mask[idx])


def sigma_star_of(theta_hat: float, replicates: np.ndarray) -> float:
    """Root mean squared deviation of the replicates around ``theta_hat``."""
    replicates = np.asarray(replicates, dtype=np.float64)
    return float(np.sqrt(np.mean((theta_hat - replicates) ** 2)))


def _estimate(imputer: Imputer, ds, estimator, rng, m) -> float:
    completions = imputer.impute(ds, rng, m=m)
    vals = []
    for c in completions:
        try:
            vals.append(estimator.evaluate(c))
        except Exception as exc:
            raise EstimatorError(f"estimator {estimator.name!r} failed: {exc}") from exc
    return float(np.mean(vals))


def bootstrap_ci(
    ds: MaskedDataset,
    imputer: Imputer,
    estimator: Estimator,
    rng: RngLike,
    n_boot: int = DEFAULT_N_BOOT,
    alpha: float = DEFAULT_CI_LEVEL,
    m: int = 5,
) -> BootstrapResult:
    """Normal-approximation bootstrap interval for an imputed-data statistic.

    The interval is centered at ``theta_hat`` (the estimate on the imputed
    original data, averaged over ``m`` completions for stochastic methods)
    with half-width ``z_{1-alpha/2} * sigma_star`` where ``sigma_star`` is
    the root mean squared deviation of the replicate estimates around
    ``theta_hat``.
    """
    if n_boot < 2:
        raise ConfigError("need at least 2 bootstrap replicates")
    if not 0 < alpha < 1:
        raise ConfigError("alpha must be in (0, 1)")
    root = as_rng(rng)
    streams = root.spawn(n_boot + 1)
    theta_hat = _estimate(imputer, ds, estimator, streams[0], m)
    replicates = np.empty(n_boot)
    for l in range(n_boot):
        draw_rng, imp_rng = streams[l + 1].spawn(2)
        try:
            boot = resample_rows(ds, draw_rng)
            replicates[l] = _estimate(imputer, boot, estimator, imp_rng, m)
        except EstimatorError as exc:
            raise EstimatorError(f"replicate {l + 1}: {exc}") from exc
    sigma = sigma_star_of(theta_hat, replicates)
    z = float(norm.ppf(1 - alpha / 2))
    ci = (theta_hat - z * sigma, theta_hat + z * sigma)
    return BootstrapResult(
        theta_hat=theta_hat, replicates=replicates, sigma_star=sigma, ci=ci, level=1 - alpha
    )


@dataclass(frozen=True)
class CoverageRow:
    method: str
    replication: int
    theta_hat: float
    lower: float
    upper: float
    covered: bool
    width: float


@dataclass(frozen=True)
class CoverageSummary:
    method: str
    coverage: float
    mean_width: float
    exclusions: int


@dataclass(frozen=True)
class CoverageTable:
    rows: tuple[CoverageRow, ...]
    summaries: tuple[CoverageSummary, ...]
    failures: tuple[tuple[str, int, str], ...]  # (method, replication, error)


def _coverage_job(payload):
    generate, imputers, estimator, true_value, n_boot, alpha, m, b, rng = payload
    gen_rng, *method_rngs = rng.spawn(len(imputers) + 1)
    ds = generate(gen_rng)
    rows = []
    failures = []
    for imputer, imp_rng in zip(imputers, method_rngs):
        try:
            res = bootstrap_ci(ds, imputer, estimator, imp_rng, n_boot=n_boot, alpha=alpha, m=m)
        except ImputekitError as exc:
            failures.append((imputer.name, b, str(exc)))
            continue
        lo, hi = res.ci
        rows.append(
            CoverageRow(
                method=imputer.name, replication=b, theta_hat=res.theta_hat,
                lower=lo, upper=hi, covered=bool(lo <= true_value <= hi),
                width=hi - lo,
            )
        )
    return rows, failures


def coverage_experiment(
    generate: Callable[[np.random.Generator], MaskedDataset],
    true_value: float,
    imputers: Sequence[Imputer],
    estimator: Estimator,
    rng: RngLike,
    n_sims: int = 200,
    n_boot: int = DEFAULT_N_BOOT,
    alpha: float = DEFAULT_CI_LEVEL,
    m: int = 5,
    jobs: int = 1,
) -> CoverageTable:
    """Simulate interval coverage: generate, impute, and record whether each
    method's bootstrap interval contains ``true_value``.

    Failed (method, replication) pairs are excluded and counted; more than
    5% exclusions for any method fails the run.
    """
    if n_sims < 10:
        raise ConfigError("need at least 10 simulations")
    root = as_rng(rng)
    sim_rngs = root.spawn(n_sims)
    payloads = [
        (generate, tuple(imputers), estimator, true_value, n_boot, alpha, m, b, sim_rngs[b])
        for b in range(n_sims)
    ]
    results = run_indexed(_coverage_job, payloads, jobs)
    rows: list[CoverageRow] = []
    failures: list[tuple[str, int, str]] = []
    for rws, fls in results:
        rows.extend(rws)
        failures.extend(fls)
    summaries = []
    for imputer in imputers:
        mine = [r for r in rows if r.method == imputer.name]
        excl = sum(1 for f in failures if f[0] == imputer.name)
        if excl > MAX_EXCLUSION_FRACTION * n_sims:
            raise ImputekitError(
                f"method {imputer.name!r}: {excl}/{n_sims} replications failed"
            )
        summaries.append(
            CoverageSummary(
                method=imputer.name,
                coverage=float(np.mean([r.covered for r in mine])) if mine else float("nan"),
                mean_width=float(np.mean([r.width for r in mine])) if mine else float("nan"),
                exclusions=excl,
            )
        )
    return CoverageTable(rows=tuple(rows), summaries=tuple(summaries), failures=tuple(failures))


def write_coverage_csv(table: CoverageTable, rows_path, summary_path) -> None:
    with open(rows_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "replication", "theta_hat", "ci_lower", "ci_upper", "covered", "width"])
        for r in table.rows:
            writer.writerow(
                [r.method, r.replication, repr(r.theta_hat), repr(r.lower), repr(r.upper), int(r.covered), repr(r.width)]
            )
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "coverage", "mean_width", "exclusions"])
        for s in table.summaries:
            writer.writerow([s.method, repr(s.coverage), repr(s.mean_width), s.exclusions])
