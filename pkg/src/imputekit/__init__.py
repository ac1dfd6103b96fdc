"""Imputation toolkit: chained-equations imputation with pluggable
conditional models, deterministic foil imputers, energy-score method
ranking, and bootstrap uncertainty quantification."""

from .dataset import (
    Categorical,
    Column,
    ColumnStats,
    CompletedDataset,
    MaskedDataset,
    Numeric,
    PatternTable,
    as_completed,
    column_stats,
    mask_of,
    numeric_dataset,
    patterns,
    read_csv,
    write_csv,
)
from .engines import (
    CLI_METHODS,
    Imputer,
    MiceConfig,
    MultipleImputation,
    identity_imputer,
    knn_impute,
    make_imputer,
    mice_impute,
    missforest_impute,
)
from .errors import (
    ConfigError,
    EstimatorError,
    FitError,
    ImputekitError,
    IngestionError,
    ParseError,
)
from .linear import LinearGaussianModel, draw_norm_bayes, draw_norm_nob, fit_linear, predict_norm
from .rng import as_rng, seed_tree
from .scoring import ScoreReport, energy_score, iscore, rank_methods
from .trees import CartTree, DonorForest, draw_cart, draw_forest, fit_cart, fit_forest
from .uncertainty import (
    BootstrapResult,
    Estimator,
    bootstrap_ci,
    coverage_experiment,
    mean_estimator,
    quantile_estimator,
    slope_estimator,
)
from .benchmarks import (
    GaussianExampleConfig,
    UniformExampleConfig,
    complete_case_oracle,
    gen_gaussian_example,
    gen_uniform_example,
    quantile_est,
    run_gaussian_bench,
    run_quantile_bench,
    slope_est,
)

__version__ = "0.1.0"
