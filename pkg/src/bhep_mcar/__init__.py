"""Testing multivariate normality with the BHEP statistic on MCAR data."""

from .bhep import (
    BhepValue,
    NullQuantileTable,
    bhep_complete_case,
    bhep_on_imputed,
    bhep_oracle,
    bhep_statistic,
    kernel_g,
    kernel_h,
    null_quantile_table,
)
from .bootstrap import (
    BootstrapConfig,
    CompleteCase,
    TestOutcome,
    bootstrap_test,
    bootstrap_test_complete_case,
    naive_test,
    parse_approach,
)
from .dataset import (
    IncompleteMatrix,
    PerColumn,
    RowThenValue,
    ampute_mcar,
    complete_cases,
    read_csv,
    write_csv,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    NaiveImputed,
    Normal,
    StudentT,
    emit_figure_data,
    load_grid,
    results_to_csv,
    run_cell,
    run_grid,
)
from .imputation import Knn, Mean, Median, fitted_mean, impute, parse_method
from .numerics import SIGMA1, SIGMA2, GaussianParams, RngStream, sample_mvn, sample_mvt

__version__ = "0.1.0"
