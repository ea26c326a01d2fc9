"""Adaptive greedy variable selection for linear regression with
missing covariates, built on multiple imputation."""

from .baselines import (BaselineResult, MethodInfeasibleError, ld_lasso_cv,
                        ldls, mi_lasso_separate, mi_stacked, mils)
from .data import (Dataset, DegenerateColumnError, StandardizeParams,
                   complete_cases, rows_observed_on, standardize)
from .lasso import CvResult, LassoFit, lasso_cv, lasso_fit, lambda_grid
from .mice import ImputedSet, UnimputableColumnError, mice_impute
from .mig import (EmptySupportError, InitializationError, MigConfig,
                  PoolingRule, SelectionTrace, mig_run)
from .ols import OlsFit, SingularDesignError, fit_ols, t_statistic
from .pooling import (PooledFit, PooledFtest, RefitFmi, barnard_rubin_df,
                      partial_f_from_r2, pool_ols, pooled_f_test_change_r2,
                      pooled_r2, pooled_t_test, refit_fmi)
from .rng import substream, substream_seq
from .simbench import (MetricsReport, SimConfig, compute_metrics,
                       generate_dataset, refit_study, run_benchmark)

__version__ = "0.1.0"

__all__ = [
    "BaselineResult", "CvResult", "Dataset", "DegenerateColumnError",
    "EmptySupportError", "ImputedSet", "InitializationError", "LassoFit",
    "MethodInfeasibleError", "MetricsReport", "MigConfig", "OlsFit",
    "PooledFit", "PooledFtest", "PoolingRule", "RefitFmi", "SelectionTrace",
    "SimConfig", "SingularDesignError", "StandardizeParams",
    "UnimputableColumnError", "barnard_rubin_df", "complete_cases",
    "compute_metrics", "fit_ols", "generate_dataset", "lambda_grid",
    "lasso_cv", "lasso_fit", "ld_lasso_cv", "ldls", "mi_lasso_separate",
    "mi_stacked", "mice_impute", "mig_run", "mils", "partial_f_from_r2",
    "pool_ols", "pooled_f_test_change_r2", "pooled_r2", "pooled_t_test",
    "refit_fmi", "refit_study", "rows_observed_on", "run_benchmark",
    "standardize", "substream", "substream_seq", "t_statistic",
]
