"""Statistical plasmode generation: resample real covariates, generate
outcomes under a chosen truth, and compare models on the result."""

__version__ = "0.1.0"

from .dataio import Dataset, SplitResult, load_csv, select_columns, split_train_test, write_csv
from .resampler import ResamplingPlan, Replicate, Scheme, derive_seed, draw_indices, generate_replicates, materialize
from .covshrink import ShrunkenCovariance, ledoit_wolf, matrix_l2_norm, sample_covariance
from .mselect import MSelectionConfig, MSelectionResult, ks_distance, m_sequence, select_m, statistic_distribution, wasserstein1
from .regress import CvSpec, FitResult, blup, fit_lasso, fit_lasso_cv, fit_lmm_reml, fit_ridge, fit_ridge_cv, predict
from .ogm import EffectSpec, QualityReport, effects_from_lasso, effects_manual, generate_outcome, quality_check
from .metrics import aggregate, convergence_trace, mab, msep
from .pipeline import EvaluationReport, PipelineConfig, run_pipeline
