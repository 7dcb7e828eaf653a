"""Inference for high-dimensional covariance matrices of linear-process time series."""
from .model import (
    CoefficientScheme, InnovationSpec, SeriesPanel, coef, projected_coef, simulate,
    true_covariance, verify_assumption_a,
)
from .weights import WeightPairSet, WeightVector, near_orthogonal_family, unit_pairs, unit_vector
from .covest import d_path, multi_d_path, sample_cov, trace_process, trace_star
from .asymvar import alpha_sq, beta_matrix, beta_sq, sigma_tr_sq, unit_kernel
from .lrvest import KernelSpec, trace_ci
from .shrink import shrink_estimate, w_star_hat, w_star_oracle
from .limit import LimitModel, build_limit_model, sample_paths

__version__ = "0.1.0"
