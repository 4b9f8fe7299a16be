"""Spatiotemporal kriging of mobile air-quality streams.

Pipeline: snap raw drive samples to road segments, reduce to block medians,
build PCA + diurnal design vectors, fit a nonstationary Gaussian process by a
lagged Vecchia composite likelihood, then forecast, interpolate, and score
candidate monitoring networks.
"""

from .covariance import CovParams, PointSet, SpacetimePoint, cov, cov_matrix, cross_cov_matrix
from .estimation import FittedModel, OptimizerConfig, ols_beta, two_step_fit
from .features import FeatureConfig, PcaBasis, Standardization, fit_pca, fit_standardization
from .ingest import block_median, segmentize_centerlines, snap_to_segments
from .kriging import forecast, krige, spatial_interpolate
from .vecchia import ConditioningScheme, build_conditioning_sets, composite_loglik

__version__ = "0.1.0"

__all__ = [
    "CovParams", "PointSet", "SpacetimePoint", "cov", "cov_matrix", "cross_cov_matrix",
    "FittedModel", "OptimizerConfig", "ols_beta", "two_step_fit",
    "FeatureConfig", "PcaBasis", "Standardization", "fit_pca", "fit_standardization",
    "block_median", "segmentize_centerlines", "snap_to_segments",
    "forecast", "krige", "spatial_interpolate",
    "ConditioningScheme", "build_conditioning_sets", "composite_loglik",
    "__version__",
]
