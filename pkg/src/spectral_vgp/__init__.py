"""Sparse variational Gaussian-process regression with spectral and point
inducing variables, plus a frequentist-validation harness."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, NumericError, UnsupportedOperation
from .spectral_kernel import (
    ExponentialExperimentSpectrum,
    ExponentialSpectrum,
    FourierBasis,
    PolynomialSpectrum,
    SpectralKernel,
    basis_eval,
    eigenvalue,
    kernel_eval,
    rescaling_tau,
)
from .synthetic_data import (
    Dataset,
    TrueFunction,
    f0_lowerbound,
    f0_oversmooth,
    f0_paper,
    f0_power,
    sample_dataset,
    sobolev_norm,
    zero_truth,
)
from .inducing import (
    InducingBlocks,
    Strategy,
    build_blocks,
    equidistant_points,
    mdpp_sample,
    point_blocks,
    population_spectral_blocks,
    sample_spectral_blocks,
)
from .posterior import (
    ExactPosterior,
    VariationalPosterior,
    elbo,
    fit_exact,
    fit_variational,
    posterior_l2_spread,
    sample_function,
    spectral_coefficient_law,
)
from .krr_oracle import KrrProblem, krr_objective, rkhs_norm, stationarity_residual
from .theory import RateTerms, effective_dim, nu, predicted_rate, rate_terms
from .credible import (
    CredibleBall,
    coverage_indicator,
    credible_ball,
    l2_distance_to_truth,
    pointwise_band,
    radius,
)

__all__ = [name for name in dir() if not name.startswith("_")]
