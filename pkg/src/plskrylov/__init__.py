"""PLS regression through Krylov subspaces, residual polynomials and risk bounds."""

from .errors import (
    CombinatorialCapError,
    ConfigError,
    DegenerateMeasureError,
    DimensionMismatchError,
    HypothesisViolation,
    IllConditionedMomentsError,
    NumericalError,
    RankDeficientError,
    ValidationError,
    ZeroSeedError,
)
from .spectral import SpectralDecomposition, SpectralProjections, decompose, project
from .pls_core import PlsPath, krylov_basis, ols_fit, pls_fit, pls_fit_nipals
from .respoly import (
    DiscreteMeasure,
    ResidualPolynomial,
    SubsetWeights,
    build_measure,
    residual_poly_from_fit,
    residual_poly_moments,
    residual_values_vandermonde,
)
from .bounds import (
    BoundConstants,
    empirical_risk_bound,
    minimax_envelope,
    prediction_decomposition,
    prediction_error_bound,
)

__version__ = "0.1.0"
