"""Exchange option pricing under an Ornstein-Uhlenbeck stochastic covariance
model driven by Inverse Gaussian subordinators."""

from .charfn import (CFEvaluation, IGParams, cf_integrated_cov, cf_logprices, cf_vplus,
                     d_integral_I, ig_exponent, integral_I)
from .margrabe import MargrabeShorthand, d_margrabe, delta, margrabe_price, shorthand
from .mc import McResult, SimConfig, export_paths, price_mc, sample_ig_increment, simulate_integrated_factors
from .model import (ComplexMatrixArg, ContractParams, IntegratedCovariance, ModelParams,
                    loading_matrix, trace_weights, vplus)
from .moments import (ConstrainedMoments, DensityGrid, MomentSet, constrained_cf,
                      constrained_centered_moments, constrained_raw_moments, pdf_fft,
                      unconstrained_moments)
from .pricers import (PriceReport, SplineCoefficients, build_spline, price_fft, price_spline, price_taylor,
                      spline_knots)

__all__ = [
    "CFEvaluation", "ComplexMatrixArg", "ConstrainedMoments", "ContractParams", "DensityGrid",
    "IGParams", "IntegratedCovariance", "MargrabeShorthand", "McResult", "ModelParams",
    "MomentSet", "PriceReport", "SimConfig", "SplineCoefficients", "build_spline",
    "cf_integrated_cov", "cf_logprices", "cf_vplus", "constrained_cf",
    "constrained_centered_moments", "constrained_raw_moments", "d_integral_I", "d_margrabe",
    "delta", "export_paths", "ig_exponent", "integral_I", "loading_matrix", "margrabe_price",
    "pdf_fft", "price_fft", "price_mc", "price_spline", "price_taylor", "sample_ig_increment",
    "shorthand", "simulate_integrated_factors", "spline_knots", "trace_weights", "unconstrained_moments", "vplus",
]
