"""Distortion exponents of layered joint source-channel coding over MIMO block-fading channels."""

__version__ = "0.1.0"

from .channel import ChannelSpec, DmtCurve, dmt_curve, dmt_eval, dmt_inverse, intersect_line, sd_diversity
from .errors import DomainError, GridTooLargeError, InfeasibleError
from .exponents import (
    INFINITE,
    ExponentResult,
    compute_exponent,
    exponent_bs_finite,
    exponent_bs_infinite,
    exponent_hls_infinite,
    exponent_ls_infinite,
    exponent_single_layer,
    exponent_upper_bound,
    segment_climb,
)
from .montecarlo import (
    ChannelRealization,
    MonteCarloEstimate,
    SimulationConfig,
    SnrPoint,
    bs_expected_distortion,
    estimate_exponent,
    hls_expected_distortion,
    instantaneous_capacity,
    ls_expected_distortion,
    sample_channel,
    simulate,
)
from .optimizer import OptimizationResult, SearchSpace, optimize_finite_snr
from .staircase import LayerAllocation, Scheme, bs_allocation, solve_hls_staircase, solve_ls_staircase

__all__ = [
    "ChannelSpec",
    "DmtCurve",
    "dmt_curve",
    "dmt_eval",
    "dmt_inverse",
    "intersect_line",
    "sd_diversity",
    "DomainError",
    "GridTooLargeError",
    "InfeasibleError",
    "INFINITE",
    "ExponentResult",
    "compute_exponent",
    "exponent_bs_finite",
    "exponent_bs_infinite",
    "exponent_hls_infinite",
    "exponent_ls_infinite",
    "exponent_single_layer",
    "exponent_upper_bound",
    "segment_climb",
    "ChannelRealization",
    "MonteCarloEstimate",
    "SimulationConfig",
    "SnrPoint",
    "bs_expected_distortion",
    "estimate_exponent",
    "hls_expected_distortion",
    "instantaneous_capacity",
    "ls_expected_distortion",
    "sample_channel",
    "simulate",
    "OptimizationResult",
    "SearchSpace",
    "optimize_finite_snr",
    "LayerAllocation",
    "Scheme",
    "bs_allocation",
    "solve_hls_staircase",
    "solve_ls_staircase",
]
