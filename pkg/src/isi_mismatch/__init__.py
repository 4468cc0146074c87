"""Achievable rates and error exponents for Gaussian ISI channels with a
mismatched (or universal) decoder."""

from .model import ChannelModel, DecoderMetric, InfeasibleError, InvalidInputError
from .rates import (RateConfig, RateResult, rate_ar_fixed, rate_ar_opt, rate_fc_fixed, rate_fc_opt, rate_universal,
                    sweep_rates)
from .exponents import error_exponent, error_exponent_universal, mismatch_info, objective_v
from .reference import matched_capacity

__all__ = [
    "ChannelModel",
    "DecoderMetric",
    "InfeasibleError",
    "InvalidInputError",
    "RateConfig",
    "RateResult",
    "rate_ar_fixed",
    "rate_ar_opt",
    "rate_fc_fixed",
    "rate_fc_opt",
    "rate_universal",
    "sweep_rates",
    "error_exponent",
    "error_exponent_universal",
    "mismatch_info",
    "objective_v",
    "matched_capacity",
]
