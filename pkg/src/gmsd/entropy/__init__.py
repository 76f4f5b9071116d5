from .degeneracy import COLLAPSE_THRESHOLD, min_weight_channel_average, summarize, weights_bhwck
from .factorized import FactorizedDensity, factorized_pmf
from .gmm import (
    DIAGNOSTICS,
    PROB_FLOOR,
    SCALE_MAX,
    SCALE_MIN,
    GmmParams,
    add_uniform_noise,
    gmm_discrete_pmf,
    params_from_raw,
    quantize_round,
    rate_bits,
)
from .tables import ALPHABET, PRECISION, PmfTable, build_pmf_table, quantize_pmf

__all__ = [
    "ALPHABET",
    "COLLAPSE_THRESHOLD",
    "DIAGNOSTICS",
    "FactorizedDensity",
    "GmmParams",
    "PRECISION",
    "PROB_FLOOR",
    "PmfTable",
    "SCALE_MAX",
    "SCALE_MIN",
    "add_uniform_noise",
    "build_pmf_table",
    "factorized_pmf",
    "gmm_discrete_pmf",
    "min_weight_channel_average",
    "params_from_raw",
    "quantize_pmf",
    "quantize_round",
    "rate_bits",
    "summarize",
    "weights_bhwck",
]
