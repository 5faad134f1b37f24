"""Outage probability of MIMO Rayleigh-fading channels under diagonal power
allocation: quadrature, Monte Carlo, derivative tests and sweeps."""

from .core import ChannelSpec, OutageEstimate, PowerSplit
from .mcsim import RandomStream, mc_outage_direct, mc_outage_timo_reduced, sample_channel
from .mimo_general import (
    PowerVector,
    SpecialQ,
    mc_outage_special_q,
    perturb_double_prime,
    perturb_prime,
    theorem2_check,
    uniform_power_vector,
)
from .specfun import ConvergenceError, QuadratureSpec
from .timo import (
    derivative_report,
    find_min_split,
    outage_timo,
    theorem1_check,
    total_first_derivative,
    total_second_derivative,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec",
    "ConvergenceError",
    "OutageEstimate",
    "PowerSplit",
    "PowerVector",
    "QuadratureSpec",
    "RandomStream",
    "SpecialQ",
    "derivative_report",
    "find_min_split",
    "mc_outage_direct",
    "mc_outage_special_q",
    "mc_outage_timo_reduced",
    "outage_timo",
    "perturb_double_prime",
    "perturb_prime",
    "sample_channel",
    "theorem1_check",
    "theorem2_check",
    "total_first_derivative",
    "total_second_derivative",
    "uniform_power_vector",
]
