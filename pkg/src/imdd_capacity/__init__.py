"""Capacity, bounds and rate regions of IM/DD Gaussian optical wireless channels."""

from .channel import (
    DiscreteDistribution,
    RateNats,
    SisoChannel,
    TruncGaussParams,
    canonicalize,
    q_function,
    to_bits,
    trunc_exp_param,
    trunc_gauss_params,
)
from .errors import (
    ConvergenceError,
    DegenerateError,
    ImddError,
    InvalidChannelError,
    NumericError,
    RegimeError,
    ResourceError,
)
from .mi import OutputGrid, build_grid, mc_mutual_information, mutual_information, transition_matrix
from .capacity import (
    CapacityOptions,
    blahut_arimoto,
    capacity,
    optimality_check,
    optimize_fixed_k,
)
from .bounds import BoundResult, applicable_methods, evaluate
from .multi_aperture import (
    MimoChannel,
    mimo_high_snr,
    mimo_low_snr_eta,
    mimo_qr_rate,
    miso_high_snr,
    miso_low_snr_gamma,
    miso_reduce,
    parallel_bounds,
    simo_reduce,
)
from .multi_user import (
    BcChannel,
    MacChannel,
    RateRegion2,
    bc_inner_tg,
    bc_outer,
    mac_inner_tg,
    mac_outer,
)

__version__ = "0.1.0"
