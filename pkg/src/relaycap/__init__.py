"""Capacity bounds for a Gaussian relay channel whose state is known
noncausally at the source only, plus finite-alphabet rate evaluators."""

from .core import (
    ChannelParams,
    ConsistencyError,
    GaussianJoint,
    InvalidInputError,
    JointPmf,
    RelayCapError,
    SingularCovarianceError,
    bits_to_nats,
    conditional_mutual_information,
    db_to_linear,
    entropy,
    gaussian_mi,
    linear_to_db,
    mutual_information,
    nats_to_bits,
)
from .gaussian_bounds import (
    BoundResult,
    InfeasibleParameterError,
    Thm4Params,
    Thm5Params,
    UpperBoundParams,
    alpha_feasible_interval,
    asymptotic_reference,
    cutset_bound,
    degenerate_parallel_capacity,
    delta_q,
    df_state_as_noise_bound,
    maximize_thm4,
    maximize_thm5,
    maximize_upper_bound,
    q_tilde,
    r_dpc,
    thm4_rate_at,
    thm5_rate_at,
    upper_bound_objective,
)
from .optimizer import MaximizeResult, OptimizerConfig, OptimizerError, maximize_box
from .sweep import SweepSpec, run_point, run_sweep

__version__ = "0.1.0"
