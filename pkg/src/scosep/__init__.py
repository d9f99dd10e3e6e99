"""Desk-scale testbench separating stochastic-gradient training from batch
empirical-risk minimization on adversarial stochastic-convex constructions."""

from .distributions import (
    Dataset,
    DistSpec,
    d_for,
    grid_H,
    load_dataset,
    make_composite_dataset,
    make_dataset,
    sample_C,
    sample_D,
    sample_D2,
    sample_Dbar,
    sample_NN,
    sample_drift,
    sample_kink,
    save_dataset,
    spec_C,
    spec_D,
    spec_D2,
    spec_Dbar,
    spec_NN,
    spec_drift,
    spec_kink,
)
from .errors import (
    CapacityError,
    ConfigurationError,
    DataExhaustedError,
    DimensionError,
    ParameterError,
    ScosepError,
)
from .losses import (
    DriftLoss,
    EvalResult,
    FaLoss,
    FbLoss,
    FcLoss,
    FnLoss,
    GridLoss,
    KinkLoss,
    NnLoss,
    SumLoss,
    active_block,
    c_n_from_gamma,
    drift_eval,
    fa_eval,
    fb_eval,
    fc_eval,
    fn_eval,
    grid_combine,
    kink_h,
    kink_loss_eval,
    nn_eval,
    sum_combine,
)
from .optimizers import OptConfig, RunResult, initial_point, run_gd, run_multipass, run_sgd
from .population import (
    PopEstimate,
    PopModel,
    excess,
    fa_jensen_bound,
    pop_drift,
    pop_fa,
    pop_fb,
    pop_fc,
    pop_general_lb,
    pop_kink,
    pop_nn,
)
from .rerm import (
    CandidateSet,
    Regularizer,
    empirical_risk,
    fa_candidates,
    find_special_coordinate,
    rerm_search,
    separation_certificate,
)
from .relunet import (
    LayeredNet,
    PiecewiseLinear,
    ReluCombo,
    approx_smooth,
    build_fa_network,
    build_fb_network,
    diag_forward,
    n_intervals,
    pwl_to_relu,
)
from .rng import Stream
from .vecspace import BallSpec, BitMask, argmax_coord, hadamard, norm, norm_sq, project_ball
from .verify import ORACLES, OracleReport, run_oracles

__version__ = "1.0.0"
