from .approx import (
    ApproxMoments,
    ConvergenceError,
    SqrtMoments,
    c_moments,
    cramer_rao_bound,
    fisher_information_normal,
    fisher_information_numeric,
    minus_current_model,
    qhat_normal_approx,
    sqrt_mean_tricomi,
    sqrt_shifted_moments,
)
from .mse import MseResult, ScalingFit, TooManyFailures, empirical_mse, run_blocks, scaling_fit, summarize
