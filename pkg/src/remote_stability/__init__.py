"""Stability certificates and Monte-Carlo simulation for remote state
estimation of several LTI processes over correlated Markov fading channels."""

from ._backend import BACKEND
from .channel_model import (
    MarkovChannelModel,
    compose_independent,
    current_state_drop_matrix,
    error_matrix,
    gilbert_elliott,
    hidden_error_matrix,
    redundant_error_matrix,
    sample_transition,
    success_matrix,
)
from .linalg_core import (
    ConvergenceError,
    elementwise_leq,
    riccati_steady_state,
    spectral_radius,
    stationary_distribution,
)
from .process_model import (
    LtiProcess,
    ProcessSet,
    cost_c,
    cost_g,
    local_kf_step,
    zeta_apply,
)
from .stability_analysis import (
    LambdaEstimate,
    PeriodicSelection,
    StabilityReport,
    Verdict,
    classify_policy_type,
    cycle_analytics,
    lambda_search,
    lambda_search_matrices,
    theorem1_verdict,
    theorem2_lambda,
    theorem2_verdict,
    theorem3_verdict,
    theorem4_verdict,
    theorem5_verdicts,
)

__version__ = "0.1.0"
