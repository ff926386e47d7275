"""Inverse optimal control with a discount factor for control-affine systems.

Given dynamics ``f + g u``, a control weight ``R(x)`` and a quadratic value
``x^T P x``, compute the optimal feedback, synthesize the state weight
``Q(x)`` that makes the value optimal, and check the result against
independent numerical evidence.
"""

from .continuous import (
    closed_loop_field,
    gperp_membership,
    hjb_residual,
    integrate_closed_loop,
    min_discount_continuous,
    norm_rate,
    optimal_control_continuous,
    r_condition,
    r_upper_bound,
    synthesize_q_continuous,
    theorem3_drift_check,
)
from .discrete import (
    bellman_residual,
    deadbeat_q_approx,
    gain_m,
    max_discount_discrete,
    optimal_control_discrete,
    q_single_input_form,
    simulate_discrete,
    step_closed_loop,
    synthesize_q_discrete,
)
from .errors import QuadIOCError
from .evidence import LipschitzEstimate, SamplingSpec, VerificationReport
from .expressions import eval_expression, parse_expression
from .geometry import QuadraticValue, WeightMatrix, p_inner, p_norm, validate_weight, value, value_gradient
from .systems import SystemModel, builtin_names, builtin_system, load_system, load_system_file
from .trajectory import Trajectory
from .verification import (
    brute_force_control,
    check_q_nonnegativity,
    estimate_lipschitz,
    rl_reward,
    rollout_vs_value,
    run_suite,
)

__version__ = "0.1.0"
