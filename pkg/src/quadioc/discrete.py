"""Discrete-time optimal control with a quadratic value function.

For ``x+ = f(x) + g(x) u``, cost ``sum gamma^k [Q(x_k) + u_k^T R(x_k) u_k]``
and value ``V(x) = x^T P x``, the one-step problem is a regularized least
squares in ``u`` whose minimizer is

    u = -gamma M(x)^{-1} g^T P f,   M(x) = R(x) + gamma g^T P g.

The state weight that makes ``V`` solve the Bellman equation is

    Q(x) = x^T P x - gamma f^T P f + gamma^2 f^T P g M^{-1} g^T P f.

Every function accepts a state ``(n,)`` or a stack ``(..., n)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, RegimeError
from .evidence import LipschitzEstimate
from .geometry import p_inner, p_norm, solve_spd, value, value_gradient
from .systems import DISCRETE, SystemModel
from .trajectory import Trajectory


def _require_discrete(sys: SystemModel) -> None:
    if sys.regime != DISCRETE:
        raise RegimeError(f"{sys.name} is a {sys.regime}-time model; a discrete-time model is required")


def _require_single_input(sys: SystemModel) -> None:
    if sys.m != 1:
        raise RegimeError(f"{sys.name} has m={sys.m}; this form is defined for a single input only")


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


def _parts(sys, x):
    x = np.asarray(x, dtype=float)
    f = sys.drift(x)
    g = sys.input_map(x)
    R = sys.control_weight(x)
    return x, f, g, R


def _gain(sys, g, R):
    P = sys.P.matrix
    return R + sys.gamma * np.einsum("...ia,ij,...jb->...ab", g, P, g)


def _gtPf(sys, g, f):
    return np.einsum("...ia,ij,...j->...a", g, sys.P.matrix, f)


def gain_m(sys: SystemModel, x) -> np.ndarray:
    """``M(x) = R(x) + gamma g^T(x) P g(x)``, shape ``(..., m, m)``."""
    _require_discrete(sys)
    _, _, g, R = _parts(sys, x)
    return _gain(sys, g, R)


def optimal_control_discrete(sys: SystemModel, x) -> np.ndarray:
    """Minimizer of ``u^T R u + gamma V(f + g u)``, shape ``(..., m)``."""
    _require_discrete(sys)
    _, f, g, R = _parts(sys, x)
    return -sys.gamma * solve_spd(_gain(sys, g, R), _gtPf(sys, g, f))


def optimal_control_inner_form(sys: SystemModel, x):
    """Single-input law written with the P-inner product.

    ``u = -[1 + R / (gamma ||g||_P^2)]^{-1} <f, g / ||g||_P^2>_P``.
    """
    _require_discrete(sys)
    _require_single_input(sys)
    _, f, g, R = _parts(sys, x)
    g1 = g[..., 0]
    r = R[..., 0, 0]
    gg = p_inner(g1, g1, sys.P)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = -p_inner(f, g1, sys.P) / gg / (1.0 + r / (sys.gamma * gg))
    return _out(np.where(gg > 0, u, 0.0))


def synthesize_q_discrete(sys: SystemModel, x):
    """State weight ``Q(x)`` for which ``x^T P x`` solves the Bellman equation."""
    _require_discrete(sys)
    x, f, g, R = _parts(sys, x)
    b = _gtPf(sys, g, f)
    corr = np.einsum("...a,...a->...", b, solve_spd(_gain(sys, g, R), b))
    gam = sys.gamma
    return _out(value(x, sys.P) - gam * value(f, sys.P) + gam**2 * corr)


def q_single_input_form(sys: SystemModel, x):
    """``||x||_P^2 - gamma Q2(x)`` with the distance term

    ``Q2 = ||f||_P^2 - [1 + R/(gamma ||g||_P^2)]^{-1} |<f, g/||g||_P>_P|^2``.

    Where ``g(x) = 0`` the projection term is taken as zero.
    """
    _require_discrete(sys)
    _require_single_input(sys)
    x, f, g, R = _parts(sys, x)
    g1 = g[..., 0]
    r = R[..., 0, 0]
    gn = p_norm(g1, sys.P)
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = p_inner(f, g1 / np.expand_dims(gn, -1), sys.P)
        shrink = 1.0 / (1.0 + r / (sys.gamma * gn**2))
        q2 = value(f, sys.P) - np.where(gn > 0, shrink * proj**2, 0.0)
    return _out(value(x, sys.P) - sys.gamma * q2)


def step_closed_loop(sys: SystemModel, x) -> np.ndarray:
    """One step ``x+ = f(x) + g(x) u(x)`` under the optimal law."""
    _require_discrete(sys)
    _, f, g, R = _parts(sys, x)
    u = -sys.gamma * solve_spd(_gain(sys, g, R), _gtPf(sys, g, f))
    return f + np.einsum("...ia,...a->...i", g, u)


def deadbeat_q_approx(sys: SystemModel, x):
    """``V(x) - gamma V(x+)``: the small-``R`` approximation of ``Q``.

    The exact gap to :func:`synthesize_q_discrete` is ``-u^T R u``.
    """
    _require_discrete(sys)
    _require_single_input(sys)
    x = np.asarray(x, dtype=float)
    return _out(value(x, sys.P) - sys.gamma * value(step_closed_loop(sys, x), sys.P))


def stage_cost_discrete(sys: SystemModel, x, u=None):
    """``Q(x) + u^T R(x) u`` with ``u`` defaulting to the optimal law."""
    x = np.asarray(x, dtype=float)
    if u is None:
        u = optimal_control_discrete(sys, x)
    R = sys.control_weight(x)
    return _out(synthesize_q_discrete(sys, x) + np.einsum("...a,...ab,...b->...", u, R, u))


def bellman_residual(sys: SystemModel, x):
    """``V(x) - [Q(x) + u^T R u + gamma V(x+)]`` with the analytic ``u``.

    Vanishes up to rounding wherever the model assumptions hold.
    """
    _require_discrete(sys)
    x, f, g, R = _parts(sys, x)
    u = optimal_control_discrete(sys, x)
    x_next = f + np.einsum("...ia,...a->...i", g, u)
    rhs = (
        synthesize_q_discrete(sys, x)
        + np.einsum("...a,...ab,...b->...", u, R, u)
        + sys.gamma * value(x_next, sys.P)
    )
    return _out(value(x, sys.P) - rhs)


def first_order_residual(sys: SystemModel, x) -> np.ndarray:
    """Stationarity ``2 R u + gamma g^T grad V(x+)`` at the analytic ``u``."""
    _require_discrete(sys)
    x, f, g, R = _parts(sys, x)
    u = optimal_control_discrete(sys, x)
    x_next = f + np.einsum("...ia,...a->...i", g, u)
    grad = value_gradient(x_next, sys.P)
    return 2.0 * np.einsum("...ab,...b->...a", R, u) + sys.gamma * np.einsum("...ia,...i->...a", g, grad)


def simulate_discrete(sys: SystemModel, x0, steps: int) -> Trajectory:
    """Iterate the optimal closed loop for ``steps`` steps from ``x0``."""
    _require_discrete(sys)
    if steps < 0:
        raise ValueError("steps must be non-negative")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise DimensionError(f"initial state must have length {sys.n}")
    xs = np.empty((steps + 1, sys.n))
    xs[0] = x0
    for k in range(steps):
        xs[k + 1] = step_closed_loop(sys, xs[k])
    # stage quantities are evaluated on the whole path at once
    us = optimal_control_discrete(sys, xs)
    stage = np.atleast_1d(stage_cost_discrete(sys, xs, us))
    discount = sys.gamma ** np.arange(steps + 1)
    running = np.concatenate([[0.0], np.cumsum(discount * stage)[:-1]])
    return Trajectory(
        regime=DISCRETE,
        dt=1.0,
        t=np.arange(steps + 1, dtype=float),
        x=xs,
        u=np.asarray(us).reshape(steps + 1, sys.m),
        stage_cost=stage,
        value=np.atleast_1d(value(xs, sys.P)),
        discounted_running_cost=running,
    )


def max_discount_discrete(L: LipschitzEstimate | float) -> float:
    """Largest discount ``min(1, 1/L)`` for which ``Q >= 0`` is guaranteed."""
    L_hat = L.L_hat if isinstance(L, LipschitzEstimate) else float(L)
    if L_hat < 0:
        raise ValueError("Lipschitz estimate must be non-negative")
    if L_hat == 0:
        return 1.0
    return min(1.0, 1.0 / L_hat)
