"""Continuous-time optimal control with a quadratic value function.

For ``dx/dt = f(x) + g(x) u``, cost ``int e^{-gamma t} [Q + u^T R u] dt`` and
``V(x) = x^T P x`` the HJB minimizer is ``u = -R^{-1} g^T P x`` and the
matching state weight is

    Q(x) = gamma x^T P x - 2 x^T P f + x^T P g R^{-1} g^T P x.

Functions accept a state ``(n,)`` or a stack ``(..., n)`` unless noted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DivergenceError, RegimeError
from .evidence import LipschitzEstimate, SamplingSpec, VerificationReport
from .geometry import p_inner, p_norm, solve_spd, value, value_gradient
from .systems import CONTINUOUS, SystemModel
from .trajectory import Trajectory

MEMBERSHIP_TOL = 1e-10


def _require_continuous(sys: SystemModel) -> None:
    if sys.regime != CONTINUOUS:
        raise RegimeError(f"{sys.name} is a {sys.regime}-time model; a continuous-time model is required")


def _require_single_input(sys: SystemModel) -> None:
    if sys.m != 1:
        raise RegimeError(f"{sys.name} has m={sys.m}; this check is defined for a single input only")


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


def _gtPx(sys, g, x):
    return np.einsum("...ia,ij,...j->...a", g, sys.P.matrix, x)


def _control(sys, x, g, R):
    return -solve_spd(R, _gtPx(sys, g, x))


def optimal_control_continuous(sys: SystemModel, x) -> np.ndarray:
    """``u = -R(x)^{-1} g^T(x) P x``, shape ``(..., m)``."""
    _require_continuous(sys)
    x = np.asarray(x, dtype=float)
    return _control(sys, x, sys.input_map(x), sys.control_weight(x))


def optimal_control_inner_form(sys: SystemModel, x):
    """Single-input law ``u = -R^{-1} <g, x>_P``."""
    _require_continuous(sys)
    _require_single_input(sys)
    x = np.asarray(x, dtype=float)
    g1 = sys.input_map(x)[..., 0]
    return _out(-p_inner(g1, x, sys.P) / sys.control_weight(x)[..., 0, 0])


def synthesize_q_continuous(sys: SystemModel, x):
    """State weight ``Q(x)`` for which ``x^T P x`` solves the HJB equation."""
    _require_continuous(sys)
    x = np.asarray(x, dtype=float)
    f = sys.drift(x)
    b = _gtPx(sys, sys.input_map(x), x)
    R = sys.control_weight(x)
    quad = np.einsum("...a,...a->...", b, solve_spd(R, b))
    return _out(sys.gamma * value(x, sys.P) - 2.0 * p_inner(f, x, sys.P) + quad)


def q_single_input_form_continuous(sys: SystemModel, x):
    """``gamma ||x||_P^2 - 2 <f, x>_P + R^{-1} |<g, x>_P|^2``."""
    _require_continuous(sys)
    _require_single_input(sys)
    x = np.asarray(x, dtype=float)
    f = sys.drift(x)
    g1 = sys.input_map(x)[..., 0]
    r = sys.control_weight(x)[..., 0, 0]
    return _out(
        sys.gamma * p_norm(x, sys.P) ** 2 - 2.0 * p_inner(f, x, sys.P) + p_inner(g1, x, sys.P) ** 2 / r
    )


def stage_cost_continuous(sys: SystemModel, x, u=None):
    """``Q(x) + u^T R(x) u`` with ``u`` defaulting to the optimal law."""
    x = np.asarray(x, dtype=float)
    if u is None:
        u = optimal_control_continuous(sys, x)
    R = sys.control_weight(x)
    return _out(synthesize_q_continuous(sys, x) + np.einsum("...a,...ab,...b->...", u, R, u))


def hjb_residual(sys: SystemModel, x):
    """``gamma V - [Q + u^T R u + grad V . (f + g u)]`` at the analytic ``u``."""
    _require_continuous(sys)
    x = np.asarray(x, dtype=float)
    f = sys.drift(x)
    g = sys.input_map(x)
    R = sys.control_weight(x)
    u = _control(sys, x, g, R)
    xdot = f + np.einsum("...ia,...a->...i", g, u)
    rhs = (
        synthesize_q_continuous(sys, x)
        + np.einsum("...a,...ab,...b->...", u, R, u)
        + np.einsum("...i,...i->...", value_gradient(x, sys.P), xdot)
    )
    return _out(sys.gamma * value(x, sys.P) - rhs)


def closed_loop_field(sys: SystemModel, x) -> np.ndarray:
    """``f(x) - g(x) R(x)^{-1} g^T(x) P x``."""
    _require_continuous(sys)
    x = np.asarray(x, dtype=float)
    g = sys.input_map(x)
    u = _control(sys, x, g, sys.control_weight(x))
    return sys.drift(x) + np.einsum("...ia,...a->...i", g, u)


def gradient_projection_field(sys: SystemModel, x) -> np.ndarray:
    """``-<grad V, g / ||g||_P^2>_P g`` for a single input.

    Equals ``u g`` under the optimal law when ``R = ||g||_P^2 / 2``.
    """
    _require_single_input(sys)
    x = np.asarray(x, dtype=float)
    g1 = sys.input_map(x)[..., 0]
    coef = p_inner(value_gradient(x, sys.P), g1, sys.P) / p_inner(g1, g1, sys.P)
    return -np.expand_dims(coef, -1) * g1


def _rk4_states(sys: SystemModel, X0: np.ndarray, dt: float, steps: int) -> np.ndarray:
    """States ``(steps + 1, ..., n)`` of RK4 started from ``X0`` of shape ``(..., n)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    x = X0
    xs = np.empty((steps + 1,) + X0.shape)
    xs[0] = x
    for k in range(steps):
        k1 = closed_loop_field(sys, x)
        k2 = closed_loop_field(sys, x + 0.5 * dt * k1)
        k3 = closed_loop_field(sys, x + 0.5 * dt * k2)
        k4 = closed_loop_field(sys, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"state became non-finite at step {k + 1}", step=k + 1)
        xs[k + 1] = x
    return xs


def _record(sys: SystemModel, xs: np.ndarray, dt: float) -> Trajectory:
    steps = len(xs) - 1
    t = dt * np.arange(steps + 1)
    us = optimal_control_continuous(sys, xs)
    J = np.atleast_1d(stage_cost_continuous(sys, xs, us))
    w = np.exp(-sys.gamma * t) * J
    running = np.concatenate([[0.0], np.cumsum(0.5 * dt * (w[1:] + w[:-1]))])
    return Trajectory(
        regime=CONTINUOUS,
        dt=float(dt),
        t=t,
        x=xs,
        u=np.asarray(us).reshape(steps + 1, sys.m),
        stage_cost=J,
        value=np.atleast_1d(value(xs, sys.P)),
        discounted_running_cost=running,
    )


def integrate_closed_loop(sys: SystemModel, x0, dt: float, steps: int) -> Trajectory:
    """Fixed-step classical RK4 on the optimal closed loop.

    The discounted cost ``int e^{-gamma t} J dt`` is accumulated with the
    trapezoidal rule on the same grid, so its error is ``O(dt^2)``.
    Raises :class:`DivergenceError` if the state stops being finite.
    """
    _require_continuous(sys)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise DimensionError(f"initial state must have length {sys.n}")
    return _record(sys, _rk4_states(sys, x0, dt, steps), dt)


def integrate_closed_loop_many(sys: SystemModel, X0, dt: float, steps: int) -> list[Trajectory]:
    """:func:`integrate_closed_loop` for each row of ``X0``, stepped together."""
    _require_continuous(sys)
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    if X0.shape[1] != sys.n:
        raise DimensionError(f"initial states must have length {sys.n}")
    xs = _rk4_states(sys, X0, dt, steps)
    return [_record(sys, xs[:, i], dt) for i in range(len(X0))]


@dataclass(frozen=True)
class NormRateSample:
    """Time derivative ``z = d||x||_P^2/dt`` of the squared norm at ``x``."""

    x: np.ndarray
    z: float | np.ndarray


def norm_rate(sys: SystemModel, x) -> NormRateSample:
    """``z = 2 <x, xdot>_P`` along the optimal closed loop."""
    _require_continuous(sys)
    x = np.asarray(x, dtype=float)
    return NormRateSample(x, _out(2.0 * p_inner(closed_loop_field(sys, x), x, sys.P)))


def norm_rate_single_input(sys: SystemModel, x):
    """``2 [<f, x>_P - R^{-1} |<g, x>_P|^2]``, the single-input form of ``z``."""
    _require_continuous(sys)
    _require_single_input(sys)
    x = np.asarray(x, dtype=float)
    g1 = sys.input_map(x)[..., 0]
    r = sys.control_weight(x)[..., 0, 0]
    return _out(2.0 * (p_inner(sys.drift(x), x, sys.P) - p_inner(g1, x, sys.P) ** 2 / r))


def _g_dot_x(sys, x):
    return p_inner(sys.input_map(x)[..., 0], x, sys.P)


def gperp_membership(sys: SystemModel, x, tol: float = MEMBERSHIP_TOL):
    """Whether ``|<g(x), x>_P| <= tol``, i.e. ``x`` lies in ``S_g_perp``."""
    _require_single_input(sys)
    h = np.abs(_g_dot_x(sys, np.asarray(x, dtype=float))) <= tol
    return bool(h) if np.ndim(h) == 0 else h


def sample_gperp(
    sys: SystemModel,
    spec: SamplingSpec,
    n_radii: int = 8,
    n_angles: int = 64,
    tol: float = MEMBERSHIP_TOL,
) -> np.ndarray:
    """Nonzero states with ``<g(x), x>_P = 0``, shape ``(k, n)``.

    Radii form a log grid up to the box radius. For every draw, a random
    great circle of that radius is scanned for sign changes of
    ``<g(x), x>_P``, which are then bisected to full precision. Roots whose
    residual exceeds ``tol * (1 + rho^2)`` are dropped. In one dimension the
    circle degenerates to ``{-rho, rho}``.
    """
    _require_single_input(sys)
    n = sys.n
    rho_max = spec.radius(n)
    radii = np.geomspace(rho_max * 1e-3, rho_max, n_radii)
    rng = spec.rng()
    per_radius = max(1, spec.count // n_radii)
    theta = np.linspace(0.0, 2 * np.pi, n_angles + 1)
    found = []
    for rho in radii:
        if n == 1:
            cand = np.array([[-rho], [rho]])
            keep = np.abs(_g_dot_x(sys, cand)) <= tol * (1 + rho**2)
            found.append(cand[keep])
            continue
        # orthonormal pair (a, b) per circle
        basis = np.linalg.qr(rng.standard_normal((per_radius, n, 2)))[0]
        a, b = basis[..., 0], basis[..., 1]

        def on_circle(ang, a=a, b=b, rho=rho):
            return rho * (np.cos(ang)[..., None] * a + np.sin(ang)[..., None] * b)

        pts = on_circle(np.broadcast_to(theta, (per_radius, theta.size)), a[:, None], b[:, None])
        h = _g_dot_x(sys, pts)
        found.append(pts[:, :-1][h[:, :-1] == 0])
        circ, idx = np.nonzero(h[:, :-1] * h[:, 1:] < 0)
        if circ.size == 0:
            continue
        lo, hi = theta[idx], theta[idx + 1]
        h_lo = h[circ, idx]
        ca, cb = a[circ], b[circ]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            hm = _g_dot_x(sys, on_circle(mid, ca, cb))
            left = np.sign(hm) == np.sign(h_lo)
            lo = np.where(left, mid, lo)
            h_lo = np.where(left, hm, h_lo)
            hi = np.where(left, hi, mid)
        roots = on_circle(0.5 * (lo + hi), ca, cb)
        keep = np.abs(_g_dot_x(sys, roots)) <= tol * (1 + rho**2)
        found.append(roots[keep])
    if not found:
        return np.empty((0, n))
    return np.concatenate(found).reshape(-1, n)


def theorem3_drift_check(sys: SystemModel, spec: SamplingSpec, tol: float = MEMBERSHIP_TOL) -> VerificationReport:
    """Check ``<f(x), x>_P <= 0`` on sampled points of ``S_g_perp``.

    With a zero discount this is the sufficient condition for ``Q >= 0``.
    Passes when the largest sampled value is at most ``tol * (1 + ||x||_P^2)``.
    """
    _require_continuous(sys)
    _require_single_input(sys)
    if sys.gamma != 0:
        raise RegimeError(f"{sys.name}: the drift condition applies to a zero discount, got gamma={sys.gamma}")
    X = sample_gperp(sys, spec)
    extras = {"gperp_points": len(X)}
    if len(X) == 0:
        extras["note"] = "S_g_perp contains only the origin among sampled radii"
        return VerificationReport(sys.name, "theorem3_drift", 0, 0.0, [0.0] * sys.n, True, tol, extras)
    fx = p_inner(sys.drift(X), X, sys.P)
    scaled = fx / (1.0 + value(X, sys.P))
    k = int(np.argmax(scaled))
    extras.update(min_f_dot_x=float(np.min(fx)), max_f_dot_x=float(np.max(fx)))
    return VerificationReport(
        sys.name, "theorem3_drift", len(X), float(fx[k]), X[k].tolist(), bool(scaled[k] <= tol), tol, extras
    )


def r_upper_bound(sys: SystemModel, x, tol: float = MEMBERSHIP_TOL):
    """``<f, x>_P / |<g, x>_P|^2`` at a single state, or None on ``S_g_perp``."""
    _require_single_input(sys)
    x = np.asarray(x, dtype=float)
    gx = _g_dot_x(sys, x)
    if abs(gx) <= tol:
        return None
    return float(p_inner(sys.drift(x), x, sys.P) / gx**2)


@dataclass(frozen=True)
class RCondition:
    """Both readings of the control-weight condition at one state.

    ``literal_holds`` is the printed test ``bound - R(x) > 0``; ``decreasing``
    is the direct test ``z(x) < 0``. They can disagree when ``<f, x>_P < 0``.
    """

    x: tuple[float, ...]
    bound: float | None
    R: float
    literal_holds: bool | None
    z: float
    decreasing: bool


def r_condition(sys: SystemModel, x) -> RCondition:
    x = np.asarray(x, dtype=float)
    bound = r_upper_bound(sys, x)
    r = float(sys.control_weight(x)[0, 0])
    z = norm_rate_single_input(sys, x)
    return RCondition(
        tuple(map(float, x)),
        bound,
        r,
        None if bound is None else bound - r > 0,
        z,
        z < 0,
    )


def min_discount_continuous(L: LipschitzEstimate | float) -> float:
    """Smallest discount ``2 L`` for which ``Q >= 0`` is guaranteed."""
    L_hat = L.L_hat if isinstance(L, LipschitzEstimate) else float(L)
    if L_hat < 0:
        raise ValueError("Lipschitz estimate must be non-negative")
    return 2.0 * L_hat
