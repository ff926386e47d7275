"""Independent oracles and sampled evidence for the analytic results.

The brute-force minimizer never uses the closed-form laws: it searches the
one-step (discrete) or pointwise Hamiltonian (continuous) objective on a
grid and refines by golden-section search. Everything else samples states
from a :class:`SamplingSpec` and reduces to a worst case, ties broken
toward the lower sample index.
"""

from __future__ import annotations

import math

import numpy as np

from . import continuous as cont
from . import discrete as disc
from .errors import ModelAssumptionError, OracleError
from .evidence import LipschitzEstimate, SamplingSpec, VerificationReport
from .geometry import value, value_gradient
from .systems import CONTINUOUS, DISCRETE, SystemModel, rank_deficient_states

GRID_POINTS = 2001
GOLDEN_TOL = 1e-9
ORACLE_TOL = 1e-6
RESIDUAL_RTOL = 1e-9
NONNEG_TOL = 1e-12
ROLLOUT_RTOL = 1e-4
ORACLE_STATES = 100

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(fun, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Minimize a unimodal ``fun`` on ``[lo, hi]`` to bracket width ``tol``."""
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = fun(c), fun(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = fun(d)
    return 0.5 * (lo + hi)


def control_objective(sys: SystemModel, x):
    """The function of ``u`` that the optimal law minimizes at state ``x``.

    Discrete: ``u^T R u + gamma V(f + g u)``. Continuous: the bracketed HJB
    term ``u^T R u + grad V(x) . (f + g u)`` less its constant part
    ``grad V . f``. Accepts ``u`` of shape
    ``(..., m)``.
    """
    x = np.asarray(x, dtype=float)
    f0 = sys.drift(x)
    G = sys.input_map(x)
    R = sys.control_weight(x)
    if sys.regime == DISCRETE:

        def objective(u):
            u = np.asarray(u, dtype=float)
            x_next = f0 + np.einsum("ia,...a->...i", G, u)
            return np.einsum("...a,ab,...b->...", u, R, u) + sys.gamma * value(x_next, sys.P)

    else:
        grad = value_gradient(x, sys.P)

        # grad V . f(x) does not depend on u and only adds rounding noise
        def objective(u):
            u = np.asarray(u, dtype=float)
            return np.einsum("...a,ab,...b->...", u, R, u) + np.einsum("ia,...a->...i", G, u) @ grad

    return objective


def _grid_argmin(objective, m: int, u_max: float, points: int) -> tuple[np.ndarray, bool]:
    axis = np.linspace(-u_max, u_max, points)
    if m == 1:
        vals = objective(axis[:, None])
        k = int(np.argmin(vals))
        return np.array([axis[k]]), k in (0, points - 1)
    best_val, best = np.inf, None
    for i, a in enumerate(axis):
        row = np.column_stack([np.full(points, a), axis])
        vals = objective(row)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best = vals[j], (i, j)
    i, j = best
    edge = {0, points - 1}
    return np.array([axis[i], axis[j]]), i in edge or j in edge


def brute_force_control(
    sys: SystemModel, x, points: int = GRID_POINTS, tol: float = GOLDEN_TOL, widenings: int = 1
) -> np.ndarray:
    """Numerical minimizer of the control objective at one state.

    Grid search over ``[-u_max, u_max]^m`` with ``u_max = 10 (1 + ||x||)``,
    then golden-section refinement inside the neighbouring grid cells (cyclic
    over coordinates when ``m = 2``). A minimizer on the box edge triggers a
    ten-fold wider box, then :class:`OracleError`.
    """
    if sys.m > 2:
        raise OracleError(f"grid oracle supports m <= 2, got m={sys.m}")
    x = np.asarray(x, dtype=float)
    objective = control_objective(sys, x)
    u_max = 10.0 * (1.0 + float(np.linalg.norm(x)))
    for _ in range(widenings + 1):
        u, on_edge = _grid_argmin(objective, sys.m, u_max, points)
        if not on_edge:
            break
        u_max *= 10.0
    else:
        raise OracleError(f"minimizer not interior to the search box at x = {x.tolist()}")
    h = 2.0 * u_max / (points - 1)
    lo, hi = u - h, u + h
    for _ in range(200 if sys.m > 1 else 1):
        prev = u.copy()
        for a in range(sys.m):

            def along(s, a=a):
                v = u.copy()
                v[a] = s
                return float(objective(v))

            u[a] = golden_section(along, lo[a], hi[a], tol)
        if sys.m == 1 or np.max(np.abs(u - prev)) < tol:
            break
    if np.any(np.abs(u) >= u_max):
        raise OracleError(f"refined minimizer left the search box at x = {x.tolist()}")
    return u


def analytic_control(sys: SystemModel, x):
    if sys.regime == DISCRETE:
        return disc.optimal_control_discrete(sys, x)
    return cont.optimal_control_continuous(sys, x)


def synthesized_q(sys: SystemModel, x):
    if sys.regime == DISCRETE:
        return disc.synthesize_q_discrete(sys, x)
    return cont.synthesize_q_continuous(sys, x)


def optimality_residual(sys: SystemModel, x):
    """Bellman residual (discrete) or HJB residual (continuous)."""
    if sys.regime == DISCRETE:
        return disc.bellman_residual(sys, x)
    return cont.hjb_residual(sys, x)


def estimate_lipschitz(sys: SystemModel, spec: SamplingSpec) -> LipschitzEstimate:
    """Sampled ``max ||f(x)||_P^2 / ||x||_P^2`` over nonzero states."""
    X = spec.draw(sys.n)
    X = X[np.any(X != 0, axis=1)]
    ratio = value(sys.drift(X), sys.P) / value(X, sys.P)
    k = int(np.argmax(ratio))
    return LipschitzEstimate(float(ratio[k]), len(X), spec.box, tuple(X[k].tolist()))


def check_q_nonnegativity(sys: SystemModel, spec: SamplingSpec, tol: float = NONNEG_TOL) -> VerificationReport:
    """Sweep ``Q`` over the box; pass iff ``Q >= -tol (1 + ||x||_P^2)`` everywhere.

    The reported witness is the sample with the smallest scaled value.
    """
    X = spec.draw(sys.n)
    q = np.atleast_1d(synthesized_q(sys, X))
    scaled = q / (1.0 + value(X, sys.P))
    k = int(np.argmin(scaled))
    j = int(np.argmin(q))
    return VerificationReport(
        sys.name,
        "q_nonnegativity",
        len(X),
        float(q[k]),
        X[k].tolist(),
        bool(scaled[k] >= -tol),
        tol,
        {"min_q": float(q[j]), "min_q_state": X[j].tolist()},
    )


def check_discount_condition(sys: SystemModel, spec: SamplingSpec) -> VerificationReport:
    """Compare ``gamma`` with the bound implied by the sampled Lipschitz estimate.

    Informational: the bound is sufficient for ``Q >= 0`` but not necessary,
    and a sampled estimate only bounds the constant from below, so the
    verdict is None when the bound is not met.
    """
    L = estimate_lipschitz(sys, spec)
    if sys.regime == DISCRETE:
        bound = disc.max_discount_discrete(L)
        met = sys.gamma <= bound
        kind = "max_gamma"
    else:
        bound = cont.min_discount_continuous(L)
        met = sys.gamma >= bound
        kind = "min_gamma"
    return VerificationReport(
        sys.name,
        "discount_condition",
        L.samples,
        L.L_hat,
        None if L.witness is None else list(L.witness),
        True if met else None,
        None,
        {"lipschitz": L, kind: bound, "gamma": sys.gamma, "sampled_lower_bound": True},
    )


def check_oracle_agreement(sys: SystemModel, spec: SamplingSpec, tol: float = ORACLE_TOL) -> VerificationReport:
    """Analytic law versus :func:`brute_force_control` on up to 100 states."""
    X = spec.draw(sys.n, min(spec.count, ORACLE_STATES))
    u_analytic = np.asarray(analytic_control(sys, X)).reshape(len(X), sys.m)
    dev = np.array(
        [np.max(np.abs(brute_force_control(sys, x) - ua)) for x, ua in zip(X, u_analytic)]
    )
    k = int(np.argmax(dev))
    return VerificationReport(
        sys.name, "oracle_agreement", len(X), float(dev[k]), X[k].tolist(), bool(dev[k] <= tol), tol
    )


def check_first_order(sys: SystemModel, spec: SamplingSpec, tol: float = RESIDUAL_RTOL) -> VerificationReport:
    """Stationarity of the one-step objective at the analytic discrete law."""
    X = spec.draw(sys.n)
    res = np.max(np.abs(disc.first_order_residual(sys, X)), axis=-1)
    scaled = res / (1.0 + value(X, sys.P))
    k = int(np.argmax(scaled))
    return VerificationReport(
        sys.name, "first_order_condition", len(X), float(res[k]), X[k].tolist(), bool(scaled[k] <= tol), tol
    )


def check_residual(sys: SystemModel, spec: SamplingSpec, tol: float = RESIDUAL_RTOL) -> VerificationReport:
    """``|residual| <= tol (1 + V(x))`` for the Bellman or HJB identity."""
    X = spec.draw(sys.n)
    res = np.abs(np.atleast_1d(optimality_residual(sys, X)))
    scaled = res / (1.0 + value(X, sys.P))
    k = int(np.argmax(scaled))
    name = "bellman_residual" if sys.regime == DISCRETE else "hjb_residual"
    return VerificationReport(sys.name, name, len(X), float(res[k]), X[k].tolist(), bool(scaled[k] <= tol), tol)


def check_model_assumptions(sys: SystemModel, spec: SamplingSpec) -> VerificationReport:
    """``R(x) > 0`` and full column rank of ``g(x)`` at the sampled states."""
    X = spec.draw(sys.n)
    extras = {}
    try:
        sys.control_weight(X)
    except ModelAssumptionError as exc:
        return VerificationReport(
            sys.name, "model_assumptions", len(X), None, exc.state.tolist(), False, None, {"error": str(exc)}
        )
    bad = rank_deficient_states(sys, X)
    smin = np.linalg.svd(sys.input_map(X), compute_uv=False)[..., -1]
    k = int(np.argmin(smin))
    if len(bad):
        extras["rank_deficient_states"] = len(bad)
    return VerificationReport(
        sys.name, "model_assumptions", len(X), float(smin[k]), X[k].tolist(), len(bad) == 0, 1e-10, extras
    )


def check_gperp_drift(sys: SystemModel, spec: SamplingSpec) -> VerificationReport:
    return cont.theorem3_drift_check(sys, spec)


def check_norm_decrease(sys: SystemModel, spec: SamplingSpec) -> VerificationReport:
    """``z(x) < 0`` at every sampled nonzero state.

    Also records how often the literal control-weight bound holds, which is
    reported but does not decide the verdict.
    """
    X = spec.draw(sys.n)
    X = X[np.any(X != 0, axis=1)]
    z = np.atleast_1d(cont.norm_rate(sys, X).z)
    k = int(np.argmax(z))
    extras = {}
    if sys.m == 1:
        literal = [cont.r_condition(sys, x).literal_holds for x in X[: min(len(X), 200)]]
        extras["literal_r_bound_holds"] = sum(1 for v in literal if v)
        extras["literal_r_bound_checked"] = sum(1 for v in literal if v is not None)
    return VerificationReport(sys.name, "norm_decrease", len(X), float(z[k]), X[k].tolist(), bool(z[k] < 0), 0.0, extras)


def rollout_vs_value(
    sys: SystemModel, x0, horizon: int | float, dt_step: float = 1e-3, rtol: float = ROLLOUT_RTOL
) -> VerificationReport:
    """Truncated discounted cost of the optimal closed loop versus ``V(x0)``.

    ``horizon`` is a step count (discrete) or a final time (continuous).
    The truncation tail is bounded geometrically from the measured decay of
    the last stage costs. If those costs are not decaying the verdict is
    inconclusive (``passed is None``).
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = float(value(x0, sys.P))
    if sys.regime == DISCRETE:
        traj = disc.simulate_discrete(sys, x0, int(horizon))
        s = traj.stage_cost
        N = len(s) - 1
        head = sys.gamma**N * s[-1]
        if s[-1] == 0:
            tail, rate = 0.0, 0.0
        elif N >= 1 and s[-2] > 0:
            rate = sys.gamma * s[-1] / s[-2]
            tail = head / (1.0 - rate) if rate < 1 else math.inf
        else:
            rate, tail = math.inf, math.inf
    else:
        steps = int(round(float(horizon) / dt_step))
        traj = cont.integrate_closed_loop(sys, x0, dt_step, steps)
        J = traj.stage_cost
        T = traj.t[-1]
        if J[-1] == 0:
            tail, rate = 0.0, math.inf
        elif len(J) >= 2 and J[-2] > 0 and J[-1] < J[-2]:
            rate = math.log(J[-2] / J[-1]) / dt_step
            tail = math.exp(-sys.gamma * T) * J[-1] / (rate + sys.gamma)
        else:
            rate, tail = 0.0, math.inf
    cost = traj.total_cost
    gap = abs(cost - v0)
    extras = {
        "discounted_cost": cost,
        "value": v0,
        "horizon": horizon,
        "tail_bound": tail,
        "decay": rate,
    }
    if v0 == 0.0:
        passed = gap == 0.0
        rel = gap
    elif not math.isfinite(tail):
        passed = None
        rel = gap / v0
        extras["note"] = "stage costs not decaying; truncated rollout is inconclusive"
    else:
        rel = gap / v0
        passed = bool(rel <= rtol + tail / v0)
    extras["relative_gap"] = rel
    return VerificationReport(sys.name, "rollout_vs_value", len(traj), gap, x0.tolist(), passed, rtol, extras)


def rl_reward(cost):
    """Reward ``exp(-cost)`` in ``(0, 1]`` for a non-negative cost."""
    c = np.asarray(cost, dtype=float)
    if np.any(c < 0) or np.any(np.isnan(c)):
        raise ValueError("reward mapping needs non-negative costs")
    r = np.exp(-c)
    return float(r) if r.ndim == 0 else r


def run_suite(
    sys: SystemModel,
    spec: SamplingSpec,
    horizon: int | float | None = None,
    dt_step: float = 1e-3,
) -> list[VerificationReport]:
    """Every applicable check for one system, in a fixed order."""
    reports = [check_model_assumptions(sys, spec)]
    if reports[0].failed:
        return reports
    if sys.m <= 2:
        reports.append(check_oracle_agreement(sys, spec))
    if sys.regime == DISCRETE:
        reports.append(check_first_order(sys, spec))
    reports.append(check_residual(sys, spec))
    reports.append(check_q_nonnegativity(sys, spec))
    reports.append(check_discount_condition(sys, spec))
    if sys.regime == CONTINUOUS and sys.m == 1 and sys.gamma == 0:
        reports.append(check_gperp_drift(sys, spec))
        reports.append(check_norm_decrease(sys, spec))
    if horizon is None:
        horizon = 200 if sys.regime == DISCRETE else 10.0
    x0 = spec.draw(sys.n, 1)[0]
    reports.append(rollout_vs_value(sys, x0, horizon, dt_step))
    return reports
