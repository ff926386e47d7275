import math

import numpy as np
import pytest

from quadioc import continuous as cont
from quadioc.errors import DivergenceError, RegimeError
from quadioc.evidence import SamplingSpec
from quadioc.geometry import value
from quadioc.systems import builtin_system

EX2 = builtin_system("example2-continuous")
NEG = builtin_system("scalar-continuous-neg")
SPEC = SamplingSpec(((-5.0, 5.0),), 400, 3)


def test_example2_worked_values():
    x = (1.0, 2.0)
    np.testing.assert_allclose(cont.optimal_control_continuous(EX2, x), [-2.0])
    assert cont.optimal_control_inner_form(EX2, x) == pytest.approx(-2.0)
    assert cont.synthesize_q_continuous(EX2, x) == pytest.approx(6.0, abs=1e-14)
    assert cont.q_single_input_form_continuous(EX2, x) == pytest.approx(6.0, abs=1e-14)
    np.testing.assert_allclose(cont.closed_loop_field(EX2, x), [7.0, -6.0])
    assert cont.norm_rate(EX2, x).z == pytest.approx(-10.0)
    assert cont.norm_rate_single_input(EX2, x) == pytest.approx(-10.0)


def test_scalar_worked_values():
    assert cont.synthesize_q_continuous(NEG, (3.0,)) == pytest.approx(27.0)
    assert cont.hjb_residual(NEG, (3.0,)) == pytest.approx(0.0, abs=1e-13)
    assert cont.r_upper_bound(NEG, (3.0,)) == pytest.approx(-1.0)
    assert cont.r_upper_bound(EX2, (1.0, 1.0)) == pytest.approx(-1.0)


def test_hjb_residual_vanishes(rng):
    X = rng.uniform(-10, 10, size=(1000, 2))
    for sys in (EX2, builtin_system("example2-continuous", gamma=0.7, R=0.3)):
        res = cont.hjb_residual(sys, X)
        assert np.max(np.abs(res) / (1.0 + value(X, sys.P))) <= 1e-9


def test_forms_agree(rng):
    X = rng.uniform(-10, 10, size=(300, 2))
    sys = builtin_system("example2-continuous", R=2.5)
    np.testing.assert_allclose(
        cont.q_single_input_form_continuous(sys, X), cont.synthesize_q_continuous(sys, X), rtol=1e-12, atol=1e-9
    )
    np.testing.assert_allclose(
        cont.norm_rate_single_input(sys, X), cont.norm_rate(sys, X).z, rtol=1e-12, atol=1e-9
    )


def test_control_is_linear_in_state(rng):
    for _ in range(50):
        x, y = rng.uniform(-5, 5, size=(2, 2))
        a, b = rng.uniform(-3, 3, size=2)
        lhs = cont.optimal_control_continuous(EX2, a * x + b * y)
        rhs = a * cont.optimal_control_continuous(EX2, x) + b * cont.optimal_control_continuous(EX2, y)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_projection_identity(rng):
    # g = (0, 1), so R = ||g||_P^2 / 2 = 0.5
    sys = builtin_system("example2-continuous", R=0.5)
    X = rng.uniform(-5, 5, size=(100, 2))
    u = cont.optimal_control_continuous(sys, X)
    np.testing.assert_allclose(cont.gradient_projection_field(sys, X), u * sys.input_map(X)[..., 0], atol=1e-12)


def test_integrate_scalar_closed_form():
    traj = cont.integrate_closed_loop(NEG, (3.0,), 1e-3, 5000)
    assert traj.t[-1] == pytest.approx(5.0)
    assert traj.x[-1, 0] == pytest.approx(3.0 * math.exp(-10.0), rel=1e-6)
    assert traj.total_cost == pytest.approx(9.0, rel=1e-4)


def test_integrate_many_matches_single(rng):
    X0 = rng.uniform(-2, 2, size=(3, 2))
    many = cont.integrate_closed_loop_many(EX2, X0, 1e-2, 200)
    for x0, traj in zip(X0, many):
        one = cont.integrate_closed_loop(EX2, x0, 1e-2, 200)
        np.testing.assert_allclose(traj.x, one.x, rtol=1e-13, atol=1e-15)


def test_divergence_reported():
    sys = builtin_system("example2-continuous", f=["x1^3", "0"], R=1.0)
    with pytest.raises(DivergenceError):
        cont.integrate_closed_loop(sys, (5.0, 0.0), 0.1, 1000)


def test_gperp_membership():
    assert cont.gperp_membership(EX2, (3.0, 0.0))
    assert not cont.gperp_membership(EX2, (3.0, 0.1))
    np.testing.assert_array_equal(cont.gperp_membership(EX2, np.array([[1.0, 0.0], [0.0, 1.0]])), [True, False])


def test_sampled_gperp_points_lie_on_set():
    X = cont.sample_gperp(EX2, SPEC)
    assert len(X) > 0
    assert np.max(np.abs(X[:, 1]) / (1 + np.sum(X**2, axis=1))) <= 1e-10
    assert np.all(np.linalg.norm(X, axis=1) > 0)


def test_drift_check_passes_for_example2():
    report = cont.theorem3_drift_check(EX2, SPEC)
    assert report.passed is True
    assert report.worst_value <= 1e-10 * (1 + value(report.worst_state, EX2.P))


def test_drift_check_fails_for_unstable_drift():
    sys = builtin_system("example2-continuous", f=["x1", "x2"])
    report = cont.theorem3_drift_check(sys, SPEC)
    assert report.passed is False
    x = np.asarray(report.worst_state)
    assert cont.gperp_membership(sys, x, tol=1e-9 * (1 + x @ x))
    assert report.worst_value > 0


def test_drift_check_scalar_is_vacuous():
    # g = 1 never vanishes on <g, x> = x, so only the origin is in the set
    report = cont.theorem3_drift_check(NEG, SPEC)
    assert report.passed is True
    assert report.samples == 0


def test_drift_check_requires_zero_discount():
    with pytest.raises(RegimeError):
        cont.theorem3_drift_check(builtin_system("example2-continuous", gamma=1.0), SPEC)


def test_r_condition_readings():
    c = cont.r_condition(EX2, (1.0, 1.0))
    assert c.bound == pytest.approx(-1.0)
    assert c.literal_holds is False
    assert c.decreasing is True
    assert cont.r_condition(EX2, (1.0, 0.0)).bound is None


@pytest.mark.parametrize("L, expected", [(0.0, 0.0), (1.0, 2.0), (0.25, 0.5)])
def test_min_discount(L, expected):
    assert cont.min_discount_continuous(L) == expected


def test_regime_enforced():
    with pytest.raises(RegimeError):
        cont.optimal_control_continuous(builtin_system("example1-discrete"), (1.0, 1.0))
