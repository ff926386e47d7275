import math

import numpy as np
import pytest

from quadioc import verification as ver
from quadioc.errors import OracleError
from quadioc.evidence import SamplingSpec, VerificationReport
from quadioc.systems import builtin_names, builtin_system

SPEC = SamplingSpec(((-5.0, 5.0),), 200, 11)


def test_golden_section():
    assert ver.golden_section(lambda s: (s - 1.234) ** 2, -10, 10) == pytest.approx(1.234, abs=1e-9)


@pytest.mark.parametrize(
    "name, x, expected",
    [("scalar-discrete-half", (2.0,), -0.5), ("scalar-continuous-neg", (3.0,), -3.0), ("example2-continuous", (1.0, 2.0), -2.0)],
)
def test_brute_force_worked_values(name, x, expected):
    assert ver.brute_force_control(builtin_system(name), x)[0] == pytest.approx(expected, abs=1e-6)


def test_brute_force_two_inputs():
    sys = builtin_system(
        "example2-continuous", m=2, g=[["1", "0"], ["0", "1"]], R=[["1", "0"], ["0", "2"]]
    )
    x = np.array([1.5, -0.5])
    np.testing.assert_allclose(ver.brute_force_control(sys, x), ver.analytic_control(sys, x), atol=1e-6)


def test_brute_force_rejects_wide_input():
    sys = builtin_system(
        "example2-continuous", m=3, g=[["1", "0", "0"], ["0", "1", "0"]], R=[["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]
    )
    with pytest.raises(OracleError):
        ver.brute_force_control(sys, (1.0, 1.0))


def test_lipschitz_estimates():
    spec = SamplingSpec(((-10.0, 10.0),), 100_000, 0)
    L1 = ver.estimate_lipschitz(builtin_system("example1-discrete"), spec)
    assert 0.99 <= L1.L_hat <= 1.0 + 1e-9
    assert ver.estimate_lipschitz(builtin_system("scalar-discrete-half"), spec).L_hat == pytest.approx(0.25)
    zero = builtin_system("example1-discrete", f=["0", "0"])
    assert ver.estimate_lipschitz(zero, spec).L_hat == 0.0


@pytest.mark.parametrize("name", builtin_names())
def test_q_nonnegative_on_builtins(name):
    assert ver.check_q_nonnegativity(builtin_system(name), SPEC).passed


def test_q_negative_for_expansive_drift():
    sys = builtin_system("scalar-discrete-half", f=["2*x1"])
    report = ver.check_q_nonnegativity(sys, SPEC)
    assert report.passed is False
    # Q = x^2 - 4 x^2 + 4 x^2 / 2 = -x^2
    assert report.worst_value == pytest.approx(-report.worst_state[0] ** 2)
    assert ver.check_discount_condition(sys, SPEC).passed is None


@pytest.mark.parametrize("name, x0, v0", [("scalar-discrete-half", (2.0,), 4.0), ("scalar-continuous-neg", (3.0,), 9.0)])
def test_rollout_matches_value(name, x0, v0):
    report = ver.rollout_vs_value(builtin_system(name), x0, 200 if "discrete" in name else 10.0)
    assert report.passed is True
    assert report.extras["value"] == v0
    assert report.extras["discounted_cost"] == pytest.approx(v0, rel=1e-4)


def test_rollout_gap_shrinks_with_horizon():
    sys = builtin_system("example1-discrete")
    gaps = [ver.rollout_vs_value(sys, (2.0, -1.0), N).worst_value for N in (1, 2, 4, 8, 16)]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_rollout_inconclusive_without_decay():
    sys = builtin_system("scalar-continuous-neg", f=["x1"], R=100.0)
    report = ver.rollout_vs_value(sys, (1.0,), 0.01, dt_step=1e-3)
    assert report.passed is None
    assert math.isinf(report.extras["tail_bound"])


def test_rl_reward():
    assert ver.rl_reward(0.0) == 1.0
    np.testing.assert_allclose(ver.rl_reward([0.0, 1.0]), [1.0, math.exp(-1)])
    with pytest.raises(ValueError):
        ver.rl_reward(-1.0)
    with pytest.raises(ValueError):
        ver.rl_reward(float("nan"))


def test_model_assumption_check_flags_rank_loss():
    sys = builtin_system("example2-continuous", g=[["0"], ["0"]])
    report = ver.check_model_assumptions(sys, SPEC)
    assert report.passed is False


@pytest.mark.parametrize("name", builtin_names())
def test_suite_passes_and_is_deterministic(name):
    sys = builtin_system(name)
    spec = SamplingSpec(((-3.0, 3.0),), 100, 5)
    a = [r.to_dict() for r in ver.run_suite(sys, spec)]
    b = [r.to_dict() for r in ver.run_suite(sys, spec)]
    assert a == b
    assert not any(r["pass"] is False for r in a)


def test_report_json_round_trip():
    report = ver.check_q_nonnegativity(builtin_system("example1-discrete"), SPEC)
    again = VerificationReport.from_dict(report.to_dict())
    assert again.to_dict() == report.to_dict()
    assert report.summary().startswith("PASS")
