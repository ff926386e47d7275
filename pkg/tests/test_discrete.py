import math

import numpy as np
import pytest

from quadioc import discrete as disc
from quadioc.errors import RegimeError
from quadioc.evidence import LipschitzEstimate
from quadioc.geometry import value
from quadioc.systems import builtin_system

HALF = builtin_system("scalar-discrete-half")
EX1 = builtin_system("example1-discrete")


def test_scalar_worked_values():
    assert disc.optimal_control_discrete(HALF, (2.0,)) == pytest.approx([-0.5], abs=1e-15)
    assert disc.synthesize_q_discrete(HALF, (2.0,)) == pytest.approx(3.5, abs=1e-15)
    assert disc.q_single_input_form(HALF, (2.0,)) == pytest.approx(3.5, abs=1e-15)
    assert disc.bellman_residual(HALF, (2.0,)) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(disc.step_closed_loop(HALF, (2.0,)), [0.5])
    np.testing.assert_allclose(disc.gain_m(HALF, (2.0,)), [[2.0]])


def test_example1_control():
    u = disc.optimal_control_discrete(EX1, (math.pi / 2, 0.0))
    assert u == pytest.approx([math.pi / 4], rel=1e-15)
    assert disc.optimal_control_inner_form(EX1, (math.pi / 2, 0.0)) == pytest.approx(math.pi / 4, rel=1e-15)


def test_control_at_origin_is_zero():
    for sys in (EX1, HALF):
        np.testing.assert_array_equal(disc.optimal_control_discrete(sys, np.zeros(sys.n)), 0.0)
        assert disc.synthesize_q_discrete(sys, np.zeros(sys.n)) == 0.0


def test_near_deadbeat_reaches_origin():
    sys = builtin_system("example1-discrete", R=1e-12)
    np.testing.assert_allclose(disc.step_closed_loop(sys, (math.pi / 2, 0.0)), [0.0, 0.0], atol=1e-10)


def test_forms_agree(rng):
    X = rng.uniform(-10, 10, size=(500, 2))
    for R in (0.1, 1.0, 10.0):
        sys = builtin_system("example1-discrete", R=R)
        np.testing.assert_allclose(
            disc.q_single_input_form(sys, X), disc.synthesize_q_discrete(sys, X), rtol=1e-10, atol=1e-10
        )
        np.testing.assert_allclose(
            disc.optimal_control_inner_form(sys, X),
            disc.optimal_control_discrete(sys, X)[:, 0],
            rtol=1e-12,
            atol=1e-12,
        )


def test_control_minimizes_one_step_objective(rng):
    """Independent dense-grid argmin of u^2 R + gamma V(f + g u)."""
    grid = np.linspace(-30, 30, 600_001)
    for x in rng.uniform(-5, 5, size=(10, 2)):
        f = EX1.drift(x)
        g = EX1.input_map(x)[:, 0]
        obj = grid**2 + value(f + np.outer(grid, g), EX1.P)
        u_grid = grid[np.argmin(obj)]
        assert disc.optimal_control_discrete(EX1, x)[0] == pytest.approx(u_grid, abs=2e-4)


def test_residuals_vanish(rng):
    X = rng.uniform(-10, 10, size=(1000, 2))
    for sys in (EX1, builtin_system("example1-discrete", R=0.1)):
        scale = 1.0 + value(X, sys.P)
        assert np.max(np.abs(disc.bellman_residual(sys, X)) / scale) <= 1e-9
        assert np.max(np.abs(disc.first_order_residual(sys, X)) / np.sqrt(scale)[:, None]) <= 1e-9


def test_deadbeat_gap_is_control_penalty(rng):
    X = rng.uniform(-5, 5, size=(200, 2))
    u = disc.optimal_control_discrete(EX1, X)[:, 0]
    np.testing.assert_allclose(
        disc.synthesize_q_discrete(EX1, X) - disc.deadbeat_q_approx(EX1, X), -(u**2), rtol=1e-9, atol=1e-9
    )


def test_deadbeat_approximation_small_R(rng):
    sys = builtin_system("scalar-discrete-half", R=1e-8)
    assert abs(disc.synthesize_q_discrete(sys, (2.0,)) - disc.deadbeat_q_approx(sys, (2.0,))) <= 1e-6
    ex = builtin_system("example1-discrete", R=1e-8)
    X = rng.uniform(-5, 5, size=(100, 2))
    assert np.max(np.abs(disc.synthesize_q_discrete(ex, X) - disc.deadbeat_q_approx(ex, X))) <= 1e-5


def test_telescoping_deadbeat_sum():
    sys = builtin_system("example1-discrete", R=1e-8)
    traj = disc.simulate_discrete(sys, (1.0, -2.0), 50)
    total = float(np.sum(disc.deadbeat_q_approx(sys, traj.x[:-1])))
    assert total == pytest.approx(traj.value[0] - traj.value[-1], rel=1e-12)


def test_simulate_scalar():
    traj = disc.simulate_discrete(HALF, (2.0,), 40)
    np.testing.assert_allclose(traj.x[:, 0], 2.0 * 0.25 ** np.arange(41), rtol=1e-14)
    assert traj.discounted_running_cost[0] == 0.0
    assert traj.total_cost == pytest.approx(4.0, rel=1e-12)
    assert traj.stage_cost[0] == pytest.approx(3.75)


def test_simulate_example1_converges():
    traj = disc.simulate_discrete(EX1, (3.0, -4.0), 200)
    assert np.linalg.norm(traj.x[-1]) <= 1e-3
    assert np.all(np.diff(traj.value) <= 0)


def test_simulate_zero_steps():
    traj = disc.simulate_discrete(HALF, (1.0,), 0)
    assert traj.x.shape == (1, 1)


@pytest.mark.parametrize("L, expected", [(1.0, 1.0), (4.0, 0.25), (0.0, 1.0), (0.25, 1.0)])
def test_max_discount(L, expected):
    assert disc.max_discount_discrete(L) == expected
    assert disc.max_discount_discrete(LipschitzEstimate(L, 1, ((-1.0, 1.0),), None)) == expected


def test_regime_enforced():
    with pytest.raises(RegimeError):
        disc.optimal_control_discrete(builtin_system("example2-continuous"), (1.0, 1.0))
