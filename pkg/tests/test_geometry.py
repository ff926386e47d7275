import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quadioc.errors import DimensionError, NotPositiveDefiniteError, NotSymmetricError
from quadioc.geometry import QuadraticValue, p_inner, p_norm, validate_weight, value, value_gradient

P2 = np.array([[2.0, 0.0], [0.0, 1.0]])
I2 = np.eye(2)


@pytest.mark.parametrize(
    "a, b, P, expected",
    [
        ((1, 0), (0, 1), I2, 0.0),
        ((3, 0), (3, 0), I2, 9.0),
        ((1, 2), (2, 1), P2, 6.0),  # 2*2*1 + 1*1*2
    ],
)
def test_p_inner(a, b, P, expected):
    assert p_inner(a, b, P) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "a, P, expected",
    [((0, 0), P2, 0.0), ((3, 4), I2, 5.0), ((1, 1), P2, np.sqrt(3.0))],
)
def test_p_norm(a, P, expected):
    assert p_norm(a, P) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("x, P, expected", [((0, 0), I2, 0.0), ((2, 0), I2, 4.0), ((1, 2), P2, 6.0)])
def test_value(x, P, expected):
    assert value(x, P) == pytest.approx(expected)
    assert QuadraticValue(P)(x) == pytest.approx(expected)


@pytest.mark.parametrize(
    "x, P, expected", [((0, 0), I2, (0, 0)), ((1, 0), I2, (2, 0)), ((1, 2), P2, (4, 4))]
)
def test_value_gradient(x, P, expected):
    np.testing.assert_allclose(value_gradient(x, P), expected)


def test_dimension_mismatch_rejected():
    with pytest.raises(DimensionError):
        p_inner((1, 2, 3), (1, 2), I2)
    with pytest.raises(DimensionError):
        value_gradient((1.0,), I2)


def test_validate_weight():
    assert validate_weight(np.eye(3)).n == 3
    with pytest.raises(NotPositiveDefiniteError):
        validate_weight([[1, 2], [2, 1]])  # eigenvalues 3 and -1
    with pytest.raises(NotSymmetricError):
        validate_weight([[0, 1], [0, 0]])
    with pytest.raises(DimensionError):
        validate_weight(np.ones((2, 3)))


def test_validate_weight_symmetry_is_relative():
    P = np.array([[1e6, 1.0], [1.0 + 1e-7, 1e6]])
    assert validate_weight(P)  # 1e-7 <= 1e-12 * 1e6
    with pytest.raises(NotSymmetricError):
        validate_weight(np.array([[1.0, 0.1], [0.1 + 1e-9, 1.0]]))


def test_weight_matrix_is_read_only():
    W = validate_weight(np.eye(2))
    with pytest.raises(ValueError):
        W.matrix[0, 0] = 5.0


def test_broadcasting_over_stacks(rng):
    X = rng.normal(size=(7, 2))
    np.testing.assert_allclose(value(X, P2), [value(x, P2) for x in X])


# -- properties ---------------------------------------------------------------

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)


@st.composite
def spd3(draw):
    A = draw(arrays(np.float64, (3, 3), elements=st.floats(-3, 3)))
    return A @ A.T + 0.5 * np.eye(3)


@settings(max_examples=200, deadline=None)
@given(a=vec3, b=vec3, P=spd3())
def test_inner_symmetric_and_cauchy_schwarz(a, b, P):
    ab, ba = p_inner(a, b, P), p_inner(b, a, P)
    scale = 1.0 + p_norm(a, P) * p_norm(b, P)
    assert abs(ab - ba) <= 1e-12 * scale
    assert abs(ab) <= p_norm(a, P) * p_norm(b, P) * (1 + 1e-12) + 1e-9


@settings(max_examples=200, deadline=None)
@given(a=vec3, b=vec3, c=finite, P=spd3())
def test_norm_triangle_and_homogeneity(a, b, c, P):
    na, nb = p_norm(a, P), p_norm(b, P)
    assert p_norm(a + b, P) <= (na + nb) * (1 + 1e-12) + 1e-9
    assert p_norm(c * a, P) == pytest.approx(abs(c) * na, rel=1e-9, abs=1e-9)


def test_gradient_matches_central_differences(rng):
    A = rng.normal(size=(3, 3))
    P = A @ A.T + np.eye(3)
    h = 1e-5
    for x in rng.uniform(-5, 5, size=(100, 3)):
        fd = np.array([(value(x + h * e, P) - value(x - h * e, P)) / (2 * h) for e in np.eye(3)])
        g = value_gradient(x, P)
        assert np.max(np.abs(fd - g)) <= 1e-6 * np.max(np.abs(g))
