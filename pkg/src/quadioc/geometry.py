"""P-weighted inner product geometry and the quadratic value function.

All functions broadcast over leading axes: a state may be an ``(n,)`` vector
or an ``(..., n)`` stack of vectors.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError, NotSymmetricError

SYMMETRY_RTOL = 1e-12


class WeightMatrix:
    """Validated symmetric positive-definite matrix ``P``.

    Build instances with :func:`validate_weight`. The underlying array is
    read-only, so instances are safe to share.
    """

    __slots__ = ("_matrix",)

    def __init__(self, matrix: np.ndarray):
        m = np.array(matrix, dtype=float)
        m.setflags(write=False)
        self._matrix = m

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def n(self) -> int:
        return self._matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._matrix if dtype is None else self._matrix.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, WeightMatrix) and np.array_equal(self._matrix, other._matrix)

    def __hash__(self):
        return hash(self._matrix.tobytes())

    def __repr__(self):
        return f"WeightMatrix({self._matrix.tolist()!r})"

    def tolist(self):
        return self._matrix.tolist()


def validate_weight(P) -> WeightMatrix:
    """Check that ``P`` is square, symmetric and positive definite.

    Symmetry is relative: ``max|P - P^T| <= 1e-12 * max|P|``. Definiteness is
    decided by a Cholesky factorization.
    """
    if isinstance(P, WeightMatrix):
        return P
    m = np.atleast_2d(np.asarray(P, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"weight matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NotPositiveDefiniteError("weight matrix has non-finite entries")
    scale = np.max(np.abs(m))
    if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
        raise NotSymmetricError("weight matrix is not symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("weight matrix is not positive definite") from None
    return WeightMatrix(m)


class QuadraticValue:
    """The value function ``V(x) = x^T P x`` for a validated ``P``."""

    __slots__ = ("P",)

    def __init__(self, P):
        self.P = validate_weight(P)

    def __call__(self, x):
        return value(x, self.P)

    def gradient(self, x) -> np.ndarray:
        return value_gradient(x, self.P)

    def __repr__(self):
        return f"QuadraticValue({self.P.tolist()!r})"


def _as_matrix(P) -> np.ndarray:
    if isinstance(P, QuadraticValue):
        P = P.P
    return P.matrix if isinstance(P, WeightMatrix) else np.asarray(P, dtype=float)


def _check(a: np.ndarray, M: np.ndarray) -> None:
    if a.shape[-1:] != M.shape[:1]:
        raise DimensionError(
            f"vector of length {a.shape[-1] if a.ndim else 0} does not match {M.shape[0]}x{M.shape[1]} weight"
        )


def p_inner(a, b, P):
    """Weighted inner product ``b^T P a``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    M = _as_matrix(P)
    _check(a, M)
    _check(b, M)
    out = np.einsum("...i,ij,...j->...", b, M, a)
    return float(out) if out.ndim == 0 else out


def p_norm(a, P):
    """Norm induced by :func:`p_inner`."""
    sq = p_inner(a, a, P)
    # roundoff can leave a tiny negative for a ~ 0
    return np.sqrt(np.maximum(sq, 0.0)) if isinstance(sq, np.ndarray) else float(np.sqrt(max(sq, 0.0)))


def value(x, P):
    """Quadratic value function ``x^T P x``.

    ``P`` may be a :class:`WeightMatrix`, a :class:`QuadraticValue` or a
    plain array.
    """
    return p_inner(x, x, P)


def value_gradient(x, P) -> np.ndarray:
    """Gradient ``2 P x`` of :func:`value`."""
    x = np.asarray(x, dtype=float)
    M = _as_matrix(P)
    _check(x, M)
    return 2.0 * np.einsum("ij,...j->...i", M, x)


def solve_spd(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``M y = b`` over stacked ``(..., m, m)`` systems.

    Single-input systems reduce to a division.
    """
    if M.shape[-1] == 1:
        return b / M[..., 0]
    return np.linalg.solve(M, b[..., None])[..., 0]
