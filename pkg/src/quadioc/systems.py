"""Control-affine system models, the JSON config format and built-in systems.

A model is ``x+ = f(x) + g(x) u`` (discrete) or ``dx/dt = f(x) + g(x) u``
(continuous), with control weight ``R(x)``, value matrix ``P`` and discount
``gamma``. Every entry of ``f``, ``g`` and ``R`` is an expression string, see
:mod:`quadioc.expressions`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    ExpressionSyntaxError,
    ModelAssumptionError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    QuadIOCError,
)
from .expressions import Expression, parse_expression
from .geometry import SYMMETRY_RTOL, QuadraticValue, WeightMatrix, validate_weight

DISCRETE = "discrete"
CONTINUOUS = "continuous"
REGIMES = (DISCRETE, CONTINUOUS)

ORIGIN_ATOL = 1e-12
RANK_TOL = 1e-10

CONFIG_KEYS = ("name", "regime", "n", "m", "f", "g", "R", "P", "gamma")


def validate_discount(gamma, regime: str) -> float:
    """Check the discount factor against its regime and return it as float."""
    try:
        gamma = float(gamma)
    except (TypeError, ValueError):
        raise ConfigError(f"discount factor must be a number, got {gamma!r}") from None
    if not np.isfinite(gamma):
        raise ConfigError("discount factor must be finite")
    if regime == DISCRETE and not 0.0 < gamma <= 1.0:
        raise ConfigError(f"discrete regime requires 0 < gamma <= 1, got {gamma}")
    if regime == CONTINUOUS and gamma < 0.0:
        raise ConfigError(f"continuous regime requires gamma >= 0, got {gamma}")
    return gamma


def _stack(values, lead_shape):
    return np.stack([np.broadcast_to(v, lead_shape) for v in values], axis=-1)


@dataclass(frozen=True)
class SystemModel:
    """Validated control-affine plant plus the quadratic value data.

    Build with :func:`load_system` or :func:`builtin_system`; derive variants
    with :meth:`replace`. ``drift``, ``input_map`` and ``control_weight``
    accept a state ``(n,)`` or a stack ``(..., n)``.
    """

    name: str
    regime: str
    n: int
    m: int
    f: tuple[Expression, ...]
    g: tuple[tuple[Expression, ...], ...]
    R: tuple[tuple[Expression, ...], ...]
    P: WeightMatrix
    gamma: float

    @property
    def V(self) -> QuadraticValue:
        return QuadraticValue(self.P)

    @property
    def is_discrete(self) -> bool:
        return self.regime == DISCRETE

    def _state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise DimensionError(f"{self.name}: expected state of length {self.n}, got shape {x.shape}")
        return x

    def drift(self, x) -> np.ndarray:
        """``f(x)``, shape ``(..., n)``."""
        x = self._state(x)
        with np.errstate(all="ignore"):
            if x.ndim == 1:
                return np.array([e.fn(x) for e in self.f], dtype=float)
            return _stack([e.fn(x) for e in self.f], x.shape[:-1])

    def input_map(self, x) -> np.ndarray:
        """``g(x)``, shape ``(..., n, m)``."""
        return self._matrix(self.g, self._state(x))

    def _matrix(self, entries, x):
        with np.errstate(all="ignore"):
            if x.ndim == 1:
                return np.array([[e.fn(x) for e in row] for row in entries], dtype=float)
            rows = [_stack([e.fn(x) for e in row], x.shape[:-1]) for row in entries]
        return np.stack(rows, axis=-2)

    def control_weight(self, x, check: bool = True) -> np.ndarray:
        """``R(x)``, shape ``(..., m, m)``.

        With ``check`` the result must be symmetric positive definite at every
        state, otherwise :class:`ModelAssumptionError` names the first bad one.
        """
        x = self._state(x)
        R = self._matrix(self.R, x)
        if x.ndim == 1 and self.m == 1 and 0 < R[0, 0] < np.inf:
            return R
        if check:
            _require_spd(R, x, "R(x)")
        return R

    def replace(self, **changes) -> "SystemModel":
        """Return a re-validated copy with some config fields changed.

        ``R`` may be given as a number for single-input models, ``f`` as a
        list of strings, and so on, mirroring the config schema.
        """
        cfg = self.to_config()
        for key, val in changes.items():
            if key not in CONFIG_KEYS:
                raise ConfigError(f"unknown model field {key!r}")
            if key == "R" and np.ndim(val) == 0 and not isinstance(val, (list, tuple)):
                val = [[val]]
            cfg[key] = val
        return load_system(cfg)

    def to_config(self) -> dict:
        return {
            "name": self.name,
            "regime": self.regime,
            "n": self.n,
            "m": self.m,
            "f": [e.source for e in self.f],
            "g": [[e.source for e in row] for row in self.g],
            "R": [[e.source for e in row] for row in self.R],
            "P": self.P.tolist(),
            "gamma": self.gamma,
        }


def _require_spd(M: np.ndarray, x: np.ndarray, label: str) -> None:
    flat = M.reshape(-1, *M.shape[-2:])
    states = np.broadcast_to(x, M.shape[:-2] + x.shape[-1:]).reshape(-1, x.shape[-1])
    if not np.all(np.isfinite(flat)):
        k = int(np.argmax(~np.all(np.isfinite(flat), axis=(1, 2))))
        raise ModelAssumptionError(f"{label} is not finite", states[k])
    scale = np.max(np.abs(flat), axis=(1, 2))
    asym = np.max(np.abs(flat - np.swapaxes(flat, 1, 2)), axis=(1, 2))
    bad = asym > SYMMETRY_RTOL * scale
    if np.any(bad):
        raise ModelAssumptionError(f"{label} is not symmetric", states[int(np.argmax(bad))])
    if flat.shape[-1] == 1:
        bad = flat[:, 0, 0] <= 0
        if np.any(bad):
            raise ModelAssumptionError(f"{label} is not positive definite", states[int(np.argmax(bad))])
        return
    try:
        np.linalg.cholesky(flat)
    except np.linalg.LinAlgError:
        for k, block in enumerate(flat):
            try:
                np.linalg.cholesky(block)
            except np.linalg.LinAlgError:
                raise ModelAssumptionError(f"{label} is not positive definite", states[k]) from None


def rank_deficient_states(sys: SystemModel, X, tol: float = RANK_TOL) -> np.ndarray:
    """Rows of ``X`` (nonzero states) where ``g(x)`` loses full column rank.

    The smallest singular value of ``g(x)`` is compared against ``tol``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X = X[np.any(X != 0, axis=1)]
    if len(X) == 0:
        return X
    smin = np.linalg.svd(sys.input_map(X), compute_uv=False)[..., -1]
    return X[smin <= tol]


def _parse_all(entries, n, where):
    try:
        return tuple(parse_expression(str(e) if not isinstance(e, str) else e, n) for e in entries)
    except ExpressionSyntaxError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _shape_error(what, expected, got):
    return ConfigError(f"{what} must have {expected} entries, got {got}")


def load_system(config: Mapping) -> SystemModel:
    """Build a fully validated :class:`SystemModel` from a config mapping.

    Checks the schema and dimensions, parses every expression, validates
    ``P`` and the discount for the regime (:class:`ConfigError`), and
    evaluates ``f(0) = 0`` and ``R(0) > 0`` at the origin
    (:class:`ModelAssumptionError`).
    """
    if not isinstance(config, Mapping):
        raise ConfigError("system config must be a JSON object")
    missing = [k for k in CONFIG_KEYS if k not in config]
    if missing:
        raise ConfigError(f"system config is missing keys: {', '.join(missing)}")
    name = str(config["name"])
    regime = config["regime"]
    if regime not in REGIMES:
        raise ConfigError(f"regime must be 'discrete' or 'continuous', got {regime!r}")
    n, m = config["n"], config["m"]
    if not (isinstance(n, int) and isinstance(m, int)) or isinstance(n, bool) or n < 1 or m < 1:
        raise ConfigError(f"n and m must be positive integers, got n={n!r}, m={m!r}")

    f_src, g_src, R_src = config["f"], config["g"], config["R"]
    if not isinstance(f_src, list) or len(f_src) != n:
        raise _shape_error("f", n, len(f_src) if isinstance(f_src, list) else f_src)
    if not isinstance(g_src, list) or len(g_src) != n or any(
        not isinstance(row, list) or len(row) != m for row in g_src
    ):
        raise ConfigError(f"g must be an {n}x{m} nested list")
    if not isinstance(R_src, list) or len(R_src) != m or any(
        not isinstance(row, list) or len(row) != m for row in R_src
    ):
        raise ConfigError(f"R must be an {m}x{m} nested list")

    f = _parse_all(f_src, n, "f")
    g = tuple(_parse_all(row, n, f"g[{i}]") for i, row in enumerate(g_src))
    R = tuple(_parse_all(row, n, f"R[{i}]") for i, row in enumerate(R_src))

    try:
        P_arr = np.asarray(config["P"], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("P must be a numeric matrix") from None
    if P_arr.shape != (n, n):
        raise ConfigError(f"P must be {n}x{n}, got shape {P_arr.shape}")
    try:
        P = validate_weight(P_arr)
    except (NotSymmetricError, NotPositiveDefiniteError) as exc:
        raise ConfigError(f"invalid P: {exc}") from exc

    gamma = validate_discount(config["gamma"], regime)
    sys = SystemModel(name, regime, n, m, f, g, R, P, gamma)

    origin = np.zeros(n)
    try:
        f0 = sys.drift(origin)
        sys.control_weight(origin)
        sys.input_map(origin)
    except DomainError as exc:
        raise ConfigError(f"model is not defined at the origin: {exc}") from exc
    if np.max(np.abs(f0)) > ORIGIN_ATOL:
        raise ModelAssumptionError(f"f(0) must vanish, got {f0.tolist()}", origin)
    return sys


def load_system_file(path) -> SystemModel:
    """Read a JSON config file and load it."""
    try:
        config = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return load_system(config)


def save_system_file(sys: SystemModel, path) -> None:
    Path(path).write_text(json.dumps(sys.to_config(), indent=2) + "\n")


BUILTIN_CONFIGS: dict[str, dict] = {
    "example1-discrete": {
        "name": "example1-discrete",
        "regime": DISCRETE,
        "n": 2,
        "m": 1,
        "f": ["-x2*sin(x2)", "-x1*cos(x2)*sin(x1)"],
        "g": [["0"], ["1"]],
        "R": [["1"]],
        "P": [[1.0, 0.0], [0.0, 1.0]],
        "gamma": 1.0,
    },
    "example2-continuous": {
        "name": "example2-continuous",
        "regime": CONTINUOUS,
        "n": 2,
        "m": 1,
        "f": ["x2^3 - x1", "-x1*x2^2"],
        "g": [["0"], ["1"]],
        "R": [["1"]],
        "P": [[1.0, 0.0], [0.0, 1.0]],
        "gamma": 0.0,
    },
    "scalar-discrete-half": {
        "name": "scalar-discrete-half",
        "regime": DISCRETE,
        "n": 1,
        "m": 1,
        "f": ["0.5*x1"],
        "g": [["1"]],
        "R": [["1"]],
        "P": [[1.0]],
        "gamma": 1.0,
    },
    "scalar-continuous-neg": {
        "name": "scalar-continuous-neg",
        "regime": CONTINUOUS,
        "n": 1,
        "m": 1,
        "f": ["-x1"],
        "g": [["1"]],
        "R": [["1"]],
        "P": [[1.0]],
        "gamma": 0.0,
    },
}


class UnknownSystemError(QuadIOCError, KeyError):
    def __str__(self):
        return self.args[0]


def builtin_names() -> list[str]:
    return list(BUILTIN_CONFIGS)


def builtin_system(name: str, **changes) -> SystemModel:
    """Return a registered system, optionally with fields replaced.

    ``builtin_system("example1-discrete", R=1e-8)`` is the near-deadbeat
    variant of the first worked example.
    """
    try:
        config = BUILTIN_CONFIGS[name]
    except KeyError:
        raise UnknownSystemError(
            f"unknown system {name!r}; choose from {', '.join(BUILTIN_CONFIGS)}"
        ) from None
    sys = load_system(config)
    return sys.replace(**changes) if changes else sys
