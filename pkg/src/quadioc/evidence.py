"""Sampling specifications and the records that sampled checks produce."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

DEFAULT_BOX = (-10.0, 10.0)


@dataclass(frozen=True)
class SamplingSpec:
    """Uniform samples in a box, reproducible from ``seed``.

    ``box`` is a sequence of ``(lo, hi)`` pairs. A single pair applies to
    every coordinate. Draws come from the counter-based Philox generator.
    """

    box: tuple[tuple[float, float], ...] = (DEFAULT_BOX,)
    count: int = 1000
    seed: int = 0

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if not box:
            raise ValueError("sampling box is empty")
        for lo, hi in box:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise ValueError(f"sampling interval [{lo}, {hi}] is empty or unbounded")
        if int(self.count) < 1:
            raise ValueError("sample count must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "seed", int(self.seed))

    def bounds(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if len(self.box) == 1:
            lo, hi = self.box[0]
            return np.full(n, lo), np.full(n, hi)
        if len(self.box) != n:
            raise ValueError(f"sampling box has {len(self.box)} intervals but the state has {n}")
        arr = np.array(self.box)
        return arr[:, 0], arr[:, 1]

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed))

    def draw(self, n: int, count: int | None = None) -> np.ndarray:
        """``(count, n)`` states uniform in the box."""
        lo, hi = self.bounds(n)
        k = self.count if count is None else count
        return lo + (hi - lo) * self.rng().random((k, n))

    def radius(self, n: int) -> float:
        lo, hi = self.bounds(n)
        return float(np.min(np.maximum(np.abs(lo), np.abs(hi))))

    def with_count(self, count: int) -> "SamplingSpec":
        return SamplingSpec(self.box, count, self.seed)


@dataclass(frozen=True)
class LipschitzEstimate:
    """Sampled maximum of ``||f(x)||_P^2 / ||x||_P^2``.

    A sampled maximum can only under-estimate the true constant, so any
    discount bound derived from it is necessary-only evidence.
    """

    L_hat: float
    samples: int
    box: tuple[tuple[float, float], ...] = (DEFAULT_BOX,)
    witness: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "L_hat": self.L_hat,
            "samples": self.samples,
            "box": [list(b) for b in self.box],
            "witness": None if self.witness is None else list(self.witness),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, LipschitzEstimate):
        return obj.to_dict()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


@dataclass
class VerificationReport:
    """Outcome of one sampled check.

    ``passed`` is True or False, or None when the evidence is inconclusive
    (for instance a rollout that did not converge within its horizon).
    """

    system: str
    check: str
    samples: int
    worst_value: float | None
    worst_state: Sequence[float] | None
    passed: bool | None
    tolerance: float | None
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.passed is False

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "system": self.system,
                "check": self.check,
                "samples": self.samples,
                "worst_value": self.worst_value,
                "worst_state": None if self.worst_state is None else list(map(float, self.worst_state)),
                "pass": self.passed,
                "tolerance": self.tolerance,
                "extras": self.extras,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        return cls(
            system=d["system"],
            check=d["check"],
            samples=d["samples"],
            worst_value=d["worst_value"],
            worst_state=d["worst_state"],
            passed=d["pass"],
            tolerance=d["tolerance"],
            extras=d.get("extras", {}),
        )

    def summary(self) -> str:
        verdict = {True: "PASS", False: "FAIL", None: "INCONCLUSIVE"}[self.passed]
        worst = "-" if self.worst_value is None else format(self.worst_value, ".6g")
        return f"{verdict:12s} {self.check:28s} samples={self.samples:<6d} worst={worst}"
