"""Closed-loop trajectory records and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def fmt17(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class Trajectory:
    """Time-indexed samples of a simulated closed loop.

    ``discounted_running_cost[k]`` is the discounted cost accumulated over
    ``[t_0, t_k)``, so the first entry is always zero. For discrete
    trajectories ``t`` holds the step index and ``dt`` is 1.
    """

    regime: str
    dt: float
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    stage_cost: np.ndarray
    value: np.ndarray
    discounted_running_cost: np.ndarray

    def __len__(self):
        return len(self.t)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def total_cost(self) -> float:
        return float(self.discounted_running_cost[-1])

    def header(self) -> list[str]:
        return (
            ["t"]
            + [f"x{i + 1}" for i in range(self.n)]
            + [f"u{j + 1}" for j in range(self.m)]
            + ["stage_cost", "value", "discounted_running_cost"]
        )

    def rows(self):
        cols = np.column_stack(
            [self.t, self.x, self.u, self.stage_cost, self.value, self.discounted_running_cost]
        )
        for row in cols:
            yield [fmt17(v) for v in row]

    def to_csv(self, dest=None) -> str | None:
        """Write CSV to a path or file object; return the text if ``dest`` is None."""
        buf = io.StringIO() if dest is None else None
        if isinstance(dest, (str, Path)):
            fh = open(dest, "w", newline="")
        else:
            fh = buf if dest is None else dest
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            writer.writerows(self.rows())
        finally:
            if isinstance(dest, (str, Path)):
                fh.close()
        return buf.getvalue() if buf is not None else None

    @classmethod
    def from_csv(cls, source, regime: str = "discrete", dt: float | None = None) -> "Trajectory":
        if isinstance(source, (str, Path)) and Path(source).exists():
            text = Path(source).read_text()
        else:
            text = source.read() if hasattr(source, "read") else str(source)
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        data = data.reshape(-1, len(header))
        n = sum(1 for h in header if h.startswith("x"))
        m = sum(1 for h in header if h.startswith("u"))
        t = data[:, 0]
        if dt is None:
            dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
        return cls(
            regime=regime,
            dt=dt,
            t=t,
            x=data[:, 1 : 1 + n],
            u=data[:, 1 + n : 1 + n + m],
            stage_cost=data[:, 1 + n + m],
            value=data[:, 2 + n + m],
            discounted_running_cost=data[:, 3 + n + m],
        )

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "dt": self.dt,
            "columns": self.header(),
            "rows": np.column_stack(
                [self.t, self.x, self.u, self.stage_cost, self.value, self.discounted_running_cost]
            ).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())
